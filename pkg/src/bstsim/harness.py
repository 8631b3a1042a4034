"""Benchmark harness: run the configuration x key-set matrix and emit reports.

A report is one row per (variant, key set) cell, with cycle counts,
throughput, stall counts, speedup against the horizontal baseline on the
identical key set, and memory accounting. Reports serialize to CSV or
JSON-lines, in both cases preceded by a one-line JSON metadata prologue
(the only part allowed to differ between identical runs, via its
timestamp). Row order is deterministic: variant-major, set-minor.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
from dataclasses import asdict, dataclass, field

from . import __version__
from .engine import EngineConfig, RunResult, build_engine, speedup
from .errors import ConfigError
from .tree import build_complete_tree
from .workload import (
    EQUAL,
    PRNG_NAME,
    RANDOM,
    SPLIT,
    KeySet,
    gen_equal,
    gen_random,
    gen_split,
    parse_size,
)

CSV_FORMAT = "csv"
JSONL_FORMAT = "jsonl"

DEFAULT_SEED = 1
DEFAULT_SPLIT_SUBTREES = 8
PROLOGUE_PREFIX = "# "

REPORT_FIELDS = (
    "variant", "kind", "size", "total_cycles", "throughput", "stall_cycles",
    "speedup_vs_hrz", "memory_nodes", "bram_blocks", "max_buffer_occupancy",
    "seed", "prng_name",
)


@dataclass(frozen=True)
class SetSpec:
    """One key-set request: kind, size and generator parameters."""

    kind: str
    size: int
    seed: int = DEFAULT_SEED
    leaf_rank: int = 0
    subtrees: int = DEFAULT_SPLIT_SUBTREES
    misses: bool = False

    @property
    def label(self) -> str:
        if self.kind == RANDOM:
            return f"{self.kind}:{self.size}:seed={self.seed}"
        return f"{self.kind}:{self.size}"

    @classmethod
    def parse(cls, text: str) -> "SetSpec":
        """Parse e.g. equal:64k, random:64k:seed=1, split:64k:t=8."""
        parts = text.strip().split(":")
        if len(parts) < 2:
            raise ConfigError(f"set spec {text!r} must look like kind:size[:key=value...]")
        kind = parts[0].lower()
        if kind not in (EQUAL, RANDOM, SPLIT):
            raise ConfigError(f"unknown key-set kind {kind!r}")
        size = parse_size(parts[1])
        kwargs = {}
        for item in parts[2:]:
            if "=" not in item:
                raise ConfigError(f"bad set parameter {item!r} in {text!r}")
            key, value = item.split("=", 1)
            key = key.strip().lower()
            if key == "seed":
                kwargs["seed"] = int(value)
            elif key in ("leaf", "leaf_rank"):
                kwargs["leaf_rank"] = int(value)
            elif key in ("t", "subtrees"):
                kwargs["subtrees"] = int(value)
            elif key == "misses":
                kwargs["misses"] = value.lower() in ("1", "true", "yes")
            else:
                raise ConfigError(f"unknown set parameter {key!r} in {text!r}")
        return cls(kind, size, **kwargs)

    def generate(self, tree, seed_offset: int = 0) -> KeySet:
        if self.kind == EQUAL:
            return gen_equal(tree, self.size, leaf_rank=self.leaf_rank)
        if self.kind == RANDOM:
            return gen_random(tree, self.size, self.seed + seed_offset,
                              include_misses=self.misses)
        reg_levels = self.subtrees.bit_length() - 1
        return gen_split(tree, self.size, self.subtrees, reg_levels)


@dataclass
class RunSpec:
    """Validated description of one matrix run."""

    tree_height: int
    variants: list[EngineConfig]
    sets: list[SetSpec]
    repetitions: int = 1
    out_format: str = CSV_FORMAT

    def __post_init__(self):
        if not self.variants:
            raise ConfigError("at least one variant is required")
        if not self.sets:
            raise ConfigError("at least one key set is required")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.out_format not in (CSV_FORMAT, JSONL_FORMAT):
            raise ConfigError(f"unknown output format {self.out_format!r}")
        # the horizontal baseline is always present so speedups are computable
        if not any(cfg.variant == "hrz" for cfg in self.variants):
            self.variants.insert(0, EngineConfig.from_name("hrz", self.tree_height))


@dataclass
class ReportRow:
    variant: str
    kind: str
    size: int
    total_cycles: float
    throughput: float
    stall_cycles: float
    speedup_vs_hrz: float
    memory_nodes: int
    bram_blocks: int
    max_buffer_occupancy: int
    seed: int | None
    prng_name: str | None


@dataclass
class Report:
    metadata: dict
    rows: list[ReportRow] = field(default_factory=list)


def _mean(values):
    return values[0] if len(values) == 1 else sum(values) / len(values)


def execute_matrix(spec: RunSpec) -> Report:
    """Run every variant on every key set and aggregate one report.

    The tree is built once and each key set generated once; the horizontal
    baseline row of the same set provides the speedup denominator.
    Repetitions rerun random sets with consecutive seeds and average;
    equal/split sets are deterministic, so they always run once.
    """
    tree = build_complete_tree(spec.tree_height)
    set_runs: list[list[KeySet]] = []
    for sspec in spec.sets:
        reps = spec.repetitions if sspec.kind == RANDOM else 1
        set_runs.append([sspec.generate(tree, seed_offset=r) for r in range(reps)])

    results: dict[tuple[str, int], list[RunResult]] = {}
    for config in spec.variants:
        for si, keysets in enumerate(set_runs):
            cell = []
            for keyset in keysets:
                engine = build_engine(config, tree)
                cell.append(engine.run(keyset.keys))
            results[(config.label, si)] = cell

    hrz_label = next(c.label for c in spec.variants if c.variant == "hrz")
    rows = []
    for config in spec.variants:
        for si, sspec in enumerate(spec.sets):
            cell = results[(config.label, si)]
            base = results[(hrz_label, si)]
            speedups = [speedup(r, b) for r, b in zip(cell, base)]
            rows.append(ReportRow(
                variant=config.label,
                kind=sspec.kind,
                size=sspec.size,
                total_cycles=_mean([r.total_cycles for r in cell]),
                throughput=_mean([r.throughput for r in cell]),
                stall_cycles=_mean([r.stall_cycles for r in cell]),
                speedup_vs_hrz=_mean(speedups),
                memory_nodes=cell[0].memory_nodes,
                bram_blocks=cell[0].bram_blocks,
                max_buffer_occupancy=max(r.max_buffer_occupancy for r in cell),
                seed=sspec.seed if sspec.kind == RANDOM else None,
                prng_name=PRNG_NAME if sspec.kind == RANDOM else None,
            ))

    metadata = {
        "tool": "bstsim",
        "tool_version": __version__,
        "tree_height": spec.tree_height,
        "key_rule": "odd-key",
        "prng_name": PRNG_NAME,
        "repetitions": spec.repetitions,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    return Report(metadata, rows)


def _cell_to_text(value) -> str:
    if value is None:
        return ""
    return str(value)


def _text_to_cell(name: str, text: str):
    if text == "":
        return None
    if name in ("size", "memory_nodes", "bram_blocks", "max_buffer_occupancy", "seed"):
        return int(text)
    if name in ("throughput", "speedup_vs_hrz"):
        return float(text)
    if name in ("total_cycles", "stall_cycles"):
        # integers unless the row averaged several repetitions
        return float(text) if "." in text else int(text)
    return text


def render_report(report: Report, fmt: str = CSV_FORMAT) -> str:
    """Serialize a report; the first line is the JSON metadata prologue."""
    if fmt == CSV_FORMAT:
        out = io.StringIO()
        out.write(PROLOGUE_PREFIX + json.dumps(report.metadata, sort_keys=True) + "\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for row in report.rows:
            writer.writerow([_cell_to_text(getattr(row, f)) for f in REPORT_FIELDS])
        return out.getvalue()
    if fmt == JSONL_FORMAT:
        lines = [json.dumps({"meta": report.metadata}, sort_keys=True)]
        for row in report.rows:
            lines.append(json.dumps(asdict(row), sort_keys=True))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown output format {fmt!r}")


def emit_report(report: Report, fmt: str, destination) -> None:
    """Write a serialized report to ``destination`` (path)."""
    text = render_report(report, fmt)
    try:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOError(f"cannot write report to {destination}: {exc}") from exc


def parse_report(text: str) -> Report:
    """Inverse of render_report for both formats (detected from the text)."""
    lines = text.splitlines()
    if not lines:
        raise ConfigError("empty report")
    if lines[0].startswith(PROLOGUE_PREFIX):
        metadata = json.loads(lines[0][len(PROLOGUE_PREFIX):])
        reader = csv.reader(lines[1:])
        header = next(reader)
        if tuple(header) != REPORT_FIELDS:
            raise ConfigError(f"unexpected CSV header {header}")
        rows = [
            ReportRow(**{name: _text_to_cell(name, cell) for name, cell in zip(header, record)})
            for record in reader
        ]
        return Report(metadata, rows)
    first = json.loads(lines[0])
    if "meta" not in first:
        raise ConfigError("JSON-lines report must start with a metadata object")
    rows = [ReportRow(**json.loads(line)) for line in lines[1:] if line.strip()]
    return Report(first["meta"], rows)


def load_report(path) -> Report:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_report(fh.read())


def report_body(text: str) -> str:
    """The deterministic part of a serialized report (prologue stripped)."""
    lines = text.splitlines(keepends=True)
    return "".join(lines[1:])
