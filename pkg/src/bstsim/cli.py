"""Command-line front end.

Subcommands:

* ``gen-tree``  -- build a tree and print/write its descriptor JSON
* ``gen-keys``  -- generate a key set and write it as a BSTK binary file
* ``run``       -- execute a variant x key-set matrix and write a report
* ``report``    -- reload a report and re-emit it (format conversion)

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.
``BSTSIM_OUT_DIR`` overrides the directory that relative output paths are
written into.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .engine import EngineConfig
from .errors import ConfigError, SimulationError
from .harness import (
    CSV_FORMAT,
    JSONL_FORMAT,
    Report,
    RunSpec,
    SetSpec,
    emit_report,
    execute_matrix,
    load_report,
    render_report,
)
from .tree import build_complete_tree
from .workload import EQUAL, RANDOM, SPLIT, parse_size, save_keyset

OUT_DIR_ENV = "BSTSIM_OUT_DIR"

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _out_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bstsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bstsim {__version__}")
    sub = parser.add_subparsers(dest="command")

    p_tree = sub.add_parser("gen-tree", parents=[], help="build a tree, emit its descriptor")
    p_tree.add_argument("--height", type=int, required=True)
    p_tree.add_argument("--out", help="write the descriptor JSON here instead of stdout")

    p_keys = sub.add_parser("gen-keys", help="generate a key set file")
    p_keys.add_argument("--height", type=int, required=True)
    p_keys.add_argument("--kind", required=True, choices=[EQUAL, RANDOM, SPLIT])
    p_keys.add_argument("--size", required=True, help="key count (e.g. 1000, 64k, 256k)")
    p_keys.add_argument("--seed", type=int, default=1, help="PRNG seed (random sets)")
    p_keys.add_argument("--leaf-rank", type=int, default=0, help="leaf choice (equal sets)")
    p_keys.add_argument("--subtrees", type=int, default=8, help="target count (split sets)")
    p_keys.add_argument("--out", required=True, help="output .bin path")

    p_run = sub.add_parser("run", help="run a variant x key-set matrix")
    p_run.add_argument("--config", help="JSON file with defaults for the flags below")
    p_run.add_argument("--height", type=int)
    p_run.add_argument("--variants", help="comma list, e.g. hrz,dup4,dup8,hyb4,hyb4q,hyb8,hyb8q")
    p_run.add_argument("--sets", help="comma list, e.g. equal:64k,random:64k:seed=1,split:64k")
    p_run.add_argument("--reps", type=int, help="seeds averaged for random sets (default 1)")
    p_run.add_argument("--format", choices=[CSV_FORMAT, JSONL_FORMAT],
                       help="report format (default csv)")
    p_run.add_argument("--out", help="report path; stdout when omitted")

    p_rep = sub.add_parser("report", help="reload a report and re-emit it")
    p_rep.add_argument("--in", dest="infile", required=True)
    p_rep.add_argument("--format", choices=[CSV_FORMAT, JSONL_FORMAT], default=CSV_FORMAT)
    p_rep.add_argument("--out", help="destination; stdout when omitted")

    return parser


def parse_spec(args: argparse.Namespace) -> RunSpec:
    """Build a validated RunSpec from `run` arguments plus optional config file."""
    merged = {
        "height": args.height,
        "variants": args.variants,
        "sets": args.sets,
        "reps": args.reps,
        "format": args.format,
    }
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_conf = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        for key, value in file_conf.items():
            if key not in merged:
                raise ConfigError(f"unknown config file key {key!r}")
            if merged[key] is None:  # explicit CLI flags win over the file
                merged[key] = value
    if merged["height"] is None:
        raise ConfigError("--height is required")
    if not merged["variants"]:
        raise ConfigError("--variants is required")
    if not merged["sets"]:
        raise ConfigError("--sets is required")
    height = int(merged["height"])
    variants = [
        EngineConfig.from_name(name, height)
        for name in str(merged["variants"]).split(",") if name.strip()
    ]
    sets = [SetSpec.parse(text) for text in str(merged["sets"]).split(",") if text.strip()]
    return RunSpec(
        tree_height=height,
        variants=variants,
        sets=sets,
        repetitions=int(merged["reps"]) if merged["reps"] is not None else 1,
        out_format=merged["format"] if merged["format"] is not None else CSV_FORMAT,
    )


def _cmd_gen_tree(args) -> int:
    tree = build_complete_tree(args.height)
    descriptor = {
        "height": tree.height,
        "node_count": tree.node_count,
        "key_rule": "odd-key",
        "root_key": int(tree.keys[0]),
        "node_bytes": 8,
    }
    text = json.dumps(descriptor, indent=2, sort_keys=True)
    out = _out_path(args.out)
    if out is None:
        print(text)
    else:
        out.write_text(text + "\n", encoding="utf-8")
        print(f"wrote {out}")
    return 0


def _cmd_gen_keys(args) -> int:
    tree = build_complete_tree(args.height)
    size = parse_size(args.size)
    spec = SetSpec(args.kind, size, seed=args.seed, leaf_rank=args.leaf_rank,
                   subtrees=args.subtrees)
    keyset = spec.generate(tree)
    out = _out_path(args.out)
    save_keyset(keyset, out)
    meta = {
        "kind": keyset.kind, "size": keyset.size, "seed": keyset.seed,
        "prng_name": keyset.prng_name, "params": keyset.params, "path": str(out),
    }
    print(json.dumps(meta, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    spec = parse_spec(args)
    report = execute_matrix(spec)
    out = _out_path(args.out)
    if out is None:
        sys.stdout.write(render_report(report, spec.out_format))
    else:
        emit_report(report, spec.out_format, out)
        print(f"wrote {out} ({len(report.rows)} rows)")
    return 0


def _cmd_report(args) -> int:
    report: Report = load_report(args.infile)
    out = _out_path(args.out)
    if out is None:
        sys.stdout.write(render_report(report, args.format))
    else:
        emit_report(report, args.format, out)
        print(f"wrote {out} ({len(report.rows)} rows)")
    return 0


_COMMANDS = {
    "gen-tree": _cmd_gen_tree,
    "gen-keys": _cmd_gen_keys,
    "run": _cmd_run,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"bstsim: error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (SimulationError, OSError) as exc:
        print(f"bstsim: runtime error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
