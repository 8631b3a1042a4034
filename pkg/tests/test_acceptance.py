"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The expensive height-15 / 64K-key runs are computed once per session
and shared across criteria.
"""

import time

import pytest

from bstsim.buffers import MappingPolicy
from bstsim.engine import EngineConfig, build_engine, speedup
from bstsim.harness import RunSpec, SetSpec, execute_matrix, render_report, report_body
from bstsim.tree import build_complete_tree, reference_lookup
from bstsim.workload import gen_equal, gen_random, gen_split

HEIGHT = 15
SIZE = 64 * 1024
SEED = 1
KINDS = ("equal", "random", "split")
PAPER_VARIANTS = ("hrz", "dup4", "dup8", "hyb4", "hyb4q", "hyb8", "hyb8q")


def _report(criterion: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {criterion:2d} {status}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def tree15():
    return build_complete_tree(HEIGHT)


@pytest.fixture(scope="module")
def keysets(tree15):
    return {
        "equal": gen_equal(tree15, SIZE),
        "random": gen_random(tree15, SIZE, SEED),
        "split": gen_split(tree15, SIZE, num_subtrees=8, reg_levels=3),
    }


class RunCache:
    def __init__(self, tree, keysets):
        self.tree = tree
        self.keysets = keysets
        self._runs = {}

    def get(self, variant: str, kind: str):
        cell = (variant, kind)
        if cell not in self._runs:
            engine = build_engine(EngineConfig.from_name(variant, HEIGHT), self.tree)
            self._runs[cell] = engine.run(self.keysets[kind].keys)
        return self._runs[cell]


@pytest.fixture(scope="module")
def runs(tree15, keysets):
    return RunCache(tree15, keysets)


def test_criterion_01_hrz_throughput(runs):
    start = time.perf_counter()
    result = runs.get("hrz", "random")
    elapsed = time.perf_counter() - start
    ok = 1.9 <= result.throughput <= 2.0 and elapsed < 5.0
    _report(1, ok, f"hrz random throughput {result.throughput:.4f} keys/cycle "
                   f"in {elapsed:.2f}s (target [1.9, 2.0], < 5 s)")


def test_criterion_02_duplication_scaling(runs):
    details = []
    ok = True
    for variant, target in (("dup4", 4.0), ("dup8", 8.0)):
        cycles = {kind: runs.get(variant, kind).total_cycles for kind in KINDS}
        ok &= len(set(cycles.values())) == 1  # bit-identical across kinds
        for kind in KINDS:
            ratio = speedup(runs.get(variant, kind), runs.get("hrz", kind))
            ok &= abs(ratio - target) <= 0.02 * target
        details.append(f"{variant} speedups "
                       + ",".join(f"{speedup(runs.get(variant, k), runs.get('hrz', k)):.3f}"
                                  for k in KINDS)
                       + f" cycles {sorted(set(cycles.values()))}")
    _report(2, ok, "; ".join(details) + " (targets 4.00/8.00 +-2%, identical cycles)")


def test_criterion_03_dup8_absolute_throughput(runs):
    result = runs.get("dup8", "random")
    ok = abs(result.throughput - 16.0) <= 0.02 * 16.0
    _report(3, ok, f"dup8 throughput {result.throughput:.3f} keys/cycle (target 16 +-2%)")


def test_criterion_04_hybrid_convergence_on_equal(runs):
    ratios = {}
    for variant in ("hyb4", "hyb4q", "hyb8", "hyb8q"):
        ratios[variant] = speedup(runs.get(variant, "equal"), runs.get("hrz", "equal"))
    ok = all(0.9 <= r <= 1.1 for r in ratios.values())
    _report(4, ok, "equal-set speedups "
            + ", ".join(f"{v}={r:.3f}" for v, r in ratios.items())
            + " (target [0.9, 1.1])")


def test_criterion_05_hybrid_best_case_on_split(runs):
    ok = True
    details = []
    for variant, target in (("hyb4q", 4.0), ("hyb8q", 8.0)):
        result = runs.get(variant, "split")
        ratio = speedup(result, runs.get("hrz", "split"))
        ok &= result.stall_cycles == 0
        ok &= abs(ratio - target) <= 0.05 * target
        details.append(f"{variant}: stalls={result.stall_cycles} speedup={ratio:.3f}")
    _report(5, ok, "; ".join(details) + " (targets 0 stalls, 4/8 +-5%)")


def test_criterion_06_queue_dominance(runs):
    ok = True
    details = []
    for subtrees in (4, 8):
        for kind in KINDS:
            direct = runs.get(f"hyb{subtrees}", kind)
            queued = runs.get(f"hyb{subtrees}q", kind)
            ok &= queued.stall_cycles <= direct.stall_cycles
        direct = runs.get(f"hyb{subtrees}", "random")
        queued = runs.get(f"hyb{subtrees}q", "random")
        ok &= queued.total_cycles < direct.total_cycles
        gap = (direct.total_cycles - queued.total_cycles) / direct.total_cycles
        details.append(f"T={subtrees} random queue gain {100 * gap:.1f}%")
    _report(6, ok, "queue stalls <= direct on all cells; strictly faster on random; "
            + "; ".join(details) + " (paper gap 32-39%, reported not asserted)")


def test_criterion_07_memory_accounting():
    tree = build_complete_tree(19)
    engine = build_engine(EngineConfig.from_name("dup8", 19), tree)
    expected = 8 * (2**20 - 1)
    ok = engine.memory_nodes == expected
    _report(7, ok, f"dup8 on height-19 tree stores {engine.memory_nodes} nodes "
                   f"(= 8 x (2^20 - 1) = {expected}, 2^23 = {2**23})")


def test_criterion_08_oracle_equivalence_suite():
    start = time.perf_counter()
    checked = 0
    runs_done = 0
    for height in range(2, 11):
        tree = build_complete_tree(height)
        oracle_cache = {}
        for variant in PAPER_VARIANTS:
            try:
                config = EngineConfig.from_name(variant, height)
            except Exception:
                continue  # hyb8 needs height >= 3
            split_t = config.subtrees if config.variant == "hyb" else 2
            for size in (1, 7, 64, 1000):
                sets = {
                    "equal": gen_equal(tree, size),
                    "random": gen_random(tree, size, seed=height * 1000 + size),
                    "split": gen_split(tree, size, split_t, split_t.bit_length() - 1),
                }
                for kind, keyset in sets.items():
                    result = build_engine(config, tree).run(keyset.keys)
                    runs_done += 1
                    for key, outcome in zip(keyset.keys, result.results):
                        key = int(key)
                        if key not in oracle_cache:
                            oracle_cache[key] = reference_lookup(tree, key)
                        oracle = oracle_cache[key]
                        assert (outcome.found, outcome.value, outcome.terminal_level) == (
                            oracle.found, oracle.value, oracle.terminal_level), (
                            f"{variant} h={height} {kind} size={size} key={key}")
                        checked += 1
    elapsed = time.perf_counter() - start
    ok = elapsed < 60.0
    _report(8, ok, f"{checked} outcomes across {runs_done} runs match the oracle "
                   f"in {elapsed:.1f}s (< 60 s)")


def test_criterion_09_structural_invariants():
    # the full audit lives in test_properties.py; this compact version runs
    # the same checks over the stated grid: heights 2-6, 500 probes per run
    import random as _random

    violations = []
    audited = 0
    for height in range(2, 7):
        tree = build_complete_tree(height)
        rng = _random.Random(height)
        keys = [rng.randrange(0, 2 * tree.node_count) for _ in range(500)]
        for variant in PAPER_VARIANTS:
            try:
                config = EngineConfig.from_name(variant, height)
            except Exception:
                continue
            engine = build_engine(config, tree, record_events=True)
            result = engine.run(keys)
            audited += 1
            for stats in result.cycle_log:
                if stats.port_grants and max(stats.port_grants.values()) > 2:
                    violations.append(f"{variant} h={height}: port budget")
                for subtree, (ins, drn) in (stats.buffer_flows or {}).items():
                    if ins - drn != stats.buffer_occupancy[subtree]:
                        violations.append(f"{variant} h={height}: conservation")
            for buf in engine.buffers:
                inserted = [(id(p)) for kind, p, _ in buf.log if kind == "ins"]
                drained = [(id(p)) for kind, p, _ in buf.log if kind == "drn"]
                if engine.config.policy is MappingPolicy.QUEUE and drained != inserted:
                    violations.append(f"{variant} h={height}: fifo")
                if engine.config.policy is MappingPolicy.DIRECT:
                    for kind, probe, slot in buf.log:
                        if kind == "ins" and slot != probe.chunk_index:
                            violations.append(f"{variant} h={height}: direct slot")
            for probe in engine.probes:
                marks = [m for _, m in probe.trail]
                if not all(b > a for a, b in zip(marks, marks[1:])):
                    violations.append(f"{variant} h={height}: monotone progress")
            if result.throughput > result.chunk_size:
                violations.append(f"{variant} h={height}: throughput bound")
    ok = not violations
    _report(9, ok, f"{audited} recorded runs audited, violations: {violations or 'none'}")


def test_criterion_10_deterministic_reports():
    spec = lambda: RunSpec(  # noqa: E731
        tree_height=HEIGHT,
        variants=[EngineConfig.from_name(v, HEIGHT) for v in PAPER_VARIANTS],
        sets=[SetSpec("equal", 16384), SetSpec("random", 16384, seed=SEED),
              SetSpec("split", 16384)],
    )
    body_a = report_body(render_report(execute_matrix(spec()), "csv"))
    body_b = report_body(render_report(execute_matrix(spec()), "csv"))
    ok = body_a == body_b and len(body_a.splitlines()) == 1 + len(PAPER_VARIANTS) * 3
    _report(10, ok, f"two full-matrix runs produced byte-identical CSV bodies "
                    f"({len(body_a)} bytes, {len(PAPER_VARIANTS) * 3} rows)")
