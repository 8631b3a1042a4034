"""Cycle-accurate pipelined search engines.

Three engine families share one pipeline model:

* ``hrz``   -- one tree, one partition per level, 2 keys admitted per cycle.
* ``dup-n`` -- n full tree replicas, each with its own partition chain,
  2n keys admitted per cycle (probe i of a chunk goes to replica i // 2).
* ``hyb-T`` -- one tree split into a register layer (levels 0..x-1) and
  T = 2**x subtrees with private partition chains, 2T keys admitted per
  cycle, with a direct- or queue-mapped staging buffer per subtree.

Each cycle executes five phases in a fixed order:

1. probes inside partition chains compare at their current node and either
   complete or descend one level (served next cycle by the next partition);
2. each buffer drains up to two probes, which read their subtree's first
   partition level in this same cycle;
3. register probes advance one level (skipped while admission is stalled);
   probes leaving the last register level are routed to a subtree buffer;
4. routed probes (or the retried leftovers of an earlier rejection) are
   inserted into buffers under the configured mapping policy; a rejection
   stalls admission;
5. if not stalled, a new chunk of keys is admitted and performs its
   entry-level comparison immediately.

A probe admitted in cycle t therefore compares at level l in cycle t + l
for the non-buffered variants, and insert-to-drain latency through a
buffer is at least one cycle. Port budgets are enforced on every partition
read via ``memory.issue_read``.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .buffers import MappingPolicy, SubtreeBuffer, queue_label
from .errors import ConfigError, LivelockError, SimulationError, WorkloadMismatchError
from .memory import (
    BramPartition,
    PartitionLayout,
    RegisterLayer,
    issue_read,
    layout_horizontal,
    layout_hybrid,
)
from .tree import CompleteTree, KeyValue, offset_of

HRZ = "hrz"
DUP = "dup"
HYB = "hyb"

# probe locations
IN_REGISTERS = "registers"
AWAITING_INSERT = "awaiting-insert"
IN_BUFFER = "buffered"
IN_PARTITIONS = "partitions"
DONE = "done"

_NAME_RE = re.compile(r"^(hrz|dup(\d+)|hyb(\d+)(q?))$")

LIVELOCK_MULTIPLIER = 4


@dataclass(frozen=True)
class EngineConfig:
    """Resolved engine configuration.

    ``reg_levels`` defaults to log2(subtrees) for hybrid engines and 0
    otherwise; ``buffer_slots`` defaults to the chunk size (2 * subtrees).
    """

    variant: str
    tree_height: int
    replicas: int = 1
    subtrees: int = 1
    policy: MappingPolicy = MappingPolicy.DIRECT
    reg_levels: int | None = None
    buffer_slots: int | None = None

    def __post_init__(self):
        if self.variant not in (HRZ, DUP, HYB):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.tree_height < 0:
            raise ConfigError("tree_height must be >= 0")
        object.__setattr__(self, "policy", MappingPolicy(self.policy))
        if self.variant == DUP and self.replicas < 2:
            raise ConfigError(f"dup needs at least 2 replicas, got {self.replicas}")
        if self.variant != DUP and self.replicas != 1:
            raise ConfigError("only dup engines may have replicas > 1")
        if self.variant == HYB:
            t = self.subtrees
            if t < 2 or t & (t - 1):
                raise ConfigError(f"hyb subtree count must be a power of two >= 2, got {t}")
        elif self.subtrees != 1:
            raise ConfigError("only hyb engines have subtrees")
        x = self.reg_levels
        if x is None:
            x = self.subtrees.bit_length() - 1 if self.variant == HYB else 0
            object.__setattr__(self, "reg_levels", x)
        if self.variant == HYB and x != self.subtrees.bit_length() - 1:
            raise ConfigError(f"hyb with {self.subtrees} subtrees requires reg_levels "
                              f"{self.subtrees.bit_length() - 1}, got {x}")
        if not 0 <= x <= self.tree_height:
            raise ConfigError(f"reg_levels {x} outside [0, {self.tree_height}]")
        if self.variant == HYB and x < 1:
            raise ConfigError("hyb engines need at least one register level")
        s = self.buffer_slots
        if s is None:
            s = self.chunk_size if self.variant == HYB else 0
            object.__setattr__(self, "buffer_slots", s)
        if self.variant == HYB:
            if s < 1:
                raise ConfigError("buffer_slots must be >= 1")
            if self.policy is MappingPolicy.DIRECT and s < self.chunk_size:
                raise ConfigError(
                    f"direct mapping needs buffer_slots >= chunk size "
                    f"({self.chunk_size}), got {s}"
                )

    @property
    def chunk_size(self) -> int:
        return derive_chunk_size(self)

    @property
    def label(self) -> str:
        if self.variant == HRZ:
            return "hrz"
        if self.variant == DUP:
            return f"dup{self.replicas}"
        suffix = "q" if self.policy is MappingPolicy.QUEUE else ""
        return f"hyb{self.subtrees}{suffix}"

    @classmethod
    def from_name(cls, name: str, tree_height: int, **overrides) -> "EngineConfig":
        """Parse a configuration name like hrz, dup4, hyb8 or hyb8q."""
        m = _NAME_RE.match(name.strip().lower())
        if not m:
            raise ConfigError(f"unknown variant name {name!r}")
        if m.group(2):
            return cls(DUP, tree_height, replicas=int(m.group(2)), **overrides)
        if m.group(3):
            policy = MappingPolicy.QUEUE if m.group(4) else MappingPolicy.DIRECT
            return cls(HYB, tree_height, subtrees=int(m.group(3)), policy=policy, **overrides)
        return cls(HRZ, tree_height, **overrides)


def derive_chunk_size(config: EngineConfig) -> int:
    """Keys fetched per cycle: the maximum searchable in parallel."""
    if config.variant == HRZ:
        return 2
    if config.variant == DUP:
        return 2 * config.replicas
    return 2 * config.subtrees


class SearchProbe:
    """One in-flight key traversing the pipeline."""

    __slots__ = (
        "key", "chunk_id", "chunk_index", "group", "node", "level", "where",
        "subtree", "found", "value", "terminal_level", "completion_cycle", "trail",
    )

    def __init__(self, key: int, chunk_id: int, chunk_index: int, group: int):
        self.key = key
        self.chunk_id = chunk_id
        self.chunk_index = chunk_index
        self.group = group          # replica (hrz/dup) or routed subtree (hyb)
        self.node = 0               # flat index of the next comparison
        self.level = 0
        self.where = IN_REGISTERS
        self.subtree = -1
        self.found = False
        self.value = None
        self.terminal_level = -1
        self.completion_cycle = -1
        self.trail = None           # [(cycle, progress)] when event recording is on

    def __repr__(self):
        return (f"SearchProbe(key={self.key}, chunk={self.chunk_id}.{self.chunk_index}, "
                f"where={self.where}, level={self.level})")


class KeyOutcome(NamedTuple):
    found: bool
    value: int | None
    terminal_level: int
    completion_cycle: int


@dataclass
class CycleStats:
    """Per-cycle event record; dict fields populated only when recording."""

    cycle: int
    admitted: int
    completed: int
    stalled: bool
    in_flight: int
    port_grants: dict | None = None
    buffer_occupancy: dict | None = None
    buffer_flows: dict | None = None  # subtree -> (inserted so far, drained so far)


@dataclass
class RunResult:
    """Aggregate outcome of one engine run over one key stream."""

    variant: str
    tree_height: int
    total_cycles: int
    keys_processed: int
    throughput: float
    stall_cycles: int
    results: list
    memory_nodes: int
    bram_blocks: int
    max_buffer_occupancy: int
    max_in_flight: int
    chunk_size: int
    key_fingerprint: int
    cycle_log: list | None = field(default=None, repr=False)


def route_subtree(probe: SearchProbe, last_register_node: KeyValue) -> int:
    """Subtree chosen when a probe leaves the last register level.

    With register nodes at that level indexed by offset o, the left child
    roots subtree 2o and the right child subtree 2o + 1. Equality must be
    resolved as a hit before routing.
    """
    if probe.key == last_register_node.key:
        raise SimulationError("register hit must complete before routing")
    o = offset_of(probe.node)
    return 2 * o + (1 if probe.key > last_register_node.key else 0)


class Engine:
    """Pipeline state for one configuration bound to one tree.

    An engine run is a single logical timeline; distinct engines may run
    concurrently, sharing only the immutable tree.
    """

    def __init__(self, config: EngineConfig, tree: CompleteTree, record_events: bool = False):
        if config.tree_height != tree.height:
            raise ConfigError(
                f"config is for height {config.tree_height}, tree has height {tree.height}"
            )
        self.config = config
        self.tree = tree
        self.height = tree.height
        self.reg_levels = config.reg_levels
        self.chunk_size = config.chunk_size
        self.record_events = record_events

        # flat python lists are markedly faster than numpy scalar access here
        self._keys = tree.keys.tolist()
        self._values = tree.values.tolist()

        self.layouts = self._build_layouts()
        # partition lookup [group][level]: group = subtree (hyb) or replica
        # (hrz/dup); entries below the register boundary stay None
        self._parts: list[list[BramPartition | None]] = []
        if config.variant == HYB:
            for _ in range(config.subtrees):
                self._parts.append([None] * (self.height + 1))
            for p in self.layouts[0].partitions:
                self._parts[p.subtree][p.level] = p
        else:
            for layout in self.layouts:
                chain: list[BramPartition | None] = [None] * (self.height + 1)
                for p in layout.partitions:
                    chain[p.level] = p
                self._parts.append(chain)

        self.registers = self.layouts[0].registers if config.variant == HYB else None
        if config.variant != HYB and self.reg_levels > 0:
            reg_count = (1 << self.reg_levels) - 1
            self.registers = RegisterLayer(self.reg_levels, tree.keys[:reg_count],
                                           tree.values[:reg_count])

        self.buffers: list[SubtreeBuffer] = []
        if config.variant == HYB:
            self.buffers = [
                SubtreeBuffer(s, config.buffer_slots, config.policy,
                              log=[] if record_events else None)
                for s in range(config.subtrees)
            ]

        if config.variant == DUP:
            self.memory_nodes = config.replicas * tree.node_count
        else:
            self.memory_nodes = tree.node_count
        self.bram_blocks = sum(layout.bram_blocks for layout in self.layouts)

        self._reset_run_state()

    def _build_layouts(self) -> list[PartitionLayout]:
        cfg = self.config
        if cfg.variant == HYB:
            return [layout_hybrid(self.tree, cfg.reg_levels, cfg.subtrees)]
        if cfg.reg_levels == 0:
            layouts = [layout_horizontal(self.tree) for _ in range(cfg.replicas)]
        else:
            # horizontal chains that start below the register boundary
            layouts = []
            for _ in range(cfg.replicas):
                partitions = [
                    BramPartition(id=f"l{level}", subtree=0, level=level,
                                  node_slice=self.tree.level_slice(level))
                    for level in range(cfg.reg_levels, self.height + 1)
                ]
                layouts.append(PartitionLayout("horizontal", cfg.reg_levels, 1, partitions))
        for r, layout in enumerate(layouts[1:], start=1):
            for p in layout.partitions:
                p.id = f"r{r}{p.id}"
        return layouts

    def _reset_run_state(self):
        self.cycle = 0
        self.admitted_total = 0
        self.completed = 0
        self.stall_cycles = 0
        self.max_in_flight = 0
        self._next_chunk = 0
        self._feed: list[int] = []
        self._feed_pos = 0
        self._results: list[KeyOutcome | None] = []
        self._reg_probes: list[SearchProbe] = []
        self._part_probes: list[SearchProbe] = []
        self._pending_inserts: list[SearchProbe] = []
        self._queue_latch = False
        self.cycle_log: list[CycleStats] | None = [] if self.record_events else None
        self.probes: list[SearchProbe] | None = [] if self.record_events else None
        for buf in self.buffers:
            buf.slots = [None] * buf.size
            buf.read_ptr = buf.write_ptr = 0
            buf.occupancy = buf.max_occupancy = 0
            buf.total_inserted = buf.total_drained = 0
            if buf.log is not None:
                buf.log.clear()

    # -- key feed -----------------------------------------------------------

    def load_keys(self, keys: Sequence[int]) -> None:
        """Install the key stream for a run and reset all pipeline state."""
        self._reset_run_state()
        self._feed = [int(k) for k in keys]
        self._results = [None] * len(self._feed)

    @property
    def keys_pending(self) -> int:
        return len(self._feed) - self._feed_pos

    @property
    def in_flight(self) -> int:
        return self.admitted_total - self.completed

    @property
    def stalled(self) -> bool:
        return bool(self._pending_inserts) or self._queue_latch

    # -- probe completion ---------------------------------------------------

    def _finish(self, probe: SearchProbe, found: bool, level: int) -> None:
        probe.where = DONE
        probe.found = found
        probe.value = self._values[probe.node] if found else None
        probe.terminal_level = level
        probe.completion_cycle = self.cycle
        slot = probe.chunk_id * self.chunk_size + probe.chunk_index
        if self._results[slot] is not None:
            raise SimulationError(f"result for key slot {slot} set twice")
        self._results[slot] = KeyOutcome(found, probe.value, level, self.cycle)
        self.completed += 1
        if probe.trail is not None:
            probe.trail.append((self.cycle, 2 * self.height + 2))

    def _read(self, group: int, level: int, node: int, grants: dict | None) -> None:
        partition = self._parts[group][level]
        if partition is None:
            raise SimulationError(f"no partition for group {group} level {level}")
        port = issue_read(partition, self.cycle, node)
        if port is None:
            raise SimulationError(
                f"port conflict at {partition.id} cycle {self.cycle}: structural bug"
            )
        if grants is not None:
            grants[partition.id] = grants.get(partition.id, 0) + 1

    # -- cycle phases ---------------------------------------------------------

    def _compare_at_partition(self, probe: SearchProbe, grants: dict | None) -> None:
        """One partition read: complete the probe or send it down a level."""
        self._read(probe.group, probe.level, probe.node, grants)
        node_key = self._keys[probe.node]
        if probe.key == node_key:
            self._finish(probe, True, probe.level)
        elif probe.level == self.height:
            self._finish(probe, False, probe.level)
        else:
            probe.node = 2 * probe.node + (1 if probe.key < node_key else 2)
            probe.level += 1
            probe.where = IN_PARTITIONS
            if probe.trail is not None:
                probe.trail.append((self.cycle, 2 * probe.level))
            self._part_probes.append(probe)

    def _insert_wave(self, wave: list[SearchProbe]) -> None:
        """Apply one cycle's buffer inserts; rejected probes become pending."""
        rejected: list[SearchProbe] = []
        if self.config.policy is MappingPolicy.QUEUE:
            labels = queue_label(wave)
            blocked_subtree = -1
            for probe, ordinal in labels:
                buf = self.buffers[probe.subtree]
                if probe.subtree == blocked_subtree or not buf.queue_insert(probe, ordinal):
                    # all higher ordinals for this buffer stay pending too
                    blocked_subtree = probe.subtree
                    rejected.append(probe)
                else:
                    probe.where = IN_BUFFER
            for buf in self.buffers:
                buf.end_insert_batch()
            if rejected:
                self._queue_latch = True
        else:
            for probe in wave:
                if self.buffers[probe.subtree].direct_insert(probe):
                    probe.where = IN_BUFFER
                else:
                    rejected.append(probe)
        rejected.sort(key=lambda p: (p.chunk_id, p.chunk_index))
        self._pending_inserts = rejected

    def _route_to_buffer(self, probe: SearchProbe, reg_key: int) -> None:
        probe.subtree = route_subtree(probe, KeyValue(reg_key, 0))
        probe.group = probe.subtree
        probe.node = 2 * probe.node + (1 if probe.key < reg_key else 2)
        probe.level += 1
        probe.where = AWAITING_INSERT
        if probe.trail is not None:
            probe.trail.append((self.cycle, 2 * probe.level - 1))

    def _admit(self, grants: dict | None) -> tuple[int, list[SearchProbe]]:
        """Phase 5: start a new chunk and run its entry-level comparisons."""
        count = min(self.chunk_size, self.keys_pending)
        chunk_id = self._next_chunk
        self._next_chunk += 1
        routed: list[SearchProbe] = []
        x = self.reg_levels
        hyb = self.config.variant == HYB
        for chunk_index in range(count):
            key = self._feed[self._feed_pos]
            self._feed_pos += 1
            group = 0 if hyb else chunk_index // 2
            probe = SearchProbe(key, chunk_id, chunk_index, group)
            if self.record_events:
                probe.trail = [(self.cycle, 0)]
                self.probes.append(probe)
            self.admitted_total += 1
            if x == 0:
                self._compare_at_partition(probe, grants)
                continue
            # entry comparison happens in the register layer
            root_key = self._keys[0]
            if key == root_key:
                self._finish(probe, True, 0)
            elif x == 1:
                if hyb:
                    self._route_to_buffer(probe, root_key)
                    routed.append(probe)
                else:
                    probe.node = 2 * probe.node + (1 if key < root_key else 2)
                    probe.level = 1
                    probe.where = IN_PARTITIONS
                    self._part_probes.append(probe)
            else:
                probe.node = 1 if key < root_key else 2
                probe.level = 1
                probe.where = IN_REGISTERS
                if probe.trail is not None:
                    probe.trail.append((self.cycle, 2))
                self._reg_probes.append(probe)
        return count, routed

    def admit(self, grants: dict | None = None) -> int:
        """Admit one chunk if admission is not stalled; returns probes started.

        Driven by step() once per cycle after the insert phase; exposed for
        direct inspection in tests. A stalled cycle with keys still waiting
        admits nothing and counts one stall cycle.
        """
        admitted = 0
        if self.keys_pending:
            if self.stalled:
                self.stall_cycles += 1
            else:
                admitted, routed = self._admit(grants)
                if routed:
                    self._insert_wave(routed)
        return admitted

    def step(self) -> CycleStats:
        """Execute one clock cycle; see the module docstring for phase order."""
        self.cycle += 1
        grants: dict | None = {} if self.record_events else None
        completed_before = self.completed
        x = self.reg_levels
        hyb = self.config.variant == HYB

        # phase 1: partition-layer probes compare and descend
        if self._part_probes:
            probes, self._part_probes = self._part_probes, []
            for probe in probes:
                self._compare_at_partition(probe, grants)

        # phase 2: buffers drain into the first partition level of their subtree
        for buf in self.buffers:
            for _port, probe in buf.drain():
                self._compare_at_partition(probe, grants)
        # a queued stall releases the moment draining leaves every buffer at
        # least one empty slot, before this cycle's inserts take them back
        all_buffers_free = self._queue_latch and all(b.free > 0 for b in self.buffers)

        # phase 3: register-layer probes advance one level; the last register
        # level routes to buffers (hyb) or straight into partitions (hrz/dup)
        stalled_now = self.stalled
        routed: list[SearchProbe] = []
        if self._reg_probes and not stalled_now:
            probes, self._reg_probes = self._reg_probes, []
            for probe in probes:
                reg_key = self._keys[probe.node]
                if probe.key == reg_key:
                    self._finish(probe, True, probe.level)
                elif probe.level == x - 1:
                    if hyb:
                        self._route_to_buffer(probe, reg_key)
                        routed.append(probe)
                    else:
                        probe.node = 2 * probe.node + (1 if probe.key < reg_key else 2)
                        probe.level += 1
                        probe.where = IN_PARTITIONS
                        self._part_probes.append(probe)
                else:
                    probe.node = 2 * probe.node + (1 if probe.key < reg_key else 2)
                    probe.level += 1
                    if probe.trail is not None:
                        probe.trail.append((self.cycle, 2 * probe.level))
                    self._reg_probes.append(probe)

        # phase 4: buffer inserts; retried leftovers and fresh routings are
        # mutually exclusive because a pending rejection freezes phase 3
        if self._pending_inserts and routed:
            raise SimulationError("fresh routings while rejected probes are pending")
        wave = self._pending_inserts or routed
        if wave:
            self._pending_inserts = []
            self._insert_wave(wave)

        # phase 5: admission; queue-mapped engines additionally hold admission
        # until draining has left every buffer at least one empty slot again
        if self._queue_latch and not self._pending_inserts and all_buffers_free:
            self._queue_latch = False
        stalled = self.stalled
        admitted = self.admit(grants)

        if self.in_flight > self.max_in_flight:
            self.max_in_flight = self.in_flight
        stats = CycleStats(
            cycle=self.cycle,
            admitted=admitted,
            completed=self.completed - completed_before,
            stalled=stalled,
            in_flight=self.in_flight,
            port_grants=grants,
            buffer_occupancy={b.subtree: b.occupancy for b in self.buffers}
            if self.record_events else None,
            buffer_flows={b.subtree: (b.total_inserted, b.total_drained)
                          for b in self.buffers} if self.record_events else None,
        )
        if self.cycle_log is not None:
            self.cycle_log.append(stats)
        return stats

    def run(self, keys: Sequence[int]) -> RunResult:
        """Simulate until every key has a result and aggregate the outcome."""
        keys = list(keys)
        if not keys:
            raise ConfigError("key stream must be non-empty")
        self.load_keys(keys)
        budget = len(keys) * (self.height + 2) * LIVELOCK_MULTIPLIER
        while self.completed < len(keys):
            if self.cycle >= budget:
                raise LivelockError(
                    f"{self.config.label}: exceeded {budget} cycles with "
                    f"{len(keys) - self.completed} keys unresolved"
                )
            self.step()
        if self.admitted_total != self.completed or self.in_flight != 0:
            raise SimulationError("probe conservation violated at end of run")
        if self._part_probes or self._reg_probes or self._pending_inserts or any(
            b.occupancy for b in self.buffers
        ):
            raise SimulationError("pipeline not empty at end of run")
        throughput = len(keys) / self.cycle
        if throughput > self.chunk_size:
            raise SimulationError("throughput exceeded the chunk size bound")
        fingerprint = zlib.crc32(np.asarray(keys, dtype="<u4").tobytes())
        return RunResult(
            variant=self.config.label,
            tree_height=self.height,
            total_cycles=self.cycle,
            keys_processed=len(keys),
            throughput=throughput,
            stall_cycles=self.stall_cycles,
            results=list(self._results),
            memory_nodes=self.memory_nodes,
            bram_blocks=self.bram_blocks,
            max_buffer_occupancy=max((b.max_occupancy for b in self.buffers), default=0),
            max_in_flight=self.max_in_flight,
            chunk_size=self.chunk_size,
            key_fingerprint=fingerprint,
            cycle_log=self.cycle_log,
        )


def build_engine(config: EngineConfig, tree: CompleteTree, record_events: bool = False) -> Engine:
    """Instantiate layouts, buffers and empty pipeline state for a config."""
    return Engine(config, tree, record_events=record_events)


def speedup(result: RunResult, baseline: RunResult) -> float:
    """Relative acceleration: baseline cycles over result cycles."""
    if (result.tree_height != baseline.tree_height
            or result.keys_processed != baseline.keys_processed
            or result.key_fingerprint != baseline.key_fingerprint):
        raise WorkloadMismatchError("speedup requires the same tree and key set")
    return baseline.total_cycles / result.total_cycles
