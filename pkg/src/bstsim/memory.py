"""On-chip memory model: dual-port banked partitions and the register layer.

A partition is a bank holding the nodes of one tree level (of one subtree).
Each partition grants at most two reads per cycle (ports A and B, in request
order); the budget resets every cycle. The register layer holds the top
levels of the tree and serves any number of reads per cycle.

Partition capacity in 36-kbit block units is tracked as a reported metric
only; it never constrains the simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import AddressError, ConfigError, SimulationError
from .tree import CompleteTree, KeyValue

PORT_NAMES = ("A", "B")
NODE_BYTES = 8  # 32-bit key + 32-bit value
BRAM_BLOCK_BITS = 36 * 1024


@dataclass
class BramPartition:
    """One memory bank: a contiguous slice of nodes with a 2-read/cycle budget."""

    id: str
    subtree: int
    level: int
    node_slice: range
    ports: int = 2
    # per-cycle grant state, reset lazily when the cycle number moves on
    _cycle: int = field(default=-1, repr=False)
    _grants: int = field(default=0, repr=False)

    @property
    def bram_blocks(self) -> int:
        return math.ceil(len(self.node_slice) * NODE_BYTES * 8 / BRAM_BLOCK_BITS)


def issue_read(partition: BramPartition, cycle: int, addr: int) -> str | None:
    """Request one read of ``addr`` in ``cycle``.

    Returns the granted port name ("A" or "B") or None when the dual-port
    budget for that cycle is already spent. An address outside the
    partition's slice is a simulator bug and is fatal.
    """
    if addr not in partition.node_slice:
        raise SimulationError(
            f"address {addr} outside partition {partition.id} slice {partition.node_slice}"
        )
    if partition._cycle != cycle:
        partition._cycle = cycle
        partition._grants = 0
    if partition._grants >= partition.ports:
        return None
    port = PORT_NAMES[partition._grants]
    partition._grants += 1
    return port


@dataclass
class RegisterLayer:
    """Top ``levels`` tree levels held in registers: no per-cycle read budget."""

    levels: int
    keys: object  # array view over the top 2**levels - 1 node keys
    values: object

    @property
    def node_count(self) -> int:
        return (1 << self.levels) - 1


def register_read(layer: RegisterLayer, addrs: list[int]) -> list[KeyValue]:
    """Serve any number of register reads in one cycle."""
    count = layer.node_count
    for addr in addrs:
        if not 0 <= addr < count:
            raise AddressError(f"address {addr} outside register layer of {count} nodes")
    return [KeyValue(int(layer.keys[a]), int(layer.values[a])) for a in addrs]


@dataclass
class PartitionLayout:
    """Mapping of (level, subtree) to partitions, plus the register layer."""

    variant: str  # "horizontal" | "hybrid"
    reg_levels: int
    num_subtrees: int
    partitions: list[BramPartition]
    registers: RegisterLayer | None = None

    def find(self, subtree: int, level: int) -> BramPartition:
        for p in self.partitions:
            if p.subtree == subtree and p.level == level:
                return p
        raise AddressError(f"no partition for subtree {subtree}, level {level}")

    @property
    def bram_blocks(self) -> int:
        return sum(p.bram_blocks for p in self.partitions)


def layout_horizontal(tree: CompleteTree) -> PartitionLayout:
    """One partition per tree level: height+1 partitions, level i in the i-th."""
    partitions = [
        BramPartition(id=f"l{level}", subtree=0, level=level, node_slice=tree.level_slice(level))
        for level in range(tree.height + 1)
    ]
    return PartitionLayout("horizontal", 0, 1, partitions)


def layout_hybrid(tree: CompleteTree, reg_levels: int, num_subtrees: int) -> PartitionLayout:
    """Registers for levels 0..reg_levels-1, then one private partition chain
    per subtree rooted at a level-``reg_levels`` node.

    ``num_subtrees`` must equal 2**reg_levels: the children of the last
    register level are exactly the subtree roots.
    """
    height = tree.height
    if not 1 <= reg_levels <= height:
        raise ConfigError(f"reg_levels must be in [1, {height}], got {reg_levels}")
    if num_subtrees != 1 << reg_levels:
        raise ConfigError(
            f"num_subtrees must equal 2**reg_levels ({1 << reg_levels}), got {num_subtrees}"
        )
    reg_count = (1 << reg_levels) - 1
    registers = RegisterLayer(reg_levels, tree.keys[:reg_count], tree.values[:reg_count])
    partitions = []
    for subtree in range(num_subtrees):
        for level in range(reg_levels, height + 1):
            width = 1 << (level - reg_levels)
            start = (1 << level) - 1 + subtree * width
            partitions.append(
                BramPartition(
                    id=f"s{subtree}l{level}",
                    subtree=subtree,
                    level=level,
                    node_slice=range(start, start + width),
                )
            )
    return PartitionLayout("hybrid", reg_levels, num_subtrees, partitions, registers)
