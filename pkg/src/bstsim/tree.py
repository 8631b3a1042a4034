"""Complete binary search tree in level-order array form, plus the lookup oracle.

The tree stores 32-bit key / 32-bit value pairs. Nodes live in a flat
array in breadth-first order (root at index 0), so every level occupies a
contiguous slice: level ``l`` covers indices ``[2**l - 1, 2**(l+1) - 2]``.
Keys follow the odd-key rule: the node at in-order position ``p`` holds
key ``2*p + 1`` and value ``p``. Every odd key in range is therefore a
guaranteed hit and every even key a guaranteed miss, without storing a
separate miss list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AddressError, ConfigError

KEY_BITS = 32
KEY_MASK = (1 << KEY_BITS) - 1
MAX_HEIGHT = 25  # 2**26 - 1 nodes still fits comfortably in memory

LEFT = "left"
RIGHT = "right"


def level_of(index: int) -> int:
    """Tree level of a flat index (root = level 0)."""
    if index < 0:
        raise AddressError(f"negative node index {index}")
    return (index + 1).bit_length() - 1


def offset_of(index: int) -> int:
    """Position of a flat index within its level, 0-based from the left."""
    return index - ((1 << level_of(index)) - 1)


def parent_index(index: int) -> int:
    if index <= 0:
        raise AddressError("root has no parent")
    return (index - 1) // 2


@dataclass(frozen=True)
class KeyValue:
    key: int
    value: int

    def __post_init__(self):
        if not (0 <= self.key <= KEY_MASK and 0 <= self.value <= KEY_MASK):
            raise ConfigError(f"key/value must fit in {KEY_BITS} bits: {self}")


@dataclass(frozen=True)
class NodeAddr:
    """Flat node address with derived level/offset coordinates."""

    index: int

    def __post_init__(self):
        if self.index < 0:
            raise AddressError(f"negative node index {self.index}")

    @property
    def level(self) -> int:
        return level_of(self.index)

    @property
    def offset(self) -> int:
        return offset_of(self.index)


def child_addr(addr: NodeAddr | int, direction: str, height: int | None = None) -> NodeAddr:
    """Address of the left/right child.

    When ``height`` is given, descending from the leaf level raises
    AddressError; otherwise the caller is responsible for bounds.
    """
    index = addr.index if isinstance(addr, NodeAddr) else addr
    if direction not in (LEFT, RIGHT):
        raise AddressError(f"direction must be {LEFT!r} or {RIGHT!r}, got {direction!r}")
    if height is not None and level_of(index) >= height:
        raise AddressError(f"node {index} is at the leaf level of a height-{height} tree")
    return NodeAddr(2 * index + (1 if direction == LEFT else 2))


class CompleteTree:
    """Array-packed complete BST of KeyValue nodes.

    Immutable after construction; safe to share read-only across any
    number of concurrent engine runs.
    """

    def __init__(self, height: int, keys: np.ndarray, values: np.ndarray):
        self.height = height
        self.keys = keys
        self.values = values

    @property
    def node_count(self) -> int:
        return (1 << (self.height + 1)) - 1

    def node(self, index: int) -> KeyValue:
        if not 0 <= index < self.node_count:
            raise AddressError(f"node index {index} outside tree of {self.node_count} nodes")
        return KeyValue(int(self.keys[index]), int(self.values[index]))

    def level_slice(self, level: int) -> range:
        """Flat index range covered by one level."""
        if not 0 <= level <= self.height:
            raise AddressError(f"level {level} outside tree of height {self.height}")
        return range((1 << level) - 1, (1 << (level + 1)) - 1)

    def __repr__(self):
        return f"CompleteTree(height={self.height}, nodes={self.node_count})"


def build_complete_tree(height: int) -> CompleteTree:
    """Build the odd-key complete tree of the given height.

    The node at level ``l``, offset ``o`` has in-order position
    ``(2*o + 1) * 2**(height - l) - 1``, which gives its key directly
    without a traversal.
    """
    if not 0 <= height <= MAX_HEIGHT:
        raise ConfigError(f"height must be in [0, {MAX_HEIGHT}], got {height}")
    count = (1 << (height + 1)) - 1
    keys = np.empty(count, dtype=np.uint32)
    values = np.empty(count, dtype=np.uint32)
    for level in range(height + 1):
        width = 1 << level
        start = width - 1
        offsets = np.arange(width, dtype=np.uint64)
        inorder = ((2 * offsets + 1) << (height - level)) - 1
        keys[start : start + width] = (2 * inorder + 1).astype(np.uint32)
        values[start : start + width] = inorder.astype(np.uint32)
    return CompleteTree(height, keys, values)


@dataclass(frozen=True)
class LookupResult:
    found: bool
    value: int | None
    comparisons: int
    terminal_level: int


def reference_lookup(tree: CompleteTree, key: int) -> LookupResult:
    """Functional BST descent; the oracle every engine is verified against."""
    keys = tree.keys
    height = tree.height
    index = 0
    level = 0
    while True:
        node_key = int(keys[index])
        if key == node_key:
            return LookupResult(True, int(tree.values[index]), level + 1, level)
        if level == height:
            return LookupResult(False, None, level + 1, level)
        index = 2 * index + (1 if key < node_key else 2)
        level += 1
