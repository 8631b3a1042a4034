"""Key-set generators: equal, random and split streams with reproducible seeds.

All generators are pure functions of (tree, size, parameters): the same
inputs give byte-identical key arrays on any platform. Random draws use
numpy's PCG64 generator (reported as ``pcg64`` in run metadata) and pick
uniformly among the keys present in the tree, so every random key is a hit.

Key sets serialize to a flat binary file: a 16-byte header (magic "BSTK",
version, kind code, count, little-endian u32 each) followed by the keys as
little-endian u32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .tree import CompleteTree

EQUAL = "equal"
RANDOM = "random"
SPLIT = "split"

PRNG_NAME = "pcg64"

FILE_MAGIC = b"BSTK"
FILE_VERSION = 1
_HEADER = struct.Struct("<4sIII")
_KIND_CODES = {EQUAL: 0, RANDOM: 1, SPLIT: 2}
_KIND_NAMES = {code: kind for kind, code in _KIND_CODES.items()}

SIZE_PRESETS = {"64k": 64 * 1024, "256k": 256 * 1024}


@dataclass
class KeySet:
    kind: str
    size: int
    seed: int | None
    keys: np.ndarray
    prng_name: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.keys) != self.size:
            raise ConfigError(f"key array length {len(self.keys)} != size {self.size}")


def gen_equal(tree: CompleteTree, size: int, leaf_rank: int = 0) -> KeySet:
    """``size`` copies of one leaf key (the leaf_rank-th leaf from the left)."""
    leaves = 1 << tree.height
    if not 0 <= leaf_rank < leaves:
        raise ConfigError(f"leaf_rank {leaf_rank} outside [0, {leaves})")
    key = int(tree.keys[leaves - 1 + leaf_rank])
    keys = np.full(size, key, dtype=np.uint32)
    return KeySet(EQUAL, size, None, keys, params={"leaf_rank": leaf_rank})


def gen_random(tree: CompleteTree, size: int, seed: int,
               include_misses: bool = False) -> KeySet:
    """``size`` keys drawn uniformly from the tree's full key population.

    With ``include_misses`` each key is decremented to the even key below
    it with probability one half, turning it into a guaranteed miss.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    positions = rng.integers(0, tree.node_count, size=size, dtype=np.uint64)
    keys = (2 * positions + 1).astype(np.uint32)  # odd-key rule: key of position p
    params = {}
    if include_misses:
        miss = rng.integers(0, 2, size=size, dtype=np.uint64).astype(bool)
        keys[miss] -= 1
        params["include_misses"] = True
    return KeySet(RANDOM, size, seed, keys, prng_name=PRNG_NAME, params=params)


def gen_split(tree: CompleteTree, size: int, num_subtrees: int, reg_levels: int) -> KeySet:
    """Keys cycling round-robin over subtrees: key i targets subtree i mod T.

    Every key lies strictly below the register levels, so consecutive chunk
    positions map to distinct buffers. Within a subtree, keys cycle through
    that subtree's nodes deepest level first, so the tail of the stream
    still ends on leaf keys.
    """
    height = tree.height
    if num_subtrees != 1 << reg_levels:
        raise ConfigError(
            f"num_subtrees must equal 2**reg_levels ({1 << reg_levels}), got {num_subtrees}"
        )
    if not 0 <= reg_levels <= height:
        raise ConfigError(f"reg_levels {reg_levels} outside [0, {height}]")
    # per-subtree node enumeration, bottom level first, left to right
    per_subtree = []
    for subtree in range(num_subtrees):
        chunks = []
        for level in range(height, reg_levels - 1, -1):
            width = 1 << (level - reg_levels)
            start = (1 << level) - 1 + subtree * width
            chunks.append(np.asarray(tree.keys[start : start + width]))
        per_subtree.append(np.concatenate(chunks))
    nodes_per_subtree = len(per_subtree[0])
    i = np.arange(size, dtype=np.uint64)
    subtree_of = i % num_subtrees
    rank = (i // num_subtrees) % nodes_per_subtree
    keys = np.empty(size, dtype=np.uint32)
    for subtree in range(num_subtrees):
        mask = subtree_of == subtree
        keys[mask] = per_subtree[subtree][rank[mask]]
    return KeySet(
        SPLIT, size, None, keys,
        params={"num_subtrees": num_subtrees, "reg_levels": reg_levels},
    )


def save_keyset(keyset: KeySet, path) -> None:
    header = _HEADER.pack(
        FILE_MAGIC, FILE_VERSION, _KIND_CODES[keyset.kind], keyset.size
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(keyset.keys.astype("<u4").tobytes())


def load_keyset(path) -> KeySet:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ConfigError(f"{path}: truncated key-set header")
        magic, version, kind_code, count = _HEADER.unpack(raw)
        if magic != FILE_MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}")
        if version != FILE_VERSION:
            raise ConfigError(f"{path}: unsupported version {version}")
        if kind_code not in _KIND_NAMES:
            raise ConfigError(f"{path}: unknown kind code {kind_code}")
        keys = np.frombuffer(fh.read(4 * count), dtype="<u4")
        if len(keys) != count:
            raise ConfigError(f"{path}: expected {count} keys, found {len(keys)}")
    return KeySet(_KIND_NAMES[kind_code], count, None, keys.astype(np.uint32))


def parse_size(text: str) -> int:
    """Parse a key-set size: a plain integer or a preset like 64k/256k."""
    label = text.strip().lower()
    if label in SIZE_PRESETS:
        return SIZE_PRESETS[label]
    if label.endswith("k") and label[:-1].isdigit():
        return int(label[:-1]) * 1024
    if label.isdigit():
        return int(label)
    raise ConfigError(f"cannot parse key-set size {text!r}")
