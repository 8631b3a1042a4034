"""Per-subtree staging buffers and their two mapping policies.

Keys leaving the register layer that cannot be searched this cycle wait in
their subtree's buffer. Direct mapping places a key at the slot equal to
its index in the chunk and stalls on slot collisions even when other slots
are free; queue mapping uses read/write pointers plus same-cycle ordinal
labels and stalls only when a buffer lacks enough free slots.

Every buffer drains at most two keys per cycle, one per memory port. The
engine drains buffers before applying the cycle's inserts, so a key
inserted in cycle t can be fetched in cycle t+1 at the earliest.
"""

from __future__ import annotations

import enum
from typing import NamedTuple

from .errors import ConfigError


PORT_ORDER = ("A", "B")


class MappingPolicy(str, enum.Enum):
    DIRECT = "direct"
    QUEUE = "queue"


class Label(NamedTuple):
    """Same-cycle ordinal for a probe: how many earlier probes this cycle
    target the same buffer."""

    probe: object
    ordinal: int


def queue_label(probes) -> list[Label]:
    """Assign ordinals 0..k-1 per target buffer, in chunk-index order.

    ``probes`` are the probes that left the register layer in one cycle;
    each carries its target subtree in ``subtree`` and its chunk position
    in ``chunk_index``.
    """
    by_buffer: dict[int, list] = {}
    for probe in probes:
        by_buffer.setdefault(probe.subtree, []).append(probe)
    labels = []
    for subtree in sorted(by_buffer):
        group = sorted(by_buffer[subtree], key=lambda p: (p.chunk_id, p.chunk_index))
        labels.extend(Label(probe, ordinal) for ordinal, probe in enumerate(group))
    return labels


class SubtreeBuffer:
    """Staging buffer for one subtree, with a configurable slot count.

    With direct mapping, slots 0..S/2-1 drain via port A and slots
    S/2..S-1 via port B. With queue mapping the occupied slots form a
    contiguous circular range [read_ptr, write_ptr) and drain in FIFO
    order.
    """

    def __init__(self, subtree: int, slots: int, policy: MappingPolicy, log: list | None = None):
        if slots < 1:
            raise ConfigError(f"buffer needs at least 1 slot, got {slots}")
        self.subtree = subtree
        self.size = slots
        self.policy = MappingPolicy(policy)
        self.slots: list = [None] * slots
        self.read_ptr = 0
        self.write_ptr = 0
        self.occupancy = 0
        self.max_occupancy = 0
        self.total_inserted = 0
        self.total_drained = 0
        self._batch_accepted = 0
        self.log = log  # optional event log: ("ins"|"drn", probe, slot)

    @property
    def free(self) -> int:
        return self.size - self.occupancy

    def insert(self, probe, ordinal: int | None = None) -> bool:
        if self.policy is MappingPolicy.DIRECT:
            return self.direct_insert(probe)
        return self.queue_insert(probe, ordinal)

    def drain(self) -> list[tuple[str, object]]:
        if self.policy is MappingPolicy.DIRECT:
            return self.direct_drain()
        return self.queue_drain()

    def _place(self, slot: int, probe) -> None:
        self.slots[slot] = probe
        self.occupancy += 1
        self.total_inserted += 1
        if self.occupancy > self.max_occupancy:
            self.max_occupancy = self.occupancy
        if self.log is not None:
            self.log.append(("ins", probe, slot))

    def _take(self, slot: int):
        probe = self.slots[slot]
        self.slots[slot] = None
        self.occupancy -= 1
        self.total_drained += 1
        if self.log is not None:
            self.log.append(("drn", probe, slot))
        return probe

    # direct mapping

    def direct_insert(self, probe) -> bool:
        """Place the probe at the slot equal to its chunk index.

        Returns False (slot occupied) without placing when the mapped slot
        is taken, even if other slots are free.
        """
        slot = probe.chunk_index
        if slot >= self.size:
            raise ConfigError(
                f"chunk index {slot} does not fit a {self.size}-slot direct-mapped buffer"
            )
        if self.slots[slot] is not None:
            return False
        self._place(slot, probe)
        return True

    def direct_drain(self) -> list[tuple[str, object]]:
        """Remove the lowest occupied slot of each half: port A serves the
        lower half, port B the upper half, independently."""
        out = []
        half = self.size // 2
        for port, lo, hi in (("A", 0, half), ("B", half, self.size)):
            for slot in range(lo, hi):
                if self.slots[slot] is not None:
                    out.append((port, self._take(slot)))
                    break
        return out

    # queue mapping

    def queue_insert(self, probe, ordinal: int) -> bool:
        """Place the probe at (write_ptr + ordinal) mod size if that slot is
        free; the write pointer advances only at end_insert_batch()."""
        slot = (self.write_ptr + ordinal) % self.size
        if self.slots[slot] is not None:
            return False
        self._place(slot, probe)
        self._batch_accepted += 1
        return True

    def end_insert_batch(self) -> None:
        """Advance the write pointer by the number accepted this cycle."""
        self.write_ptr = (self.write_ptr + self._batch_accepted) % self.size
        self._batch_accepted = 0

    def queue_drain(self) -> list[tuple[str, object]]:
        """Remove up to 2 probes starting at read_ptr; port A gets the older."""
        out = []
        for port in PORT_ORDER:
            if self.occupancy == 0:
                break
            out.append((port, self._take(self.read_ptr)))
            self.read_ptr = (self.read_ptr + 1) % self.size
        return out
