"""bstsim: cycle-accurate simulator of a banked-memory BST lookup accelerator.

The package models level-pipelined binary-search-tree lookups over
dual-port memory banks, with tree duplication, register-backed top levels,
hybrid horizontal/vertical partitioning and per-subtree staging buffers,
plus a benchmark harness that measures relative throughput across
configurations and key-set families.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: F401
    CycleStats,
    Engine,
    EngineConfig,
    RunResult,
    SearchProbe,
    build_engine,
    derive_chunk_size,
    route_subtree,
    speedup,
)
from .errors import (  # noqa: F401
    AddressError,
    ConfigError,
    LivelockError,
    SimulationError,
    WorkloadMismatchError,
)
from .memory import (  # noqa: F401
    BramPartition,
    PartitionLayout,
    RegisterLayer,
    issue_read,
    layout_horizontal,
    layout_hybrid,
    register_read,
)
from .buffers import Label, MappingPolicy, SubtreeBuffer, queue_label  # noqa: F401
from .tree import (  # noqa: F401
    CompleteTree,
    KeyValue,
    LookupResult,
    NodeAddr,
    build_complete_tree,
    child_addr,
    reference_lookup,
)
from .workload import (  # noqa: F401
    KeySet,
    gen_equal,
    gen_random,
    gen_split,
    load_keyset,
    save_keyset,
)
