"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid configuration (bad height, replica count, subtree count, ...)."""


class AddressError(ValueError):
    """A node address outside the structure it was used against."""


class SimulationError(RuntimeError):
    """Internal consistency violation; indicates a simulator bug, fatal."""


class LivelockError(SimulationError):
    """A run exceeded its cycle budget without completing every key."""


class WorkloadMismatchError(ValueError):
    """Two run results that were compared do not share tree and key set."""
