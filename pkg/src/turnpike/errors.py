"""Exception hierarchy shared by every module."""


class TurnpikeError(Exception):
    """Base class for domain errors (CLI exit status 1)."""

    kind = "domain-error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class InvalidArgumentError(TurnpikeError, ValueError):
    kind = "invalid-argument"


class ResourceLimitError(TurnpikeError):
    kind = "resource-limit"

    def __init__(self, limit_name, limit, requested):
        self.limit_name = limit_name
        self.limit = limit
        self.requested = requested
        super().__init__(f"{limit_name} exceeded: requested {requested}, limit {limit}")

    def to_dict(self):
        d = super().to_dict()
        d.update(limit_name=self.limit_name, limit=self.limit, requested=self.requested)
        return d


class TrajectoryDivergenceError(TurnpikeError):
    kind = "trajectory-divergence"

    def __init__(self, index, state):
        self.index = index
        self.state = state
        super().__init__(f"state {index} left the state box: {list(state)}")

    def to_dict(self):
        d = super().to_dict()
        d.update(index=self.index, state=[float(v) for v in self.state])
        return d


class NoStationaryPointsError(TurnpikeError):
    kind = "no-stationary-points"


class HorizonExceededError(TurnpikeError):
    kind = "horizon-exceeded"


class ConfigError(Exception):
    """Bad configuration or unreadable input (CLI exit status 2)."""
