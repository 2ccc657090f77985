"""Exception types shared across the package."""


class CombwalkError(Exception):
    """Base class for all combwalk errors."""


class DomainError(CombwalkError, ValueError):
    """A vertex or parameter lies outside the comb or an operation's domain."""


class ResourceBudgetError(CombwalkError, RuntimeError):
    """A computation would exceed its caller-supplied memory or work budget."""


class SingularChainError(CombwalkError, RuntimeError):
    """Absorption is unreachable, so the fundamental-matrix solve is singular."""


class EstimationError(CombwalkError, RuntimeError):
    """A Monte Carlo run produced no usable replicas (e.g. all censored)."""


class ConfigError(CombwalkError, ValueError):
    """An experiment config file or CLI argument failed validation."""
