"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError so callers (and the
CLI exit-code mapping) can distinguish domain violations from configuration
and I/O problems.
"""


class SparseUnifError(Exception):
    """Base error for this package."""


class DomainError(SparseUnifError, ValueError):
    """Arguments violate a mathematical precondition (wrong domain)."""


class InfeasibleError(DomainError):
    """Requested construction leaves the probability simplex."""


class ConfigError(SparseUnifError):
    """Invalid configuration, file format, or runtime setup."""
