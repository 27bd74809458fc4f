"""Exception types shared across the package."""

from __future__ import annotations


class TreepackError(Exception):
    """Base class for all package errors."""


class InputError(TreepackError, ValueError):
    """Malformed or out-of-contract input."""


class CapabilityError(TreepackError):
    """Requested computation exceeds a configured budget (e.g. exact enumeration)."""


class DoubleUseError(TreepackError):
    """A host edge was removed twice, i.e. used by two embeddings."""

    def __init__(self, pair):
        self.pair = tuple(pair)
        super().__init__(f"host edge {self.pair} is absent (already used)")


class RoundFailure(TreepackError):
    """A nibble round could not be completed; carries a structured report."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class EmbeddingFailure(TreepackError):
    """Greedy embedding found no admissible host vertex."""


class CorrectionFailure(TreepackError):
    """The greedy correction ran out of admissible reserve vertices."""

    def __init__(self, report: dict):
        self.report = report
        super().__init__(
            "no admissible reserve vertex for tree {tree} step {step} "
            "(|X|={X}, |Y|={Y}, |Z|={Z}, |U|={U}, reserve={reserve})".format(**report)
        )
