"""Exception types shared across the package.

Every error a run can hit maps to one class here so the CLI can translate
them into its exit-code contract.
"""

from __future__ import annotations


class NMFPurifyError(Exception):
    """Base class for all package errors."""


class ZeroColumn(NMFPurifyError):
    def __init__(self, index: int, iteration: int | None = None):
        self.index = index
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"column {index} has (near) zero l1 norm{where}")


class RankDeficient(NMFPurifyError):
    def __init__(self, rank: int, cols: int, iteration: int | None = None):
        self.rank = rank
        self.cols = cols
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"matrix has numerical rank {rank} < {cols} columns{where}")


class NoConvergence(NMFPurifyError):
    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(f"simplex exceeded its pivot budget ({iterations} pivots)")


class BadDims(NMFPurifyError, ValueError):
    pass


class BadParams(NMFPurifyError, ValueError):
    pass


class SingularMatrix(NMFPurifyError):
    pass


class SupportTooLarge(NMFPurifyError, ValueError):
    pass


class HypothesisViolated(NMFPurifyError):
    """A lemma audit could not establish the lemma's hypotheses."""

    def __init__(self, failed: list[str]):
        self.failed = list(failed)
        super().__init__("hypotheses violated: " + "; ".join(self.failed))


class MaxOuterExceeded(NMFPurifyError):
    def __init__(self, passes: int, snapshot: dict | None = None):
        self.passes = passes
        self.snapshot = snapshot or {}
        super().__init__(f"equilibration did not finish within {passes} passes")


class ConfigError(NMFPurifyError, ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
