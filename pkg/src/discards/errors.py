"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DiscardsError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(DiscardsError):
    """Raised for malformed input files; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(DiscardsError):
    """Raised when a dataset fails validation and the caller required a valid one."""

    def __init__(self, violations: list[str]):
        super().__init__(
            f"{len(violations)} validation violation(s): " + "; ".join(violations)
        )
        self.violations = violations


class SelectionEmptiedStratumError(DiscardsError):
    """Raised when a data-selection method leaves a stratum with no ships."""

    def __init__(self, method: str, stratum: str):
        super().__init__(f"selection {method} emptied stratum {stratum!r}")
        self.method = method
        self.stratum = stratum


class EmptyReferenceRangeError(DiscardsError):
    """Raised when no catch proportion mass lies above the no-discard length."""

    def __init__(self, d_max_cm: float):
        super().__init__(
            f"cannot raise: empty reference range (no catch mass above {d_max_cm} cm)"
        )
        self.d_max_cm = d_max_cm


class InsufficientClassesError(DiscardsError):
    """Raised when too few determined length classes are available for fitting."""

    def __init__(self, n_classes: int, minimum: int = 3):
        super().__init__(
            f"insufficient classes for logistic fit: {n_classes} determined, "
            f"need at least {minimum}"
        )
        self.n_classes = n_classes


class FitNonConvergenceError(DiscardsError):
    """Raised when the logistic fit fails to converge; carries the last iterate."""

    def __init__(self, d50_cm: float, b_slope: float, iterations: int):
        super().__init__(
            f"logistic fit did not converge after {iterations} iterations "
            f"(last iterate d50={d50_cm:.6g} cm, b={b_slope:.6g} per cm)"
        )
        self.d50_cm = d50_cm
        self.b_slope = b_slope
        self.iterations = iterations


class BootstrapUnstableError(DiscardsError):
    """Raised when too many bootstrap replicates fail to estimate."""

    def __init__(self, n_failed: int, replicates: int):
        super().__init__(
            f"bootstrap unstable: {n_failed} of {replicates} replicates failed"
        )
        self.n_failed = n_failed
        self.replicates = replicates


class SimulationUnstableError(DiscardsError):
    """Raised when too many Monte Carlo runs of a scheme fail to estimate."""

    def __init__(self, n_failed: int, n_runs: int):
        super().__init__(
            f"scheme evaluation unstable: {n_failed} of {n_runs} runs failed"
        )
        self.n_failed = n_failed
        self.n_runs = n_runs
