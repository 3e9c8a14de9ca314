"""Exception types shared across the package."""


class KondoPhononError(Exception):
    pass


class ConditionViolation(KondoPhononError):
    """One or more model conditions fail.

    ``violations`` holds ``(label, detail)`` pairs, labels ``"C.1"`` .. ``"C.5"``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{lab}: {det}" for lab, det in self.violations)
        super().__init__(msg)

    @property
    def labels(self):
        return [lab for lab, _ in self.violations]


class DimensionMismatch(KondoPhononError):
    pass


class NotSymmetric(KondoPhononError):
    pass


class MixedCouplingSigns(KondoPhononError):
    pass


class UnsupportedSize(KondoPhononError):
    pass


class SectorEmpty(KondoPhononError):
    pass


class InvalidTruncation(KondoPhononError):
    pass


class BasisMismatch(KondoPhononError):
    pass


class UnsupportedExactTest(KondoPhononError):
    pass


class DegenerateGroundState(KondoPhononError):
    def __init__(self, gap, threshold):
        self.gap = gap
        self.threshold = threshold
        super().__init__(f"ground state gap {gap:.3e} below threshold {threshold:.3e}")


class InsufficientEigenpairs(KondoPhononError):
    pass


class NoConvergence(KondoPhononError):
    def __init__(self, iterations, best_residual):
        self.iterations = iterations
        self.best_residual = best_residual
        super().__init__(
            f"no convergence after {iterations} iterations (best residual {best_residual:.3e})"
        )
