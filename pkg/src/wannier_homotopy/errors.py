"""Exception hierarchy.

Topological obstructions (a nonzero Chern number, a winding that forbids a
contraction, eigenvalues that wind under the logarithm method) are expected
physical outcomes and derive from :class:`TopologicalObstruction`; the CLI maps
them to exit code 2. Everything else is a numerical or input failure.
"""


class WannierError(Exception):
    """Base class for every error raised by this package."""


class TopologicalObstruction(WannierError):
    """A construction is impossible for topological reasons."""


class ChernObstruction(TopologicalObstruction):
    def __init__(self, *chern):
        self.chern = tuple(int(c) for c in chern)
        super().__init__(f"nonzero Chern number(s) {self.chern}")


class WindingObstruction(TopologicalObstruction):
    def __init__(self, *winding):
        self.winding = tuple(int(w) for w in winding)
        super().__init__(f"determinant winding {self.winding} forbids contraction")


class EigenvalueWinding(TopologicalObstruction):
    def __init__(self, windings):
        self.windings = tuple(int(w) for w in windings)
        super().__init__(f"eigenvalues wind {self.windings}; no continuous logarithm")


class NonHermitian(WannierError):
    pass


class NoConvergence(WannierError):
    pass


class RankDeficient(WannierError):
    def __init__(self, sigma_min, threshold):
        self.sigma_min = float(sigma_min)
        self.threshold = float(threshold)
        super().__init__(
            f"smallest singular value {self.sigma_min:.3e} below {self.threshold:.1e}; "
            "grid too coarse for transport"
        )


class BranchCut(WannierError):
    def __init__(self, phase):
        self.phase = float(phase)
        super().__init__(f"eigenphase {self.phase:.12f} too close to pi")


class GapClosed(WannierError):
    def __init__(self, gap, k=None):
        self.gap = float(gap)
        self.k = k
        super().__init__(f"spectral gap {self.gap:.3e} at k={k}")


class InvalidParams(WannierError):
    pass


class AliasedPhase(WannierError):
    pass


class NonIntegerResidual(WannierError):
    def __init__(self, value):
        self.value = float(value)
        super().__init__(f"winding {self.value:.6f} is not close to an integer")


class EigenvalueCollision(WannierError):
    pass


class NoSafeVector(WannierError):
    def __init__(self, margin, floor):
        self.margin = float(margin)
        self.floor = float(floor)
        super().__init__(f"best reference-vector margin {self.margin:.3e} below floor {self.floor}")


class PhaseUnwrapInconsistent(WannierError):
    pass


class IncompleteShells(WannierError):
    pass


class ParseError(WannierError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(reason if line is None else f"line {line}: {reason}")


class CountMismatch(WannierError):
    pass


class MissingNeighbor(WannierError):
    pass
