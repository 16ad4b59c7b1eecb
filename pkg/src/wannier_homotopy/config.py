"""Numerical tolerances shared by every module."""
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12  # relative asymmetry accepted by herm_eig
    unitary: float = 1e-10  # ||U*U - I|| accepted by log_unitary
    antihermitian: float = 1e-10
    rank_error: float = 1e-8  # loewdin raises below this singular value
    rank_warn: float = 0.1  # transport warns below this singular value
    branch_cut: float = 1e-6  # distance of an eigenphase to pi
    branch_shift: float = 1e-3  # scalar phase used to step off the branch cut
    gap: float = 1e-8  # spectral_snapshot raises below this gap
    aliased_phase: float = 0.1  # winding steps must stay below pi minus this
    integer_residual: float = 0.1
    eigenvalue_collision: float = 1e-6
    reference_margin: float = 0.05
    reference_candidates: int = 64
    small_overlap: float = 0.1  # |M_nn| below this makes a spread center ill-conditioned
    completeness: float = 1e-8

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)


DEFAULT_TOL = Tolerances()
