"""Smooth Bloch frames and Wannier functions by parallel transport and homotopy contraction."""
__version__ = "0.1.0"

from .config import DEFAULT_TOL, Tolerances
from .diagnostics import (RegularityField, SpreadGeometry, SpreadReport, chern_plaquette,
                          convergence_study, nearest_neighbor_geometry, regularity, spread)
from .errors import *  # noqa: F401,F403
from .fileio import (MmnData, emit_field, mmn_from_model, parse_eig, parse_mmn,
                     provider_from_mmn, read_field, write_mmn)
from .frames import GaugeFrame, build_frame, frame_1d, frame_2d, frame_3d
from .grid import KGrid
from .homotopy import (Homotopy, UnitaryField, WindingReport, contract_columns_1d,
                       contract_columns_2d, contract_log, winding_det, winding_eigenvalues)
from .matcore import exp_antiherm, herm_eig, loewdin, log_unitary
from .models import BlochModel, KaneMeleParams, haldane, kane_mele, min_gap
from .transport import ArrayProvider, OverlapProvider, transport_line, transport_step
