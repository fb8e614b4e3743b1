"""Explicit chordal Loewner flows driven by square-root driving functions.

Driving points ``k_n`` with weights ``b_n`` move as ``k_n sqrt(1 - t)``. The
roots of ``P(z) = z + sum 4 b_n / (z - k_n)`` decide which of four cases
holds, each case has an explicit Koenigs map ``h`` and the flow is
``f(z, t) = h^{-1}(action_t(h(z / sqrt(1 - t))))``.
"""
from .config import SlitFamily, build_intervals, canonical_family, dump_family, load_family
from .flow import FlowEvaluator, Trajectory, f_oracle, ode_oracle, validate_flow
from .geometry import approach_angle, sector_report
from .kernels import BACKEND
from .koenigs import KoenigsMap, image_boundary_scan, tip_points
from .pfunc import eval_FHG, eval_P
from .roots import classify, find_standard_roots, partial_fraction, verify_residue_identity

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FlowEvaluator", "KoenigsMap", "SlitFamily", "Trajectory", "approach_angle",
    "build_intervals", "canonical_family", "classify", "dump_family", "eval_FHG", "eval_P",
    "f_oracle", "find_standard_roots", "image_boundary_scan", "load_family", "ode_oracle",
    "partial_fraction", "sector_report", "tip_points", "validate_flow", "verify_residue_identity",
]
