"""Exact single-step resolution ideals for plane curves and the metrics they induce."""

from .blowup import ResolutionTree, resolve
from .errors import SaperForgeError
from .ideal import MonomialIdeal, direct_image
from .metric import MetricParams, chern_form_local, omega_saper, omega_tilde, path_length
from .poly import MultiPoly, Substitution, levi_log_sum_sq
from .singlestep import SingleStepIdeal, build_single_step, verify_single_step

__all__ = [
    "MetricParams",
    "MonomialIdeal",
    "MultiPoly",
    "ResolutionTree",
    "SaperForgeError",
    "SingleStepIdeal",
    "Substitution",
    "build_single_step",
    "chern_form_local",
    "direct_image",
    "levi_log_sum_sq",
    "omega_saper",
    "omega_tilde",
    "path_length",
    "resolve",
    "verify_single_step",
]
