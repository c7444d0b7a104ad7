"""Numerical centres of mass of projective varieties under random basis changes.

The public API re-exports the main types and operations of each module; see
the submodules for details.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (ComlabError, ImmersionError, NumericError, PreconditionError, RankError,
                     SpecError)
from .rng import RngStream
from .linalg import HermitianPD, det, eigh, orthonormalize, polar, qr_phase_fixed, unit_det_normalize
from .ensembles import (EnsembleSpec, GroupSample, ginibre, haar_unitary, metropolis_eigenvalues,
                        sample_B, sample_sl)
from .varieties import (PointSample, VarietyHandle, VarietySpec, make_variety,
                        quadrature_points_curve, sample_point_fs, volume)
from .geometry import (coarea_jacobian, check_coarea_identity, check_pullback_identity,
                       kahler_hessian, mu_point, pullback_jacobian, tangent_frame, volume_density)
from .estimator import (CoMEstimate, ExpectationReport, center_of_mass_mc, center_of_mass_quad,
                        expect_sl, expect_unitary)
from .verify import VerifyConfig, verify_suite

__all__ = [
    "BACKEND", "ComlabError", "ImmersionError", "NumericError", "PreconditionError", "RankError",
    "SpecError", "RngStream", "HermitianPD", "det", "eigh", "orthonormalize", "polar",
    "qr_phase_fixed", "unit_det_normalize", "EnsembleSpec", "GroupSample", "ginibre",
    "haar_unitary", "metropolis_eigenvalues", "sample_B", "sample_sl", "PointSample",
    "VarietyHandle", "VarietySpec", "make_variety", "quadrature_points_curve", "sample_point_fs",
    "volume", "coarea_jacobian", "check_coarea_identity", "check_pullback_identity",
    "kahler_hessian", "mu_point", "pullback_jacobian", "tangent_frame", "volume_density",
    "CoMEstimate", "ExpectationReport", "center_of_mass_mc", "center_of_mass_quad", "expect_sl",
    "expect_unitary", "VerifyConfig", "verify_suite",
]
