"""Centre-of-mass estimators and expectation runs over random basis changes.

``mu_bar_X(g) = int_X A A* / ||A||^2 d nu_{H_g}`` with ``A = g V``.  Two inner
integrators are provided:

* :func:`center_of_mass_mc` samples parameter points from the Fubini-Study law
  of the parameter space and weights them by ``density_g / base_density``
  (plain importance sampling, unbiased).
* :func:`center_of_mass_quad` (curves only) uses the tensor rule from
  :func:`comlab.varieties.quadrature_points_curve` and doubles the levels
  until successive results agree.

:func:`expect_unitary` and :func:`expect_sl` average these over Haar unitaries
and over ``g = H^(1/2) u`` from an admissible ensemble respectively.  Every
outer sample ``k`` draws its group element and its inner points from counter
``k`` of two dedicated streams, so results are independent of worker count.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._backend import default_threads
from .ensembles import EnsembleSpec, haar_unitary_batch, sample_sl_batch
from .errors import ImmersionError, NumericError, PreconditionError, SpecError
from .linalg import adjoint, as_matrix
from .rng import STREAM_GROUP, STREAM_POINTS, STREAM_UNITARY, RngStream
from .varieties import PointBatch, VarietyHandle, VarietySpec, quadrature_points_curve

log = logging.getLogger(__name__)

DEFAULT_QUAD_LEVELS = (64, 64)
QUAD_TOL = 1e-10
QUAD_MAX_LEVEL = 1024
MAX_RESAMPLE_FRACTION = 1e-3
WEIGHT_OUTLIER_RATIO = 1e6


@dataclass
class CoMEstimate:
    mu_bar: np.ndarray
    stderr: np.ndarray
    samples: int
    method: str
    variety: VarietySpec
    g_provenance: str
    volume: float
    stderr_trace: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def trace(self) -> float:
        return float(np.trace(self.mu_bar).real)

    def trace_ok(self, z_max: float = 4.0, floor: float = 1e-8) -> bool:
        return abs(self.trace - self.volume) <= max(z_max * self.stderr_trace, floor)


@dataclass
class ExpectationReport:
    estimate: np.ndarray
    stderr: np.ndarray
    target: float
    max_z: float
    outer_samples: int
    inner_samples: int
    ensemble: str
    seed: int
    passed: bool
    variety: VarietySpec
    method: str
    symmetrized: bool = False
    diagnostics: dict = field(default_factory=dict)
    samples: list = field(default_factory=list, repr=False)

    @property
    def deviation(self) -> float:
        """``||estimate - target * Id||_max``."""
        return float(np.max(np.abs(self.estimate - self.target * np.eye(len(self.estimate)))))


def canonical_scale(g) -> np.ndarray:
    """Rescale ``g`` by an exact power of two so its largest entry lies in [0.5, 1)."""
    g = as_matrix(g)
    _, e = math.frexp(float(np.max(np.abs(g))))
    return np.ldexp(g.real, -e) + 1j * np.ldexp(g.imag, -e)


def _images(g: np.ndarray, pts: PointBatch):
    A = pts.lift @ g.T
    B = np.einsum("ij,kja->kia", g, pts.jacobian)
    return A, B


def _moments(s1, s2r, s2i, K):
    mean = s1 / K
    mean = 0.5 * (mean + adjoint(mean))
    if K < 2:
        return mean, np.full(mean.shape, np.inf)
    var_r = np.maximum(s2r / K - mean.real ** 2, 0.0) * (K / (K - 1))
    var_i = np.maximum(s2i / K - mean.imag ** 2, 0.0) * (K / (K - 1))
    return mean, np.sqrt(np.maximum(var_r, var_i) / K)


def center_of_mass_mc(handle: VarietyHandle, g, samples: int, rng: RngStream,
                      provenance: str = "") -> CoMEstimate:
    """Importance-sampled ``mu_bar_X(g)`` from ``samples`` FS-distributed points."""
    if samples < 100:
        raise PreconditionError(f"center_of_mass_mc needs at least 100 samples, got {samples}")
    g = canonical_scale(g)
    if g.shape != (handle.N, handle.N):
        raise PreconditionError(f"g must be {handle.N}x{handle.N}, got {g.shape}")
    gen = rng.generator()
    pts = handle.sample_points(gen, samples)
    A, B = _images(g, pts)
    _, dets, ok = kernels.hessian_batch(A, B)
    resampled = 0
    while not np.all(ok):
        bad = np.flatnonzero(~ok)
        resampled += len(bad)
        if resampled > MAX_RESAMPLE_FRACTION * samples:
            w = pts.w[bad[0]]
            raise ImmersionError(f"{resampled} non-immersive draws exceed 0.1% of {samples}", w=w)
        new = handle.sample_points(gen, len(bad))
        An, Bn = _images(g, new)
        _, dn, okn = kernels.hessian_batch(An, Bn)
        A[bad], dets[bad], ok[bad] = An, dn, okn
        pts.base_density[bad] = new.base_density
    weights = dets / math.pi ** handle.n / pts.base_density
    med = float(np.median(weights))
    outliers = int(np.sum(weights > WEIGHT_OUTLIER_RATIO * med))
    if outliers:
        log.warning("%d importance weights exceed %.0e x median (kept, not clipped)", outliers, WEIGHT_OUTLIER_RATIO)
    s1, s2r, s2i = kernels.accumulate_mu(A, weights)
    mean, se = _moments(s1, s2r, s2i, samples)
    return CoMEstimate(
        mu_bar=mean, stderr=se, samples=samples, method="mc", variety=handle.spec,
        g_provenance=provenance, volume=handle.volume,
        stderr_trace=float(np.std(weights, ddof=1) / math.sqrt(samples)),
        diagnostics={"resampled": resampled, "weight_outliers": outliers,
                     "max_weight_over_median": float(weights.max() / med)},
    )


def _quad_once(handle, g, levels):
    w, lw = quadrature_points_curve(handle, levels)
    pts = handle.points_at(w[:, None])
    A, B = _images(g, pts)
    _, dets, ok = kernels.hessian_batch(A, B)
    if not np.all(ok):
        bad = np.flatnonzero(~ok)[0]
        raise ImmersionError(f"hessian is not positive definite at quadrature node w = {w[bad]}", w=w[bad])
    s1, _, _ = kernels.accumulate_mu(A, dets / math.pi * lw)
    return 0.5 * (s1 + adjoint(s1)), len(w)


def center_of_mass_quad(handle: VarietyHandle, g, levels=DEFAULT_QUAD_LEVELS, tol: float = QUAD_TOL,
                        max_level: int = QUAD_MAX_LEVEL, provenance: str = "") -> CoMEstimate:
    """Deterministic ``mu_bar_X(g)`` for a curve.

    Levels are doubled until two successive rules agree to ``tol`` entrywise
    or ``max_level`` is reached; the last difference is reported as
    ``diagnostics['convergence']``.
    """
    if handle.n != 1:
        raise SpecError(f"quadrature centre of mass needs a curve (n = 1), got n = {handle.n}")
    g = canonical_scale(g)
    R, A = (int(v) for v in levels)
    prev, _ = _quad_once(handle, g, (R, A))
    diff = np.inf
    while True:
        R2, A2 = 2 * R, 2 * A
        if max(R2, A2) > max_level:
            break
        cur, _ = _quad_once(handle, g, (R2, A2))
        diff = float(np.max(np.abs(cur - prev)))
        prev, R, A = cur, R2, A2
        if diff <= tol:
            break
    return CoMEstimate(
        mu_bar=prev, stderr=np.zeros(prev.shape), samples=R * A, method="quadrature",
        variety=handle.spec, g_provenance=provenance, volume=handle.volume,
        diagnostics={"levels": [R, A], "convergence": diff},
    )


def cyclic_symmetrize(M: np.ndarray) -> np.ndarray:
    """Average of ``P M P^T`` over the N cyclic shift matrices ``P``."""
    N = M.shape[-1]
    acc = np.zeros_like(M)
    for c in range(N):
        acc += np.roll(M, (c, c), axis=(-2, -1))
    return acc / N


def _aggregate(mats: np.ndarray):
    K = mats.shape[0]
    mean = mats.mean(axis=0)
    mean = 0.5 * (mean + adjoint(mean))
    if K < 2:
        return mean, np.full(mean.shape, np.inf)
    se = np.maximum(mats.real.std(axis=0, ddof=1), mats.imag.std(axis=0, ddof=1)) / math.sqrt(K)
    return mean, se


def z_scores(estimate, stderr, target, floor=0.0) -> np.ndarray:
    """Entrywise ``|estimate - target * Id| / max(stderr, floor)`` (0/0 counts as 0)."""
    dev = np.abs(estimate - target * np.eye(len(estimate)))
    se = np.maximum(stderr, floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(dev == 0, 0.0, dev / se)
    return z


def _map_ordered(fn, n, threads):
    threads = threads or default_threads()
    if threads <= 1 or n < 2:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n)))


def _finish(estimates, handle, *, outer, inner, ensemble, seed, method, symmetrize,
            z_max, stderr_budget, floor, keep, extra):
    mats = np.stack([e.mu_bar for e in estimates])
    if symmetrize:
        mats = cyclic_symmetrize(mats)
    mean, se = _aggregate(mats)
    target = handle.volume / handle.N
    z = z_scores(mean, se, target, floor)
    max_z = float(np.max(z))
    se_max = float(np.max(se))
    finite = se[np.isfinite(se)]
    med = float(np.median(finite)) if finite.size else float("inf")
    diag = dict(extra)
    diag["stderr_max"] = se_max
    diag["stderr_blowup"] = bool(np.isfinite(se_max) and med > 0 and se_max > 10 * med)
    diag["trace_deviation"] = float(abs(np.trace(mean).real - handle.volume))
    diag["resampled"] = int(sum(e.diagnostics.get("resampled", 0) for e in estimates))
    passed = bool(max_z <= z_max and se_max <= stderr_budget)
    return ExpectationReport(
        estimate=mean, stderr=se, target=target, max_z=max_z, outer_samples=outer,
        inner_samples=inner, ensemble=ensemble, seed=seed, passed=passed, variety=handle.spec,
        method=method, symmetrized=symmetrize, diagnostics=diag,
        samples=list(estimates) if keep else [],
    )


def expect_unitary(handle: VarietyHandle, outer: int, inner: int | None, rng: RngStream,
                   quad_levels=None, *, unitaries=None, z_max: float = 4.0,
                   stderr_budget: float = 0.02, quad_tol: float = 1e-8,
                   keep_samples: bool = False, threads: int | None = None) -> ExpectationReport:
    """Average of ``mu_bar_X(u)`` over Haar unitaries ``u``.

    The inner integral uses quadrature when ``quad_levels`` is given (curves
    only), otherwise Monte Carlo with ``inner`` points.  ``unitaries``
    overrides the Haar draws with explicit matrices.
    """
    N = handle.N
    if unitaries is not None:
        us = np.asarray(unitaries, dtype=np.complex128).reshape(-1, N, N)
        outer = len(us)
    else:
        if outer < 1:
            raise PreconditionError("outer must be >= 1")
        us = haar_unitary_batch(N, rng.substream(STREAM_UNITARY), outer)
    use_quad = quad_levels is not None
    if use_quad and handle.n != 1:
        raise SpecError("quadrature inner integration requires a curve")
    if not use_quad and (inner is None or inner < 100):
        raise PreconditionError("Monte Carlo inner integration needs inner >= 100")
    rx = rng.substream(STREAM_POINTS)

    def one(k):
        if use_quad:
            return center_of_mass_quad(handle, us[k], quad_levels, provenance=f"haar[{k}]")
        return center_of_mass_mc(handle, us[k], inner, rx.at(k), provenance=f"haar[{k}]")

    ests = _map_ordered(one, outer, threads)
    return _finish(ests, handle, outer=outer, inner=0 if use_quad else inner,
                   ensemble=f"haar-unitary:N={N}", seed=rng.seed,
                   method="quadrature" if use_quad else "mc", symmetrize=False, z_max=z_max,
                   stderr_budget=stderr_budget, floor=quad_tol if use_quad else 1e-12,
                   keep=keep_samples, extra={})


def expect_sl(handle: VarietyHandle, ensemble: EnsembleSpec, outer: int, inner: int, rng: RngStream,
              symmetrize: bool = False, quad_levels=None, *, z_max: float = 4.0,
              stderr_budget: float = 0.02, quad_tol: float = 1e-8, keep_samples: bool = False,
              threads: int | None = None) -> ExpectationReport:
    """Two-level estimate of ``E[mu_bar_X(g)]`` for ``g`` drawn from ``ensemble``.

    Each outer draw gets fresh inner points.  With ``symmetrize`` every
    per-draw matrix is averaged over conjugation by the N cyclic shifts, which
    leaves the expectation unchanged (the target is proportional to Id).
    """
    if ensemble.kind == "haar-unitary":
        return expect_unitary(handle, outer, inner, rng, quad_levels, z_max=z_max,
                              stderr_budget=stderr_budget, quad_tol=quad_tol,
                              keep_samples=keep_samples, threads=threads)
    if ensemble.dim != handle.N:
        raise SpecError(f"ensemble dimension N={ensemble.dim} does not match the variety's N={handle.N}")
    if outer < 1:
        raise PreconditionError("outer must be >= 1")
    use_quad = quad_levels is not None
    if use_quad and handle.n != 1:
        raise SpecError("quadrature inner integration requires a curve")
    if not use_quad and inner < 100:
        raise PreconditionError("Monte Carlo inner integration needs inner >= 100")
    gs, _, info = sample_sl_batch(ensemble, rng.substream(STREAM_GROUP), outer)
    rx = rng.substream(STREAM_POINTS)

    def one(k):
        prov = f"{ensemble}[{k}]"
        try:
            if use_quad:
                return center_of_mass_quad(handle, gs[k], quad_levels, provenance=prov)
            return center_of_mass_mc(handle, gs[k], inner, rx.at(k), provenance=prov)
        except NumericError as exc:
            exc.g = gs[k]
            exc.sample_index = k
            raise

    ests = _map_ordered(one, outer, threads)
    return _finish(ests, handle, outer=outer, inner=0 if use_quad else inner, ensemble=str(ensemble),
                   seed=rng.seed, method="quadrature" if use_quad else "mc", symmetrize=symmetrize,
                   z_max=z_max, stderr_budget=stderr_budget, floor=quad_tol if use_quad else 1e-12,
                   keep=keep_samples, extra=info)
