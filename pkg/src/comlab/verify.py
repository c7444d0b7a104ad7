"""One-shot verification suite bundling every pointwise and statistical check.

Checks belong to one of three tolerance classes:

``exact``       floating-point identities (``tol_exact``, or ``tol_coarea`` for
                the Jacobian identities, ``1e-6``/``1e-5`` for finite differences)
``quadrature``  deterministic curve quadrature (``tol_quad``)
``mc``          statistical checks at ``z_max`` standard errors with a hard
                per-entry standard-error budget ``stderr_budget``

Failures are data: :func:`verify_suite` never raises on a failed check.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry
from .ensembles import EnsembleSpec, haar_unitary_batch, sample_sl_batch
from .estimator import (CoMEstimate, center_of_mass_mc, center_of_mass_quad, expect_sl,
                        expect_unitary)
from .linalg import adjoint
from .rng import STREAM_CHECKS, RngStream
from .varieties import make_variety

SHIPPED_VARIETIES = (
    "projective-space:n=1",
    "projective-space:n=2",
    "veronese:n=1,m=2,basis=unit-monomial",
    "veronese:n=1,m=3,basis=unit-monomial",
    "veronese:n=2,m=2,basis=unit-monomial",
    "segre11",
)

# (variety, ensemble kind) pairs for the SL(N, C) expectation checks
SL_CASES = (
    ("veronese:n=1,m=2,basis=unit-monomial", "ginibre-polar"),
    ("segre11", "eig-lognormal"),
)


@dataclass
class VerifyConfig:
    seed: int = 42
    tol_exact: float = 1e-12
    tol_quad: float = 1e-8
    tol_coarea: float = 1e-8
    z_max: float = 4.0
    stderr_budget: float = 0.02
    equivariance_triples: int = 10_000
    coarea_points: int = 100
    quad_levels: tuple = (64, 64)
    outer: int = 500
    inner: int = 500
    symmetrize: bool = False
    threads: int | None = None


@dataclass
class CheckResult:
    name: str
    kind: str
    passed: bool
    measured: float
    tolerance: float
    detail: dict = field(default_factory=dict)


@dataclass
class VerifyResult:
    checks: list
    timings: dict
    estimates: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def payload(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
        }

    def by_name(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _random_sl(N, rng, count):
    g, _, _ = sample_sl_batch(EnsembleSpec("ginibre-polar", N), rng, count)
    return g


def _mu_batch(A):
    aa = np.sum(np.abs(A) ** 2, axis=-1)
    return np.einsum("ki,kj->kij", A, np.conj(A)) / aa[:, None, None]


def check_equivariance(cfg, rng) -> CheckResult:
    per = math.ceil(cfg.equivariance_triples / len(SHIPPED_VARIETIES))
    worst = 0.0
    for j, name in enumerate(SHIPPED_VARIETIES):
        h = make_variety(name)
        r = rng.substream(100 + j)
        pts = h.sample_points(r.generator(), per)
        gs = _random_sl(h.N, r.substream(1), per)
        us = haar_unitary_batch(h.N, r.substream(2), per)
        A = np.einsum("kij,kj->ki", gs, pts.lift)
        lhs = _mu_batch(np.einsum("kij,kj->ki", us, A))
        rhs = us @ _mu_batch(A) @ adjoint(us)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CheckResult("equivariance", "exact", worst <= cfg.tol_exact, worst, cfg.tol_exact,
                       {"triples": per * len(SHIPPED_VARIETIES)})


def check_scalar_invariance(cfg, rng) -> CheckResult:
    worst = 0.0
    for j, name in enumerate(SHIPPED_VARIETIES):
        h = make_variety(name)
        r = rng.substream(200 + j)
        gen = r.generator()
        pts = h.sample_points(gen, 20)
        gs = _random_sl(h.N, r.substream(1), 20)
        cs = (gen.standard_normal(20) + 1j * gen.standard_normal(20)) * np.exp(gen.uniform(-3, 3, 20))
        for k in range(20):
            p, g, c = pts[k], gs[k], cs[k]
            d_mu = np.max(np.abs(geometry.mu_point(p, c * g) - geometry.mu_point(p, g)))
            h0 = geometry.kahler_hessian(p, g)
            d_h = np.max(np.abs(geometry.kahler_hessian(p, c * g) - h0)) / np.max(np.abs(h0))
            v0 = geometry.volume_density(p, g)
            d_v = abs(geometry.volume_density(p, c * g) - v0) / v0
            worst = max(worst, float(d_mu), float(d_h), float(d_v))
    return CheckResult("scalar-invariance", "exact", worst <= cfg.tol_exact, worst, cfg.tol_exact)


def check_com_scalar_invariance(cfg, rng) -> CheckResult:
    """``center_of_mass(c g)`` against ``center_of_mass(g)`` with a shared stream, exact equality."""
    h = make_variety("veronese:n=1,m=2,basis=unit-monomial")
    r = rng.substream(250)
    g = _random_sl(h.N, r.substream(1), 1)[0]
    gen = r.generator()
    cs = gen.standard_normal(10) + 1j * gen.standard_normal(10)
    base = center_of_mass_mc(h, g, 1000, r.substream(2))
    worst = 0.0
    for c in cs:
        e = center_of_mass_mc(h, c * g, 1000, r.substream(2))
        worst = max(worst, float(np.max(np.abs(e.mu_bar - base.mu_bar))))
    pow2 = max(float(np.max(np.abs(center_of_mass_mc(h, c * g, 1000, r.substream(2)).mu_bar - base.mu_bar)))
               for c in (2.0, 0.25, -8.0, 1j * 0.5))
    return CheckResult("scalar-invariance-com", "exact", worst == 0.0, worst, 0.0,
                       {"scalars": len(cs), "power_of_two_max_diff": pow2})


def check_pointwise_trace(cfg, rng) -> CheckResult:
    worst = 0.0
    for j, name in enumerate(SHIPPED_VARIETIES):
        h = make_variety(name)
        r = rng.substream(300 + j)
        pts = h.sample_points(r.generator(), 500)
        gs = _random_sl(h.N, r.substream(1), 500)
        mu = _mu_batch(np.einsum("kij,kj->ki", gs, pts.lift))
        worst = max(worst, float(np.max(np.abs(np.trace(mu, axis1=1, axis2=2) - 1))))
    return CheckResult("trace-pointwise", "exact", worst <= cfg.tol_exact, worst, cfg.tol_exact)


def lift_jacobian_fd_error(h, w, step=1e-5) -> float:
    """Max relative deviation of the analytic Jacobian from central differences."""
    J = h.lift_jacobian(w)
    worst = 0.0
    for a in range(h.n):
        e = np.zeros(h.n, dtype=complex)
        e[a] = step
        fd = (h.lift(w + e) - h.lift(w - e)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd - J[:, a])) / max(np.max(np.abs(J[:, a])), 1.0)))
    return worst


def hessian_fd_error(h, w, g, step=1e-4) -> float:
    """Max relative deviation of ``kahler_hessian`` from real second differences."""
    n = h.n

    def f(x):
        ww = x[:n] + 1j * x[n:]
        A = g @ h.lift(ww)
        return math.log(float(np.real(np.vdot(A, A))))

    x0 = np.concatenate([w.real, w.imag])
    D = np.empty((2 * n, 2 * n))
    for i in range(2 * n):
        for j in range(2 * n):
            ei = np.zeros(2 * n)
            ej = np.zeros(2 * n)
            ei[i] = step
            ej[j] = step
            D[i, j] = (f(x0 + ei + ej) - f(x0 + ei - ej) - f(x0 - ei + ej) + f(x0 - ei - ej)) / (4 * step * step)
    H_fd = np.empty((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            H_fd[a, b] = 0.25 * ((D[a, b] + D[n + a, n + b]) + 1j * (D[a, n + b] - D[n + a, b]))
    H = geometry.kahler_hessian(h.points_at(w)[0], g)
    return float(np.max(np.abs(H - H_fd)) / np.max(np.abs(H)))


def check_finite_differences(cfg, rng) -> list[CheckResult]:
    worst_j = worst_h = 0.0
    for j, name in enumerate(SHIPPED_VARIETIES):
        h = make_variety(name)
        r = rng.substream(400 + j)
        pts = h.sample_points(r.generator(), 100)
        gs = _random_sl(h.N, r.substream(1), 100)
        for k in range(100):
            worst_j = max(worst_j, lift_jacobian_fd_error(h, pts.w[k]))
            if k < 17:  # 6 varieties x 17 points ~ 100 hessian checks
                worst_h = max(worst_h, hessian_fd_error(h, pts.w[k], gs[k]))
    return [
        CheckResult("lift-jacobian-fd", "exact", worst_j <= 1e-6, worst_j, 1e-6),
        CheckResult("hessian-fd", "exact", worst_h <= 1e-5, worst_h, 1e-5),
    ]


def coarea_triples(rng, count):
    """``count`` (variety, w, g) triples cycling over the shipped varieties."""
    out = []
    per = math.ceil(count / len(SHIPPED_VARIETIES))
    for j, name in enumerate(SHIPPED_VARIETIES):
        h = make_variety(name)
        r = rng.substream(500 + j)
        pts = h.sample_points(r.generator(), per)
        gs = _random_sl(h.N, r.substream(1), per)
        out.extend((h, pts.w[k], gs[k]) for k in range(per))
    return out[:count]


def check_jacobian_identities(cfg, rng) -> list[CheckResult]:
    triples = coarea_triples(rng, cfg.coarea_points)
    stated = [geometry.check_coarea_identity(h, w, g).rel_err for h, w, g in triples]
    pulled = [geometry.check_pullback_identity(h, w, g).rel_err for h, w, g in triples]
    s, p = float(np.max(stated)), float(np.max(pulled))
    return [
        CheckResult("coarea-identity", "exact", s <= cfg.tol_coarea, s, cfg.tol_coarea,
                    {"points": len(triples), "median_rel_err": float(np.median(stated))}),
        CheckResult("pullback-jacobian", "exact", p <= cfg.tol_coarea, p, cfg.tol_coarea,
                    {"points": len(triples)}),
    ]


def check_quadrature(cfg, rng, estimates) -> list[CheckResult]:
    out = []
    h = make_variety("projective-space:n=1")
    gs = _random_sl(2, rng.substream(600), 20)
    worst = 0.0
    for k in range(20):
        e = center_of_mass_quad(h, gs[k], cfg.quad_levels, provenance=f"ginibre-polar:N=2[{k}]")
        estimates.append(e)
        worst = max(worst, float(np.max(np.abs(e.mu_bar - 0.5 * np.eye(2)))))
    out.append(CheckResult("quadrature-projective-line", "quadrature", worst <= cfg.tol_quad, worst, cfg.tol_quad))

    hb = make_variety("veronese:n=1,m=2,basis=balanced")
    e = center_of_mass_quad(hb, np.eye(3), cfg.quad_levels, provenance="identity")
    estimates.append(e)
    d = float(np.max(np.abs(e.mu_bar - 2 / 3 * np.eye(3))))
    out.append(CheckResult("quadrature-veronese-balanced", "quadrature", d <= cfg.tol_quad, d, cfg.tol_quad))

    hu = make_variety("veronese:n=1,m=2,basis=unit-monomial")
    e = center_of_mass_quad(hu, np.eye(3), cfg.quad_levels, provenance="identity")
    estimates.append(e)
    off = float(np.max(np.abs(e.mu_bar - np.diag(np.diag(e.mu_bar)))))
    tr = abs(e.trace - 2.0)
    out.append(CheckResult("quadrature-veronese-unit", "quadrature", off <= 1e-10 and tr <= cfg.tol_quad,
                           max(off, tr), cfg.tol_quad, {"offdiag_max": off, "trace_error": tr}))
    return out


def _mc_result(name, rep, cfg) -> CheckResult:
    se_max = float(np.max(rep.stderr))
    ok = rep.max_z <= cfg.z_max and se_max <= cfg.stderr_budget
    return CheckResult(name, "mc", bool(ok), rep.max_z, cfg.z_max,
                       {"stderr_max": se_max, "stderr_budget": cfg.stderr_budget,
                        "target": rep.target, "deviation": rep.deviation,
                        "outer": rep.outer_samples, "inner": rep.inner_samples,
                        "ensemble": rep.ensemble, "variety": str(rep.variety)})


def check_single_mc(cfg, rng, estimates) -> list[CheckResult]:
    out = []
    h = make_variety("projective-space:n=1")
    e = center_of_mass_mc(h, np.eye(2), 10_000, rng.substream(700), provenance="identity")
    estimates.append(e)
    z = float(np.max(np.abs(e.mu_bar - 0.5 * np.eye(2)) / np.maximum(e.stderr, 1e-300)))
    out.append(CheckResult("mc-projective-line-identity", "mc", z <= cfg.z_max and e.stderr_trace <= cfg.tol_exact,
                           z, cfg.z_max, {"stderr_trace": e.stderr_trace}))
    hv = make_variety("veronese:n=1,m=2,basis=unit-monomial")
    gs = _random_sl(3, rng.substream(701), 5)
    for k in range(5):
        estimates.append(center_of_mass_mc(hv, gs[k], 2000, rng.substream(702).at(k),
                                           provenance=f"ginibre-polar:N=3[{k}]"))
    return out


def check_trace_and_positivity(cfg, estimates) -> list[CheckResult]:
    worst_z = 0.0
    bad = 0
    min_margin = np.inf
    bad_pos = 0
    for e in estimates:
        floor = cfg.tol_quad
        dev = abs(e.trace - e.volume)
        if dev > max(cfg.z_max * e.stderr_trace, floor):
            bad += 1
        if e.stderr_trace > 0:
            worst_z = max(worst_z, dev / e.stderr_trace)
        lam = float(np.linalg.eigvalsh(e.mu_bar)[0])
        thresh = 0.0 if e.method == "quadrature" else -cfg.z_max * float(np.max(e.stderr))
        min_margin = min(min_margin, lam)
        if not lam > thresh:
            bad_pos += 1
    return [
        CheckResult("trace-law", "mc", bad == 0, worst_z, cfg.z_max,
                    {"estimates": len(estimates), "failures": bad}),
        CheckResult("positivity", "exact", bad_pos == 0, min_margin, 0.0,
                    {"estimates": len(estimates), "failures": bad_pos}),
    ]


def check_expectations(cfg, rng) -> list[CheckResult]:
    out = []
    hu = make_variety("veronese:n=1,m=2,basis=unit-monomial")
    rep = expect_unitary(hu, cfg.outer, None, rng.substream(800), cfg.quad_levels,
                         z_max=cfg.z_max, stderr_budget=cfg.stderr_budget, quad_tol=cfg.tol_quad,
                         threads=cfg.threads)
    out.append(_mc_result("expectation-haar", rep, cfg))
    reps = {}
    for j, (vname, kind) in enumerate(SL_CASES):
        h = make_variety(vname)
        ens = EnsembleSpec(kind, h.N)
        rep = expect_sl(h, ens, cfg.outer, cfg.inner, rng.substream(810 + j), cfg.symmetrize,
                        z_max=cfg.z_max, stderr_budget=cfg.stderr_budget, threads=cfg.threads)
        reps[(vname, kind)] = rep
        out.append(_mc_result(f"expectation-sl-{h.spec.kind}-{kind}", rep, cfg))
    # ensemble independence on the first variety
    vname = SL_CASES[0][0]
    h = make_variety(vname)
    a = reps[(vname, "ginibre-polar")]
    b = expect_sl(h, EnsembleSpec("eig-lognormal", h.N), cfg.outer, cfg.inner, rng.substream(820),
                  cfg.symmetrize, z_max=cfg.z_max, stderr_budget=cfg.stderr_budget, threads=cfg.threads)
    comb = np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    z = float(np.max(np.abs(a.estimate - b.estimate) / np.maximum(comb, 1e-300)))
    ok = z <= cfg.z_max and float(np.max(comb)) <= cfg.stderr_budget * math.sqrt(2)
    out.append(CheckResult("ensemble-independence", "mc", bool(ok), z, cfg.z_max,
                           {"combined_stderr_max": float(np.max(comb))}))
    return out


def verify_suite(cfg: VerifyConfig | None = None) -> VerifyResult:
    """Run every check; returns per-check status, measured value and tolerance."""
    cfg = cfg or VerifyConfig()
    rng = RngStream(cfg.seed).substream(STREAM_CHECKS)
    checks: list[CheckResult] = []
    timings: dict[str, float] = {}
    estimates: list[CoMEstimate] = []

    def run(label, fn):
        t0 = time.perf_counter()
        res = fn()
        timings[label] = time.perf_counter() - t0
        checks.extend(res if isinstance(res, list) else [res])

    run("equivariance", lambda: check_equivariance(cfg, rng))
    run("scalar-invariance", lambda: check_scalar_invariance(cfg, rng))
    run("scalar-invariance-com", lambda: check_com_scalar_invariance(cfg, rng))
    run("trace-pointwise", lambda: check_pointwise_trace(cfg, rng))
    run("finite-differences", lambda: check_finite_differences(cfg, rng))
    run("jacobian-identities", lambda: check_jacobian_identities(cfg, rng))
    run("quadrature", lambda: check_quadrature(cfg, rng, estimates))
    run("single-mc", lambda: check_single_mc(cfg, rng, estimates))
    run("trace-and-positivity", lambda: check_trace_and_positivity(cfg, estimates))
    run("expectations", lambda: check_expectations(cfg, rng))
    return VerifyResult(checks, timings, estimates)
