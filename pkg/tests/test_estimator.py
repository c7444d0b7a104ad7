import math

import numpy as np
import pytest

from comlab.ensembles import EnsembleSpec, haar_unitary, sample_sl_batch
from comlab.errors import PreconditionError, SpecError
from comlab.estimator import (canonical_scale, center_of_mass_mc, center_of_mass_quad, cyclic_symmetrize,
                              expect_sl, expect_unitary, z_scores)
from comlab.rng import RngStream
from comlab.varieties import make_variety


def random_g(N, seed=0):
    return sample_sl_batch(EnsembleSpec("ginibre-polar", N), RngStream(seed), 1)[0][0]


def test_mc_at_identity_has_constant_weight(rng):
    h = make_variety("projective-space:n=1")
    e = center_of_mass_mc(h, np.eye(2), 100_000, rng)
    assert e.stderr_trace <= 1e-12
    assert abs(e.trace - 1) <= 1e-12
    z = np.abs(e.mu_bar - 0.5 * np.eye(2)) / e.stderr
    assert np.max(z) <= 4


def test_mc_balanced_veronese_identity(rng):
    h = make_variety("veronese:n=1,m=2,basis=balanced")
    e = center_of_mass_mc(h, np.eye(3), 50_000, rng)
    assert np.max(np.abs(e.mu_bar - 2 / 3 * np.eye(3)) / e.stderr) <= 4


def test_mc_matches_quadrature(rng):
    h = make_variety("veronese:n=1,m=2")
    g = random_g(3, 4)
    q = center_of_mass_quad(h, g)
    e = center_of_mass_mc(h, g, 200_000, rng)
    assert np.max(np.abs(e.mu_bar - q.mu_bar) / e.stderr) <= 5


def test_mc_estimate_is_hermitian(rng):
    h = make_variety("segre11")
    e = center_of_mass_mc(h, random_g(4), 500, rng)
    assert np.max(np.abs(e.mu_bar - e.mu_bar.conj().T)) <= 1e-12
    assert e.samples == 500 and e.method == "mc"


def test_mc_needs_100_samples(rng):
    with pytest.raises(PreconditionError):
        center_of_mass_mc(make_variety("segre11"), np.eye(4), 99, rng)


def test_quadrature_projective_line_any_g():
    h = make_variety("projective-space:n=1")
    for s in range(5):
        e = center_of_mass_quad(h, random_g(2, s))
        assert np.max(np.abs(e.mu_bar - 0.5 * np.eye(2))) <= 1e-8


def test_quadrature_unit_monomial_diagonal():
    # radial oracle: diag entries int_0^inf r^{2k} / (1+r^2)^... reduce to
    # 2 * [1/(1+r^2)^2 r^2k / (1+r^2+r^4)] integrals; compare with scipy
    from scipy import integrate
    h = make_variety("veronese:n=1,m=2")
    e = center_of_mass_quad(h, np.eye(3))

    def dens(r):
        # density of the Veronese conic at |w| = r, identity basis
        A = np.array([1, r, r * r])
        B = np.array([0, 1, 2 * r])
        aa = A @ A
        return (B @ B * aa - (B @ A) ** 2) / aa ** 2 / np.pi

    for k in range(3):
        val = integrate.quad(lambda r: 2 * np.pi * r * dens(r) * r ** (2 * k) / (1 + r * r + r ** 4), 0, np.inf,
                             epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(e.mu_bar[k, k].real - val) <= 1e-8
    assert np.max(np.abs(e.mu_bar - np.diag(np.diag(e.mu_bar)))) <= 1e-10


def test_quadrature_requires_curve():
    with pytest.raises(SpecError):
        center_of_mass_quad(make_variety("segre11"), np.eye(4))


def test_canonical_scale_is_exact_power_of_two(gen):
    g = (gen.standard_normal((3, 3)) + 1j * gen.standard_normal((3, 3))) * 1e5
    s = canonical_scale(g)
    e = math.frexp(np.max(np.abs(g)))[1]
    assert np.array_equal(np.ldexp(s.real, e), g.real)
    assert np.array_equal(np.ldexp(s.imag, e), g.imag)
    assert 0.5 <= np.max(np.abs(s)) < 1


def test_scalar_invariance_power_of_two_bit_identical(rng):
    h = make_variety("veronese:n=1,m=2")
    g = random_g(3)
    base = center_of_mass_mc(h, g, 500, rng).mu_bar
    for c in (2.0, 0.125, 1024.0):
        assert np.array_equal(center_of_mass_mc(h, c * g, 500, rng).mu_bar, base)


def test_scalar_invariance_complex_within_rounding(rng, gen):
    h = make_variety("veronese:n=1,m=2")
    g = random_g(3)
    base = center_of_mass_mc(h, g, 500, rng).mu_bar
    for c in gen.standard_normal(5) + 1j * gen.standard_normal(5):
        assert np.max(np.abs(center_of_mass_mc(h, c * g, 500, rng).mu_bar - base)) <= 1e-12


def test_cyclic_symmetrize():
    M = np.arange(9, dtype=complex).reshape(3, 3)
    S = cyclic_symmetrize(M)
    P = np.roll(np.eye(3), 1, axis=0)
    assert np.allclose(P @ S @ P.T, S)
    assert np.trace(S) == pytest.approx(np.trace(M))


def test_z_scores_zero_over_zero():
    z = z_scores(np.eye(2) * 0.5, np.zeros((2, 2)), 0.5)
    assert np.all(z == 0)


def test_expect_unitary_single_identity_reduces_to_com():
    h = make_variety("veronese:n=1,m=2")
    r = expect_unitary(h, 1, None, RngStream(0), (64, 64), unitaries=[np.eye(3)])
    e = center_of_mass_quad(h, np.eye(3), (64, 64))
    assert np.array_equal(r.estimate, e.mu_bar)
    assert not r.passed  # stderr undefined with one sample


def test_expect_unitary_projective_line():
    h = make_variety("projective-space:n=1")
    r = expect_unitary(h, 100, None, RngStream(1), (32, 32))
    assert r.deviation <= 1e-8 and r.passed


def test_expect_sl_small(rng):
    h = make_variety("veronese:n=1,m=2")
    r = expect_sl(h, EnsembleSpec("ginibre-polar", 3), 300, 300, rng)
    assert r.max_z <= 4
    assert r.estimate.shape == (3, 3)
    assert np.max(np.abs(r.estimate - r.estimate.conj().T)) <= 1e-12
    assert abs(np.trace(r.estimate).real - 2) <= 4 * np.sqrt(np.sum(np.diag(r.stderr) ** 2))


def test_expect_sl_thread_count_does_not_change_result(rng):
    h = make_variety("segre11")
    spec = EnsembleSpec("eig-lognormal", 4)
    a = expect_sl(h, spec, 120, 150, rng, threads=1)
    b = expect_sl(h, spec, 120, 150, rng, threads=4)
    assert np.array_equal(a.estimate, b.estimate) and np.array_equal(a.stderr, b.stderr)


def test_expect_sl_dimension_mismatch(rng):
    with pytest.raises(SpecError):
        expect_sl(make_variety("segre11"), EnsembleSpec("ginibre-polar", 3), 100, 100, rng)


def test_symmetrize_agrees_and_reduces_stderr(rng):
    h = make_variety("veronese:n=1,m=2")
    spec = EnsembleSpec("ginibre-polar", 3)
    a = expect_sl(h, spec, 400, 200, rng)
    b = expect_sl(h, spec, 400, 200, rng, symmetrize=True)
    comb = np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    assert np.max(np.abs(a.estimate - b.estimate) / comb) <= 4
    assert np.mean(b.stderr <= a.stderr) >= 0.9
    assert b.symmetrized


def test_stderr_blowup_flag_present(rng):
    h = make_variety("veronese:n=1,m=2")
    r = expect_sl(h, EnsembleSpec("eig-lognormal", 3), 100, 100, rng)
    assert "stderr_blowup" in r.diagnostics and "trace_deviation" in r.diagnostics


def test_trace_law_over_seeds():
    # |trace - Vol| <= 4 stderr_trace in the overwhelming majority of seeded runs
    h = make_variety("veronese:n=1,m=2")
    g = random_g(3, 9)
    hits = sum(center_of_mass_mc(h, g, 1000, RngStream(s)).trace_ok(4.0, 0.0) for s in range(100))
    assert hits >= 99
