from fractions import Fraction

import numpy as np
import pytest

from comlab.errors import SpecError
from comlab.rng import RngStream
from comlab.varieties import VarietySpec, make_variety, quadrature_points_curve, sample_point_fs, volume
from comlab.verify import SHIPPED_VARIETIES, lift_jacobian_fd_error


@pytest.mark.parametrize("text,N,vol", [
    ("projective-space:n=1", 2, Fraction(1)),
    ("projective-space:n=2", 3, Fraction(1, 2)),
    ("veronese:n=1,m=2,basis=unit-monomial", 3, Fraction(2)),
    ("veronese:n=1,m=3,basis=balanced", 4, Fraction(3)),
    ("veronese:n=2,m=2,basis=unit-monomial", 6, Fraction(2)),
    ("segre11", 4, Fraction(1)),
])
def test_dimensions_and_volumes(text, N, vol):
    h = make_variety(text)
    assert h.N == N
    assert h.volume_exact == vol
    assert volume(h) == float(vol)
    assert len(h.basis_labels()) == N


def test_spec_round_trip_and_default_basis():
    s = VarietySpec.parse("veronese:n=1,m=2")
    assert str(s) == "veronese:n=1,m=2,basis=unit-monomial"
    assert VarietySpec.parse(str(s)) == s


@pytest.mark.parametrize("text,token", [
    ("veronese:n=1", "m"),
    ("projective-space", "n"),
    ("veronese:n=1,m=2,basis=weird", "weird"),
    ("veronese:n=1,m=2,k=3", "k"),
    ("grassmannian:n=2", "grassmannian"),
])
def test_spec_errors_name_token(text, token):
    with pytest.raises(SpecError, match=token):
        VarietySpec.parse(text)


def test_monomial_order():
    assert make_variety("veronese:n=1,m=2").basis_labels() == ["1", "w1", "w1^2"]
    assert make_variety("veronese:n=2,m=2").basis_labels() == ["1", "w1", "w2", "w1^2", "w1*w2", "w2^2"]


def test_balanced_lift_scaling():
    h = make_variety("veronese:n=1,m=2,basis=balanced")
    v = h.lift(np.array([2.0 + 0j]))
    assert np.allclose(v, [1, np.sqrt(2) * 2, 4])


def test_segre_lift():
    h = make_variety("segre11")
    v = h.lift(np.array([2.0, 3j]))
    assert np.allclose(v, [1, 2, 3j, 6j])


@pytest.mark.parametrize("name", SHIPPED_VARIETIES)
def test_lift_jacobian_matches_finite_differences(name, gen):
    h = make_variety(name)
    pts = h.sample_points(gen, 20)
    for w in pts.w:
        assert lift_jacobian_fd_error(h, w) <= 1e-6


def test_fs_sampler_disk_probability(gen):
    # for P^1 under FS, P(|w| < 1) = 1/2 and E[1/(1+|w|^2)] = 1/2
    h = make_variety("projective-space:n=1")
    K = 100_000
    w = h.sample_points(gen, K).w[:, 0]
    inside = (np.abs(w) < 1).astype(float)
    assert abs(inside.mean() - 0.5) <= 4 * 0.5 / np.sqrt(K)
    r = 1 / (1 + np.abs(w) ** 2)
    assert abs(r.mean() - 0.5) <= 4 * r.std() / np.sqrt(K)


def test_base_density_integrates_to_one():
    h = make_variety("projective-space:n=1")
    w, lw = quadrature_points_curve(h, (128, 16))
    assert abs(np.sum(h.base_density(w[:, None]) * lw) - 1) <= 1e-12


def test_base_density_values():
    p1 = make_variety("projective-space:n=1")
    assert p1.base_density(np.array([1.0 + 0j])) == pytest.approx(1 / (4 * np.pi))
    s = make_variety("segre11")
    assert s.base_density(np.array([0j, 0j])) == pytest.approx(1 / np.pi ** 2)


def test_sample_point_fs_reproducible():
    h = make_variety("segre11")
    a = sample_point_fs(h, RngStream(3))
    b = sample_point_fs(h, RngStream(3))
    assert np.array_equal(a.w, b.w) and a.base_density == b.base_density


def test_quadrature_rejects_bad_input():
    with pytest.raises(SpecError):
        quadrature_points_curve(make_variety("projective-space:n=1"), (1, 8))
    with pytest.raises(SpecError):
        quadrature_points_curve(make_variety("segre11"), (8, 8))


def test_quadrature_integrates_polynomial_moment():
    # int_C |w|^2 / (1+|w|^2)^4 dA = pi * int_0^inf r^3 2 / (1+r^2)^4 dr = pi / 6
    h = make_variety("projective-space:n=1")
    w, lw = quadrature_points_curve(h, (64, 8))
    val = np.sum(np.abs(w) ** 2 / (1 + np.abs(w) ** 2) ** 4 * lw)
    assert abs(val - np.pi / 6) <= 1e-12
