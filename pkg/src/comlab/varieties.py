"""Explicitly parametrized embedded varieties X in P^(N-1).

Three families are shipped, all with polynomial lifts ``V(w)`` on a single
affine chart so that Jacobians are exact:

* ``projective-space:n=d``: ``V(w) = (1, w_1, ..., w_d)``, ``N = d + 1``.
* ``veronese:n=d,m=k,basis=unit-monomial|balanced``: all degree-``k``
  monomials ``x^a`` of ``x = (1, w_1, ..., w_d)``.  Exponent vectors
  ``a = (a_0, ..., a_d)`` are listed in *decreasing* lexicographic order, so the
  first coordinate is ``x_0^k = 1`` and ``veronese`` with ``k = 1`` coincides
  with ``projective-space``.  The balanced basis scales each monomial by
  ``sqrt(multinomial(k; a))`` so that ``||V(w)||^2 = (1 + ||w||^2)^k``.
* ``segre11``: ``V(w_1, w_2) = (1, w_1, w_2, w_1 w_2)`` for P^1 x P^1 in P^3.

Parameter points are drawn from the Fubini-Study probability law of the
parameter space (P^n, or P^1 x P^1 for the Segre variety).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import PreconditionError, SpecError
from .linalg import UNIT_DET_TOL, as_matrix, det
from .rng import RngStream

KINDS = ("projective-space", "veronese", "segre11")
BASES = ("unit-monomial", "balanced")


@dataclass(frozen=True)
class VarietySpec:
    kind: str
    n: int | None = None
    m: int | None = None
    basis: str | None = None
    pre_embedding: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown variety kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.kind == "segre11":
            if self.n not in (None, 2) or self.m is not None or self.basis is not None:
                raise SpecError("segre11 takes no parameters")
            object.__setattr__(self, "n", 2)
        else:
            if self.n is None:
                raise SpecError(f"{self.kind} is missing required parameter 'n'")
            if int(self.n) < 1:
                raise SpecError(f"{self.kind} requires n >= 1, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
        if self.kind == "projective-space" and (self.m is not None or self.basis is not None):
            raise SpecError("projective-space takes only the parameter 'n'")
        if self.kind == "veronese":
            if self.m is None:
                raise SpecError("veronese is missing required parameter 'm'")
            if int(self.m) < 1:
                raise SpecError(f"veronese requires m >= 1, got {self.m}")
            object.__setattr__(self, "m", int(self.m))
            basis = self.basis or "unit-monomial"
            if basis not in BASES:
                raise SpecError(f"unknown veronese basis {basis!r}; expected one of {', '.join(BASES)}")
            object.__setattr__(self, "basis", basis)
        if self.N > 64:
            raise SpecError(f"ambient dimension N={self.N} exceeds the desk-scale cap 64")
        if self.pre_embedding is not None:
            g0 = as_matrix(self.pre_embedding)
            if g0.shape != (self.N, self.N):
                raise SpecError(f"pre_embedding must be {self.N}x{self.N}, got {g0.shape}")
            if abs(det(g0) - 1) > UNIT_DET_TOL:
                raise SpecError("pre_embedding must have determinant 1")
            g0 = g0.copy()
            g0.flags.writeable = False
            object.__setattr__(self, "pre_embedding", g0)

    @property
    def N(self) -> int:
        if self.kind == "projective-space":
            return self.n + 1
        if self.kind == "veronese":
            return math.comb(self.n + self.m, self.n)
        return 4

    @classmethod
    def parse(cls, text: str) -> VarietySpec:
        """Parse ``kind:key=value,...`` (e.g. ``veronese:n=1,m=2,basis=balanced``)."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.strip()
        kv = {}
        if rest.strip():
            for tok in rest.split(","):
                key, eq, val = tok.partition("=")
                key, val = key.strip(), val.strip()
                if not eq or not key or not val:
                    raise SpecError(f"malformed token {tok!r} in variety {text!r}; expected key=value")
                if key not in ("n", "m", "basis"):
                    raise SpecError(f"unknown variety parameter {key!r} in {text!r}")
                kv[key] = val
        for key in ("n", "m"):
            if key in kv:
                try:
                    kv[key] = int(kv[key])
                except ValueError:
                    raise SpecError(f"variety parameter {key!r} must be an integer in {text!r}")
        return cls(kind, **kv)

    def __str__(self) -> str:
        if self.kind == "segre11":
            return "segre11"
        if self.kind == "projective-space":
            return f"projective-space:n={self.n}"
        return f"veronese:n={self.n},m={self.m},basis={self.basis}"

    def __eq__(self, other):
        if not isinstance(other, VarietySpec):
            return NotImplemented
        if str(self) != str(other):
            return False
        a, b = self.pre_embedding, other.pre_embedding
        if a is None or b is None:
            return a is b
        return bool(np.array_equal(a, b))

    def __hash__(self):
        return hash(str(self))


@dataclass(frozen=True)
class PointSample:
    """One parameter point with its lift, lift Jacobian and sampling density."""

    w: np.ndarray
    lift: np.ndarray
    jacobian: np.ndarray
    base_density: float


@dataclass(frozen=True)
class PointBatch:
    w: np.ndarray          # (K, n)
    lift: np.ndarray       # (K, N)
    jacobian: np.ndarray   # (K, N, n)
    base_density: np.ndarray  # (K,)

    def __len__(self):
        return self.w.shape[0]

    def __getitem__(self, k) -> PointSample:
        return PointSample(self.w[k], self.lift[k], self.jacobian[k], float(self.base_density[k]))


def _exponents(n: int, m: int) -> np.ndarray:
    exps = [a for a in itertools.product(range(m + 1), repeat=n + 1) if sum(a) == m]
    exps.sort(reverse=True)
    return np.array(exps, dtype=np.int64)


def _fs_density(w: np.ndarray) -> np.ndarray:
    """FS probability density of P^d on the chart C^d, for ``w`` of shape (K, d)."""
    d = w.shape[1]
    r2 = np.sum(w.real ** 2 + w.imag ** 2, axis=1)
    return math.factorial(d) / math.pi ** d * (1.0 + r2) ** (-(d + 1))


def _fs_draw(gen: np.random.Generator, count: int, d: int) -> np.ndarray:
    """``count`` FS-distributed points of P^d in the chart ``zeta_0 != 0``."""
    z = (gen.standard_normal((count, d + 1)) + 1j * gen.standard_normal((count, d + 1))) * math.sqrt(0.5)
    bad = z[:, 0] == 0
    while np.any(bad):  # measure zero; resample to stay in the chart
        k = int(bad.sum())
        z[bad] = (gen.standard_normal((k, d + 1)) + 1j * gen.standard_normal((k, d + 1))) * math.sqrt(0.5)
        bad = z[:, 0] == 0
    return z[:, 1:] / z[:, :1]


class VarietyHandle:
    """Immutable view of an embedded variety: lift, Jacobian, sampler, volume."""

    def __init__(self, spec: VarietySpec):
        self.spec = spec
        self.n = spec.n
        self.N = spec.N
        self.pre_embedding = spec.pre_embedding
        if spec.kind == "projective-space":
            self._exps = _exponents(spec.n, 1)
            self._coef = np.ones(self.N)
            self._volume = Fraction(1, math.factorial(spec.n))
        elif spec.kind == "veronese":
            self._exps = _exponents(spec.n, spec.m)
            if spec.basis == "balanced":
                self._coef = np.array([math.sqrt(math.factorial(spec.m) / math.prod(math.factorial(a) for a in e))
                                       for e in self._exps])
            else:
                self._coef = np.ones(self.N)
            self._volume = Fraction(spec.m ** spec.n, math.factorial(spec.n))
        else:
            self._exps = None
            self._coef = None
            self._volume = Fraction(1)

    def __repr__(self):
        return f"VarietyHandle({self.spec})"

    @property
    def volume(self) -> float:
        """Vol(X, L) = (c_1(L)^n)[X] / n!."""
        return float(self._volume)

    @property
    def volume_exact(self) -> Fraction:
        return self._volume

    def basis_labels(self) -> list[str]:
        """Human-readable names of the reference basis, in matrix order."""
        if self._exps is None:
            return ["1", "w1", "w2", "w1*w2"]
        labels = []
        for e in self._exps:
            parts = [f"w{i}" + (f"^{p}" if p > 1 else "") for i, p in enumerate(e) if i > 0 and p > 0]
            labels.append("*".join(parts) if parts else "1")
        return labels

    # -- lifts ---------------------------------------------------------------

    def _as_batch(self, w) -> tuple[np.ndarray, bool]:
        w = np.asarray(w, dtype=np.complex128)
        single = w.ndim <= 1
        w = w.reshape(1, -1) if single else w
        if w.shape[1] != self.n:
            raise PreconditionError(f"expected {self.n} parameter coordinates, got {w.shape[1]}")
        return w, single

    def lift(self, w) -> np.ndarray:
        """``V(w)``; ``w`` of shape (n,) or (K, n)."""
        w, single = self._as_batch(w)
        if self._exps is None:
            V = np.stack([np.ones(len(w)), w[:, 0], w[:, 1], w[:, 0] * w[:, 1]], axis=1)
        else:
            x = np.concatenate([np.ones((len(w), 1), dtype=np.complex128), w], axis=1)
            V = self._coef * np.prod(x[:, None, :] ** self._exps[None, :, :], axis=2)
        if self.pre_embedding is not None:
            V = V @ self.pre_embedding.T
        return V[0] if single else V

    def lift_jacobian(self, w) -> np.ndarray:
        """``dV/dw`` of shape (N, n), or (K, N, n) for a batch."""
        w, single = self._as_batch(w)
        K = len(w)
        if self._exps is None:
            J = np.zeros((K, 4, 2), dtype=np.complex128)
            J[:, 1, 0] = 1
            J[:, 2, 1] = 1
            J[:, 3, 0] = w[:, 1]
            J[:, 3, 1] = w[:, 0]
        else:
            x = np.concatenate([np.ones((K, 1), dtype=np.complex128), w], axis=1)
            J = np.empty((K, self.N, self.n), dtype=np.complex128)
            for a in range(self.n):
                e = self._exps.copy()
                mult = e[:, a + 1].astype(float)
                e[:, a + 1] = np.maximum(e[:, a + 1] - 1, 0)
                J[:, :, a] = (self._coef * mult) * np.prod(x[:, None, :] ** e[None, :, :], axis=2)
        if self.pre_embedding is not None:
            J = np.einsum("ij,kja->kia", self.pre_embedding, J)
        return J[0] if single else J

    # -- sampling ------------------------------------------------------------

    def base_density(self, w) -> np.ndarray:
        """Lebesgue density on R^(2n) of the parameter sampler at ``w``."""
        w, single = self._as_batch(w)
        if self.spec.kind == "segre11":
            d = _fs_density(w[:, :1]) * _fs_density(w[:, 1:])
        else:
            d = _fs_density(w)
        return d[0] if single else d

    def _draw_params(self, gen: np.random.Generator, count: int) -> np.ndarray:
        if self.spec.kind == "segre11":
            return np.concatenate([_fs_draw(gen, count, 1), _fs_draw(gen, count, 1)], axis=1)
        return _fs_draw(gen, count, self.n)

    def points_at(self, w) -> PointBatch:
        w, _ = self._as_batch(w)
        return PointBatch(w, self.lift(w), self.lift_jacobian(w), self.base_density(w))

    def sample_points(self, gen: np.random.Generator, count: int) -> PointBatch:
        """``count`` FS-distributed parameter points drawn from ``gen``."""
        return self.points_at(self._draw_params(gen, count))

    def sample_point_fs(self, rng: RngStream) -> PointSample:
        return self.sample_points(rng.generator(), 1)[0]


def make_variety(spec: VarietySpec | str) -> VarietyHandle:
    if isinstance(spec, str):
        spec = VarietySpec.parse(spec)
    return VarietyHandle(spec)


def volume(handle: VarietyHandle) -> float:
    return handle.volume


def sample_point_fs(handle: VarietyHandle, rng: RngStream) -> PointSample:
    return handle.sample_point_fs(rng)


def quadrature_points_curve(handle: VarietyHandle | None, levels: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor rule on the chart C of a curve: ``w = tan(t) e^(i phi)``.

    ``t`` runs over ``R`` Gauss-Legendre nodes on (0, pi/2) and ``phi`` over ``A``
    equispaced angles.  The returned weights include the Lebesgue factor
    ``r dr dphi = tan(t) sec(t)^2 dt dphi``, so ``sum(weights * f(w))``
    approximates ``int_C f dLeb``.
    """
    if handle is not None and handle.n != 1:
        raise SpecError(f"curve quadrature needs a variety with n = 1, got n = {handle.n}")
    R, A = (int(v) for v in levels)
    if R < 2 or A < 2:
        raise SpecError(f"quadrature levels must be >= 2, got {(R, A)}")
    x, wx = np.polynomial.legendre.leggauss(R)
    t = (x + 1.0) * (math.pi / 4)
    wt = wx * (math.pi / 4)
    phi = 2 * math.pi * np.arange(A) / A
    r = np.tan(t)
    radial = wt * r / np.cos(t) ** 2
    w = (r[:, None] * np.exp(1j * phi)[None, :]).ravel()
    weights = np.repeat(radial * (2 * math.pi / A), A)
    return w, weights
