"""Dense complex linear algebra at desk scale (N <= 64).

Matrices are plain ``complex128`` numpy arrays.  Inner products follow
``<u, v> = sum_i u_i * conj(v_i)`` (linear in the first slot) everywhere in the
package; :func:`inner` implements it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, PreconditionError, RankError

MAX_DIM = 64
HERMITIAN_RTOL = 1e-12
UNIT_DET_TOL = 1e-10


def inner(u, v):
    """``sum_i u_i conj(v_i)`` along the last axis."""
    return np.sum(np.asarray(u) * np.conj(np.asarray(v)), axis=-1)


def adjoint(a):
    return np.conj(np.swapaxes(a, -1, -2))


def as_matrix(a, *, square: bool = True) -> np.ndarray:
    """Validate and return ``a`` as a finite complex128 matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise PreconditionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise PreconditionError(f"expected a square matrix, got shape {m.shape}")
    if max(m.shape) > MAX_DIM:
        raise PreconditionError(f"dimension {max(m.shape)} exceeds the desk-scale cap {MAX_DIM}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError("matrix has non-finite entries")
    return m


def max_norm(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermitian_defect(a) -> float:
    """``||A - A*||_max / ||A||_max`` (0 for the zero matrix)."""
    scale = max_norm(a)
    if scale == 0.0:
        return 0.0
    return max_norm(a - adjoint(a)) / scale


def _check_hermitian(h, rtol=HERMITIAN_RTOL):
    d = hermitian_defect(h)
    if d > rtol:
        raise PreconditionError(f"matrix is not hermitian (relative defect {d:.3e} > {rtol:.0e})")


@dataclass(frozen=True)
class HermitianPD:
    """Positive-definite hermitian matrix, optionally constrained to det = 1."""

    matrix: np.ndarray
    unit_det: bool = False
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        _check_hermitian(m)
        w = np.linalg.eigvalsh(m)
        if not w[0] > 0:
            raise PreconditionError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
        if self.unit_det:
            d = float(np.prod(w))
            if abs(d - 1.0) > UNIT_DET_TOL:
                raise PreconditionError(f"|det - 1| = {abs(d - 1.0):.3e} exceeds {UNIT_DET_TOL:.0e}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition ``H = U diag(lam) U*`` of a hermitian matrix.

    Returns eigenvalues in ascending order and a unitary matrix of
    eigenvectors (columns).  The input must be hermitian to 1e-12 relative.
    """
    m = as_matrix(h)
    _check_hermitian(m)
    # symmetrize so LAPACK sees exactly hermitian data
    m = 0.5 * (m + adjoint(m))
    try:
        w, u = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails here
        raise NumericError(f"hermitian eigensolver did not converge: {exc}") from exc
    return w, u


def _fix_qr_phases(q, r):
    d = np.diagonal(r, axis1=-2, axis2=-1)
    absd = np.abs(d)
    ph = np.where(absd > 0, d / np.where(absd > 0, absd, 1.0), 1.0)
    q = q * ph[..., None, :]
    r = np.conj(ph)[..., :, None] * r
    # diagonal is real positive by construction; drop the round-off imaginary part
    idx = np.arange(r.shape[-1])
    r[..., idx, idx] = absd
    return q, r


def qr_phase_fixed(a) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization with ``diag(R)`` real and positive.

    With this normalization the factorization of a nonsingular matrix is
    unique, which is what makes ``Q`` Haar-distributed when ``A`` is Ginibre.
    """
    m = as_matrix(a)
    q, r = np.linalg.qr(m)
    d = np.abs(np.diagonal(r))
    scale = max(max_norm(m), np.finfo(float).tiny)
    if np.min(d) <= 1e-14 * scale:
        raise NumericError(f"matrix is numerically rank deficient (min |R_ii| = {np.min(d):.3e})")
    return _fix_qr_phases(q, r)


def qr_phase_fixed_stack(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched :func:`qr_phase_fixed` over the leading axis (no validation)."""
    q, r = np.linalg.qr(a)
    return _fix_qr_phases(q, r)


def det(a) -> complex:
    """Determinant via LU with partial pivoting; exact product for triangular input."""
    m = as_matrix(a)
    if np.array_equal(m, np.triu(m)) or np.array_equal(m, np.tril(m)):
        out = complex(1.0)
        for x in np.diagonal(m):
            out *= complex(x)
        return out
    return complex(np.linalg.det(m))


def principal_root(z: complex, n: int) -> complex:
    """Principal ``n``-th root, argument taken in (-pi, pi]."""
    z = complex(z)
    if z == 0:
        return 0j
    r, phi = abs(z), np.angle(z)
    if phi == -np.pi:
        phi = np.pi
    return r ** (1.0 / n) * complex(np.cos(phi / n), np.sin(phi / n))


def unit_det_normalize(a) -> np.ndarray:
    """``A / det(A)**(1/N)`` using the principal root; the result has det 1."""
    m = as_matrix(a)
    d = det(m)
    if d == 0 or not np.isfinite(abs(d)):
        raise PreconditionError("cannot normalize a singular matrix to unit determinant")
    return m / principal_root(d, m.shape[0])


def sqrt_pd(h) -> np.ndarray:
    """Hermitian square root of a positive-definite matrix."""
    w, u = eigh(h)
    if w[0] <= 0:
        raise PreconditionError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    return (u * np.sqrt(w)) @ adjoint(u)


def polar(a) -> tuple[HermitianPD, np.ndarray]:
    """Left polar decomposition ``A = P U`` with ``P = (A A*)^(1/2)``."""
    m = as_matrix(a)
    w, v = eigh(m @ adjoint(m))
    if w[0] <= 1e-28 * max(w[-1], np.finfo(float).tiny):
        raise PreconditionError("polar decomposition requires a nonsingular matrix")
    s = np.sqrt(w)
    p = (v * s) @ adjoint(v)
    u = (v / s) @ (adjoint(v) @ m)
    return HermitianPD(p), u


def orthonormalize(vectors, tol: float = 1e-10) -> list[np.ndarray]:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Raises :class:`RankError` naming the first vector whose residual norm,
    relative to its original norm, falls below ``tol``.
    """
    out: list[np.ndarray] = []
    for k, v in enumerate(vectors):
        x = np.array(v, dtype=np.complex128)
        if x.ndim != 1:
            raise PreconditionError("orthonormalize expects a list of 1-D vectors")
        nrm0 = np.linalg.norm(x)
        for _ in range(2):
            for e in out:
                x = x - inner(x, e) * e
        nrm = np.linalg.norm(x)
        if nrm0 == 0 or nrm <= tol * nrm0:
            raise RankError(f"vector {k} is linearly dependent on its predecessors", index=k)
        out.append(x / nrm)
    return out
