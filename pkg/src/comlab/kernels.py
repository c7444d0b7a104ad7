"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (:func:`hessian_batch`, :func:`accumulate_mu`,
:func:`metropolis_walk`) dispatch to the backend chosen in
:mod:`comlab._backend`.  Both flavours are always importable as
``kernels.numpy_impl`` and ``kernels.numba_impl`` (the latter is ``None`` when
numba is missing) so tests and the benchmark can compare them directly.

Array conventions: ``A`` is ``(K, N)`` (images ``g V(w_k)`` of the lift),
``B`` is ``(K, N, n)`` (images ``g dV/dw`` of the lift Jacobian).
"""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ._backend import HAVE_NUMBA, USE_NUMBA, BACKEND

# a point counts as immersive when the hessian's smallest eigenvalue (numpy) or
# Cholesky pivot (numba) exceeds IMMERSION_RTOL * max_a |B_a|^2 / |A|^2
IMMERSION_RTOL = 1e-14


# --------------------------------------------------------------------------- numpy

def _project_off(A, B):
    # B minus its component along A, applied twice for stability
    aa = np.einsum("ki,ki->k", A, np.conj(A)).real
    C = B
    for _ in range(2):
        ca = np.einsum("kia,ki->ka", C, np.conj(A)) / aa[:, None]
        C = C - A[:, :, None] * ca[:, None, :]
    return C, aa


def _hessian_batch_np(A, B):
    C, aa = _project_off(A, B)
    h = np.einsum("kia,kib->kab", C, np.conj(C)) / aa[:, None, None]
    h = 0.5 * (h + np.conj(np.swapaxes(h, 1, 2)))
    lam = np.linalg.eigvalsh(h)
    scale = np.max(np.sum(np.abs(B) ** 2, axis=1), axis=1) / aa
    ok = lam[:, 0] > IMMERSION_RTOL * scale
    dets = np.prod(lam, axis=1)
    return h, dets, ok


def _accumulate_mu_np(A, w):
    aa = np.einsum("ki,ki->k", A, np.conj(A)).real
    x = np.einsum("ki,kj->kij", A, np.conj(A)) * (w / aa)[:, None, None]
    return x.sum(axis=0), (x.real ** 2).sum(axis=0), (x.imag ** 2).sum(axis=0)


def _log_target_np(x):
    d = x.shape[0] + 1
    lam = np.empty(d)
    lam[:-1] = np.exp(x)
    lam[-1] = np.exp(-x.sum())
    s = 0.0
    for i in range(d):
        for j in range(i + 1, d):
            s += np.log(abs(lam[i] - lam[j]))
    return 2.0 * s - 0.5 * float(np.dot(lam, lam)) + float(x.sum())


def _metropolis_walk_np(x0, incr, logu, record_every, record_from):
    x = x0.copy()
    lp = _log_target_np(x)
    steps = incr.shape[0]
    nrec = 0 if steps <= record_from else (steps - record_from) // record_every
    out = np.empty((nrec, x.shape[0]))
    accepted = 0
    r = 0
    for t in range(steps):
        y = x + incr[t]
        lq = _log_target_np(y)
        if logu[t] < lq - lp:
            x, lp = y, lq
            accepted += 1
        if t >= record_from and (t - record_from + 1) % record_every == 0 and r < nrec:
            out[r] = x
            r += 1
    return out, accepted


numpy_impl = SimpleNamespace(
    hessian_batch=_hessian_batch_np,
    accumulate_mu=_accumulate_mu_np,
    metropolis_walk=_metropolis_walk_np,
    log_target=_log_target_np,
)


# --------------------------------------------------------------------------- numba

numba_impl = None
if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _hessian_batch_nb(A, B):
        K, N = A.shape
        n = B.shape[2]
        h = np.empty((K, n, n), dtype=np.complex128)
        dets = np.empty(K)
        ok = np.empty(K, dtype=np.bool_)
        C = np.empty((N, n), dtype=np.complex128)
        L = np.empty((n, n), dtype=np.complex128)
        for k in range(K):
            aa = 0.0
            for i in range(N):
                aa += A[k, i].real ** 2 + A[k, i].imag ** 2
            # project B off A (twice, for stability); h = C* C / |A|^2
            scale = 0.0
            for a in range(n):
                nb = 0.0
                for i in range(N):
                    C[i, a] = B[k, i, a]
                    nb += B[k, i, a].real ** 2 + B[k, i, a].imag ** 2
                scale = max(scale, nb / aa)
                for _ in range(2):
                    s = 0j
                    for i in range(N):
                        s += C[i, a] * np.conj(A[k, i])
                    s /= aa
                    for i in range(N):
                        C[i, a] -= s * A[k, i]
            for a in range(n):
                for b in range(a, n):
                    s = 0j
                    for i in range(N):
                        s += C[i, a] * np.conj(C[i, b])
                    v = s / aa
                    if a == b:
                        v = complex(v.real, 0.0)
                    h[k, a, b] = v
                    h[k, b, a] = np.conj(v)
            # Cholesky: positivity test and determinant in one pass
            good = True
            d = 1.0
            for j in range(n):
                s = h[k, j, j].real
                for p in range(j):
                    s -= L[j, p].real ** 2 + L[j, p].imag ** 2
                if not s > IMMERSION_RTOL * scale:
                    good = False
                    break
                ljj = np.sqrt(s)
                L[j, j] = ljj
                d *= s
                for i in range(j + 1, n):
                    t = h[k, i, j]
                    for p in range(j):
                        t -= L[i, p] * np.conj(L[j, p])
                    L[i, j] = t / ljj
            ok[k] = good
            dets[k] = d if good else 0.0
        return h, dets, ok

    @njit(cache=True, nogil=True)
    def _accumulate_mu_nb(A, w):
        K, N = A.shape
        s1 = np.zeros((N, N), dtype=np.complex128)
        s2r = np.zeros((N, N))
        s2i = np.zeros((N, N))
        for k in range(K):
            aa = 0.0
            for i in range(N):
                aa += A[k, i].real ** 2 + A[k, i].imag ** 2
            c = w[k] / aa
            for i in range(N):
                for j in range(N):
                    x = A[k, i] * np.conj(A[k, j]) * c
                    s1[i, j] += x
                    s2r[i, j] += x.real * x.real
                    s2i[i, j] += x.imag * x.imag
        return s1, s2r, s2i

    @njit(cache=True, nogil=True)
    def _log_target_nb(x):
        d = x.shape[0] + 1
        lam = np.empty(d)
        tot = 0.0
        for i in range(d - 1):
            lam[i] = np.exp(x[i])
            tot += x[i]
        lam[d - 1] = np.exp(-tot)
        s = 0.0
        for i in range(d):
            for j in range(i + 1, d):
                s += np.log(abs(lam[i] - lam[j]))
        q = 0.0
        for i in range(d):
            q += lam[i] * lam[i]
        return 2.0 * s - 0.5 * q + tot

    @njit(cache=True, nogil=True)
    def _metropolis_walk_nb(x0, incr, logu, record_every, record_from):
        x = x0.copy()
        y = np.empty_like(x)
        lp = _log_target_nb(x)
        steps = incr.shape[0]
        nrec = 0 if steps <= record_from else (steps - record_from) // record_every
        out = np.empty((nrec, x.shape[0]))
        accepted = 0
        r = 0
        for t in range(steps):
            for i in range(x.shape[0]):
                y[i] = x[i] + incr[t, i]
            lq = _log_target_nb(y)
            if logu[t] < lq - lp:
                x[:] = y
                lp = lq
                accepted += 1
            if t >= record_from and (t - record_from + 1) % record_every == 0 and r < nrec:
                out[r] = x
                r += 1
        return out, accepted

    numba_impl = SimpleNamespace(
        hessian_batch=_hessian_batch_nb,
        accumulate_mu=_accumulate_mu_nb,
        metropolis_walk=_metropolis_walk_nb,
        log_target=_log_target_nb,
    )


_impl = numba_impl if USE_NUMBA else numpy_impl


def hessian_batch(A, B):
    """Kähler hessians of ``log ||A(w)||^2`` for a batch of points.

    Returns ``(h, dets, ok)``: the ``(K, n, n)`` hessians, their determinants
    and a mask of points where ``h`` is positive definite (``dets`` is only
    meaningful where ``ok``).
    """
    A = np.ascontiguousarray(A, dtype=np.complex128)
    B = np.ascontiguousarray(B, dtype=np.complex128)
    return _impl.hessian_batch(A, B)


def accumulate_mu(A, w):
    """Sums of ``w_k mu_k`` and of the squares of its real and imaginary parts."""
    A = np.ascontiguousarray(A, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _impl.accumulate_mu(A, w)


def metropolis_walk(x0, incr, logu, record_every=1, record_from=0):
    """Random-walk Metropolis on log-eigenvalues of a det-1 positive matrix.

    ``incr`` holds the pre-drawn proposal increments and ``logu`` the log of
    pre-drawn uniforms, so both backends consume identical variates.
    """
    return _impl.metropolis_walk(
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(incr, dtype=np.float64),
        np.ascontiguousarray(logu, dtype=np.float64),
        int(record_every),
        int(record_from),
    )


def log_target(x):
    return _impl.log_target(np.ascontiguousarray(x, dtype=np.float64))


__all__ = ["BACKEND", "hessian_batch", "accumulate_mu", "metropolis_walk", "log_target",
           "numpy_impl", "numba_impl"]
