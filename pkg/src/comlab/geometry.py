"""Pointwise Fubini-Study geometry of ``g . X``.

For a chart point ``w`` with lift ``V = V(w)`` and Jacobian ``J = dV/dw`` put
``A = g V`` and ``B = g J``.  The Kähler form of the metric induced by ``H_g`` is
``(i / 2 pi) dd^c log ||A||^2`` with coefficients

    h_ab = (<B_a, B_b> <A, A> - <B_a, A> <A, B_b>) / <A, A>^2 = <C_a, C_b> / <A, A>,

and the volume form ``omega^n / n!`` has Lebesgue density ``det(h) / pi^n`` in
chart coordinates.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ImmersionError, PreconditionError
from .linalg import as_matrix, inner, orthonormalize
from .varieties import PointSample, VarietyHandle

FRAME_TOL = 1e-10


def _check_lift(p: PointSample):
    if not np.any(p.lift):
        raise PreconditionError("lift vanishes at this point")


def kahler_hessian(p: PointSample, g) -> np.ndarray:
    """Coefficient matrix ``h_ab`` of the pulled-back FS metric at ``p``."""
    _check_lift(p)
    g = as_matrix(g)
    A = (g @ p.lift)[None, :]
    B = (g @ p.jacobian)[None, :, :]
    h, _, ok = kernels.hessian_batch(A, B)
    if not ok[0]:
        raise ImmersionError(f"hessian is not positive definite at w = {p.w}", w=p.w)
    return h[0]


def volume_density(p: PointSample, g) -> float:
    """Lebesgue density of ``d nu_{H_g}`` at ``p``: ``det(h) / pi^n``."""
    _check_lift(p)
    g = as_matrix(g)
    _, dets, ok = kernels.hessian_batch((g @ p.lift)[None, :], (g @ p.jacobian)[None, :, :])
    if not ok[0]:
        raise ImmersionError(f"hessian is not positive definite at w = {p.w}", w=p.w)
    return float(dets[0]) / math.pi ** p.jacobian.shape[1]


def mu_point(p: PointSample | np.ndarray, g) -> np.ndarray:
    """Rank-one moment matrix ``A A* / ||A||^2`` with ``A = g V``."""
    lift = p.lift if isinstance(p, PointSample) else np.asarray(p, dtype=np.complex128)
    if not np.any(lift):
        raise PreconditionError("lift vanishes at this point")
    A = as_matrix(g) @ lift
    return np.outer(A, np.conj(A)) / np.real(np.vdot(A, A))


def tangent_frame(p: PointSample) -> np.ndarray:
    """Orthonormal basis (as columns, shape (N, n)) of T_x X inside (C x)^perp."""
    _check_lift(p)
    x = p.lift / np.linalg.norm(p.lift)
    cols = [p.jacobian[:, a] - inner(p.jacobian[:, a], x) * x for a in range(p.jacobian.shape[1])]
    try:
        frame = orthonormalize(cols, tol=1e-10)
    except Exception as exc:
        raise ImmersionError(f"tangent frame collapses at w = {p.w}", w=p.w) from exc
    return np.stack(frame, axis=1)


def _check_frame(frame):
    E = np.asarray(frame, dtype=np.complex128)
    if E.ndim == 1:
        E = E[:, None]
    gram = E.conj().T @ E
    if np.max(np.abs(gram - np.eye(E.shape[1]))) > FRAME_TOL:
        raise PreconditionError("frame is not orthonormal to 1e-10")
    return E


def coarea_jacobian(g, frame) -> float:
    """``det(pr(g g*|_T))``: determinant of ``g g*`` compressed to span(frame)."""
    g = as_matrix(g)
    E = _check_frame(frame)
    M = E.conj().T @ (g @ g.conj().T) @ E
    return float(np.linalg.det(M).real)


def pullback_jacobian(g, x, frame) -> float:
    """Ratio ``omega_{H_g}^n / omega_{H_e}^n`` at ``x`` from the tangent map of ``g``.

    ``x`` is a unit lift and ``frame`` an orthonormal basis of T_x X in
    ``x^perp``.  The differential of ``[v] -> [g v]`` sends a unit tangent
    vector ``t`` to ``P (g t) / ||g x||`` with ``P`` the projection onto
    ``(g x)^perp``, so the ratio is ``det(C* C) / ||g x||^(2n)`` with
    ``C = P g E``.
    """
    g = as_matrix(g)
    E = _check_frame(frame)
    x = np.asarray(x, dtype=np.complex128)
    x = x / np.linalg.norm(x)
    gx = g @ x
    nx2 = float(np.real(np.vdot(gx, gx)))
    gE = g @ E
    C = gE - np.outer(gx, gx.conj() @ gE) / nx2
    n = E.shape[1]
    return float(np.linalg.det(C.conj().T @ C).real) / nx2 ** n


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    rel_err: float


def _density_ratio(p: PointSample, g) -> float:
    return volume_density(p, g) / volume_density(p, np.eye(len(p.lift)))


def check_coarea_identity(handle: VarietyHandle, w, g) -> IdentityCheck:
    """Density ratio versus ``det(pr(g g*|_T))`` at the chart point ``w``."""
    p = handle.points_at(np.atleast_1d(w))[0]
    lhs = _density_ratio(p, g)
    rhs = coarea_jacobian(g, tangent_frame(p))
    return IdentityCheck(lhs, rhs, abs(lhs - rhs) / abs(rhs))


def check_pullback_identity(handle: VarietyHandle, w, g) -> IdentityCheck:
    """Density ratio versus :func:`pullback_jacobian` at the chart point ``w``."""
    p = handle.points_at(np.atleast_1d(w))[0]
    lhs = _density_ratio(p, g)
    rhs = pullback_jacobian(g, p.lift, tangent_frame(p))
    return IdentityCheck(lhs, rhs, abs(lhs - rhs) / abs(rhs))
