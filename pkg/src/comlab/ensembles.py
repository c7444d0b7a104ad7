"""Random matrix ensembles on U(N), on the det-1 positive cone B, and on SL(N, C).

Each draw ``k`` consumes its own counter ``rng.counter + k``; single-draw
functions are the ``count=1`` case of the batch functions, so a draw is
bit-identical no matter how a run is partitioned.

Supported ensemble kinds:

================  ==========================================================
haar-unitary      Haar measure on U(N) (QR of a Ginibre matrix, phases fixed)
ginibre-polar     H = G G* / det(G G*)^(1/N), G Ginibre
eig-lognormal     H = u diag(lam) u*, log lam = s * (xi - mean(xi)), u Haar
gue-metropolis    eigenvalues from random-walk Metropolis on the det-1 slice
                  with weight Vandermonde^2 * exp(-sum lam^2 / 2); u Haar
================  ==========================================================
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import SpecError
from .linalg import HermitianPD, adjoint, principal_root, qr_phase_fixed, qr_phase_fixed_stack
from .rng import RngStream, generators

KINDS = ("haar-unitary", "ginibre-polar", "eig-lognormal", "gue-metropolis")

# name -> (type, default); order fixes the canonical text form
_PARAMS = {
    "haar-unitary": {},
    "ginibre-polar": {},
    "eig-lognormal": {"s": (float, 0.5)},
    "gue-metropolis": {"step": (float, 0.15), "burn": (int, 10_000), "thin": (int, 50)},
}

ACCEPT_RANGE = (0.1, 0.9)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    dim: int
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown ensemble kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise SpecError(f"ensemble dimension N must be a positive integer, got {self.dim!r}")
        if self.dim > 64:
            raise SpecError(f"ensemble dimension N={self.dim} exceeds the desk-scale cap 64")
        given = dict(self.params)
        schema = _PARAMS[self.kind]
        unknown = set(given) - set(schema)
        if unknown:
            raise SpecError(f"unknown parameter {sorted(unknown)[0]!r} for ensemble {self.kind}")
        full = []
        for name, (typ, default) in schema.items():
            v = given.get(name, default)
            try:
                v = typ(v)
            except (TypeError, ValueError):
                raise SpecError(f"parameter {name!r} of {self.kind} must be {typ.__name__}, got {v!r}")
            full.append((name, v))
        p = dict(full)
        if self.kind == "eig-lognormal" and not p["s"] > 0:
            raise SpecError("eig-lognormal requires s > 0")
        if self.kind == "gue-metropolis":
            if not p["step"] > 0:
                raise SpecError("gue-metropolis requires step > 0")
            if p["burn"] < 0 or p["thin"] < 1:
                raise SpecError("gue-metropolis requires burn >= 0 and thin >= 1")
            if self.dim < 2:
                raise SpecError("gue-metropolis requires N >= 2")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "params", tuple(full))

    def param(self, name):
        return dict(self.params)[name]

    @classmethod
    def parse(cls, text: str) -> EnsembleSpec:
        """Parse ``kind:N=3,key=value,...``."""
        kind, _, rest = text.strip().partition(":")
        kv = _parse_kv(rest, f"ensemble {text!r}")
        if "N" not in kv:
            raise SpecError(f"ensemble {text!r} is missing required parameter 'N'")
        try:
            dim = int(kv.pop("N"))
        except ValueError:
            raise SpecError(f"ensemble parameter 'N' must be an integer in {text!r}")
        return cls(kind.strip(), dim, tuple(kv.items()))

    def __str__(self) -> str:
        parts = [f"N={self.dim}"] + [f"{k}={_fmt(v)}" for k, v in self.params]
        return f"{self.kind}:{','.join(parts)}"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "N": self.dim, **dict(self.params)}


def _parse_kv(rest: str, where: str) -> dict:
    out = {}
    rest = rest.strip()
    if not rest:
        return out
    for tok in rest.split(","):
        key, eq, val = tok.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or not key or not val:
            raise SpecError(f"malformed token {tok!r} in {where}; expected key=value")
        if key in out:
            raise SpecError(f"duplicate key {key!r} in {where}")
        out[key] = val
    return out


@dataclass(frozen=True)
class GroupSample:
    """A draw ``g`` from SL(N, C) together with its cached ``g g*``."""

    g: np.ndarray
    gg_star: HermitianPD
    ensemble: EnsembleSpec
    provenance: RngStream
    info: dict = field(default_factory=dict, compare=False)


# --------------------------------------------------------------------------- raw draws

def _ginibre_from(gen: np.random.Generator, N: int) -> np.ndarray:
    re = gen.standard_normal((N, N))
    im = gen.standard_normal((N, N))
    return (re + 1j * im) * np.sqrt(0.5)


def _unit_det_stack(u: np.ndarray) -> np.ndarray:
    N = u.shape[-1]
    d = np.linalg.det(u)
    roots = np.array([principal_root(z, N) for z in d])
    return u / roots[:, None, None]


def ginibre(N: int, rng: RngStream) -> np.ndarray:
    """N x N matrix of i.i.d. standard complex Gaussians (E|z|^2 = 1)."""
    return ginibre_batch(N, rng, 1)[0]


def ginibre_batch(N: int, rng: RngStream, count: int) -> np.ndarray:
    if N < 1:
        raise SpecError("N must be >= 1")
    return np.stack([_ginibre_from(gen, N) for gen in generators(rng, count)]) if count else \
        np.empty((0, N, N), dtype=np.complex128)


def haar_unitary(N: int, rng: RngStream) -> np.ndarray:
    """Haar-distributed unitary on U(N)."""
    q, _ = qr_phase_fixed(ginibre(N, rng))
    return q


def haar_unitary_batch(N: int, rng: RngStream, count: int) -> np.ndarray:
    if count == 0:
        return np.empty((0, N, N), dtype=np.complex128)
    q, _ = qr_phase_fixed_stack(ginibre_batch(N, rng, count))
    return q


def _metropolis_start(d: int) -> np.ndarray:
    return 0.3 * np.arange(1, d + 1, dtype=float)


def _draw_B_raw(spec: EnsembleSpec, gen: np.random.Generator):
    """Variates for one B-draw: returns (kind-specific payload, info)."""
    N = spec.dim
    if spec.kind == "ginibre-polar":
        return _ginibre_from(gen, N), None
    if spec.kind == "eig-lognormal":
        xi = gen.standard_normal(N)
        return (xi, _ginibre_from(gen, N)), None
    if spec.kind == "gue-metropolis":
        burn, thin, step = spec.param("burn"), spec.param("thin"), spec.param("step")
        steps = burn + thin
        incr = gen.standard_normal((steps, N - 1)) * step
        logu = np.log(gen.random(steps))
        rec, accepted = kernels.metropolis_walk(_metropolis_start(N - 1), incr, logu, thin, burn)
        rate = accepted / steps
        return (rec[-1], _ginibre_from(gen, N)), rate
    raise SpecError(f"sample_B does not accept ensemble kind {spec.kind!r}")


def _assemble_B(spec: EnsembleSpec, raws: list) -> np.ndarray:
    N = spec.dim
    if spec.kind == "ginibre-polar":
        G = np.stack(raws)
        H = G @ adjoint(G)
        scale = np.abs(np.linalg.det(G)) ** (2.0 / N)
        H = H / scale[:, None, None]
    else:
        if spec.kind == "eig-lognormal":
            s = spec.param("s")
            lam = np.stack([np.exp(s * (xi - xi.mean())) for xi, _ in raws])
        else:
            x = np.stack([r[0] for r in raws])
            lam = np.concatenate([np.exp(x), np.exp(-x.sum(axis=1, keepdims=True))], axis=1)
        u, _ = qr_phase_fixed_stack(np.stack([r[1] for r in raws]))
        H = (u * lam[:, None, :]) @ adjoint(u)
    return 0.5 * (H + adjoint(H))


def _acceptance_info(spec, rates):
    if spec.kind != "gue-metropolis":
        return {}
    rates = np.asarray(rates, dtype=float)
    info = {"acceptance_rate": float(rates.mean()) if rates.size else float("nan")}
    lo, hi = ACCEPT_RANGE
    bad = int(np.sum((rates < lo) | (rates > hi)))
    if bad:
        info["warning"] = (f"Metropolis acceptance outside [{lo}, {hi}] in {bad} of {rates.size} "
                           f"chains (mean {info['acceptance_rate']:.3f})")
        warnings.warn(info["warning"], RuntimeWarning, stacklevel=3)
    return info


def sample_B_batch(spec: EnsembleSpec, rng: RngStream, count: int) -> tuple[np.ndarray, dict]:
    """``count`` det-1 positive-definite matrices; returns ``(H, info)``."""
    if spec.kind == "haar-unitary":
        raise SpecError("sample_B requires a B-ensemble, not haar-unitary")
    raws, rates = [], []
    for gen in generators(rng, count):
        raw, rate = _draw_B_raw(spec, gen)
        raws.append(raw)
        if rate is not None:
            rates.append(rate)
    if not raws:
        return np.empty((0, spec.dim, spec.dim), dtype=np.complex128), {}
    return _assemble_B(spec, raws), _acceptance_info(spec, rates)


def sample_B(spec: EnsembleSpec, rng: RngStream) -> HermitianPD:
    """One draw from the admissible measure ``spec`` on B."""
    H, info = sample_B_batch(spec, rng, 1)
    return HermitianPD(H[0], unit_det=True, info=info)


def sample_sl_batch(spec: EnsembleSpec, rng: RngStream, count: int) -> tuple[np.ndarray, np.ndarray, dict]:
    """``count`` draws ``g = H^(1/2) u`` from SL(N, C); returns ``(g, H, info)``."""
    if spec.kind == "haar-unitary":
        raise SpecError("sample_sl requires a B-ensemble; use haar_unitary for the unitary-only case")
    N = spec.dim
    raws, us, rates = [], [], []
    for gen in generators(rng, count):
        raw, rate = _draw_B_raw(spec, gen)
        raws.append(raw)
        us.append(_ginibre_from(gen, N))
        if rate is not None:
            rates.append(rate)
    if not raws:
        empty = np.empty((0, N, N), dtype=np.complex128)
        return empty, empty.copy(), {}
    H = _assemble_B(spec, raws)
    w, v = np.linalg.eigh(H)
    h = (v * np.sqrt(w)[:, None, :]) @ adjoint(v)
    u, _ = qr_phase_fixed_stack(np.stack(us))
    u = _unit_det_stack(u)
    return h @ u, H, _acceptance_info(spec, rates)


def sample_sl(spec: EnsembleSpec, rng: RngStream) -> GroupSample:
    g, H, info = sample_sl_batch(spec, rng, 1)
    return GroupSample(g[0], HermitianPD(H[0], unit_det=True), spec, rng, info)


def metropolis_eigenvalues(spec: EnsembleSpec, rng: RngStream, count: int) -> tuple[np.ndarray, float]:
    """A single thinned Metropolis chain: ``count`` eigenvalue vectors after burn-in.

    Returns ``(lam, acceptance_rate)`` with ``lam`` of shape ``(count, N)``.
    """
    if spec.kind != "gue-metropolis":
        raise SpecError("metropolis_eigenvalues requires a gue-metropolis ensemble")
    N = spec.dim
    burn, thin, step = spec.param("burn"), spec.param("thin"), spec.param("step")
    steps = burn + count * thin
    gen = rng.generator()
    incr = gen.standard_normal((steps, N - 1)) * step
    logu = np.log(gen.random(steps))
    rec, accepted = kernels.metropolis_walk(_metropolis_start(N - 1), incr, logu, thin, burn)
    lam = np.concatenate([np.exp(rec), np.exp(-rec.sum(axis=1, keepdims=True))], axis=1)
    return lam, accepted / steps
