"""Command-line entry point and report serialization.

Commands: ``com``, ``expect``, ``expect-unitary``, ``coarea-check``, ``verify``
and ``sample``.  A flat ``key = value`` config file (keys mirror the long flag
names) may be given with ``--config``; flags on the command line override it.

Exit codes: 0 pass, 1 a check failed, 2 usage error, 3 numeric error.

Matrices are written as nested ``[re, im]`` pairs in row-major order, in the
basis listed under ``basis`` in the envelope.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import shlex
import sys
import time
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import geometry
from .ensembles import EnsembleSpec, sample_sl_batch
from .errors import ComlabError, NumericError, SpecError
from .estimator import (CoMEstimate, ExpectationReport, center_of_mass_mc, center_of_mass_quad,
                        expect_sl, expect_unitary)
from .rng import STREAM_GROUP, STREAM_POINTS, RngStream
from .varieties import VarietySpec, make_variety
from .verify import VerifyConfig, coarea_triples, verify_suite

TOOL = "comlab"
COMMANDS = ("com", "expect", "expect-unitary", "coarea-check", "verify", "sample")
FORMATS = ("json", "csv")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
STREAM_COAREA = 0x05


class UsageError(SpecError):
    """Bad command line or config file; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    variety: str | None = None
    ensemble: str | None = None
    seed: int = 42
    outer: int | None = None
    inner: int | None = None
    quad_levels: tuple | None = None
    points: int | None = None
    symmetrize: bool = False
    tol_exact: float = 1e-12
    tol_quad: float = 1e-8
    tol_coarea: float = 1e-8
    z_max: float = 4.0
    stderr_budget: float = 0.02
    threads: int | None = None
    output: str | None = None
    format: str = "json"

    def as_dict(self) -> dict:
        d = asdict(self)
        if d["quad_levels"] is not None:
            d["quad_levels"] = list(d["quad_levels"])
        return d

    def __str__(self) -> str:
        """Canonical command line; :func:`parse_config` of it gives back ``self``."""
        parts = [self.command]
        for f in fields(self):
            if f.name == "command":
                continue
            v = getattr(self, f.name)
            flag = "--" + f.name.replace("_", "-")
            if f.name == "symmetrize":
                if v:
                    parts.append(flag)
            elif v is None:
                continue
            elif f.name == "quad_levels":
                parts += [flag, f"{v[0]},{v[1]}"]
            else:
                parts += [flag, repr(v) if isinstance(v, float) else str(v)]
        return " ".join(shlex.quote(p) for p in parts)


# --------------------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _levels(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--quad-levels expects R,A, got {text!r}")
    try:
        R, A = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--quad-levels expects two integers, got {text!r}")
    if R < 2 or A < 2:
        raise UsageError(f"--quad-levels values must be >= 2, got {text!r}")
    return (R, A)


def _build_parser() -> _Parser:
    p = _Parser(prog=TOOL, description="Centre-of-mass estimates for projective varieties.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="FILE")
    p.add_argument("--variety")
    p.add_argument("--ensemble")
    p.add_argument("--seed", type=int)
    p.add_argument("--outer", type=int)
    p.add_argument("--inner", type=int)
    p.add_argument("--quad-levels")
    p.add_argument("--points", type=int)
    p.add_argument("--symmetrize", action="store_true", default=None)
    p.add_argument("--tol-exact", type=float)
    p.add_argument("--tol-quad", type=float)
    p.add_argument("--tol-coarea", type=float)
    p.add_argument("--z-max", type=float)
    p.add_argument("--stderr-budget", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    p.add_argument("--format", choices=FORMATS)
    return p


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def parse_config_text(text: str) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments, keys spelled like flags)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip().lstrip("-"), val.strip()
        if not eq or not key:
            raise UsageError(f"config line {lineno}: expected key = value, got {raw.strip()!r}")
        name = key.replace("-", "_")
        if name not in _FIELD_TYPES:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[name] = val
    return out


def _coerce(name: str, val):
    if val is None:
        return None
    try:
        if name in ("seed", "outer", "inner", "points", "threads"):
            return int(val)
        if name in ("tol_exact", "tol_quad", "tol_coarea", "z_max", "stderr_budget"):
            return float(val)
    except ValueError:
        raise UsageError(f"invalid value {val!r} for {name.replace('_', '-')}")
    if name == "symmetrize":
        if isinstance(val, bool):
            return val
        if str(val).lower() in _BOOL_TRUE:
            return True
        if str(val).lower() in _BOOL_FALSE:
            return False
        raise UsageError(f"invalid value {val!r} for symmetrize")
    if name == "quad_levels":
        return val if isinstance(val, tuple) else _levels(str(val))
    if name == "format" and val not in FORMATS:
        raise UsageError(f"invalid value {val!r} for format; expected json or csv")
    if name == "command" and val not in COMMANDS:
        raise UsageError(f"unknown command {val!r}")
    return val


def parse_config(argv, config_text: str | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from flags and optional config-file text.

    Flags override file values.  Spec strings are validated and stored in
    canonical form.
    """
    if isinstance(argv, str):
        argv = shlex.split(argv)
    ns = _build_parser().parse_args(list(argv))
    values = {}
    if ns.config is not None:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config file {ns.config!r}: {exc.strerror}")
        values.update(parse_config_text(file_text))
    if config_text is not None:
        values.update(parse_config_text(config_text))
    for name in _FIELD_TYPES:
        v = getattr(ns, name, None)
        if v is not None:
            values[name] = v
    values["command"] = ns.command
    kw = {k: _coerce(k, v) for k, v in values.items()}
    if kw.get("variety") is not None:
        kw["variety"] = str(VarietySpec.parse(kw["variety"]))
    if kw.get("ensemble") is not None:
        kw["ensemble"] = str(EnsembleSpec.parse(kw["ensemble"]))
    cfg = RunConfig(**kw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    need_variety = cfg.command in ("com", "expect", "expect-unitary")
    if need_variety and cfg.variety is None:
        raise UsageError(f"command {cfg.command!r} requires --variety")
    if cfg.command == "expect" and cfg.ensemble is None:
        raise UsageError("command 'expect' requires --ensemble")
    if cfg.command == "sample" and cfg.ensemble is None and cfg.variety is None:
        raise UsageError("command 'sample' requires --ensemble or --variety")
    if cfg.format == "csv" and cfg.command not in ("com", "expect", "expect-unitary"):
        raise UsageError(f"csv output is only available for matrix payloads, not {cfg.command!r}")
    for name in ("outer", "inner", "points"):
        v = getattr(cfg, name)
        if v is not None and v < 1:
            raise UsageError(f"--{name} must be positive, got {v}")
    if cfg.ensemble is not None and cfg.variety is not None:
        N = VarietySpec.parse(cfg.variety).N
        if EnsembleSpec.parse(cfg.ensemble).dim != N:
            raise UsageError(f"ensemble N does not match variety N={N}")


# --------------------------------------------------------------------------- encoding

def encode_matrix(m) -> list:
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def _encode_w(w) -> list:
    return [[float(z.real), float(z.imag)] for z in np.atleast_1d(np.asarray(w, dtype=complex))]


def estimate_payload(e: CoMEstimate, g=None) -> dict:
    out = {
        "type": "com-estimate",
        "mu_bar": encode_matrix(e.mu_bar),
        "stderr": np.asarray(e.stderr, dtype=float).tolist(),
        "samples": e.samples,
        "method": e.method,
        "variety": str(e.variety),
        "g_provenance": e.g_provenance,
        "volume": e.volume,
        "trace": e.trace,
        "stderr_trace": e.stderr_trace,
        "diagnostics": e.diagnostics,
    }
    if g is not None:
        out["g"] = encode_matrix(g)
    return out


def report_payload(r: ExpectationReport) -> dict:
    return {
        "type": "expectation-report",
        "estimate": encode_matrix(r.estimate),
        "stderr": np.asarray(r.stderr, dtype=float).tolist(),
        "target": r.target,
        "deviation": r.deviation,
        "max_z": r.max_z,
        "outer_samples": r.outer_samples,
        "inner_samples": r.inner_samples,
        "ensemble": r.ensemble,
        "seed": r.seed,
        "passed": r.passed,
        "variety": str(r.variety),
        "method": r.method,
        "symmetrized": r.symmetrized,
        "diagnostics": r.diagnostics,
    }


def payload_json(payload: dict) -> str:
    """Canonical JSON of a payload; the determinism comparison is on this string."""
    return json.dumps(payload, sort_keys=True)


def matrix_csv(mat, stderr) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "re", "im", "stderr"])
    mat = np.asarray(mat)
    se = np.asarray(stderr, dtype=float)
    for i in range(mat.shape[0]):
        for j in range(mat.shape[1]):
            w.writerow([i, j, repr(float(mat[i, j].real)), repr(float(mat[i, j].imag)), repr(float(se[i, j]))])
    return buf.getvalue()


def read_matrix_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.DictReader(io.StringIO(text)))
    n = max(int(r["i"]) for r in rows) + 1
    m = np.zeros((n, n), dtype=np.complex128)
    se = np.zeros((n, n))
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        m[i, j] = complex(float(r["re"]), float(r["im"]))
        se[i, j] = float(r["stderr"])
    return m, se


# --------------------------------------------------------------------------- commands

def _use_quad(cfg: RunConfig, handle) -> tuple | None:
    if cfg.quad_levels is not None:
        return cfg.quad_levels
    if handle.n == 1 and cfg.inner is None:
        return (64, 64)
    return None


def _run_com(cfg: RunConfig):
    h = make_variety(cfg.variety)
    root = RngStream(cfg.seed)
    if cfg.ensemble is not None:
        g = sample_sl_batch(EnsembleSpec.parse(cfg.ensemble), root.substream(STREAM_GROUP), 1)[0][0]
        prov = f"{cfg.ensemble}[0] seed={cfg.seed}"
    else:
        g = np.eye(h.N, dtype=np.complex128)
        prov = "identity"
    levels = _use_quad(cfg, h)
    try:
        if levels is not None:
            e = center_of_mass_quad(h, g, levels, provenance=prov)
        else:
            e = center_of_mass_mc(h, g, cfg.inner or 10_000, root.substream(STREAM_POINTS), provenance=prov)
    except NumericError as exc:
        exc.g = g
        raise
    floor = cfg.tol_quad
    ok = e.trace_ok(cfg.z_max, floor) and np.all(np.isfinite(e.stderr))
    return estimate_payload(e, g), bool(ok), (e.mu_bar, e.stderr), h


def _run_expect(cfg: RunConfig):
    h = make_variety(cfg.variety)
    rng = RngStream(cfg.seed)
    levels = _use_quad(cfg, h)
    outer = cfg.outer or 2000
    inner = cfg.inner or 1000
    if cfg.command == "expect-unitary":
        r = expect_unitary(h, outer, inner, rng, levels, z_max=cfg.z_max, stderr_budget=cfg.stderr_budget,
                           quad_tol=cfg.tol_quad, threads=cfg.threads)
    else:
        r = expect_sl(h, EnsembleSpec.parse(cfg.ensemble), outer, inner, rng, cfg.symmetrize, levels,
                      z_max=cfg.z_max, stderr_budget=cfg.stderr_budget, quad_tol=cfg.tol_quad,
                      threads=cfg.threads)
    return report_payload(r), r.passed, (r.estimate, r.stderr), h


def _run_coarea(cfg: RunConfig):
    count = cfg.points or 100
    rng = RngStream(cfg.seed).substream(STREAM_COAREA)
    if cfg.variety is not None:
        h = make_variety(cfg.variety)
        pts = h.sample_points(rng.generator(), count)
        gs = sample_sl_batch(EnsembleSpec("ginibre-polar", h.N), rng.substream(1), count)[0]
        triples = [(h, pts.w[k], gs[k]) for k in range(count)]
    else:
        triples = coarea_triples(rng, count)
    rows = []
    for h, w, g in triples:
        try:
            s = geometry.check_coarea_identity(h, w, g)
            p = geometry.check_pullback_identity(h, w, g)
        except NumericError as exc:
            exc.w, exc.g, exc.variety = w, g, str(h.spec)
            raise
        rows.append({"variety": str(h.spec), "w": _encode_w(w), "density_ratio": s.lhs,
                     "det_pr_ggstar": s.rhs, "rel_err": s.rel_err,
                     "pullback_jacobian": p.rhs, "pullback_rel_err": p.rel_err})
    max_err = max(r["rel_err"] for r in rows)
    max_pull = max(r["pullback_rel_err"] for r in rows)
    passed = max_err <= cfg.tol_coarea
    payload = {"type": "coarea-check", "points": len(rows), "tolerance": cfg.tol_coarea,
               "max_rel_err": max_err, "max_pullback_rel_err": max_pull,
               "passed": passed, "rows": rows}
    return payload, passed, None, None


def verify_config(cfg: RunConfig) -> VerifyConfig:
    vc = VerifyConfig(seed=cfg.seed, tol_exact=cfg.tol_exact, tol_quad=cfg.tol_quad,
                      tol_coarea=cfg.tol_coarea, z_max=cfg.z_max, stderr_budget=cfg.stderr_budget,
                      symmetrize=cfg.symmetrize, threads=cfg.threads)
    if cfg.outer is not None:
        vc.outer = cfg.outer
    if cfg.inner is not None:
        vc.inner = cfg.inner
    if cfg.points is not None:
        vc.coarea_points = cfg.points
    if cfg.quad_levels is not None:
        vc.quad_levels = cfg.quad_levels
    return vc


def _run_verify(cfg: RunConfig):
    res = verify_suite(verify_config(cfg))
    payload = {"type": "verify", **res.payload()}
    return payload, res.passed, None, None, res.timings


def _run_sample(cfg: RunConfig):
    count = cfg.points or 10
    root = RngStream(cfg.seed)
    payload = {"type": "sample", "count": count}
    if cfg.ensemble is not None:
        spec = EnsembleSpec.parse(cfg.ensemble)
        g, H, info = sample_sl_batch(spec, root.substream(STREAM_GROUP), count)
        payload["ensemble"] = str(spec)
        payload["g"] = [encode_matrix(x) for x in g]
        payload["eigenvalues_H"] = [np.linalg.eigvalsh(x).tolist() for x in H]
        payload["info"] = info
    if cfg.variety is not None:
        h = make_variety(cfg.variety)
        pts = h.sample_points(root.substream(STREAM_POINTS).generator(), count)
        payload["variety"] = str(h.spec)
        payload["w"] = [_encode_w(w) for w in pts.w]
        payload["lift"] = [_encode_w(v) for v in pts.lift]
        payload["base_density"] = pts.base_density.tolist()
    return payload, True, None, None


_RUNNERS = {
    "com": _run_com,
    "expect": _run_expect,
    "expect-unitary": _run_expect,
    "coarea-check": _run_coarea,
    "verify": _run_verify,
    "sample": _run_sample,
}


def _basis(cfg: RunConfig):
    if cfg.variety is None:
        return None
    return make_variety(cfg.variety).basis_labels()


def envelope(cfg: RunConfig, payload: dict, wall: float, timings: dict | None = None) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "config": cfg.as_dict(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_seconds": wall,
        "timings": timings or {},
        "basis": _basis(cfg),
        "payload": payload,
    }


def _numeric_payload(cfg: RunConfig, exc: NumericError) -> dict:
    w = getattr(exc, "w", None)
    g = getattr(exc, "g", None)
    return {
        "type": "numeric-error",
        "message": str(exc),
        "variety": getattr(exc, "variety", cfg.variety),
        "w": None if w is None else _encode_w(w),
        "g": None if g is None else encode_matrix(g),
        "sample_index": getattr(exc, "sample_index", None),
    }


def _write(cfg: RunConfig, text: str, stdout):
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute ``cfg``, write the report and return the exit code."""
    stdout = stdout or sys.stdout
    t0 = time.perf_counter()
    timings = None
    matrix = None
    try:
        res = _RUNNERS[cfg.command](cfg)
        payload, passed, matrix = res[0], res[1], res[2]
        if len(res) > 4:
            timings = res[4]
        code = EXIT_PASS if passed else EXIT_FAIL
    except NumericError as exc:
        payload, code = _numeric_payload(cfg, exc), EXIT_NUMERIC
    wall = time.perf_counter() - t0
    if cfg.format == "csv" and matrix is not None:
        _write(cfg, matrix_csv(*matrix), stdout)
    else:
        env = envelope(cfg, payload, wall, timings)
        _write(cfg, json.dumps(env, sort_keys=True, indent=1) + "\n", stdout)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ComlabError as exc:
        print(f"{TOOL}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except ComlabError as exc:
        print(f"{TOOL}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
