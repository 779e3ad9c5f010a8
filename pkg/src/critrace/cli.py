"""Command-line interface and job runner.

Every subcommand prints (or writes with ``--out``) a JSON document with
sorted keys; numeric sections carry a ``method`` tag naming how the number
was produced (``closed-form``, ``quadrature``, ``monte-carlo`` or ``fit``).

Exit status: 0 on success, 1 when a hypothesis or branch check fails,
2 on a usage or configuration error.

Job files are INI documents (see ``fixtures/example1.job``)::

    [job]            hamiltonian = <path>, tasks = comma separated list
    [tolerances]     tol
    [periods]        t_min, t_max, index
    [sampling]       seed, samples
    [test_function]  T, delta
    [spectral]       h_grid (comma separated, strictly decreasing), eps
    [output]         report (JSON path), csv (optional CSV path); both relative
                     to the working directory

The Hamiltonian path is resolved against the job file's directory, then the
working directory, then the bundled fixtures.

Known tasks: verify, periods, monodromy, jet, rk, cone, charts, trace,
theorem1, theorem2, spectral.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oscillatory as osc
from .flow import FlowError, finite_difference_jet, flow_jet, hamilton_flow, linearized_flow
from .normal_forms import ModelPhase, build_chart, verify_chart
from .periods import find_periods, pseudo_resonant, resonance_module
from .rk_cone import HypothesisError, check_cone_geometry, cone_integral, cone_samples, rk_from_integral, rk_from_jet
from .spectral_oracle import h_sweep, stroboscopic_h_grid
from .symbol import load_hamiltonian, verify_critical
from .trace import DegeneracyError, TestFunction, det_factor, theorem1, theorem2

__all__ = ["main", "JobConfig", "ConfigError", "load_job", "run"]

FIXTURES = Path(__file__).resolve().parent / "fixtures"
KNOWN_TASKS = ("verify", "periods", "monodromy", "jet", "rk", "cone", "charts", "trace", "theorem1", "theorem2", "spectral")


class ConfigError(ValueError):
    """Malformed job configuration."""


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2)


def _emit(obj, out: str | None):
    text = dumps(obj) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(header, rows, out: str | None):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(v)) for v in r])
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _resolve(path: str, base: Path | None = None) -> Path:
    p = Path(path)
    for cand in ([base / p] if base is not None else []) + [p, FIXTURES / p]:
        if cand.exists():
            return cand
    raise ConfigError(f"file not found: {path}")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------


def _period(cd, index: int, t_min: float, t_max: float, tol: float):
    recs = find_periods(cd, t_min, t_max, tol=1e-9)
    if not recs:
        raise HypothesisError(f"no period of the linearized flow in [{t_min}, {t_max}]")
    if not 0 <= index < len(recs):
        raise ConfigError(f"period index {index} out of range ({len(recs)} periods)")
    return recs[index]


def _leading_rk(p, cd, period, tol: float):
    """First nonvanishing ``R_k`` (``k = 3, 4, 5``) from the flow jets."""
    for order in (2, 3, 4):
        R = rk_from_jet(flow_jet(p, cd, order, period.T, tol=tol), period)
        if not R.is_zero(atol=1e-8):
            return R
    raise HypothesisError("R_k vanishes for k <= 5")


def _rk_dict(R) -> dict:
    d = R.as_dict()
    d["method"] = "quadrature"
    return d


def _charts(period, R) -> dict:
    model = ModelPhase(period.d_T, R.degree, period.Q_T, R)
    rows = []
    m = model.m
    e = np.eye(m)
    # first chart at a coordinate direction off the cone
    first = next((v for v in e if abs(model.q(v[None])[0]) > 1e-6), None)
    if first is not None:
        rows.append(verify_chart(build_chart(model, first, "first")).as_dict())
    if period.cls == "indefinite":
        geo = check_cone_geometry(period.Q_T, R)
        smp = cone_samples(period.Q_T, 64, seed=0)
        vals = np.abs(R(smp.theta))
        rows.append(verify_chart(build_chart(model, smp.theta[int(np.argmax(vals))], "second")).as_dict())
        for z in geo.zeros[:4]:
            rows.append(verify_chart(build_chart(model, z, "third")).as_dict())
    return {"charts": rows, "passed": all(r["passed"] for r in rows), "method": "closed-form"}


def _trace(cd, period, p, phi, R, samples: int, seed: int, want: str | None = None):
    if want == "theorem1" or (want is None and period.cls != "indefinite"):
        return theorem1(cd, period, phi, p1=p.subprincipal)
    return theorem2(cd, period, R, phi, N_cone=samples, seed=seed, p1=p.subprincipal)


# ---------------------------------------------------------------------------
# job config
# ---------------------------------------------------------------------------


@dataclass
class JobConfig:
    """Parsed job file."""

    hamiltonian: Path
    tasks: list[str]
    tol: float = 1e-10
    t_min: float = 0.5
    t_max: float = 7.0
    index: int = 0
    seed: int = 0
    samples: int = 200000
    T: float | None = None
    delta: float = 0.5
    h_grid: list[float] = field(default_factory=list)
    eps: float = 0.5
    report: Path | None = None
    csv: Path | None = None


def load_job(path) -> JobConfig:
    """Parse and validate a job file.

    Raises
    ------
    ConfigError
        Missing sections or files, non-positive tolerances, a non-decreasing
        ``h`` grid or unknown tasks.
    """
    path = Path(path)
    if not path.exists() and (FIXTURES / path).exists():
        path = FIXTURES / path
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from exc
    if not cp.has_section("job") or "hamiltonian" not in cp["job"]:
        raise ConfigError("[job] hamiltonian is required")
    base = path.parent
    try:
        tasks = [t.strip() for t in cp.get("job", "tasks", fallback="").split(",") if t.strip()]
        unknown = [t for t in tasks if t not in KNOWN_TASKS]
        if unknown:
            raise ConfigError(f"unknown tasks: {unknown}")
        cfg = JobConfig(
            hamiltonian=_resolve(cp["job"]["hamiltonian"], base),
            tasks=tasks,
            tol=cp.getfloat("tolerances", "tol", fallback=1e-10),
            t_min=cp.getfloat("periods", "t_min", fallback=0.5),
            t_max=cp.getfloat("periods", "t_max", fallback=7.0),
            index=cp.getint("periods", "index", fallback=0),
            seed=cp.getint("sampling", "seed", fallback=0),
            samples=cp.getint("sampling", "samples", fallback=200000),
            T=cp.getfloat("test_function", "T", fallback=None),
            delta=cp.getfloat("test_function", "delta", fallback=0.5),
            h_grid=_floats(cp.get("spectral", "h_grid", fallback="")),
            eps=cp.getfloat("spectral", "eps", fallback=0.5),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if cfg.tol <= 0 or cfg.eps <= 0 or cfg.delta <= 0:
        raise ConfigError("tolerances, eps and delta must be positive")
    if cfg.samples <= 0:
        raise ConfigError("samples must be positive")
    if cfg.h_grid and (any(h <= 0 for h in cfg.h_grid) or np.any(np.diff(cfg.h_grid) >= 0)):
        raise ConfigError("h grid must be positive and strictly decreasing")
    if cp.has_section("output"):
        rep = cp.get("output", "report", fallback=None)
        cs = cp.get("output", "csv", fallback=None)
        cfg.report = Path(rep) if rep else None
        cfg.csv = Path(cs) if cs else None
    return cfg


def run(cfg: JobConfig) -> tuple[int, dict]:
    """Execute the tasks of ``cfg`` in pipeline order; returns ``(status, report)``."""
    report: dict = {"hamiltonian": cfg.hamiltonian.name, "tasks": list(cfg.tasks), "results": {}}
    if not cfg.tasks:
        return 0, report
    res = report["results"]
    status = 0
    try:
        p, cd = load_hamiltonian(cfg.hamiltonian)
        needs_period = any(t in cfg.tasks for t in ("periods", "monodromy", "jet", "rk", "cone", "charts", "trace", "theorem1", "theorem2"))
        if "verify" in cfg.tasks:
            rep = verify_critical(p, cd, cfg.tol)
            res["verify"] = dict(rep.as_dict(), method="closed-form")
            if not rep.passed:
                raise HypothesisError("critical point verification failed")
        period = _period(cd, cfg.index, cfg.t_min, cfg.t_max, cfg.tol) if needs_period else None
        if "periods" in cfg.tasks:
            res["periods"] = {"records": [r.as_dict() for r in find_periods(cd, cfg.t_min, cfg.t_max)], "selected": cfg.index, "method": "closed-form"}
        if "monodromy" in cfg.tasks:
            M = linearized_flow(cd, period.T)
            res["monodromy"] = {"t": period.T, "matrix": M.M, "symplectic_defect": M.symplectic_defect(), "det_factor_at_T": det_factor(cd, period.T), "method": "closed-form"}
        R = None
        wants_r = any(t in cfg.tasks for t in ("jet", "rk", "cone", "charts"))
        if wants_r or (period is not None and period.cls == "indefinite" and any(t in cfg.tasks for t in ("trace", "theorem2"))):
            R = _leading_rk(p, cd, period, cfg.tol)
        if "jet" in cfg.tasks:
            jet = flow_jet(p, cd, R.degree - 1, period.T, tol=cfg.tol)
            res["jet"] = {"order": jet.order, "t": jet.t, "max_abs": float(np.max(np.abs(jet.tensor))), "method": "quadrature"}
        if "rk" in cfg.tasks:
            res["rk"] = _rk_dict(R)
        if "cone" in cfg.tasks:
            if period.cls != "indefinite":
                res["cone"] = {"skipped": "Q_T is definite; the cone is empty", "method": "closed-form"}
            else:
                geo = check_cone_geometry(period.Q_T, R, seed=cfg.seed)
                smp = cone_samples(period.Q_T, cfg.samples, seed=cfg.seed)
                mass = cone_integral(lambda th: np.ones(len(th)), smp)
                res["cone"] = {"geometry": geo.as_dict(), "liouville_mass": mass.as_dict(), "method": "monte-carlo"}
        if "charts" in cfg.tasks:
            res["charts"] = _charts(period, R)
        if "spectral" in cfg.tasks:
            phi = TestFunction(cfg.T if cfg.T is not None else 2 * np.pi, cfg.delta)
            hs = cfg.h_grid or stroboscopic_h_grid()
            sw = h_sweep(phi, hs, eps=cfg.eps)
            res["spectral"] = sw.as_dict()
            if cfg.csv is not None:
                _emit_csv(["h", "re", "im", "abs"], sw.rows(), str(cfg.csv))
        for name in ("trace", "theorem1", "theorem2"):
            if name in cfg.tasks:
                phi = TestFunction(cfg.T if cfg.T is not None else period.T, cfg.delta)
                rep = _trace(cd, period, p, phi, R, cfg.samples, cfg.seed, None if name == "trace" else name)
                res[name] = rep.as_dict()
    except (HypothesisError, FlowError, DegeneracyError) as exc:
        status = 1
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    report["status"] = "ok" if status == 0 else "failed"
    return status, report


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--tol", type=float, default=1e-10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--samples", type=int, default=200000)
    c.add_argument("--h-grid", type=str, default=None, help="comma separated, strictly decreasing")
    c.add_argument("--out", type=str, default=None)
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="critrace", description="Trace-formula coefficients at a critical level.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_, ham=True):
        sp = sub.add_parser(name, help=help_, parents=[common])
        if ham:
            sp.add_argument("hamiltonian")
        return sp

    add("verify", "check the declared critical point")
    sp = add("flow", "integrate the Hamiltonian flow")
    sp.add_argument("--point", required=True, help="comma separated phase-space point")
    sp.add_argument("--t", type=float, required=True)
    sp = add("monodromy", "linearized flow at time t")
    sp.add_argument("--t", type=float, required=True)
    sp = add("jet", "flow jet d^k Phi_t(z0)")
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--check", action="store_true", help="compare against finite differences along a random direction")
    for name in ("periods", "rk", "cone", "charts", "trace"):
        sp = add(name, f"{name} at a period of the linearized flow")
        sp.add_argument("--t-min", type=float, default=0.5)
        sp.add_argument("--t-max", type=float, default=7.0)
        if name != "periods":
            sp.add_argument("--index", type=int, default=0)
        if name == "rk":
            sp.add_argument("--method", choices=("jet", "integral", "both"), default="both")
        if name == "cone":
            sp.add_argument("--csv", type=str, default=None, help="dump cone samples and R values")
        if name == "trace":
            sp.add_argument("--T", type=float, default=None)
            sp.add_argument("--delta", type=float, default=0.5)
    sp = add("resonance", "resonances and pseudo-resonances of the block frequencies")
    sp.add_argument("--order", type=int, required=True)
    sp = add("osc", "oscillatory-integral tools", ham=False)
    sp.add_argument("mode", choices=("expand", "quad", "fit"))
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--terms", type=int, default=4)
    sp.add_argument("--lam", type=str, default="1e2,3e2,1e3,3e3,1e4")
    sp.add_argument("--csv", type=str, default=None, help="input series for fit (columns lam, re, im)")
    sp = add("spectral", "trace sums of the perturbed-oscillator spectrum", ham=False)
    sp.add_argument("--T", type=float, default=2 * math.pi)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--eps", type=float, default=0.5)
    sp = add("run", "execute a job file", ham=False)
    sp.add_argument("job")
    return ap


def _h_grid(text: str | None):
    if text is None:
        return None
    hs = _floats(text)
    if any(h <= 0 for h in hs) or np.any(np.diff(hs) >= 0):
        raise ConfigError("h grid must be positive and strictly decreasing")
    return hs


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "run":
        cfg = load_job(args.job)
        if args.h_grid:
            cfg.h_grid = _h_grid(args.h_grid)
        status, rep = run(cfg)
        _emit(rep, args.out or (str(cfg.report) if cfg.report else None))
        return status
    if cmd == "osc":
        return _osc(args)
    if cmd == "spectral":
        phi = TestFunction(args.T, args.delta)
        sw = h_sweep(phi, _h_grid(args.h_grid) or stroboscopic_h_grid(), eps=args.eps)
        _emit_csv(["h", "re", "im", "abs"], sw.rows(), args.out)
        sys.stderr.write(f"fitted exponent {sw.exponent:.6f}\n")
        return 0
    p, cd = load_hamiltonian(_resolve(args.hamiltonian))
    if cmd == "verify":
        rep = verify_critical(p, cd, args.tol)
        _emit(dict(rep.as_dict(), method="closed-form"), args.out)
        return 0 if rep.passed else 1
    if cmd == "flow":
        res = hamilton_flow(p, _floats(args.point), args.t, tol=max(args.tol, 1e-13))
        _emit({"z": res.z, "t": res.t, "energy_drift": res.energy_drift, "nfev": res.nfev, "method": "quadrature"}, args.out)
        return 0
    if cmd == "monodromy":
        M = linearized_flow(cd, args.t)
        _emit({"t": args.t, "matrix": M.M, "symplectic_defect": M.symplectic_defect(), "method": "closed-form"}, args.out)
        return 0
    if cmd == "jet":
        jet = flow_jet(p, cd, args.order, args.t, tol=args.tol)
        out = {"order": jet.order, "t": jet.t, "tensor": jet.tensor, "method": "quadrature"}
        if args.check:
            v = np.random.default_rng(args.seed).standard_normal(p.dim)
            fd = finite_difference_jet(p, cd.z0.coords, args.t, v, args.order)
            ref = jet(*([v] * args.order))
            out["finite_difference"] = {"relative_error": float(np.max(np.abs(fd - ref)) / max(1.0, np.max(np.abs(ref)))), "method": "fit"}
        _emit(out, args.out)
        return 0
    if cmd == "resonance":
        rs = resonance_module(cd.w, args.order)
        flag, wit = pseudo_resonant(cd.w, args.order)
        _emit({"order": args.order, "resonances": rs.vectors, "exact": rs.exact, "pseudo_resonant": flag, "witness": wit, "method": "closed-form"}, args.out)
        return 0
    if cmd == "periods":
        _emit([r.as_dict() for r in find_periods(cd, args.t_min, args.t_max)], args.out)
        return 0
    period = _period(cd, args.index, args.t_min, args.t_max, args.tol)
    if cmd == "rk":
        out = {"period": period.T}
        R = _leading_rk(p, cd, period, args.tol)
        if args.method in ("jet", "both"):
            out["jet"] = _rk_dict(R)
        if args.method in ("integral", "both"):
            out["integral"] = _rk_dict(rk_from_integral(p, cd, period, R.degree, tol=args.tol))
        if args.method == "both":
            out["max_coeff_diff"] = R.max_coeff_diff(rk_from_integral(p, cd, period, R.degree, tol=args.tol))
        _emit(out, args.out)
        return 0
    if cmd == "cone":
        R = _leading_rk(p, cd, period, args.tol)
        geo = check_cone_geometry(period.Q_T, R, seed=args.seed)
        smp = cone_samples(period.Q_T, args.samples, seed=args.seed)
        alpha = (2 * period.d_T - 2) / R.degree
        reg = "abs-power" if geo.intersection_empty else "i0-power"
        out = {
            "geometry": geo.as_dict(),
            "liouville_mass": cone_integral(lambda th: np.ones(len(th)), smp).as_dict(),
            "power_integral": cone_integral(R, smp, reg, alpha).as_dict(),
            "method": "monte-carlo",
        }
        if args.csv:
            _emit_csv([f"theta{i}" for i in range(smp.theta.shape[1])] + ["weight", "R"], np.column_stack([smp.theta, smp.weights, R(smp.theta)]), args.csv)
        _emit(out, args.out)
        return 0 if geo.passed else 1
    if cmd == "charts":
        out = _charts(period, _leading_rk(p, cd, period, args.tol))
        _emit(out, args.out)
        return 0 if out["passed"] else 1
    if cmd == "trace":
        phi = TestFunction(args.T if args.T is not None else period.T, args.delta)
        R = _leading_rk(p, cd, period, args.tol) if period.cls == "indefinite" else None
        _emit(_trace(cd, period, p, phi, R, args.samples, args.seed).as_dict(), args.out)
        return 0
    raise ConfigError(f"unknown command {cmd}")  # pragma: no cover


def _osc(args) -> int:
    lams = _floats(args.lam)
    bump = osc.Plateau(0.0, 1.0, 1.5)
    if args.mode == "expand":
        ex = osc.expand_rk(bump, args.k, args.terms)
        _emit(dict(ex.as_dict(), k=args.k, amplitude="plateau(0, 1, 1.5)", method="closed-form"), args.out)
        return 0
    if args.mode == "quad":
        amp = osc.SmoothAmplitude.separable(bump)
        rows = []
        for lam in lams:
            v = osc.quad_oscillatory(lambda X: X[:, 0] ** args.k, amp, lam, tol=max(args.tol, 1e-10))
            rows.append((lam, v.real, v.imag))
        _emit_csv(["lam", "re", "im"], rows, args.out)
        return 0
    if args.csv is None:
        raise ConfigError("osc fit needs --csv")
    data = np.loadtxt(args.csv, delimiter=",", skiprows=1, ndmin=2)
    pairs = [(r[0], complex(r[1], r[2])) for r in data]
    e, c, r2 = osc.fit_scaling(pairs)
    _emit({"exponent": e, "coefficient": complex(c), "r2": r2, "method": "fit"}, args.out)
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        sys.stderr.write(f"critrace: configuration error: {exc}\n")
        return 2
    except (HypothesisError, FlowError, DegeneracyError) as exc:
        sys.stderr.write(f"critrace: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
