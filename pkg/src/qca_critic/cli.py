"""``python -m qca_critic <command>``: runs, scans, analysis and figures.

Every command takes ``--config FILE.json`` and flag overrides (flags win).
Unknown config keys are rejected.  Each output directory receives a
``manifest.json`` holding the resolved configuration, which is enough to
repeat the run.

Exit codes: 0 ok, 1 invalid input, 2 capacity exceeded, 3 numerical or
estimation failure, 4 file I/O.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import criticality, dense, lindblad, meanfield, persist
from .errors import CapacityError, DataIOError, ParameterError, QcaError
from .gates import make_gate_params

logger = logging.getLogger("qca_critic")

JOBS_ENV = "QCA_CRITIC_JOBS"

_RUN_KEYS = {
    "backend": "mps",
    "dense_rule": "kraus",
    "L": 20,
    "T": 100,
    "initial": "full",
    "chi": 32,
    "cutoff": 1e-12,
    "observables": ["n_site", "transverse"],
}

SCHEMAS = {
    "evolve": {**_RUN_KEYS, "p1": None, "p2": None, "out": None},
    "scan": {**_RUN_KEYS, "p1": None, "p2": None, "jobs": None, "out": None},
    "meanfield": {
        "p1_grid": [0.0, 1.0, 51],
        "p2_grid": [0.0, 1.0, 2001],
        "max_iter": 10000,
        "tol": 1e-12,
        "threshold": meanfield.REFERENCE_THRESHOLD,
        "scheme": "backward",
        "svg": True,
        "out": None,
    },
    "lindblad-compare": {
        "L": 4,
        "omega": 5.75,
        "gamma_dt": 0.01,
        "t_final": 10.0,
        "rate_convention": lindblad.GAMMA_DT,
        "p1": None,
        "p2": None,
        "rk4_dt_max": 1e-3,
        "initial": "full",
        "halvings": 0,
        "svg": True,
        "out": None,
    },
    "analyze": {
        "input": None,
        "method": "both",
        "fit_window": list(criticality.FIT_WINDOW),
        "avg_window": list(criticality.AVG_WINDOW),
        "p2_lower_bound": "auto",
        "half_l_input": None,
        "half_chi_input": None,
        "svg": True,
        "out": None,
    },
    "plot": {"kind": None, "inputs": [], "out": None},
}

REQUIRED = {
    "evolve": ("p1", "p2", "out"),
    "scan": ("p1", "p2", "out"),
    "meanfield": ("out",),
    "lindblad-compare": ("out",),
    "analyze": ("input", "out"),
    "plot": ("kind", "out"),
}

PLOT_KINDS = ("phase-diagram", "series", "effective-exponent")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError("arguments", self.prog, message)


def resolve_config(command, config_path=None, overrides=None):
    """Defaults, then the JSON file, then flags; unknown keys and missing required ones fail."""
    schema = SCHEMAS[command]
    cfg = dict(schema)
    if config_path:
        loaded = persist.read_json(config_path)
        if not isinstance(loaded, dict):
            raise ParameterError("config", config_path, "top level must be a JSON object")
        unknown = sorted(set(loaded) - set(schema))
        if unknown:
            raise ParameterError("config", unknown, f"unknown keys for '{command}'")
        cfg.update(loaded)
    for k, v in (overrides or {}).items():
        if k not in schema:
            raise ParameterError("config", k, f"unknown key for '{command}'")
        cfg[k] = v
    missing = [k for k in REQUIRED[command] if cfg.get(k) in (None, [])]
    if missing:
        raise ParameterError("config", missing, "required but not given")
    return cfg


def _without(cfg, *keys):
    return {k: v for k, v in cfg.items() if k not in keys}


# --- single runs ---------------------------------------------------------


def run_point(cfg, p1, p2):
    """Evolve one parameter point; returns ``{filename: text}``."""
    params = make_gate_params(p1, p2)
    obs = tuple(cfg["observables"])
    backend = cfg["backend"]
    if backend == "dense":
        state0 = dense.initial_state(int(cfg["L"]), cfg["initial"])
        series = dense.evolve(state0, params, int(cfg["T"]), observables_sel=obs, backend=cfg["dense_rule"])
        return {"series.csv": series.to_csv()}
    if backend == "mps":
        from . import mps

        m0 = mps.mps_from_product(int(cfg["L"]), cfg["initial"], chi_max=int(cfg["chi"]), cutoff=float(cfg["cutoff"]))
        series = mps.mps_evolve(m0, params, int(cfg["T"]), observables_sel=obs)
        return {"series.csv": series.to_csv(), "diagnostics.csv": mps.diagnostics_csv(series.meta["diagnostics"])}
    raise ParameterError("backend", backend, "expected 'dense' or 'mps'")


def _validate_run(cfg):
    if cfg["backend"] == "dense" and int(cfg["L"]) > dense.MAX_DENSE_SITES:
        raise CapacityError(f"dense backend is capped at L={dense.MAX_DENSE_SITES}, got L={cfg['L']}")
    if int(cfg["T"]) < 0:
        raise ParameterError("T", cfg["T"], "must be non-negative")
    bad = sorted(set(cfg["observables"]) - {"n_site", "transverse"})
    if bad:
        raise ParameterError("observables", bad, "expected 'n_site' and/or 'transverse'")


def cmd_evolve(cfg):
    _validate_run(cfg)
    files = run_point(cfg, float(cfg["p1"]), float(cfg["p2"]))
    out = Path(cfg["out"])
    for name, text in files.items():
        persist.write_text(out / name, text)
    manifest = {"config": _without(cfg, "out"), "files": sorted(files),
                "provenance": persist.provenance("evolve", _without(cfg, "out"))}
    persist.write_text(out / "manifest.json", persist.dumps(manifest))
    print(f"wrote {', '.join(sorted(files))} to {out}")
    return 0


def _scan_worker(job):
    cfg, p1, p2 = job
    try:
        return {"files": run_point(cfg, p1, p2)}
    except QcaError as exc:
        return {"error": f"{type(exc).__name__}: {exc}", "exit_code": exc.exit_code}
    except Exception as exc:  # noqa: BLE001 - recorded per point, scan continues
        return {"error": f"{type(exc).__name__}: {exc}", "exit_code": 3}


def _jobs(cfg):
    raw = cfg.get("jobs")
    if raw is None:
        raw = os.environ.get(JOBS_ENV, "1")
    try:
        jobs = int(raw)
    except (TypeError, ValueError):
        raise ParameterError("jobs", raw, "must be an integer") from None
    if jobs < 1:
        raise ParameterError("jobs", jobs, "must be at least 1")
    return jobs


def _as_grid(name, values):
    vals = [float(v) for v in (values if isinstance(values, (list, tuple)) else [values])]
    if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
        raise ParameterError(name, values, "grid must be non-empty and strictly increasing")
    for v in vals:
        if not 0.0 <= v <= 1.0:
            raise ParameterError(name, v, "probabilities lie in [0, 1]")
    return vals


def cmd_scan(cfg):
    """Grid of runs laid out as ``p1=<v>/p2=<v>/series.csv``; identical bytes for any worker count."""
    _validate_run(cfg)
    p1s, p2s = _as_grid("p1", cfg["p1"]), _as_grid("p2", cfg["p2"])
    jobs = _jobs(cfg)
    run_cfg = _without(cfg, "jobs", "out", "p1", "p2")
    grid = [(p1, p2) for p1 in p1s for p2 in p2s]
    work = [(run_cfg, p1, p2) for p1, p2 in grid]
    if jobs == 1:
        results = [_scan_worker(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_worker, work))
    out = Path(cfg["out"])
    points, failed = [], []
    for (p1, p2), res in zip(grid, results):
        rel = Path(persist.point_dirname("p1", p1)) / persist.point_dirname("p2", p2)
        entry = {"p1": p1, "p2": p2, "path": (rel / "series.csv").as_posix()}
        if "error" in res:
            entry.update(status="failed", error=res["error"])
            failed.append(res)
        else:
            for name, text in res["files"].items():
                persist.write_text(out / rel / name, text)
            entry["status"] = "ok"
        points.append(entry)
    config = _without(cfg, "jobs", "out")
    manifest = {"config": config, "points": points, "provenance": persist.provenance("scan", config)}
    persist.write_text(out / "manifest.json", persist.dumps(manifest))
    print(f"scan: {len(points) - len(failed)}/{len(points)} points written to {out}")
    if failed:
        for f in failed:
            print(f"  failed: {f['error']}", file=sys.stderr)
        return failed[0]["exit_code"] or 1
    return 0


# --- mean field ------------------------------------------------------------


def _linspace(name, spec):
    try:
        start, stop, num = spec
        num = int(num)
    except (TypeError, ValueError):
        raise ParameterError(name, spec, "expected [start, stop, num]") from None
    if num < 1:
        raise ParameterError(name, spec, "num must be positive")
    return np.linspace(float(start), float(stop), num)


def cmd_meanfield(cfg):
    p1 = _linspace("p1_grid", cfg["p1_grid"])
    p2 = _linspace("p2_grid", cfg["p2_grid"])
    diagram = meanfield.mf_phase_diagram(p1, p2, max_iter=int(cfg["max_iter"]), tol=float(cfg["tol"]))
    records = meanfield.mf_critical_line(diagram, float(cfg["threshold"]), scheme=cfg["scheme"])
    boundary = meanfield.order_boundary(records)
    out = Path(cfg["out"])
    persist.write_text(out / "phase_diagram.json", persist.phase_diagram_to_json(diagram))
    persist.write_text(out / "phase_diagram.csv", persist.phase_diagram_to_csv(diagram))
    persist.write_text(out / "critical_line.json", persist.critical_line_to_json(records, boundary))
    if cfg["svg"]:
        from .plotting import phase_diagram_svg

        persist.write_text(out / "phase_diagram.svg", phase_diagram_svg(diagram, records))
    config = _without(cfg, "out")
    persist.write_text(out / "manifest.json",
                       persist.dumps({"config": config, "provenance": persist.provenance("meanfield", config)}))
    b = "none found" if boundary is None else f"{boundary:.4g}"
    print(f"meanfield: {len(p1)}x{len(p2)} grid, {diagram.meta['unconverged_points']} unconverged, "
          f"order boundary {b}")
    return 0


# --- continuous-time limit ----------------------------------------------------


def cmd_lindblad_compare(cfg):
    rec = lindblad.compare_qca_to_lindblad(
        int(cfg["L"]), float(cfg["omega"]), float(cfg["gamma_dt"]), float(cfg["t_final"]),
        rate_convention=cfg["rate_convention"], p1=cfg["p1"], p2=cfg["p2"],
        rk4_dt_max=float(cfg["rk4_dt_max"]), initial=cfg["initial"],
    )
    out = Path(cfg["out"])
    persist.write_text(out / "comparison.json", persist.dumps(_comparison_dict(rec)))
    if cfg["svg"]:
        from .plotting import overlay_svg

        persist.write_text(out / "overlay.svg", overlay_svg(rec))
    msg = f"max |n_qca - n_lindblad| = {rec.max_abs_diff:.4g}"
    halvings = int(cfg["halvings"])
    if halvings > 0:
        dts = [float(cfg["gamma_dt"]) / 2**k for k in range(halvings + 1)]
        table = lindblad.convergence_table(int(cfg["L"]), float(cfg["omega"]), dts, float(cfg["t_final"]),
                                           rate_convention=cfg["rate_convention"],
                                           rk4_dt_max=float(cfg["rk4_dt_max"]), initial=cfg["initial"])
        persist.write_text(out / "convergence.json", persist.dumps(table))
        msg += f"; log-log slope over {len(dts)} step sizes = {table['slope']:.3f}"
    config = _without(cfg, "out")
    persist.write_text(out / "manifest.json",
                       persist.dumps({"config": config, "provenance": persist.provenance("lindblad-compare", config)}))
    print(msg)
    return 0


def _comparison_dict(rec):
    from dataclasses import asdict

    return asdict(rec)


# --- analysis ------------------------------------------------------------


def load_families(root):
    """Read a scan tree into ``{p1: SeriesFamily}``; failed points are skipped."""
    root = Path(root)
    manifest = persist.read_json(root / "manifest.json")
    try:
        points = manifest["points"]
        config = manifest.get("config", {})
    except (KeyError, TypeError):
        raise DataIOError(f"{root / 'manifest.json'} is not a scan manifest") from None
    prov = {k: config.get(k) for k in ("backend", "L", "chi", "T", "initial")}
    groups = {}
    for pt in points:
        if pt.get("status") != "ok":
            continue
        path = root / pt["path"]
        if not path.is_file():
            raise DataIOError(f"missing series file {path}")
        groups.setdefault(float(pt["p1"]), []).append((float(pt["p2"]), persist.read_series(path)))
    return {p1: criticality.SeriesFamily(p1, sorted(ent, key=lambda e: e[0]), prov) for p1, ent in sorted(groups.items())}


def _p2_bound(raw):
    if raw is None or raw == "auto":
        return raw
    if isinstance(raw, str) and raw.lower() == "none":
        return None
    return float(raw)


def cmd_analyze(cfg):
    families = load_families(cfg["input"])
    if not families:
        raise DataIOError(f"no usable series under {cfg['input']}")
    half_l = load_families(cfg["half_l_input"]) if cfg["half_l_input"] else {}
    half_chi = load_families(cfg["half_chi_input"]) if cfg["half_chi_input"] else {}
    out = Path(cfg["out"])
    estimates = []
    for p1, fam in families.items():
        estimates += criticality.analyze_family(
            fam, cfg["fit_window"], cfg["avg_window"], _p2_bound(cfg["p2_lower_bound"]),
            half_l_family=half_l.get(p1), half_chi_family=half_chi.get(p1), method=cfg["method"],
        )
        if cfg["svg"]:
            from .plotting import effective_exponent_svg

            curves = [(f"p2={p2:g}", s) for p2, s in fam.entries]
            persist.write_text(out / f"alpha_{persist.point_dirname('p1', p1)}.svg",
                               effective_exponent_svg(curves, title=f"p1={p1:g}"))
    persist.write_text(out / "estimates.json", persist.dumps([e.to_dict() for e in estimates]))
    persist.write_text(out / "estimates.csv", criticality.estimates_to_csv(estimates))
    config = _without(cfg, "out")
    persist.write_text(out / "manifest.json",
                       persist.dumps({"config": config, "provenance": persist.provenance("analyze", config)}))
    for e in estimates:
        print(f"p1={e.p1:g} {e.method}: p2_crit={e.p2_crit:.6g} +- {e.p2_err:.3g}, alpha={e.alpha:.4g} +- {e.alpha_err:.3g}")
    return 0


# --- figures ---------------------------------------------------------------


def cmd_plot(cfg):
    from . import plotting

    kind, inputs = cfg["kind"], list(cfg["inputs"] or [])
    if kind not in PLOT_KINDS:
        raise ParameterError("kind", kind, f"expected one of {PLOT_KINDS}")
    if not inputs:
        raise ParameterError("inputs", inputs, "nothing to plot")
    if kind == "phase-diagram":
        if len(inputs) != 1:
            raise ParameterError("inputs", inputs, "phase-diagram takes exactly one JSON file")
        try:
            diagram = persist.phase_diagram_from_json(persist.read_text(inputs[0]))
        except (KeyError, ValueError) as exc:
            raise DataIOError(f"{inputs[0]} is not a phase-diagram JSON: {exc}") from exc
        svg = plotting.phase_diagram_svg(diagram)
    else:
        curves = [(Path(p).parent.name or Path(p).name, persist.read_series(p)) for p in inputs]
        svg = plotting.series_svg(curves) if kind == "series" else plotting.effective_exponent_svg(curves)
    persist.write_text(cfg["out"], svg)
    print(f"wrote {cfg['out']}")
    return 0


COMMANDS = {
    "evolve": cmd_evolve,
    "scan": cmd_scan,
    "meanfield": cmd_meanfield,
    "lindblad-compare": cmd_lindblad_compare,
    "analyze": cmd_analyze,
    "plot": cmd_plot,
}


def _run_flags(p, grid):
    p.add_argument("--backend", choices=["dense", "mps"])
    p.add_argument("--dense-rule", dest="dense_rule", choices=["kraus", "ancilla"])
    p.add_argument("--L", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--chi", type=int)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--initial", help="full | vacuum | mixed")
    p.add_argument("--observables", nargs="*")
    if grid:
        p.add_argument("--p1", type=float, nargs="+")
        p.add_argument("--p2", type=float, nargs="+")
        p.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    else:
        p.add_argument("--p1", type=float)
        p.add_argument("--p2", type=float)


def build_parser():
    parser = _Parser(prog="qca_critic", description="Runs, scans, analysis and figures for the row dynamics.",
                     argument_default=argparse.SUPPRESS)
    parser.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", default=None, help="JSON file with any of the keys below")
        p.add_argument("--out")
        return p

    _run_flags(add("evolve", "evolve one parameter point"), grid=False)
    _run_flags(add("scan", "evolve a p1 x p2 grid"), grid=True)

    p = add("meanfield", "mean-field phase diagram and critical line")
    p.add_argument("--p1-grid", dest="p1_grid", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
    p.add_argument("--p2-grid", dest="p2_grid", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--scheme", choices=list(meanfield.GRADIENT_SCHEMES))
    p.add_argument("--no-svg", dest="svg", action="store_false")

    p = add("lindblad-compare", "QCA against the continuous-time master equation")
    p.add_argument("--L", type=int)
    p.add_argument("--omega", type=float, help="Omega / gamma")
    p.add_argument("--gamma-dt", dest="gamma_dt", type=float)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--rate-convention", dest="rate_convention", choices=list(lindblad.RATE_CONVENTIONS))
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--rk4-dt-max", dest="rk4_dt_max", type=float)
    p.add_argument("--initial")
    p.add_argument("--halvings", type=int, help="also tabulate the discrepancy for this many step halvings")
    p.add_argument("--no-svg", dest="svg", action="store_false")

    p = add("analyze", "critical slice and exponent from a scan tree")
    p.add_argument("--input")
    p.add_argument("--method", choices=list(criticality.ANALYSIS_METHODS))
    p.add_argument("--fit-window", dest="fit_window", type=float, nargs=2)
    p.add_argument("--avg-window", dest="avg_window", type=float, nargs=2)
    p.add_argument("--p2-lower-bound", dest="p2_lower_bound", help="'auto', 'none' or a number")
    p.add_argument("--half-l-input", dest="half_l_input")
    p.add_argument("--half-chi-input", dest="half_chi_input")
    p.add_argument("--no-svg", dest="svg", action="store_false")

    p = add("plot", "SVG figures from earlier outputs")
    p.add_argument("--kind", choices=list(PLOT_KINDS))
    p.add_argument("inputs", nargs="*")
    return parser


def main(argv=None):
    try:
        args = vars(build_parser().parse_args(argv))
        logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        command = args.pop("command")
        config_path = args.pop("config", None)
        if command == "plot" and not args.get("inputs"):
            args.pop("inputs", None)
        cfg = resolve_config(command, config_path, args)
        return COMMANDS[command](cfg)
    except QcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
