"""Command-line front end.

Subcommands::

    pulsedrf run        --preset fig1 [--config FILE] [--set key=value ...] [--out DIR]
    pulsedrf sweep      (same options; points run in a process pool of --threads workers)
    pulsedrf analyze    RESULT (a results directory or one spectrum CSV)
    pulsedrf plot-script RESULTS_DIR [--semilog]

Exit codes: 0 success, 2 validation error, 3 numerical failure.
Environment overrides: ``PULSEDRF_THREADS`` (worker / thread count) and
``PULSEDRF_OUT`` (output root).
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import multiprocessing
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__
from .config import (
    RunConfig,
    ValidationError,
    _KEYS,
    _convert,
    from_preset,
    load_config,
    preset_values,
    validate,
)
from .lindblad import ConfigError, PropagationDiverged
from .polaron import KernelGridError
from .report import dumps, run_point, spectrum_csv
from .spectrum import NumericalError, find_peaks, sideband_weight_ratio, SpectrumResult

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

MANIFEST = "manifest.json"
SUMMARY = "summary.csv"
AGGREGATE = "spectra_all.csv"
TIMINGS = "timings.json"
PLOT_SCRIPT = "plot_spectra.py"


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("PULSEDRF_THREADS")
    return max(1, int(env)) if env else 1


def build_config(args):
    """RunConfig from ``--preset``, ``--config``, ``--set`` and flags."""
    base = preset_values(args.preset) if args.preset else None
    if args.config:
        cfg = load_config(args.config, base=base)
    elif args.preset:
        cfg = from_preset(args.preset)
    else:
        raise ValidationError("give --preset or --config")
    over = {}
    for item in args.set or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in _KEYS or key in ("mode", "preset"):
            raise ValidationError(f"--set: unknown or fixed key {key!r}")
        name, kind, is_list = _KEYS[key]
        try:
            if is_list:
                over[name] = tuple(_convert(kind, v.strip(), cfg.mode) for v in value.split(",") if v.strip())
            else:
                over[name] = _convert(kind, value, cfg.mode)
        except ValueError as exc:
            raise ValidationError(f"--set {key}: {exc}") from None
    if getattr(args, "no_phonons", False):
        over["phonons"] = (False,)
    out = args.out or os.environ.get("PULSEDRF_OUT")
    if out:
        over["output"] = out
    if over:
        values = cfg.to_dict()
        values.update(over)
        cfg = RunConfig.from_dict(values)
    return validate(cfg)


def _point_task(cfg_dict, index, numba_threads):
    """Run one sweep point; never raises (failures are returned)."""
    import numba
    numba.set_num_threads(min(numba_threads, numba.config.NUMBA_NUM_THREADS))
    cfg = RunConfig.from_dict(cfg_dict)
    point = cfg.points()[index]
    t0 = time.perf_counter()
    try:
        spec, meta = run_point(cfg, point)
    except (ValidationError, ConfigError, KernelGridError) as exc:
        return index, None, None, {"kind": "validation", "error": str(exc)}, time.perf_counter() - t0
    except (NumericalError, PropagationDiverged, FloatingPointError, np.linalg.LinAlgError) as exc:
        return index, None, None, {"kind": "numerical", "error": str(exc)}, time.perf_counter() - t0
    return index, spectrum_csv(spec), meta, None, time.perf_counter() - t0


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def execute(cfg, workers=1, pool=False, log=None):
    """Run every sweep point and write the result set. Returns the exit code."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    points = cfg.points()
    cfg_dict = cfg.to_dict()
    results = {}
    if pool and workers > 1 and len(points) > 1:
        # fork is unsafe once numba's threading layer is running in the parent
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
            futs = [ex.submit(_point_task, cfg_dict, p.index, 1) for p in points]
            for fut in futs:
                r = fut.result()
                results[r[0]] = r
                if log:
                    log(_progress(points[r[0]], r))
    else:
        for p in points:
            r = _point_task(cfg_dict, p.index, workers)
            results[p.index] = r
            if log:
                log(_progress(p, r))
    return _write_results(cfg, out, points, results)


def _progress(point, r):
    status = "ok" if r[3] is None else f"FAILED ({r[3]['kind']}: {r[3]['error']})"
    return f"{point.name}: theta={point.theta / np.pi:g}pi delta={point.delta:g} " \
           f"gamma'={point.gamma_prime:g} phonons={'on' if point.phonons else 'off'} {status}"


def _write_results(cfg, out, points, results):
    manifest = {"version": __version__, "config": cfg.to_dict(), "points": []}
    timings = {}
    summary = ["name,theta_over_pi,delta,gamma_prime,temperature,phonons,status,coh_fraction,sideband_ratio"]
    aggregate = ["name,delta,s_total,s_coh,s_inc"]
    code = EXIT_OK
    for p in points:
        _, csv_text, meta, failure, wall = results[p.index]
        timings[p.name] = wall
        entry = {"name": p.name, "theta": p.theta, "delta": p.delta, "gamma_prime": p.gamma_prime,
                 "temperature": p.temperature if p.phonons else None, "phonons": p.phonons}
        temp = f"{p.temperature:.17g}" if p.phonons else ""
        if failure is None:
            _write(out / f"{p.name}.csv", csv_text)
            _write(out / f"{p.name}.json", dumps(meta))
            entry.update(status="ok", spectrum=f"{p.name}.csv", metadata=f"{p.name}.json")
            a = meta["analysis"]
            ratio = "" if a["sideband_ratio"] is None else f"{a['sideband_ratio']:.17g}"
            summary.append(f"{p.name},{p.theta / np.pi:.17g},{p.delta:.17g},{p.gamma_prime:.17g},{temp},"
                           f"{int(p.phonons)},ok,{a['coh_fraction']:.17g},{ratio}")
            for line in csv_text.splitlines()[1:]:
                aggregate.append(f"{p.name},{line}")
        else:
            entry.update(status="failed", error_kind=failure["kind"], error=failure["error"])
            summary.append(f"{p.name},{p.theta / np.pi:.17g},{p.delta:.17g},{p.gamma_prime:.17g},{temp},"
                           f"{int(p.phonons)},failed,,")
            kind_code = EXIT_NUMERICAL if failure["kind"] == "numerical" else EXIT_VALIDATION
            code = max(code, kind_code)
        manifest["points"].append(entry)
    _write(out / MANIFEST, dumps(manifest))
    _write(out / SUMMARY, "\n".join(summary) + "\n")
    _write(out / AGGREGATE, "\n".join(aggregate) + "\n")
    # wall times vary run to run; kept apart so the files above are byte-stable
    _write(out / TIMINGS, dumps(timings))
    return code


def load_metadata(path):
    """RunConfig stored in a point metadata file."""
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh)["run_config"])


def read_spectrum(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SpectrumResult(data[:, 0], data[:, 1], data[:, 2])


def analyze(target, omega_r=None, min_height_frac=0.05):
    """Peak table, sideband ratio and coherent fraction for stored spectra."""
    target = Path(target)
    files = sorted(target.glob("p*.csv")) if target.is_dir() else [target]
    if not files:
        raise ValidationError(f"no spectrum files in {target}")
    report = {}
    for f in files:
        spec = read_spectrum(f)
        meta_path = f.with_suffix(".json")
        w_r = omega_r
        if w_r is None and meta_path.exists():
            with open(meta_path, encoding="utf-8") as fh:
                w_r = json.load(fh)["analysis"]["omega_r"]
        total = np.trapezoid(spec.s_total, spec.detunings)
        entry = {
            "peaks": [vars(p) for p in find_peaks(spec.s_inc, spec.detunings, min_height_frac)],
            "coh_fraction_in_band": float(np.trapezoid(spec.s_coh, spec.detunings) / total) if total else None,
        }
        if w_r:
            try:
                entry["sideband_ratio"] = sideband_weight_ratio(spec, w_r)
            except ConfigError as exc:
                entry["sideband_ratio_error"] = str(exc)
        report[f.name] = entry
    return report


# --- plot script -------------------------------------------------------------

_PLOT_TEMPLATE = '''"""Plot the spectra listed in manifest.json (generated file)."""
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
SEMILOG = {semilog}
LAYOUT = {layout!r}

manifest = json.loads((HERE / "manifest.json").read_text())
points = [p for p in manifest["points"] if p["status"] == "ok"]


def load(p):
    d = np.loadtxt(HERE / p["spectrum"], delimiter=",", skiprows=1, ndmin=2)
    return d[:, 0], d[:, 1], d[:, 2], d[:, 3]


def style(ax):
    if SEMILOG:
        ax.set_yscale("log")
        ax.set_ylim(1e-4, 2)
    ax.set_xlabel("detuning from laser")


if LAYOUT == "phonon":
    deltas = sorted({{p["delta"] for p in points}}, key=lambda d: (abs(d), -d))
    fig, axes = plt.subplots(len(deltas), 2, figsize=(8, 2.6 * len(deltas)), squeeze=False)
    for row, delta in enumerate(deltas):
        group = [p for p in points if p["delta"] == delta]
        ref = [p for p in group if not p["phonons"]] or group
        x0, _, c0, i0 = load(ref[0])
        for col, (idx, label) in enumerate(((3, "incoherent"), (2, "coherent"))):
            ax = axes[row][col]
            norm = np.max(np.abs((i0, c0)[col])) or 1.0
            for p in group:
                data = load(p)
                ax.plot(data[0], data[idx] / norm, "-." if p["phonons"] else "-",
                        label=("phonons" if p["phonons"] else "no phonons"))
            ax.set_title(f"{{label}}, delta = {{delta:g}}")
            style(ax)
            ax.legend(fontsize=7)
elif LAYOUT == "grid":
    thetas = sorted({{p["theta"] for p in points}})
    deltas = sorted({{p["delta"] for p in points}}, key=lambda d: (d != 0, d))
    fig, axes = plt.subplots(len(thetas), len(deltas), figsize=(4 * len(deltas), 2.4 * len(thetas)),
                             squeeze=False)
    for row, theta in enumerate(thetas):
        group = [p for p in points if p["theta"] == theta]
        # each row is normalised to the resonant total-spectrum maximum
        ref = [p for p in group if p["delta"] == deltas[0]] or group
        norm = max(np.max(load(p)[1]) for p in ref) or 1.0
        for col, delta in enumerate(deltas):
            ax = axes[row][col]
            for p in (p for p in group if p["delta"] == delta):
                x, tot, coh, inc = load(p)
                dash = "-" if p["gamma_prime"] == 0 else "-."
                if p["gamma_prime"] == 0:
                    ax.plot(x, tot / norm, "k" + dash, lw=1)
                ax.plot(x, inc / norm, dash, color="tab:orange", lw=1)
                ax.plot(x, coh / norm, dash, color="tab:blue", lw=1)
            ax.set_title(f"theta = {{theta / np.pi:g}} pi, delta = {{delta:g}}", fontsize=8)
            style(ax)
else:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x, tot, coh, inc = load(points[0])
    norm = np.max(tot) or 1.0
    ax.plot(x, tot / norm, "k", label="total")
    ax.plot(x, inc / norm, color="tab:orange", label="incoherent")
    ax.plot(x, coh / norm, color="tab:blue", label="coherent")
    ax.legend()
    style(ax)

fig.tight_layout()
fig.savefig(HERE / "spectra.png", dpi=150)
'''


def emit_plot_script(results_dir, semilog=None):
    """Write a matplotlib script that renders the stored result set."""
    results_dir = Path(results_dir)
    man_path = results_dir / MANIFEST
    if not man_path.exists():
        raise ValidationError(f"{results_dir} holds no {MANIFEST}")
    with open(man_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    ok = [p for p in manifest["points"] if p["status"] == "ok"]
    if not ok:
        raise ValidationError(f"{results_dir} holds no successful spectra")
    cfg = manifest["config"]
    if semilog is None:
        semilog = bool(cfg.get("semilog", False))
    if len(ok) == 1:
        layout = "single"
    elif any(p["phonons"] for p in ok):
        layout = "phonon"
    else:
        layout = "grid"
    path = results_dir / PLOT_SCRIPT
    _write(path, _PLOT_TEMPLATE.format(semilog=bool(semilog), layout=layout))
    return path


# --- entry point -------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="pulsedrf", description="Pulsed resonance-fluorescence spectra.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run every point of a configuration in this process"),
                           ("sweep", "run the points of a configuration in a process pool")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--preset", choices=("fig1", "fig2", "fig3", "custom"))
        s.add_argument("--config", help="key = value configuration file")
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int, help="worker processes (sweep) or compute threads (run)")
        s.add_argument("--no-phonons", action="store_true", help="drop the phonon-coupled runs")
        s.add_argument("--plot", action="store_true", help="also write the plot script")
        s.add_argument("--semilog", action="store_true", default=None, help="log-scale plot script")
        s.add_argument("--quiet", action="store_true")
    a = sub.add_parser("analyze", help="peaks and sideband weights of stored spectra")
    a.add_argument("target", help="results directory or spectrum CSV")
    a.add_argument("--omega-r", type=float, help="sideband offset (default from metadata)")
    a.add_argument("--min-height", type=float, default=0.05, help="peak threshold relative to max")
    ps = sub.add_parser("plot-script", help="write a plotting script for a results directory")
    ps.add_argument("results", help="results directory")
    ps.add_argument("--semilog", action="store_true", default=None)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            cfg = build_config(args)
            log = None if args.quiet else (lambda msg: print(msg, flush=True))
            code = execute(cfg, _threads(args), pool=args.command == "sweep", log=log)
            if args.plot:
                try:
                    emit_plot_script(cfg.output, args.semilog)
                except ValidationError:
                    pass
            if not args.quiet:
                print(f"results in {cfg.output}", flush=True)
            return code
        if args.command == "analyze":
            print(json.dumps(analyze(args.target, args.omega_r, args.min_height), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "plot-script":
            print(emit_plot_script(args.results, args.semilog))
            return EXIT_OK
    except (ValidationError, ConfigError, KernelGridError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, PropagationDiverged) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
