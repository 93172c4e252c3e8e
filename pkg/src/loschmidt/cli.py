"""Command-line front end.

::

    loschmidt run      --config cfg.json [--output DIR] [--format csv|json] [--workers N]
    loschmidt compare  --config cfg.json
    loschmidt sweep    --config cfg.json [--parameter eps --values 0.025 0.05 0.1]
    loschmidt selftest [--inject-flip]

Exit codes: 0 success, 2 invalid configuration, 3 numerical abort (results
that were computed are still written and flagged).
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from . import config as cf
from . import engine as en
from . import selftest
from .errors import ConfigError, LoschmidtError

logger = logging.getLogger("loschmidt")

COLUMNS = ["t", "method", "re", "im", "abs2", "se_re", "se_im",
           "diag_w_mean", "diag_err13_mean", "diag_eta_db_eta", "caustic_flag"]
DIFF_COLUMNS = ["t", "method_a", "method_b", "abs_diff", "combined_se"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _fmt(v):
    # repr is the shortest round-trip form of a double
    return repr(float(v))


def series_rows(series_list):
    rows = []
    for s in series_list:
        for j, t in enumerate(s.times):
            v = s.values[j]
            rows.append({
                "t": _fmt(t), "method": s.method, "re": _fmt(v.real), "im": _fmt(v.imag),
                "abs2": _fmt(abs(v) ** 2), "se_re": _fmt(s.se_re[j]), "se_im": _fmt(s.se_im[j]),
                "diag_w_mean": _fmt(s.w_dev[j]), "diag_err13_mean": _fmt(s.err13[j]),
                "diag_eta_db_eta": _fmt(s.eta_db_eta[j]), "caustic_flag": str(int(bool(s.caustic[j]))),
            })
    return rows


def render(rows, columns, fmt):
    if fmt == "json":
        return json.dumps({"columns": columns, "rows": rows}, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def run_methods(cfg, workers):
    """Evaluate every configured method; returns ``(series, failures)``."""
    pair = cf.build_pair(cfg)
    state = cf.build_state(cfg["state"])
    times = cf.build_times(cfg["time"])
    sampler = cf.build_sampler(cfg["sampler"])
    opts = cf.build_options(cfg, workers)
    out, failures = [], {}
    done = {}
    for m in cfg["methods"]:
        if m in done:
            out.append(done[m])
            continue
        logger.info("method %s", m)
        try:
            s = en.estimate(m, state, pair, times, sampler, opts)
        except LoschmidtError as exc:
            failures[m] = f"{type(exc).__name__}: {exc}"
            logger.error("method %s aborted: %s", m, exc)
            continue
        done[m] = s
        out.append(s)
    return out, failures


def _metadata(cfg, command, wall, failures, extra=None):
    meta = {
        "command": command,
        "version": __version__,
        "seed": cfg["sampler"]["seed"],
        "config": cfg,
        "wall_time_s": wall,
        "failures": failures,
    }
    if extra:
        meta.update(extra)
    return meta


def _status(series, failures):
    if failures or any(np.any(s.caustic) for s in series):
        return EXIT_NUMERIC
    return EXIT_OK


def _prepare(args):
    cfg = cf.load(args.config)
    if args.output:
        cfg["output"]["dir"] = args.output
    if args.format:
        cfg["output"]["format"] = args.format
    os.makedirs(cfg["output"]["dir"], exist_ok=True)
    return cfg


def _paths(cfg, suffix=""):
    o = cfg["output"]
    base = os.path.join(o["dir"], o["stem"] + suffix)
    return base + "." + o["format"], base + "_meta.json"


def _grid_info(series):
    return {s.method: s.info for s in series if s.info}


def cmd_run(args, workers):
    cfg = _prepare(args)
    t0 = time.perf_counter()
    series, failures = run_methods(cfg, workers)
    data, meta = _paths(cfg)
    _write(data, render(series_rows(series), COLUMNS, cfg["output"]["format"]))
    extra = {"oracle": _grid_info(series)}
    _write(meta, json.dumps(_metadata(cfg, "run", time.perf_counter() - t0, failures, extra), indent=1))
    return _status(series, failures)


def cmd_compare(args, workers):
    cfg = _prepare(args)
    if len(cfg["methods"]) < 2:
        raise ConfigError("compare needs at least two methods")
    t0 = time.perf_counter()
    series, failures = run_methods(cfg, workers)
    fmt = cfg["output"]["format"]
    data, meta = _paths(cfg)
    _write(data, render(series_rows(series), COLUMNS, fmt))
    rows, summary = [], {}
    for i in range(len(series)):
        for k in range(i + 1, len(series)):
            a, b = series[i], series[k]
            d = np.abs(a.values - b.values)
            se = np.hypot(a.se(), b.se())
            for j, t in enumerate(a.times):
                rows.append({"t": _fmt(t), "method_a": a.method, "method_b": b.method,
                             "abs_diff": _fmt(d[j]), "combined_se": _fmt(se[j])})
            finite = d[np.isfinite(d)]
            summary[f"{a.method}|{b.method}"] = {
                "max_abs": float(finite.max()) if finite.size else None,
                "mean_abs": float(finite.mean()) if finite.size else None,
            }
    diff_path, _ = _paths(cfg, "_diff")
    _write(diff_path, render(rows, DIFF_COLUMNS, fmt))
    extra = {"differences": summary, "oracle": _grid_info(series)}
    _write(meta, json.dumps(_metadata(cfg, "compare", time.perf_counter() - t0, failures, extra), indent=1))
    for key, v in summary.items():
        print(f"{key}: max |dL| = {v['max_abs']!r}, mean |dL| = {v['mean_abs']!r}")
    return _status(series, failures)


def cmd_sweep(args, workers):
    cfg = _prepare(args)
    sw = dict(cfg.get("sweep", {}))
    if args.parameter:
        sw["parameter"] = args.parameter
    if args.values is not None:
        sw["values"] = args.values
    if "parameter" not in sw or "values" not in sw:
        raise ConfigError("sweep needs a parameter and a values list")
    if not sw["values"]:
        raise ConfigError("sweep: values list is empty")
    param = sw["parameter"]
    if param == "eps" and "eps" not in cfg["perturbation"]:
        raise ConfigError("sweep over eps needs perturbation.eps in the config")
    t0 = time.perf_counter()
    status = EXIT_OK
    groups, failures_all = [], {}
    target, reference = sw.get("target", "idr"), sw.get("reference", "grid")
    errors = []
    for i, value in enumerate(sw["values"]):
        sub = cf.with_parameter(cfg, param, value)
        series, failures = run_methods(sub, workers)
        status = max(status, _status(series, failures))
        data, _ = _paths(cfg, f"_{param}{i}")
        _write(data, render(series_rows(series), COLUMNS, cfg["output"]["format"]))
        groups.append({"value": value, "file": os.path.basename(data)})
        if failures:
            failures_all[repr(value)] = failures
        by = {s.method: s for s in series}
        if target in by and reference in by:
            d = np.abs(by[target].values - by[reference].values)
            errors.append(float(np.nanmax(d)))
    extra = {"sweep": {"parameter": param, "groups": groups}}
    if sw.get("fit") and len(errors) == len(sw["values"]) and len(errors) >= 2:
        extra["sweep"]["max_errors"] = errors
        extra["sweep"]["exponent"] = en.fit_exponent(sw["values"], errors)
        print(f"fitted exponent of max |L_{target} - L_{reference}| vs {param}: {extra['sweep']['exponent']!r}")
    _, meta = _paths(cfg, "_sweep")
    _write(meta, json.dumps(_metadata(cfg, "sweep", time.perf_counter() - t0, failures_all, extra), indent=1))
    return status


def cmd_selftest(args, workers):
    rows = selftest.run(inject_flip=args.inject_flip)
    print(selftest.format_report(rows))
    return EXIT_OK if all(r[1] for r in rows) else 1


def _workers(value):
    if value is None:
        value = os.environ.get("LOSCHMIDT_WORKERS", "1")
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"workers must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError("workers must be >= 1")
    return n


def build_parser():
    parser = argparse.ArgumentParser(prog="loschmidt", description="Semiclassical Loschmidt echo estimators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--workers", type=str, default=None, help="worker threads (env LOSCHMIDT_WORKERS)")
    common.add_argument("--output", default=None, help="output directory")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="evaluate the configured methods")
    sub.add_parser("compare", parents=[common], help="evaluate methods and their pairwise differences")
    sp = sub.add_parser("sweep", parents=[common], help="repeat a run over a parameter list")
    sp.add_argument("--parameter", choices=["eps", "hbar", "t"], default=None)
    sp.add_argument("--values", type=float, nargs="*", default=None)
    st = sub.add_parser("selftest", help="run the invariant suite")
    st.add_argument("--inject-flip", action="store_true", help="flip the Cayley convention (negative control)")
    st.add_argument("--verbose", "-v", action="store_true")
    return parser


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "selftest": cmd_selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        workers = _workers(getattr(args, "workers", None))
        return COMMANDS[args.command](args, workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LoschmidtError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
