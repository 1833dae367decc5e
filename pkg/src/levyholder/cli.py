"""Command-line entry point: `levyholder run | sweep | validate CONFIG`."""
import argparse
import contextlib
import json
import math
import os
import sys

import numpy as np
import yaml

from . import __version__
from . import config as cf
from . import exponent as ex
from . import fieldsim as fs
from . import indices as ix
from . import regularity as rg
from .errors import (ConfigError, DegenerateTableError, IndeterminateError, IntegrationError,
                     LevyHolderError, PreconditionError, StepSizeError)
from .kernels import Kernel

EXIT_OK, EXIT_CONFIG, EXIT_INDETERMINATE, EXIT_PRECONDITION = 0, 2, 3, 4
REPORT_SCHEMA = "levyholder.report/1"
SWEEP_SCHEMA = "levyholder.sweep/1"


def exit_code(exc):
    if isinstance(exc, PreconditionError):
        return EXIT_PRECONDITION
    if isinstance(exc, (IndeterminateError, IntegrationError, DegenerateTableError)):
        return EXIT_INDETERMINATE
    if isinstance(exc, (ConfigError, StepSizeError)):
        return EXIT_CONFIG
    return 1


def _clean(obj):
    """JSON-safe tree: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Run:
    """State shared by the stages of one experiment."""

    def __init__(self, cfg, out_dir):
        self.cfg = cfg
        self.out = out_dir
        self.report = {"schema": REPORT_SCHEMA, "version": __version__, "config_digest": cfg.digest,
                       "config": cfg.raw, "stages": {}, "provenance": {}}
        self.index_report = None
        self.lattice = None
        self.sample = None
        self.fits = {}

    def path(self, *parts):
        p = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def get_lattice(self):
        if self.lattice is None:
            lc = self.cfg.lattice
            self.lattice = fs.build_lattice(self.cfg.measure, self.cfg.model, int(lc.get("n_modes", 256)),
                                            lc.get("cutoff"))
            self.report["provenance"]["lattice"] = self.lattice.provenance()
        return self.lattice


def _stage_diagnose(run):
    run.report["stages"]["diagnose"] = ex.diagnose(run.cfg.model).to_dict()


def _stage_indices(run):
    c = run.cfg
    opts = c.raw.get("indices", {})
    kind = c.kernel if opts.get("kernel_indices", True) else None
    rep = ix.compute_index_report(c.model, c.measure, kernel_kind=kind, T=c.horizon,
                                  budget=int(opts.get("budget", 8)))
    run.index_report = rep
    run.report["stages"]["indices"] = rep.to_dict()
    cf.write_csv([rep.csv_row()], run.path("tables", "indices.csv"), list(ix.IndexReport.CSV_FIELDS))


def _stage_simulate(run):
    c = run.cfg
    lat = run.get_lattice()
    sample = fs.simulate_linear(Kernel(c.kernel, c.model), lat, c.time_grid(), c.space_grid(), c.replicas,
                                c.seed)
    run.sample = sample
    sample.save(run.path("fields", "linear.bin"))
    sample.slice_csv(0, run.path("tables", "field_replica0.csv"))
    run.report["stages"]["simulate"] = {"shape": list(sample.values.shape), "file": "fields/linear.bin",
                                        "lattice_digest": lat.digest(),
                                        "truncation_error": lat.truncation_error}


def _lags(vg, direction, sample):
    spec = vg.get("lags")
    if isinstance(spec, dict):
        spec = spec.get(direction)
    if spec is None:
        if vg.get("mode", "exact") == "empirical":
            grid = sample.time_grid if direction == "time" else np.asarray(sample.space_grid).reshape(
                sample.space_grid.shape[0], -1)[:, 0]
            step = float(grid[1] - grid[0]) if grid.size > 1 else 1.0
            return step * np.arange(1, grid.size)
        return rg.dyadic_lags(int(vg.get("k_min", 3)), int(vg.get("k_max", 14)))
    return np.asarray(spec, float)


def _stage_variogram(run):
    c = run.cfg
    vg = c.variogram
    mode = vg.get("mode", "exact")
    if mode not in ("exact", "empirical"):
        raise ConfigError("variogram.mode must be 'exact' or 'empirical'")
    source = run.sample if mode == "empirical" else rg.exact(Kernel(c.kernel, c.model), c.measure)
    base = vg.get("base_times")
    out = {}
    for direction in vg.get("directions", ["time", "space"]):
        table = rg.variogram(source, direction, _lags(vg, direction, run.sample), base)
        table.to_csv(run.path("tables", f"variogram_{direction}.csv"))
        entry = {"mode": mode, "lags": table.lags, "values": table.values, "stderr": table.stderr,
                 "base_points": table.base_points, "rejected": table.rejected}
        try:
            fit = rg.fit_exponent(table, n_fit=int(vg.get("n_fit", rg.N_FIT)))
        except DegenerateTableError as exc:
            entry["fit_error"] = str(exc)
        else:
            run.fits[direction] = fit
            entry["fit"] = fit.to_dict()
        out[direction] = entry
    run.report["stages"]["variogram"] = out


def _stage_classify(run):
    verdict = rg.classify(run.index_report, run.fits, run.cfg.kernel)
    run.report["stages"]["classify"] = verdict.to_dict()
    cf.write_csv(verdict.to_csv_rows(), run.path("tables", "classification.csv"))


def _nonlinearity(spec):
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return fs.constant(float(spec.get("a0", 0.0)))
    if kind == "linear":
        return fs.linear(float(spec.get("c", -1.0)))
    raise ConfigError(f"nonlinear.g.kind must be 'constant' or 'linear', got {kind!r}")


def _stage_nonlinear(run):
    c = run.cfg
    if c.kernel != "heat":
        raise ConfigError("the nonlinear stage solves the heat equation; set kernel: heat")
    nl = c.nonlinear
    g = _nonlinearity(dict(nl.get("g", {})))
    lat = run.get_lattice()
    if nl.get("noise", True) is False:
        lat = lat.scaled(0.0)
    sample = fs.solve_nonlinear_heat(c.model, c.measure, g, nl.get("u0", 0.0), lat, c.time_grid(),
                                     c.space_grid(), c.seed, c.replicas)
    sample.save(run.path("fields", "nonlinear.bin"))
    run.report["stages"]["nonlinear"] = {"shape": list(sample.values.shape), "file": "fields/nonlinear.bin",
                                         "scheme": sample.lattice.get("nonlinear")}


STAGE_FUNCS = {"diagnose": _stage_diagnose, "indices": _stage_indices, "simulate": _stage_simulate,
               "variogram": _stage_variogram, "classify": _stage_classify, "nonlinear": _stage_nonlinear}


def run(cfg, out_root=None):
    """Execute the configured stages; returns (report dict, output directory).

    Errors propagate with their stage attached; the partial report is written first.
    """
    if not isinstance(cfg, cf.ExperimentConfig):
        cfg = cf.parse(cfg)
    out_dir = os.path.join(cf.output_root(out_root), cfg.digest)
    os.makedirs(out_dir, exist_ok=True)
    state = _Run(cfg, out_dir)
    try:
        for stage in cf.STAGES:
            if stage in cfg.stages:
                try:
                    STAGE_FUNCS[stage](state)
                except LevyHolderError as exc:
                    exc.stage = exc.stage or stage
                    raise
    except LevyHolderError as exc:
        state.report["error"] = {"stage": exc.stage, "operation": exc.operation, "message": str(exc),
                                 "type": type(exc).__name__}
        _write_json(os.path.join(out_dir, "report.json"), state.report)
        raise
    _write_json(os.path.join(out_dir, "report.json"), state.report)
    return state.report, out_dir


def sweep(base, parameter, values, out_root=None):
    """One index computation per value of `parameter`; failures are recorded per row."""
    if isinstance(base, cf.ExperimentConfig):
        base = base.raw
    cf.resolve_path(base, parameter)
    values = list(values)
    key = {"base": base, "parameter": parameter, "values": values}
    out_dir = os.path.join(cf.output_root(out_root), cf.digest(key))
    os.makedirs(os.path.join(out_dir, "tables"), exist_ok=True)
    fields = ["value", "status", "error"] + list(ix.IndexReport.CSV_FIELDS)
    rows, reports = [], []
    for v in values:
        row = {"value": v}
        try:
            cfg = cf.parse(cf.with_value(base, parameter, v))
            opts = cfg.raw.get("indices", {})
            kind = cfg.kernel if opts.get("kernel_indices", True) else None
            rep = ix.compute_index_report(cfg.model, cfg.measure, kernel_kind=kind, T=cfg.horizon,
                                          budget=int(opts.get("budget", 8)))
        except LevyHolderError as exc:
            row.update(status=f"exit_{exit_code(exc)}", error=str(exc))
            reports.append({"value": v, "error": str(exc)})
        else:
            row.update(status="ok", error="")
            row.update(rep.csv_row())
            reports.append({"value": v, "report": rep.to_dict()})
        rows.append(row)
    table = cf.write_csv(rows, os.path.join(out_dir, "tables", "sweep.csv"), fields)
    _write_json(os.path.join(out_dir, "report.json"),
                {"schema": SWEEP_SCHEMA, "version": __version__, "config_digest": cf.digest(key),
                 "parameter": parameter, "values": values, "base": base, "runs": reports})
    return rows, table, out_dir


def _parse_values(text):
    text = text.strip()
    if not text:
        return []
    if text.startswith("["):
        vals = yaml.safe_load(text)
        if not isinstance(vals, list):
            raise ConfigError("--values must be a list")
        return vals
    return [yaml.safe_load(v) for v in text.split(",") if v.strip()]


def _apply_overrides(data, args):
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return data


@contextlib.contextmanager
def _thread_limit(n):
    if n is None:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=int(n)):
        yield


def build_parser():
    p = argparse.ArgumentParser(prog="levyholder", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="experiment config (YAML or JSON)")
    common.add_argument("--out", help=f"output root (default ${cf.OUT_ENV} or ./out)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="cap on numerical library threads")
    sub.add_parser("run", parents=[common], help="run the configured stages")
    sp = sub.add_parser("sweep", parents=[common], help="index table over one parameter")
    sp.add_argument("--param", required=True, help="dotted config path, e.g. model.params.alpha")
    sp.add_argument("--values", required=True, help="comma-separated values or a YAML/JSON list")
    sub.add_parser("validate", parents=[common], help="check the config and stage order only")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit(args.threads):
            data = _apply_overrides(cf.load(args.config), args)
            if args.command == "validate":
                cfg = cf.parse(data)
                print(f"ok {cfg.digest} stages={','.join(s for s in cf.STAGES if s in cfg.stages)}")
            elif args.command == "run":
                _, out_dir = run(cf.parse(data), args.out)
                print(out_dir)
            else:
                rows, _, out_dir = sweep(data, args.param, _parse_values(args.values), args.out)
                failed = sum(r["status"] != "ok" for r in rows)
                print(f"{out_dir} rows={len(rows)} failed={failed}")
    except (OSError, yaml.YAMLError) as exc:
        print(f"levyholder: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevyHolderError as exc:
        print(f"levyholder: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
