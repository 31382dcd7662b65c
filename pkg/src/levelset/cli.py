"""Command-line front end: ``python -m levelset {bpdn,convergence,lowrank,image}``.

Each subcommand reads an optional TOML config of flat ``key = value`` pairs,
writes ``report.csv``, one ``trace_<method>.csv`` per run and
``config_echo.txt`` (the fully resolved settings) into ``--out-dir``.

Exit codes: 0 success, 2 when some report rows failed (they are marked in
``report.csv``), 1 on structural errors such as a bad config.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .harness import (
    BPDN_SCHEDULE,
    ImageConfig,
    LowRankExperimentConfig,
    Method,
    SpikeTrainConfig,
    run_bpdn_study,
    run_convergence_study,
    run_image_study,
    run_lowrank_study,
    write_convergence_csv,
)
from .solvers import ContinuationSchedule

ALL_NORMS = ["l2", "l1", "linf", "l0"]

SNR_HELP = "SNR is 20*log10(||truth|| / ||truth - estimate||) in dB, capped at 300."


class ConfigError(ValueError):
    pass


def _fields(cls, skip=("seed",)):
    return {f.name: f.default for f in dataclasses.fields(cls) if f.name not in skip}


def _schedule_fields():
    return {f.name: getattr(BPDN_SCHEDULE, f.name) for f in dataclasses.fields(ContinuationSchedule) if f.name != "warm_start"}


# Defaults per subcommand; a config may only override these keys.
DEFAULTS = {
    "bpdn": {
        **_fields(SpikeTrainConfig),
        "norms": ALL_NORMS,
        "algorithm": "alg3",
        "accelerate": True,
        "cg_iters": 0,
        "sigma_policy": "exact",
        "normalize": True,
        **_schedule_fields(),
    },
    "convergence": {**_fields(SpikeTrainConfig), "iters": 100, "eta": 1e-4, "cg_budgets": [1, 5, 20]},
    "lowrank": {**_fields(LowRankExperimentConfig), "norms": ALL_NORMS},
    "image": {**_fields(ImageConfig), "norms": ALL_NORMS},
}


def load_config(path, command):
    """Merge a TOML file over the defaults of ``command``; unknown keys fail."""
    settings = dict(DEFAULTS[command])
    if path is None:
        return settings
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"bad config {path}: {err}") from err
    seed = raw.pop("seed", None)
    unknown = sorted(set(raw) - set(settings))
    if unknown:
        raise ConfigError(f"unknown {command} keys: {', '.join(unknown)}")
    settings.update(raw)
    if seed is not None:
        settings["seed"] = seed
    return settings


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if value is None:
        return '"none"'
    return repr(value)


def write_echo(path, command, settings):
    with open(path, "w") as fh:
        fh.write(f"# levelset {command}\n")
        for key in sorted(settings):
            fh.write(f"{key} = {_fmt(settings[key])}\n")


def _none(value):
    return None if value in ("none", None) else value


def _pick(cls, settings):
    names = {f.name for f in dataclasses.fields(cls)}
    return {k: _none(v) for k, v in settings.items() if k in names}


def _write_traces(out_dir, traces):
    for label, trace in traces.items():
        trace.to_csv(os.path.join(out_dir, f"trace_{label}.csv"))


def _run_bpdn(settings, out_dir):
    cfg = SpikeTrainConfig(**_pick(SpikeTrainConfig, settings))
    schedule = ContinuationSchedule(**_pick(ContinuationSchedule, settings))
    cg = int(settings["cg_iters"]) or None
    methods = [Method(settings["algorithm"], nm, cg, bool(settings["accelerate"])) for nm in settings["norms"]]
    sigma = settings["sigma_policy"]
    if sigma != "exact" and not isinstance(sigma, (int, float)):
        raise ConfigError('sigma_policy must be "exact" or a number')
    report, traces = run_bpdn_study(cfg, methods, sigma, schedule, bool(settings["normalize"]))
    report.to_csv(os.path.join(out_dir, "report.csv"))
    _write_traces(out_dir, traces)
    return report


def _run_convergence(settings, out_dir):
    cfg = SpikeTrainConfig(**_pick(SpikeTrainConfig, settings))
    traces = run_convergence_study(tuple(settings["cg_budgets"]), int(settings["iters"]), cfg, float(settings["eta"]))
    ref = traces["alg3"].objective[-1]
    with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "objective_start", "objective_final", "ratio_to_alg3", "seconds", "status"])
        for name, tr in traces.items():
            w.writerow(
                [name, f"{tr.objective[0]:.10g}", f"{tr.objective[-1]:.10g}", f"{tr.objective[-1] / ref:.10g}", f"{tr.seconds[-1]:.4f}", "ok"]
            )
    write_convergence_csv(os.path.join(out_dir, "decay.csv"), traces)
    _write_traces(out_dir, traces)
    return None


def _run_lowrank(settings, out_dir):
    cfg = LowRankExperimentConfig(**_pick(LowRankExperimentConfig, settings))
    report, traces = run_lowrank_study(cfg, tuple(settings["norms"]))
    report.to_csv(os.path.join(out_dir, "report.csv"))
    _write_traces(out_dir, traces)
    return report


def _run_image(settings, out_dir):
    cfg = ImageConfig(**_pick(ImageConfig, settings))
    report, traces = run_image_study(cfg, tuple(settings["norms"]))
    report.to_csv(os.path.join(out_dir, "report.csv"))
    _write_traces(out_dir, traces)
    return report


RUNNERS = {"bpdn": _run_bpdn, "convergence": _run_convergence, "lowrank": _run_lowrank, "image": _run_image}

HELP = {
    "bpdn": "spike-train basis pursuit denoise with each residual ball. " + SNR_HELP,
    "convergence": "objective decay of prox-gradient, exact BCD and CG-inexact BCD at fixed eta",
    "lowrank": "factorized low-rank completion / denoising of a synthetic matrix. " + SNR_HELP,
    "image": "stand-in transform-domain study: 2-D image sparse in the DCT, masked and corrupted. " + SNR_HELP,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="levelset", description="Level-set relaxation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="TOML file of key = value overrides")
        p.add_argument("--seed", type=int, help="instance seed (overrides the config)")
        p.add_argument("--out-dir", default=".", help="directory for report.csv, traces and config_echo.txt")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_config(args.config, args.command)
        if args.seed is not None:
            settings["seed"] = args.seed
        settings.setdefault("seed", 0)
        os.makedirs(args.out_dir, exist_ok=True)
        write_echo(os.path.join(args.out_dir, "config_echo.txt"), args.command, settings)
        report = RUNNERS[args.command](settings, args.out_dir)
    except (ConfigError, TypeError, ValueError, OSError) as err:
        print(f"levelset {args.command}: {err}", file=sys.stderr)
        return 1
    if report is not None and report.failed:
        for row in report.failed:
            print(f"levelset {args.command}: {row.method} failed: {row.status}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
