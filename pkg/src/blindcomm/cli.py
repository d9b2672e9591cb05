"""Command line entry point: ``blindcomm <command> --config cfg.json``.

Config files are JSON, either nested (``{"model": {"n": 100}}``) or with
dotted keys (``{"model.n": 100}``). A ``manifest.json`` written by an
earlier run is also accepted and replays that run's configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .covariance import (
    c_constants,
    c_constants_stderr,
    closed_form_spectrum,
    concentration_probe,
    estimate_p_params,
    sample_covariance,
    theoretical_covariance,
    write_probe_csv,
)
from .errors import BlindCommError, ConfigError, DataError, NumericalError
from .evaluation import Fig1Config, error_rate, run_fig1_experiment, write_summary_csv
from .filters import GraphFilter, lowpass_power_filter, paper_alpha
from .graph_model import PlantedPartitionParams, build_planted_partition
from .rollcall import ingest_rollcalls
from .signals import ExcitationSpec, ObservationBatch, generate_batch
from .spectral import KMeansConfig, blind_partition, estimate_num_groups, top_k_eigenpairs
from .svg import line_chart

log = logging.getLogger("blindcomm")

DEFAULTS = {
    "model.n": 100,
    "model.gamma": 0.5,
    "filter.alpha_rule": "paper",
    "filter.p": 5,
    "excitation.kind": "uniform",
    "excitation.bound": 1.0,
    "excitation.unit_variance": False,
    "pipeline.k": 2,
    "pipeline.m": 2000,
    "pipeline.center": False,
    "pipeline.parallelism": 1,
    "kmeans.restarts": 20,
    "kmeans.max_iter": 300,
    "kmeans.tol": 1e-9,
    "seeds.master": 0,
    "pparams.trials": 2000,
    "pparams.mode": "all",
    "fig1.gammas": [0.1, 0.5, 0.9],
    "fig1.m_grid": [250, 500, 1000, 2000, 3000],
    "fig1.trials": 20,
    "fig1.chart": True,
    "probe.m_grid": [250, 500, 1000, 2000, 4000],
    "probe.trials": 10,
    "probe.reference_trials": 4000,
    "senate.k": [2, 4],
    "senate.center": True,
}


def flatten(cfg, prefix=""):
    out = {}
    for key, value in cfg.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def load_config(path) -> dict:
    cfg = dict(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in raw and "tool_version" in raw:
        raw = raw["config"]
    cfg.update(flatten(raw))
    return cfg


def parse_set(values, cfg):
    for item in values or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        try:
            cfg[key] = json.loads(text)
        except json.JSONDecodeError:
            cfg[key] = text
    return cfg


def _get(cfg, key, kind):
    try:
        return kind(cfg[key])
    except KeyError:
        raise ConfigError(f"missing config key {key}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {cfg[key]!r}") from exc


def model_params(cfg) -> PlantedPartitionParams:
    n = _get(cfg, "model.n", int)
    try:
        if "model.a" in cfg and "model.b" in cfg:
            return PlantedPartitionParams(n, float(cfg["model.a"]), float(cfg["model.b"]))
        return PlantedPartitionParams.from_gamma(n, _get(cfg, "model.gamma", float))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_filter(cfg, params: PlantedPartitionParams) -> GraphFilter:
    if cfg.get("filter.coeffs") is not None:
        return GraphFilter(cfg["filter.coeffs"])
    rule = cfg.get("filter.alpha_rule", "paper")
    p = _get(cfg, "filter.p", int)
    if isinstance(rule, (int, float)):
        return lowpass_power_filter(float(rule), p)
    rule = str(rule).strip()
    m = re.fullmatch(r"fixed\(\s*([^)]+)\)", rule)
    if m:
        return lowpass_power_filter(float(m.group(1)), p)
    m = re.fullmatch(r"paper(?:\(\s*([^)]*)\))?", rule)
    if m:
        gamma = float(m.group(1)) if m.group(1) else params.gamma
        if gamma is None:
            raise ConfigError("alpha_rule 'paper' needs model.gamma or paper(gamma)")
        return lowpass_power_filter(paper_alpha(params.n, gamma), p)
    raise ConfigError(f"unknown filter.alpha_rule {rule!r}")


def excitation(cfg) -> ExcitationSpec:
    try:
        return ExcitationSpec(str(cfg["excitation.kind"]), float(cfg["excitation.bound"]),
                              bool(cfg["excitation.unit_variance"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def kmeans_cfg(cfg) -> KMeansConfig:
    return KMeansConfig(_get(cfg, "kmeans.restarts", int), _get(cfg, "kmeans.max_iter", int),
                        _get(cfg, "kmeans.tol", float))


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunDir:
    """Results directory; all files of a run are written through here."""

    def __init__(self, root, command, cfg):
        stamp = datetime.now(timezone.utc)
        tag = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:8]
        self.path = Path(root) / f"{command}-{stamp:%Y%m%dT%H%M%S}-{tag}"
        suffix = 1
        while self.path.exists():
            self.path = Path(root) / f"{command}-{stamp:%Y%m%dT%H%M%S}-{tag}-{suffix}"
            suffix += 1
        self.path.mkdir(parents=True)
        self.manifest = {
            "command": command,
            "config": cfg,
            "master_seed": cfg.get("seeds.master"),
            "tool_version": __version__,
            "kernel_backend": _kernels.BACKEND,
            "inputs": {},
            "timestamp": stamp.isoformat(),
        }

    def add_input(self, path):
        self.manifest["inputs"][str(path)] = file_hash(path)

    def file(self, name) -> Path:
        return self.path / name

    def write_json(self, name, obj):
        with open(self.file(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def write_labels(self, name, labels, node_ids=None):
        with open(self.file(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "label"])
            ids = range(len(labels)) if node_ids is None else node_ids
            w.writerows(zip(ids, (int(x) for x in labels)))

    def close(self):
        self.write_json("manifest.json", self.manifest)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


# -- commands ------------------------------------------------------------------

def cmd_simulate(cfg, run, args):
    params = model_params(cfg)
    model = build_planted_partition(params)
    filt = build_filter(cfg, params)
    batch = generate_batch(model, filt, excitation(cfg), _get(cfg, "pipeline.m", int),
                           _get(cfg, "seeds.master", int), _get(cfg, "pipeline.parallelism", int))
    batch.write_csv(run.file("signals.csv"), run.file("signals.manifest.json"))
    run.write_labels("truth.csv", model.partition.labels)
    return {"signals": "signals.csv", "m": batch.m, "n": batch.n}


def cmd_pparams(cfg, run, args):
    params = model_params(cfg)
    filt = build_filter(cfg, params)
    p = estimate_p_params(params, filt, _get(cfg, "pparams.trials", int),
                          _get(cfg, "seeds.master", int), mode=str(cfg["pparams.mode"]))
    c1, c2, c3 = c_constants(p, params.n)
    se = c_constants_stderr(p, params.n) if p.trials > 1 else np.zeros(4)
    spec = closed_form_spectrum(c1, c2, c3, params.n)
    with open(run.file("pparams.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value", "stderr"])
        for i in range(8):
            w.writerow([f"p{i + 1}", p.values[i], p.stderr[i]])
        for name, val, s in (("c1", c1, se[0]), ("c2", c2, se[1]), ("c3", c3, se[2]), ("c1-c2", c1 - c2, se[3])):
            w.writerow([name, val, s])
    report = {"c1": c1, "c2": c2, "c3": c3, "stderr_c": se, "mu1": spec.mu1, "mu2": spec.mu2,
              "mu_rest": spec.mu_rest, "recoverable": spec.recoverable, "trials": p.trials}
    run.write_json("pparams.json", report)
    return report


def spectrum_report(c1, c2, c3, n):
    spec = closed_form_spectrum(c1, c2, c3, n)
    C = theoretical_covariance(c1, c2, c3, n).matrix()
    numeric = np.sort(np.linalg.eigvalsh(C))[::-1]
    expected = np.sort(np.r_[spec.mu1, spec.mu2, np.full(n - 2, spec.mu_rest)])[::-1]
    scale = max(np.abs(expected).max(), np.finfo(float).tiny)
    dev = float(np.abs(numeric - expected).max() / scale)
    return {
        "c1": c1, "c2": c2, "c3": c3, "n": n,
        "closed_form": {"mu1": spec.mu1, "mu2": spec.mu2, "mu_rest": spec.mu_rest},
        "numerical": numeric.tolist(),
        "max_relative_deviation": dev,
        "match": dev <= 1e-9,
        "recoverable": spec.recoverable,
    }


def cmd_spectrum(cfg, run, args):
    try:
        c1, c2, c3 = (float(cfg[f"spectrum.{c}"]) for c in ("c1", "c2", "c3"))
        n = int(cfg.get("spectrum.n", cfg["model.n"]))
    except KeyError as exc:
        raise ConfigError(f"spectrum needs spectrum.c1/c2/c3: missing {exc}") from None
    if n % 2:
        raise ConfigError("spectrum.n must be even")
    report = spectrum_report(c1, c2, c3, n)
    run.write_json("spectrum.json", report)
    if not report["match"]:
        raise NumericalError(f"closed form and numerical spectra differ by {report['max_relative_deviation']:.3g}")
    return report


def _read_truth(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([int(r["label"]) for r in rows])


def cmd_partition(cfg, run, args):
    k = _get(cfg, "pipeline.k", int)
    seed = _get(cfg, "seeds.master", int)
    center = bool(cfg["pipeline.center"])
    if args.signals:
        run.add_input(args.signals)
        try:
            batch = ObservationBatch.read_csv(args.signals)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read signals {args.signals}: {exc}") from exc
        truth = None
        if args.truth:
            run.add_input(args.truth)
            truth = _read_truth(args.truth)
    else:
        params = model_params(cfg)
        model = build_planted_partition(params)
        batch = generate_batch(model, build_filter(cfg, params), excitation(cfg),
                               _get(cfg, "pipeline.m", int), seed, _get(cfg, "pipeline.parallelism", int))
        truth = model.partition.labels
    res = blind_partition(batch, k, kmeans_cfg(cfg), seed, center=center)
    run.write_labels("labels.csv", res.labels)
    diag = res.diagnostics()
    diag["centered"] = center
    if truth is not None:
        if truth.size != res.labels.size:
            raise DataError("truth labels do not match the number of nodes")
        diag["error_rate"] = error_rate(res.labels, truth).error_rate
    run.write_json("diagnostics.json", diag)
    return diag


def cmd_fig1(cfg, run, args):
    fc = Fig1Config(
        gammas=[float(g) for g in cfg["fig1.gammas"]],
        m_grid=[int(m) for m in cfg["fig1.m_grid"]],
        trials=_get(cfg, "fig1.trials", int),
        n=_get(cfg, "model.n", int),
        p=_get(cfg, "filter.p", int),
        excitation=excitation(cfg),
        kmeans=kmeans_cfg(cfg),
        sc_trials=cfg.get("fig1.sc_trials"),
        master_seed=_get(cfg, "seeds.master", int),
        parallelism=_get(cfg, "pipeline.parallelism", int),
    )
    result = run_fig1_experiment(fc, run.path)
    summary = result.summary()
    if cfg.get("fig1.chart", True):
        series = {}
        for gamma, m, method, mean, _ in summary:
            if method == "blind":
                series.setdefault(f"gamma={gamma:g}", []).append((m, mean))
        line_chart(series, run.file("fig1.svg"), title="blind partition error vs m")
    if result.failures:
        raise NumericalError(f"{len(result.failures)} experiment cells failed; see failures.csv")
    return {"cells": len(result.raw), "summary": summary}


def cmd_probe(cfg, run, args):
    params = model_params(cfg)
    model = build_planted_partition(params)
    filt = build_filter(cfg, params)
    spec = excitation(cfg)
    seed = _get(cfg, "seeds.master", int)
    p = estimate_p_params(params, filt, _get(cfg, "probe.reference_trials", int), seed)
    C_ref = spec.variance * theoretical_covariance(*c_constants(p, params.n), params.n).matrix()
    res = concentration_probe(model, filt, spec, cfg["probe.m_grid"], C_ref,
                              _get(cfg, "probe.trials", int), seed,
                              parallelism=_get(cfg, "pipeline.parallelism", int))
    write_probe_csv(res, run.file("probe_raw.csv"), run.file("probe_summary.csv"))
    return {"slope": res.slope, "summary": res.summary}


def cmd_senate(cfg, run, args):
    if not (args.votes and args.members):
        raise ConfigError("senate needs --votes and --members")
    for path in (args.votes, args.members):
        if not Path(path).is_file():
            raise DataError(f"input file not found: {path}")
        run.add_input(path)
    data = ingest_rollcalls(args.votes, args.members)
    ks = cfg["senate.k"] if args.k is None else args.k
    ks = [int(k) for k in (ks if isinstance(ks, list) else [ks])]
    center = bool(cfg["senate.center"])
    seed = _get(cfg, "seeds.master", int)
    cov = sample_covariance(data.signals, center)
    out = {"states": list(data.states), "m": data.m, "centered": center,
           "note": ("centered covariance (rollcall signals are not zero-mean)" if center
                    else "uncentered second moment as in the model")}
    for k in ks:
        res = blind_partition(cov, k, kmeans_cfg(cfg), seed)
        run.write_labels(f"labels_k{k}.csv", res.labels, data.states)
        out[f"k{k}"] = res.diagnostics()
    run.write_json("senate.json", out)
    print(out["note"])
    return out


COMMANDS = {
    "simulate": cmd_simulate,
    "pparams": cmd_pparams,
    "spectrum": cmd_spectrum,
    "partition": cmd_partition,
    "fig1": cmd_fig1,
    "probe": cmd_probe,
    "senate": cmd_senate,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="blindcomm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config or an earlier manifest.json")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", default="results", help="root for results directories")
        p.add_argument("--seed", type=int, help="shortcut for seeds.master")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "partition":
            p.add_argument("--signals", help="signals CSV (from simulate); simulates when omitted")
            p.add_argument("--truth", help="node_id,label CSV for scoring")
            p.add_argument("--center", action="store_true", help="center the covariance")
        if name == "spectrum":
            for c in ("c1", "c2", "c3"):
                p.add_argument(f"--{c}", type=float)
            p.add_argument("--n", type=int)
        if name == "senate":
            p.add_argument("--votes")
            p.add_argument("--members")
            p.add_argument("--k", type=int, action="append")
            p.add_argument("--uncentered", action="store_true")
    return ap


def _exit_code(exc):
    if isinstance(exc, BlindCommError):
        return exc.exit_code
    if isinstance(exc, (OSError, csv.Error)):
        return DataError.exit_code
    if isinstance(exc, (np.linalg.LinAlgError, FloatingPointError, ArithmeticError)):
        return NumericalError.exit_code
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = None
    try:
        cfg = parse_set(args.set, load_config(args.config))
        if args.seed is not None:
            cfg["seeds.master"] = args.seed
        if args.command == "spectrum":
            for c in ("c1", "c2", "c3", "n"):
                if getattr(args, c) is not None:
                    cfg[f"spectrum.{c}"] = getattr(args, c)
        if args.command == "partition" and args.center:
            cfg["pipeline.center"] = True
        if args.command == "senate" and args.uncentered:
            cfg["senate.center"] = False
        if args.command == "senate" and args.k:
            cfg["senate.k"] = list(args.k)
        run = RunDir(args.out, args.command, cfg)
        t0 = time.perf_counter()
        result = COMMANDS[args.command](cfg, run, args)
        run.manifest["elapsed_s"] = round(time.perf_counter() - t0, 3)
        run.close()
        json.dump({"status": "ok", "results": str(run.path)}, sys.stdout, default=_jsonable)
        sys.stdout.write("\n")
        return 0
    except Exception as exc:
        code = _exit_code(exc)
        record = {"status": "error", "exit_code": code, "type": type(exc).__name__, "message": str(exc)}
        if run is not None:
            record["results"] = str(run.path)
            run.write_json("error.json", record)
            run.close()
        json.dump(record, sys.stderr)
        sys.stderr.write("\n")
        if code == 1:
            log.exception("unexpected failure")
        return code


if __name__ == "__main__":
    sys.exit(main())
