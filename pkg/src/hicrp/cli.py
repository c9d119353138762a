"""Command-line front end.

Every subcommand writes its outputs and a ``manifest.json`` to the output
directory (``--out``, else ``$HICRP_OUTPUT_DIR``, else ``./hicrp-output``).
Settings come from built-in defaults, then a ``--config`` JSON file, then
flags, later sources taking precedence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from ._validation import check_rng

OUTPUT_ENV = "HICRP_OUTPUT_DIR"

MCMC_DEFAULTS = {"chains": 4, "iters": 2000, "burnin": 0, "thin": 1, "step_size": 0.1,
                 "adapt": True, "init_jitter": 0.5, "n_jobs": 1}

DEFAULTS = {
    "simulate": {"model": "sicrp", "alpha": 0.7, "beta": 0.2, "theta": 30.0, "m": 0,
                 "nu_table": "2:1000", "expected_counts": False, "reps": 1, "seed": None},
    "coagulate": {"input": None, "input_format": "auto", "mode": "timestamp", "bins": 20000,
                  "binning": "equal-width", "alpha": 0.7, "beta": 0.2, "theta": 20.0,
                  "m": 3, "seed": None},
    "infer-sicrp": {"input": None, "input_format": "interactions", "seed": None,
                    **MCMC_DEFAULTS},
    "infer-hicrp": {"fine": None, "coarse": None, "S": 100, "exact_marginal": False,
                    "seed": None, **MCMC_DEFAULTS},
    "ppc": {"trace": None, "fine": None, "coarse": None, "draws": 100, "reps_per_draw": 1,
            "level": 0.95, "seed": None},
    "diagnose": {"trace": None},
    "verify-duality": {"n": 4, "alpha": 0.6, "beta": 0.3, "theta": 1.0, "m": 2,
                       "tolerance": 1e-10},
}
STOCHASTIC = {"simulate", "infer-sicrp", "infer-hicrp", "ppc"}


class UsageError(Exception):
    pass


def _add(p, *names, **kw):
    p.add_argument(*names, default=argparse.SUPPRESS, **kw)


def _mcmc_flags(p):
    _add(p, "--chains", type=int, help="number of chains")
    _add(p, "--iters", type=int, help="retained iterations per chain (after burn-in)")
    _add(p, "--burnin", type=int, help="burn-in iterations per chain")
    _add(p, "--thin", type=int, help="thinning interval")
    _add(p, "--step-size", dest="step_size", type=float, help="initial random-walk scale")
    _add(p, "--no-adapt", dest="adapt", action="store_false",
         help="keep the step size fixed during burn-in")
    _add(p, "--init-jitter", dest="init_jitter", type=float)
    _add(p, "--n-jobs", dest="n_jobs", type=int, help="parallel chains (results unchanged)")


def build_parser():
    parser = argparse.ArgumentParser(prog="hicrp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        _add(p, "--config", help="JSON file of settings; flags override it")
        _add(p, "--out", help=f"output directory (default ${OUTPUT_ENV} or ./hicrp-output)")
        _add(p, "--seed", type=int, help="64-bit seed" +
             (" (required)" if name in STOCHASTIC else ""))
        return p

    p = command("simulate", "draw interaction data from a SICRP or two-level HICRP")
    _add(p, "--model", choices=["sicrp", "hicrp"])
    _add(p, "--alpha", type=float)
    _add(p, "--beta", type=float, help="coarse-level discount (hicrp)")
    _add(p, "--theta", type=float)
    _add(p, "--m", type=int, help="coagulation steps (hicrp)")
    _add(p, "--nu-table", dest="nu_table", help='length measure, e.g. "1:500,2:7000"')
    _add(p, "--expected-counts", dest="expected_counts", action="store_true",
         help="read the table as expected interaction counts per length")
    _add(p, "--reps", type=int, help="independent draws; counts are banded when > 1")

    p = command("coagulate", "coarsen an interaction set by timestamp bins or by PDGM")
    _add(p, "--input")
    _add(p, "--input-format", dest="input_format",
         choices=["auto", "tsv", "csv", "wiki-elec", "interactions"])
    _add(p, "--mode", choices=["timestamp", "pdgm"])
    _add(p, "--bins", type=int)
    _add(p, "--binning", choices=["equal-width", "quantile"])
    _add(p, "--alpha", type=float)
    _add(p, "--beta", type=float)
    _add(p, "--theta", type=float)
    _add(p, "--m", type=int)

    p = command("infer-sicrp", "posterior sampling of (alpha, theta)")
    _add(p, "--input")
    _add(p, "--input-format", dest="input_format",
         choices=["interactions", "auto", "tsv", "csv", "wiki-elec"])
    _mcmc_flags(p)

    p = command("infer-hicrp", "pseudo-marginal posterior sampling of (alpha, beta, theta, m)")
    _add(p, "--fine")
    _add(p, "--coarse")
    _add(p, "--S", type=int, help="importance samples per likelihood estimate")
    _add(p, "--exact-marginal", dest="exact_marginal", action="store_true")
    _mcmc_flags(p)

    p = command("ppc", "posterior predictive bands from a trace file")
    _add(p, "--trace")
    _add(p, "--fine")
    _add(p, "--coarse")
    _add(p, "--draws", type=int)
    _add(p, "--reps-per-draw", dest="reps_per_draw", type=int)
    _add(p, "--level", type=float)

    p = command("diagnose", "R-hat and posterior summaries of a trace file")
    _add(p, "--trace")

    p = command("verify-duality", "exact fragmentation/coagulation duality check")
    _add(p, "--n", type=int)
    _add(p, "--alpha", type=float)
    _add(p, "--beta", type=float)
    _add(p, "--theta", type=float)
    _add(p, "--m", type=int)
    _add(p, "--tolerance", type=float)
    return parser


def resolve_config(command, flags):
    cfg = dict(DEFAULTS[command])
    path = flags.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = set(loaded) - set(cfg) - {"out"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update(flags)
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise UsageError(f"{command} needs --seed")
    return cfg


def output_dir(cfg):
    out = cfg.pop("out", None) or os.environ.get(OUTPUT_ENV) or "hicrp-output"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required setting(s): " +
                         ", ".join("--" + k.replace("_", "-") for k in missing))


def _mcmc_config(cfg):
    from .inference import MCMCConfig

    return MCMCConfig(n_iter=cfg["iters"], burn_in=cfg["burnin"], thin=cfg["thin"],
                      n_chains=cfg["chains"], step_size=cfg["step_size"],
                      adapt=cfg["adapt"], init_jitter=cfg["init_jitter"],
                      n_jobs=cfg["n_jobs"])


def _load_iset(path, fmt="interactions"):
    from .interaction import InteractionSet
    from .io import ingest_edges

    if fmt == "interactions":
        return InteractionSet.read(path)
    return ingest_edges(path, fmt).iset


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, out):
    from .interaction import write_pair
    from .models import HicrpParams, NuMeasure, sample_hicrp, sample_sicrp

    nu = NuMeasure.parse(cfg["nu_table"])
    rng = check_rng(cfg["seed"])
    rows = []
    outputs = []
    for r in range(cfg["reps"]):
        if cfg["model"] == "sicrp":
            fine = sample_sicrp(cfg["alpha"], cfg["theta"], nu, rng,
                                expected_counts=cfg["expected_counts"]).iset
            coarse = None
        else:
            params = HicrpParams((cfg["beta"], cfg["alpha"]), cfg["theta"], (0, cfg["m"]), nu,
                                 cfg["expected_counts"])
            draw = sample_hicrp(params, rng)
            fine, coarse = draw.levels[1], draw.levels[0]
        rows.append({"rep": r, "labels": fine.n_labels, "interactions": len(fine),
                     "coarse_labels": None if coarse is None else coarse.n_labels})
        if r == 0:
            if coarse is None:
                fine.write(out / "fine.txt")
                outputs.append("fine.txt")
            else:
                write_pair(fine, coarse, out)
                outputs += ["fine.txt", "coarse.txt", "parents.tsv"]
    summary = {"draws": rows}
    if cfg["reps"] > 1:
        summary["bands_99"] = {
            key: [float(np.quantile([r[key] for r in rows], q)) for q in (0.005, 0.995)]
            for key in ("labels", "interactions", "coarse_labels")
            if rows[0][key] is not None}
    _dump(out / "summary.json", summary)
    return outputs + ["summary.json"], {"counts": rows[0], **(
        {"bands_99": summary["bands_99"]} if "bands_99" in summary else {})}


def cmd_coagulate(cfg, out):
    from .diagnostics import children_distribution
    from .fragcoag import PdgmParams, icoag_m
    from .interaction import InteractionSet, parent_map
    from .io import ingest_edges, timestamp_coagulate

    _require(cfg, "input")
    if cfg["mode"] == "timestamp":
        if cfg["input_format"] == "interactions":
            raise UsageError("timestamp coagulation needs an edge list with timestamps")
        table = ingest_edges(cfg["input"], cfg["input_format"])
        if table.timestamps is None:
            raise UsageError("input has no timestamp column")
        fine = table.iset
        coarse, pm = timestamp_coagulate(fine, table.timestamps, cfg["bins"], cfg["binning"])
    else:
        if cfg.get("seed") is None:
            raise UsageError("pdgm coagulation needs --seed")
        fine = (InteractionSet.read(cfg["input"]) if cfg["input_format"] == "interactions"
                else ingest_edges(cfg["input"], cfg["input_format"]).iset)
        p = PdgmParams(cfg["beta"], cfg["alpha"], cfg["theta"], cfg["m"])
        coarse, _ = icoag_m(fine, p, check_rng(cfg["seed"]), labels="constituent")
        pm = parent_map(fine, coarse)
    fine.write(out / "fine.txt")
    coarse.write(out / "coarse.txt")
    pm.write_tsv(out / "parents.tsv")
    counts = {"labels": fine.n_labels, "interactions": len(fine),
              "coarse_labels": coarse.n_labels, "coarse_interactions": len(coarse),
              "children": children_distribution(pm)}
    _dump(out / "summary.json", counts)
    return ["fine.txt", "coarse.txt", "parents.tsv", "summary.json"], {
        "counts": {k: v for k, v in counts.items() if k != "children"}}


def _write_fit(est, out):
    est.write_trace(out / "trace.csv")
    summary = est.summary()
    summary["accept_rates"] = est.accept_rates_
    _dump(out / "summary.json", summary)
    return ["trace.csv", "summary.json"]


def cmd_infer_sicrp(cfg, out):
    from .inference import SICRPSampler

    _require(cfg, "input")
    est = SICRPSampler()
    est.set_params(**_sampler_params(cfg))
    est.fit(_load_iset(cfg["input"], cfg["input_format"]))
    return _write_fit(est, out), {"n_labels": est.data_.k, "n_interactions": est.data_.n}


def _sampler_params(cfg):
    return {"n_iter": cfg["iters"], "burn_in": cfg["burnin"], "thin": cfg["thin"],
            "n_chains": cfg["chains"], "step_size": cfg["step_size"], "adapt": cfg["adapt"],
            "init_jitter": cfg["init_jitter"], "n_jobs": cfg["n_jobs"],
            "random_state": cfg["seed"]}


def cmd_infer_hicrp(cfg, out):
    from .inference import HICRPSampler

    _require(cfg, "fine", "coarse")
    fine, coarse = _load_iset(cfg["fine"]), _load_iset(cfg["coarse"])
    est = HICRPSampler(S=cfg["S"], exact_marginal=cfg["exact_marginal"])
    est.set_params(**_sampler_params(cfg))
    est.fit(fine, coarse)
    return _write_fit(est, out), {"n_labels": est.data_.k,
                                  "n_coarse_labels": est.data_.k_coarse}


def cmd_ppc(cfg, out):
    from .diagnostics import posterior_predictive, write_bands
    from .inference import read_traces

    _require(cfg, "trace", "fine")
    traces = read_traces(cfg["trace"])
    fine = _load_iset(cfg["fine"])
    coarse = _load_iset(cfg["coarse"]) if cfg.get("coarse") else None
    _, bands = posterior_predictive(traces, fine, coarse, cfg["draws"], cfg["reps_per_draw"],
                                    cfg["level"], cfg["seed"])
    index = write_bands(bands, out)
    return [v["file"] for v in index.values()] + ["index.json"], {}


def cmd_diagnose(cfg, out):
    from .diagnostics import r_hat
    from .inference import read_traces
    from .inference.mcmc import pooled, stacked

    _require(cfg, "trace")
    traces = read_traces(cfg["trace"])
    report = {}
    for name in ("alpha", "beta", "theta", "m"):
        x = pooled(traces, name)
        if np.all(np.isnan(x)):
            continue
        report[name] = {"mean": float(np.mean(x)), "sd": float(np.std(x, ddof=1)),
                        "lower": float(np.quantile(x, 0.025)),
                        "upper": float(np.quantile(x, 0.975)),
                        "r_hat": r_hat(stacked(traces, name))}
    _dump(out / "diagnostics.json", report)
    return ["diagnostics.json"], {}


def cmd_verify_duality(cfg, out):
    from .fragcoag import PdgmParams, duality_report

    p = PdgmParams(cfg["beta"], cfg["alpha"], cfg["theta"], cfg["m"])
    report = duality_report(cfg["n"], p)
    report = {k: float(v) if isinstance(v, (float, np.floating)) else v
              for k, v in report.items()}
    worst = max(v for k, v in report.items() if k.startswith("tv"))
    report["passed"] = bool(worst < cfg["tolerance"])
    _dump(out / "duality.json", report)
    print(json.dumps(report, sort_keys=True))
    return ["duality.json"], {"passed": report["passed"]}


COMMANDS = {"simulate": cmd_simulate, "coagulate": cmd_coagulate,
            "infer-sicrp": cmd_infer_sicrp, "infer-hicrp": cmd_infer_hicrp,
            "ppc": cmd_ppc, "diagnose": cmd_diagnose, "verify-duality": cmd_verify_duality}


def main(argv=None):
    from .io import write_manifest

    parser = build_parser()
    args = parser.parse_args(argv)
    flags = vars(args)
    command = flags.pop("command")
    started = time.time()
    try:
        cfg = resolve_config(command, flags)
        out = output_dir(cfg)
        outputs, extra = COMMANDS[command](cfg, out)
    except UsageError as exc:
        parser.error(str(exc))
    except Exception as exc:  # noqa: BLE001 - reported as a structured error
        report = {"error": type(exc).__name__, "message": str(exc), "command": command}
        print(json.dumps(report), file=sys.stderr)
        return 1
    write_manifest(out, command, cfg, cfg.get("seed"), outputs + ["manifest.json"], started,
                   extra)
    if command == "verify-duality" and not extra["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
