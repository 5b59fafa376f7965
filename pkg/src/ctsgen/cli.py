"""Command-line entry point: ``ctsgen <command> [flags]``.

Every command writes its outputs under ``--out`` and prints a one-line JSON
summary to stdout. Failures exit nonzero with ``{"error": code, "message": ...}``
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data
from . import pipeline as P
from .errors import ConfigError, CtsError, DataFormatError
from .metrics import EXTRAPOLATION, INTERPOLATION


def _read_json(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return str(path)


def _write_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    return str(path)


def _pipeline_cfg(d, seed):
    d = dict(d)
    if seed is not None:
        d["seed"] = seed
        d["train"] = dict(d.get("train", {}), seed=seed)
    return P.PipelineConfig.from_dict(d)


def _protocol(d, seed):
    d = dict(d)
    if seed is not None:
        d["seed"] = seed
    return P.ProtocolConfig.from_dict(d)


def _load_data(args):
    if not args.data:
        raise ConfigError("--data <dir> is required")
    ds = data.load_dir(args.data)
    if getattr(args, "conditions", None):
        ds = ds.project(args.conditions.split(","))
    return ds


def _need_bundle(args):
    if not args.bundle:
        raise ConfigError("--bundle <path> is required")
    return P.load_bundle(args.bundle)


# -- commands ---------------------------------------------------------------------

def cmd_synth(args):
    cfg = _read_json(args.config)
    keep = cfg.pop("conditions", None)
    if args.seed is not None:
        cfg["seed"] = args.seed
    ds = data.synth_generate(data.SynthSpec.from_dict(cfg))
    if keep:
        ds = ds.project(keep)
    data.save_dir(ds, args.out)
    return {"n": len(ds), "shape": list(ds.shape), "conditions": ds.schema.names, "out": args.out}


def cmd_train(args):
    ds = _load_data(args)
    cfg = _pipeline_cfg(_read_json(args.config), args.seed)
    train = P.training_split(ds, cfg)[0]
    bundle = P.train_phase(train, cfg)
    path = args.bundle or str(Path(args.out) / "bundle.json")
    P.save_bundle(bundle, path)
    return {"bundle": path, "n_train": bundle.n, "k": bundle.clusters.k,
            "final_loss": bundle.loss_trace[-1] if bundle.loss_trace else None}


def _request(bundle, args):
    req = _read_json(args.request)
    if "c0_prime" not in req:
        raise ConfigError("request needs a c0_prime mapping")
    if "x0" in req:
        x0 = np.asarray(req["x0"], dtype=np.float64)
        if "c0" not in req:
            raise ConfigError("a request with an explicit x0 also needs c0")
        c0 = req["c0"]
    elif "input_id" in req:
        ds = _load_data(args)
        if str(req["input_id"]) not in ds.ids:
            raise DataFormatError(f"input_id {req['input_id']!r} not found in {args.data}")
        i = ds.ids.index(str(req["input_id"]))
        x0 = ds.series[i]
        c0 = req.get("c0", ds.schema.decode(ds.conditions[i]))
    else:
        raise ConfigError("request needs either x0 (with c0) or input_id (with --data)")
    c1 = bundle.schema.decode(bundle.schema.encode(c0))
    c1.update(req["c0_prime"])
    opts = dict(req.get("options", {}))
    if args.seed is not None:
        opts.setdefault("noise_seed", args.seed)
    return P.GenerationRequest(x0, c0, c1, opts)


def cmd_generate(args):
    bundle = _need_bundle(args)
    req = _request(bundle, args)
    x1, prov = P.generate(bundle, req)
    out = Path(args.out)
    x0 = np.asarray(req.x0, dtype=np.float64).reshape(x1.shape)
    rows = []
    for t in range(x1.shape[0]):
        for c in range(x1.shape[1]):
            rows.append({"t": t, "channel": c, "input": repr(float(x0[t, c])), "generated": repr(float(x1[t, c]))})
    _write_csv(out / "pairs.csv", rows, ("t", "channel", "input", "generated"))
    _write_json(out / "provenance.json", prov)
    return {"out": str(out), "n_selected": prov["n_selected"], "elapsed_ms": prov["elapsed_ms"]}


def _eval(args, scenario):
    bundle = _need_bundle(args)
    ds = _load_data(args)
    cfg = _read_json(args.config)
    protocol = _protocol(cfg.get("protocol", cfg if "pipeline" not in cfg else {}), args.seed)
    options = cfg.get("options")
    fn = P.evaluate_interpolation if scenario == INTERPOLATION else P.evaluate_extrapolation
    reports = fn(bundle, ds, protocol, options, include_generated=not args.validation_only)
    name = "interp" if scenario == INTERPOLATION else "extrap"
    paths = [_write_json(Path(args.out) / f"report_{name}_{r.variant}.json", r.to_dict()) for r in reports]
    return {"reports": paths, "controllability": {r.variant: r.controllability for r in reports}}


def cmd_eval_interp(args):
    return _eval(args, INTERPOLATION)


def cmd_eval_extrap(args):
    return _eval(args, EXTRAPOLATION)


def _sections(args):
    cfg = _read_json(args.config)
    pcfg = _pipeline_cfg(cfg.get("pipeline", {}), args.seed)
    protocol = _protocol(cfg.get("protocol", {}), args.seed)
    return cfg, pcfg, protocol


def cmd_ablate(args):
    ds = _load_data(args)
    cfg, pcfg, protocol = _sections(args)
    scenario = cfg.get("scenario", INTERPOLATION)
    bundle = P.load_bundle(args.bundle) if args.bundle else None
    reports = P.ablate(ds, pcfg, protocol, cfg.get("variants"), scenario, bundle)
    out = Path(args.out)
    rows = [r.flat() for r in reports]
    cols = list(dict.fromkeys(k for r in rows for k in r))
    _write_csv(out / "ablation.csv", rows, cols)
    _write_json(out / "ablation.json", [r.to_dict() for r in reports])
    return {"variants": [r.variant for r in reports], "out": str(out)}


def cmd_sweep(args):
    ds = _load_data(args)
    cfg, pcfg, protocol = _sections(args)
    grid = cfg.get("grid", {})
    ks = grid.get("k", [5, 10, 20, 50, 100, 150])
    r1 = grid.get("k1_ratio", [0.2, 0.4, 0.6, 0.8])
    r2 = grid.get("k2_ratio", [0.2, 0.4, 0.6, 0.8])
    bundle = P.load_bundle(args.bundle) if args.bundle else None
    rows = P.sweep(ds, pcfg, ks, r1, r2, protocol, cfg.get("scenario", INTERPOLATION), bundle)
    path = _write_csv(Path(args.out) / "surface.csv", rows, P.SWEEP_COLUMNS)
    return {"cells": len(rows), "surface": path}


def cmd_explain(args):
    bundle = _need_bundle(args)
    req = _request(bundle, args)
    expl, sel = P.explain_request(bundle, req)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if expl.is_linear:
        (out / "rules.txt").write_text("linear mapping: no rules; see coefficients in explain.json\n")
    else:
        (out / "rules.txt").write_text(expl.rules + "\n")
    _write_json(out / "explain.json", {
        "variant": expl.variant, "is_linear": expl.is_linear, "importances": expl.importances,
        "tree": expl.tree_json, "coefficients": expl.coefficients,
        "selected_indices": sel.indices.tolist(),
    })
    return {"out": str(out), "importances": expl.importances}


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic labelled dataset"),
    "train": (cmd_train, "train the VAE and condition clusters, write a bundle"),
    "generate": (cmd_generate, "generate one series for altered conditions"),
    "eval-interp": (cmd_eval_interp, "interpolation protocol (classifier ACC / W-F1)"),
    "eval-extrap": (cmd_eval_extrap, "extrapolation protocol (detector ACC / AUC)"),
    "ablate": (cmd_ablate, "evaluate the ablation / benchmark variants"),
    "sweep": (cmd_sweep, "metric surface over k, k1/k, k2/|X_c|"),
    "explain": (cmd_explain, "dump the mapping tree rules for a request"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ctsgen", description="Controllable time series generation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (fn, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="overrides every seed in the config")
        p.add_argument("--bundle", help="bundle JSON path")
        p.add_argument("--out", default=".", help="output directory")
        if name != "synth":
            p.add_argument("--data", help="dataset directory (series.csv, conditions.csv, schema.json)")
            p.add_argument("--conditions", help="comma-separated condition slots to keep")
        if name in ("generate", "explain"):
            p.add_argument("--request", required=True, help="request JSON")
        if name in ("eval-interp", "eval-extrap"):
            p.add_argument("--validation-only", action="store_true",
                           help="only the held-out baseline row")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.seed is not None and args.seed < 0:
        print(json.dumps({"error": "config_error", "message": "--seed must be unsigned"}), file=sys.stderr)
        return 2
    try:
        summary = args.func(args)
    except CtsError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
