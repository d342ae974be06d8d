"""Command-line front end: synth, fit, eval, inspect, curve, replay.

Every command writes ``run_config.json`` next to its outputs. The config's
``argv`` holds the fully resolved command line; ``mfa-mtl replay`` reruns it
and reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage or I/O problem, 3 numerical invariant breach.
"""

import argparse
from dataclasses import asdict
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (CURVE_FIELDS, comparison_rows, evaluate_weights, fit_stl,
                        learning_curve, rows_to_csv)
from .data import (DataFormatError, Scaling, gen_synthetic_clusters,
                   gen_synthetic_groups_regression, load_dataset, save_dataset)
from .metrics import metric_name
from .model import Hyperparameters
from .modelfile import FittedModel, ModelFileError
from .structure import correlation_csv, summarize
from .vi.elbo import NumericalError
from .vi.fit import ElboDecreaseError, fit

log = logging.getLogger("mfa_mtl")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
CONFIG_FORMAT = "mfa_mtl.RunConfig"


class UsageError(Exception):
    pass


# --- helpers ----------------------------------------------------------------

def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _csv_list(text, kind):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as a comma-separated list") from None


def _write_config(out, command, argv, **extra):
    doc = {"format": CONFIG_FORMAT, "version": 1, "package_version": __version__,
           "command": command, "argv": argv, **extra}
    _write(out / "run_config.json", json.dumps(doc, indent=2) + "\n")


def _add_hyper_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--alpha1", type=float, default=1.0, help="DP concentration (default 1)")
    g.add_argument("--alpha2", type=float, default=5.0, help="IBP mass (default 5)")
    g.add_argument("--truncation-f", type=int, default=None,
                   help="mixture truncation F (default: number of tasks)")
    g.add_argument("--truncation-k", type=int, default=None,
                   help="factor truncation K (default: min(D, number of tasks))")
    g.add_argument("--iters", type=int, default=3, help="outer iterations (default 3)")
    g.add_argument("--inner-tol", type=float, default=1e-5,
                   help="relative ELBO change ending the inner loop (default 1e-5)")
    g.add_argument("--seed", type=int, default=0, help="initialization seed (default 0)")
    g.add_argument("--standardize", action="store_true",
                   help="scale features by the pooled training mean and sd")


def _resolve_hyper(args, train):
    try:
        return Hyperparameters.default_for(
            train.T, train.D, alpha1=args.alpha1, alpha2=args.alpha2,
            **({"F": args.truncation_f} if args.truncation_f is not None else {}),
            **({"K": args.truncation_k} if args.truncation_k is not None else {}),
            outer_iters=args.iters, inner_tol=args.inner_tol, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _hyper_argv(h, standardize):
    argv = ["--alpha1", repr(h.alpha1), "--alpha2", repr(h.alpha2),
            "--truncation-f", str(h.F), "--truncation-k", str(h.K),
            "--iters", str(h.outer_iters), "--inner-tol", repr(h.inner_tol),
            "--seed", str(h.seed)]
    return argv + (["--standardize"] if standardize else [])


def _load_train_test(manifest, standardize):
    train, test = load_dataset(manifest)
    scaling = Scaling.fit(train) if standardize else None
    if scaling is not None:
        train, test = scaling.apply(train), scaling.apply(test)
    return train, test, scaling


def _load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ModelFileError(f"model file is not UTF-8 text: {exc}") from exc
    return FittedModel.from_json(text)


# --- commands ---------------------------------------------------------------

def cmd_synth(args):
    out = _out_dir(args.out)
    if args.kind == "clusters":
        params = {"center_scale": args.center_scale, "noise_scale": args.noise_scale}
        params = {k: v for k, v in params.items() if v is not None}
        train, test, labels, theta = gen_synthetic_clusters(args.seed, **params)
        truth = {"kind": "clusters", "labels": [int(v) for v in labels]}
    else:
        params = {"mean_scale": args.mean_scale, "noise_sd": args.noise_sd}
        params = {k: v for k, v in params.items() if v is not None}
        train, test, groups, theta = gen_synthetic_groups_regression(args.seed, **params)
        truth = {"kind": "groups", "groups": [int(v) for v in groups]}
    save_dataset(out, f"synthetic-{args.kind}-{args.seed}", train, test)
    truth.update(seed=args.seed, parameters=params, task_ids=list(train.task_ids),
                 theta=np.asarray(theta).tolist())
    _write(out / "truth.json", json.dumps(truth, indent=1) + "\n")
    argv = ["synth", args.kind, "--seed", str(args.seed), "--out", str(out.resolve())]
    for flag, key in (("--center-scale", "center_scale"), ("--noise-scale", "noise_scale"),
                      ("--mean-scale", "mean_scale"), ("--noise-sd", "noise_sd")):
        if key in params:
            argv += [flag, repr(params[key])]
    _write_config(out, "synth", argv, paths={"out": str(out.resolve())})
    print(f"wrote {train.T} tasks to {out}")
    return EXIT_OK


def cmd_fit(args):
    manifest = Path(args.manifest).resolve()
    train, _, scaling = _load_train_test(manifest, args.standardize)
    h = _resolve_hyper(args, train)
    out = _out_dir(args.out)
    started = time.perf_counter()
    state, report = fit(train, h)
    log.info("fit finished in %.2f s", time.perf_counter() - started)
    model = FittedModel(state, train.task_type, tuple(train.task_ids), h, scaling)
    _write(out / "model.json", model.to_json() + "\n")
    _write(out / "report.json", report.to_json() + "\n")
    trace = "step,elbo\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(state.elbo_trace))
    _write(out / "elbo.csv", trace)
    argv = ["fit", str(manifest), *_hyper_argv(h, args.standardize), "--out", str(out.resolve())]
    _write_config(out, "fit", argv, hyperparameters=asdict(h),
                  paths={"manifest": str(manifest), "out": str(out.resolve())})
    print(f"{report.metric} (training) {report.mean_metric:.4f}; "
          f"occupied components {report.structure.occupied_components}")
    return EXIT_OK


def cmd_eval(args):
    model_path, manifest = Path(args.model).resolve(), Path(args.manifest).resolve()
    model = _load_model(model_path)
    train, test = load_dataset(manifest)
    train, test = model.prepare(train), model.prepare(test)
    data = train if args.split == "train" else test
    metric = metric_name(data.task_type)
    mfa_values, mfa_mean = evaluate_weights(model.state.nu_theta, data)
    stl_values, stl_mean = evaluate_weights(fit_stl(train), data)
    out = _out_dir(args.out)
    doc = {"metric": metric, "split": args.split, "task_ids": list(data.task_ids),
           "mfa": {"per_task_metric": mfa_values, "mean_metric": mfa_mean},
           "stl": {"per_task_metric": stl_values, "mean_metric": stl_mean}}
    _write(out / "eval.json", json.dumps(doc, indent=2) + "\n")
    rows = comparison_rows(data.task_ids, metric, {"mfa": mfa_values, "stl": stl_values})
    _write(out / "eval.csv", rows_to_csv(rows, ("method", "task_id", "metric", "value")))
    argv = ["eval", str(model_path), str(manifest), "--split", args.split, "--out", str(out.resolve())]
    _write_config(out, "eval", argv, paths={"model": str(model_path), "manifest": str(manifest),
                                            "out": str(out.resolve())})
    print(f"{metric} ({args.split}): mfa {mfa_mean:.4f}  stl {stl_mean:.4f}")
    return EXIT_OK


def cmd_inspect(args):
    model_path = Path(args.model).resolve()
    model = _load_model(model_path)
    summary = summarize(model.state, args.occupancy_threshold, args.rank_threshold)
    out = _out_dir(args.out)
    _write(out / "summary.json", summary.to_json() + "\n")
    _write(out / "correlation.csv", correlation_csv(summary.task_correlation, model.task_ids))
    argv = ["inspect", str(model_path), "--occupancy-threshold", repr(args.occupancy_threshold),
            "--rank-threshold", repr(args.rank_threshold), "--out", str(out.resolve())]
    _write_config(out, "inspect", argv, paths={"model": str(model_path), "out": str(out.resolve())})
    print(f"occupied components {summary.occupied_components}")
    return EXIT_OK


def cmd_curve(args):
    manifest = Path(args.manifest).resolve()
    fractions = _csv_list(args.fractions, float)
    seeds = _csv_list(args.seeds, int)
    if not fractions or not seeds:
        raise UsageError("need at least one fraction and one seed")
    if any(not 0 < f <= 1 for f in fractions):
        raise UsageError("fractions must lie in (0, 1]")
    train, test, _ = _load_train_test(manifest, args.standardize)
    h = _resolve_hyper(args, train)
    out = _out_dir(args.out)
    rows = learning_curve(train, h, fractions, seeds, test=test)
    _write(out / "curve.csv", rows_to_csv(rows, CURVE_FIELDS))
    argv = ["curve", str(manifest), "--fractions", ",".join(repr(f) for f in fractions),
            "--seeds", ",".join(str(s) for s in seeds), *_hyper_argv(h, args.standardize),
            "--out", str(out.resolve())]
    _write_config(out, "curve", argv, hyperparameters=asdict(h),
                  paths={"manifest": str(manifest), "out": str(out.resolve())})
    print(f"wrote {len(rows)} rows to {out / 'curve.csv'}")
    return EXIT_OK


def cmd_replay(args):
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"run config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CONFIG_FORMAT:
        raise UsageError("not a run config document")
    argv = list(doc["argv"])
    if args.out is not None:
        argv[argv.index("--out") + 1] = args.out
    return main(argv)


# --- entry point ------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="mfa-mtl", description="Multitask learning with a nonparametric mixture of factor analyzers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("kind", choices=["clusters", "groups"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--center-scale", type=float, help="clusters: cluster-center scale")
    p.add_argument("--noise-scale", type=float, help="clusters: within-cluster weight noise")
    p.add_argument("--mean-scale", type=float, help="groups: group-offset scale")
    p.add_argument("--noise-sd", type=float, help="groups: target noise sd")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("fit", help="fit the model to a dataset's training split")
    p.add_argument("manifest")
    _add_hyper_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("eval", help="score a fitted model and the independent baseline")
    p.add_argument("model")
    p.add_argument("manifest")
    p.add_argument("--split", choices=["test", "train"], default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("inspect", help="export the recovered task structure")
    p.add_argument("model")
    p.add_argument("--occupancy-threshold", type=float, default=1e-3)
    p.add_argument("--rank-threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("curve", help="learning curve over training-set fractions")
    p.add_argument("manifest")
    p.add_argument("--fractions", default="0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--seeds", default="0,1,2,3,4")
    _add_hyper_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("replay", help="rerun the command recorded in a run_config.json")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="write to this directory instead")
    p.set_defaults(handler=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ElboDecreaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for key in exc.terms_before:
            delta = exc.terms_after[key] - exc.terms_before[key]
            print(f"  {key:>16s} {exc.terms_before[key]:+.10e} -> {exc.terms_after[key]:+.10e} "
                  f"({delta:+.3e})", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DataFormatError, ModelFileError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
