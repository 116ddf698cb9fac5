"""Command line entry point: gen, train, eval, ablate, replay, export-plot.

Exit codes: 0 success, 1 runtime or model error, 2 usage or configuration error.
"""

import argparse
import csv
import glob
import json
import os
import sys

from .config import ConfigError, load_config
from .features import FeatureError
from .kinematics import KinematicsError
from .models import (
    ABLATION_MASKS, ConfusionMatrix, FeatureMask, KnnSpec, MlpSpec, ModelError, ablation_study,
    cross_validate, knn_fit, load_model, mlp_train, save_model,
)
from .simgen import GenerationError, ScenarioSpec, corpus_mix, corpus_specs, generate, spec_defaults
from .traces import (
    EvalReport, TraceError, assemble_dataset, file_digest, format_report, read_trace, write_trace,
)

PLOT_COLUMNS = ("t", "d", "alpha", "force", "ee_x", "ee_y", "ee_z", "ee_speed",
                "raw_label", "smoothed", "intention", "label")


class UsageError(Exception):
    pass


def _out(msg):
    print(msg, flush=True)


def _traces(pattern):
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise UsageError(f"no trace files match {pattern!r}")
    return paths


def _mask(text):
    try:
        return FeatureMask.parse(text)
    except ModelError as e:
        raise UsageError(str(e)) from None


def _provenance(env, paths):
    h = {os.path.basename(p): file_digest(p)[:16] for p in paths}
    return {"config": env.identifier("robot", "sensors", "camera", "pois"), "traces": h}


def _model_spec(args):
    if args.classifier == "knn":
        return KnnSpec(args.k)
    return MlpSpec(epochs=args.epochs)


# ---------------------------------------------------------------- commands

def cmd_gen(args, env):
    if args.corpus:
        os.makedirs(args.out, exist_ok=True)
        frames = positives = 0
        seed = 1 if args.seed is None else args.seed
        specs = corpus_specs(seed, corpus_mix(env), **spec_defaults(env))
        for i, spec in enumerate(specs):
            tr = generate(spec, env)
            write_trace(os.path.join(args.out, f"trace_{i:03d}_{spec.kind}.jsonl"), tr)
            frames += len(tr.frames)
            positives += sum(f.label for f in tr.frames)
        _out(f"traces={i + 1}, frames={frames}, positives={positives}")
        return 0
    if args.spec:
        try:
            with open(args.spec) as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read scenario spec {args.spec}: {e}") from None
        try:
            spec = ScenarioSpec.from_dict({**spec_defaults(env), **raw})
        except (TypeError, GenerationError) as e:
            raise UsageError(f"bad scenario spec: {e}") from None
    else:
        try:
            spec = ScenarioSpec(kind=args.kind, **spec_defaults(env))
        except GenerationError as e:
            raise UsageError(str(e)) from None
    if args.seed is not None:
        spec.seed = args.seed
    tr = generate(spec, env)
    write_trace(args.out, tr)
    _out(f"frames={len(tr.frames)}, positives={sum(f.label for f in tr.frames)}")
    return 0


def cmd_train(args, env):
    paths = _traces(args.traces)
    data, scaling = assemble_dataset(paths, env)
    mask = _mask(args.features)
    if args.classifier == "knn":
        model = knn_fit(data, mask, args.k, scaling)
    else:
        model = mlp_train(data, mask, epochs=args.epochs, seed=args.seed, scaling=scaling)
    save_model(model, args.out)
    _out(f"trained {args.classifier} on {data.n_samples} frames, features={mask}")
    return 0


def cmd_eval(args, env):
    paths = _traces(args.traces)
    if args.retrain:
        data, _ = assemble_dataset(paths, env)
        mask = _mask(args.features)
        res = cross_validate(data, mask, _model_spec(args), args.folds, args.seed)
        report = EvalReport.from_results([res], args.folds, args.seed, _provenance(env, paths))
    else:
        if not args.model_file:
            raise UsageError("eval needs --model <file> or --retrain")
        model = load_model(args.model_file)
        data, _ = assemble_dataset(paths, env, model.scaling)
        pred, _ = model.predict_batch(data.matrix(model.mask))
        cm = ConfusionMatrix.from_labels(data.y, pred)
        row = {"model": model.kind, "features": str(model.mask), "accuracy": cm.accuracy,
               "TP": cm.tp, "TN": cm.tn, "FP": cm.fp, "FN": cm.fn}
        report = EvalReport([row], 0, args.seed, _provenance(env, paths))
    _out(format_report(report))
    if args.out:
        report.write(args.out)
    return 0


def cmd_ablate(args, env):
    paths = _traces(args.traces)
    data, _ = assemble_dataset(paths, env)
    if args.masks in ("default", "table2"):
        masks = [FeatureMask.parse(m) for m in ABLATION_MASKS]
    else:
        masks = [_mask(m) for m in args.masks.split(";") if m.strip()]
    if len(masks) == 1:
        results = [cross_validate(data, masks[0], _model_spec(args), args.folds, args.seed)]
    else:
        results = ablation_study(data, masks, [_model_spec(args)], args.folds, args.seed)
    report = EvalReport.from_results(results, args.folds, args.seed, _provenance(env, paths))
    _out(format_report(report, "mean accuracy by feature set"))
    if args.out:
        report.write(args.out)
    return 0


def cmd_replay(args, env):
    from .replay import replay

    trace = read_trace(args.trace)
    model = load_model(args.model_file)
    log = replay(trace, env, model, control=args.control, window_s=args.window)
    if args.out:
        with open(args.out, "w") as f:
            f.write(json.dumps({"verdict": log.verdict, "arm": log.arm,
                                "scenario": trace.header.get("scenario"),
                                "events": trace.header.get("events")}, sort_keys=True) + "\n")
            for r in log.rows:
                f.write(json.dumps(r, sort_keys=True) + "\n")
    _out(json.dumps(log.verdict, sort_keys=True))
    return 0


def cmd_export_plot(args, env):
    try:
        with open(args.log) as f:
            lines = f.read().splitlines()
        json.loads(lines[0])
        rows = [json.loads(l) for l in lines[1:]]
    except (OSError, IndexError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read replay log {args.log}: {e}") from None
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for r in rows:
            w.writerow(["" if r.get(c) is None else r[c] for c in PLOT_COLUMNS])
    _out(f"rows={len(rows)}")
    return 0


# ---------------------------------------------------------------- parser

def _k(text):
    k = int(text)
    if k < 1 or k % 2 == 0:
        raise argparse.ArgumentTypeError("k must be a positive odd integer")
    return k


def build_parser():
    p = argparse.ArgumentParser(prog="touchintent", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="configuration file (default: $CONFIG_PATH or the bundled demo)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labeled synthetic trace")
    g.add_argument("--spec", help="scenario spec JSON")
    g.add_argument("--kind", default="manipulation", help="scenario kind when no spec is given")
    g.add_argument("--out", required=True, help="trace file, or directory with --corpus")
    g.add_argument("--seed", type=int)
    g.add_argument("--corpus", action="store_true", help="write the default 37-trace corpus")
    g.set_defaults(func=cmd_gen)

    def model_opts(sp, flag="--classifier"):
        sp.add_argument(flag, dest="classifier", choices=("knn", "mlp"), default="knn")
        sp.add_argument("--k", type=_k, default=11)
        sp.add_argument("--epochs", type=int, default=2000)
        sp.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="fit a classifier on traces")
    t.add_argument("--traces", required=True, help="glob of trace files")
    model_opts(t, "--model")
    t.add_argument("--features", default="TS,HP,HS,GA,GS")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a model file or cross-validate")
    e.add_argument("--traces", required=True)
    e.add_argument("--model", dest="model_file", help="trained model file")
    e.add_argument("--retrain", action="store_true", help="k-fold cross-validation instead")
    model_opts(e)
    e.add_argument("--features", default="TS,HP,HS,GA,GS")
    e.add_argument("--folds", type=int, default=5)
    e.add_argument("--out", help="report JSON")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="cross-validate a list of feature masks")
    a.add_argument("--traces", required=True)
    a.add_argument("--masks", default="default", help="'default' or masks separated by ';'")
    model_opts(a)
    a.add_argument("--folds", type=int, default=5)
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("replay", help="closed-loop replay with the impedance controller")
    r.add_argument("--trace", required=True)
    r.add_argument("--model", dest="model_file", required=True)
    r.add_argument("--control", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--window", type=float, default=None)
    r.add_argument("--out", help="per-frame log (JSON lines)")
    r.set_defaults(func=cmd_replay)

    x = sub.add_parser("export-plot", help="replay log to CSV")
    x.add_argument("--log", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_plot)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        env = load_config(args.config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return args.func(args, env)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ModelError, TraceError, GenerationError, FeatureError, KinematicsError, ValueError,
            OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
