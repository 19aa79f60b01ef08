"""Operator surface: preprocess, train, evaluate, spell, ablate, simulate
and synth subcommands over the EEGB/EPB1/SPSQ containers.

Exit codes: 0 success, 2 usage, 3 data/validation, 4 numeric divergence,
5 I/O. Every report embeds the resolved config, its hash, the seeds in
play, and per-phase wall-clock timings (informational).
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import dataformat, dsp, metrics, sampling, speller, synth
from .config import load_config
from .ensemble import EnsembleBundle, compute_weights, load_bundle, save_bundle
from .errors import DivergenceError, FormatError, SessionValidationError
from .nn import build_model, train
from .speller import MissingLabelsError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


class _Timer:
    def __init__(self):
        self.phases = {}

    def __call__(self, name):
        timer = self
        class _Phase:
            def __enter__(self):
                self.t0 = time.perf_counter()
            def __exit__(self, *exc):
                timer.phases[name] = timer.phases.get(name, 0.0) \
                    + time.perf_counter() - self.t0
        return _Phase()


def _report_common(config, seeds, timer):
    return {"config": config.to_dict(), "config_hash": config.hash(),
            "seeds": seeds, "timings_s": {k: round(v, 4)
                                          for k, v in timer.phases.items()}}


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)


def _design_filter(config):
    f = config.filter
    return dsp.design_cheby1_bandpass(f.order, f.ripple_db, f.low_hz,
                                      f.high_hz, fs_hz=240.0)


def cmd_synth(args):
    cfg = synth.SynthConfig(
        n_characters=args.characters, amplitude=args.amplitude,
        noise_sigma=args.noise_sigma, noise_model=args.noise_model,
        ar_coefficient=args.ar_coefficient, seed=args.seed,
        text=args.text or "")
    session = synth.generate_session(cfg)
    n = dataformat.write_session(session, args.out)
    print(f"wrote {args.out}: {len(session.characters)} characters, "
          f"{len(session.markers)} markers, {n} bytes")
    return EXIT_OK


def cmd_preprocess(args):
    config = load_config(args.config)
    timer = _Timer()
    with timer("read"):
        session = dataformat.read_session(args.session)
    with timer("filter+slice"):
        epochs = dsp.extract_epochs(session, _design_filter(config))
    epochs.meta["config_hash"] = config.hash()
    with timer("write"):
        dsp.write_epochs(epochs, args.out)
    print(f"wrote {args.out}: {len(epochs)} epochs, "
          f"{int(epochs.is_target.sum())} targets "
          f"({timer.phases['filter+slice']:.2f}s filtering)")
    return EXIT_OK


def _train_member(epochs, subset, config, member_index):
    member_seed = config.train.seed + member_index
    split_seed = config.sampling.seed + member_index
    train_part, val_part = sampling.split_validation(
        subset, config.sampling.validation_fraction, split_seed)
    model = build_model(config.train, seed=member_seed)
    x, y = train_part.arrays()
    rng = np.random.default_rng(member_seed)
    history = train(model, x, y, config.train, rng=rng)
    xv, yv = val_part.arrays()
    conf = metrics.confusion(yv, model.predict_proba(xv),
                             config.ensemble.threshold)
    return model, history, conf, member_seed


def _train_member_task(task):
    """Worker for parallel member training: re-reads epochs, rebuilds the
    deterministic subsets, trains one member."""
    epochs_path, config_doc, member_index = task
    from .config import config_from_dict
    config = config_from_dict(config_doc)
    epochs = dsp.read_epochs(epochs_path)
    subsets = sampling.balance_subsets(epochs, config.sampling.subsets,
                                       config.sampling.seed)
    return _train_member(epochs, subsets[member_index], config, member_index)


def worker_count():
    """Fan-out width for member training; P3SPELLER_WORKERS overrides."""
    try:
        return max(1, int(os.environ.get("P3SPELLER_WORKERS", "1")))
    except ValueError:
        return 1


def cmd_train(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config,
                         sampling=replace(config.sampling, seed=args.seed),
                         train=replace(config.train, seed=args.seed))
    timer = _Timer()
    with timer("read"):
        epochs = dsp.read_epochs(args.epochs_file)
    if not epochs.labeled:
        raise MissingLabelsError("training requires labeled epochs")
    with timer("balance"):
        subsets = sampling.balance_subsets(epochs, config.sampling.subsets,
                                           config.sampling.seed)
    models, histories, confusions, seeds = [], [], [], []
    workers = worker_count()
    with timer("train"):
        if workers > 1:
            tasks = [(args.epochs_file, config.to_dict(), i)
                     for i in range(len(subsets))]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_train_member_task, tasks))
        else:
            results = [_train_member(epochs, subset, config, i)
                       for i, subset in enumerate(subsets)]
        for i, (model, history, conf, seed) in enumerate(results):
            models.append(model)
            histories.append(history)
            confusions.append(conf)
            seeds.append(seed)
            print(f"member {i}: final loss {history[-1]['loss']:.4f}, "
                  f"val true predictions {conf.true_predictions}")
    weights = compute_weights(confusions)
    bundle = EnsembleBundle(models, weights, confusions, seeds)
    with timer("save"):
        manifest = save_bundle(bundle, args.out_dir,
                               config_echo=config.to_dict())
        sampling.write_manifest(subsets,
                                os.path.join(args.out_dir, "subsets.json"))
    report = _report_common(config, {"member_seeds": seeds}, timer)
    report["weights"] = weights.tolist()
    report["history"] = histories
    _write_json(os.path.join(args.out_dir, "training_report.json"), report)
    print(f"wrote {manifest}; weights "
          f"{np.array2string(weights, precision=5)}")
    return EXIT_OK


def _evaluation_rows(bundle, epochs, threshold):
    rows = []
    scores_by_member = bundle.member_scores(epochs.data)
    labels = epochs.is_target
    for i, member_scores in enumerate(scores_by_member):
        rows.append((f"member{i}", labels, member_scores))
    rows.append(("ensemble", labels, bundle.weights @ scores_by_member))
    out = []
    for name, y, s in rows:
        conf = metrics.confusion(y, s, threshold)
        stats = metrics.prf1(conf)
        roc = metrics.roc_auc(y, s)
        out.append({"name": name, **conf.as_dict(), **{
            k: stats[k] for k in ("precision", "recall", "accuracy", "f1")},
            "auc": roc.auc, "undefined": stats["undefined"]})
    return out


def cmd_evaluate(args):
    config = load_config(args.config)
    timer = _Timer()
    with timer("load"):
        bundle = load_bundle(args.bundle)
        epochs = dsp.read_epochs(args.epochs_file)
    if not epochs.labeled:
        raise MissingLabelsError("evaluation requires labeled epochs")
    with timer("score"):
        rows = _evaluation_rows(bundle, epochs, config.ensemble.threshold)
    with open(args.out + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = ["name", "tp", "tn", "fn", "fp", "precision", "recall",
                "accuracy", "f1", "auc"]
        writer.writerow(cols)
        for r in rows:
            writer.writerow([r[c] if not isinstance(r[c], float)
                             else f"{r[c]:.6g}" for c in cols])
    report = _report_common(config, {"bundle_seeds": bundle.seeds}, timer)
    report["results"] = rows
    if args.recompute_weights:
        confs = [metrics.ConfusionMatrix(r["tp"], r["tn"], r["fp"], r["fn"])
                 for r in rows[:-1]]
        recomputed = compute_weights(confs)
        report["recomputed_weights"] = recomputed.tolist()
        _write_json(args.recompute_weights,
                    {"weights": recomputed.tolist(),
                     "source": args.epochs_file,
                     "config_hash": config.hash()})
    _write_json(args.out + ".json", report)
    ens = rows[-1]
    print(f"ensemble: accuracy {ens['accuracy']:.4f}, f1 {ens['f1']:.4f}, "
          f"auc {ens['auc']:.4f} -> {args.out}.csv/.json")
    return EXIT_OK


def _spell_curves(bundle, session, config, members_too=False,
                  oracle=False):
    epochs = dsp.extract_epochs(session, _design_filter(config))
    curves = {}
    if oracle:
        acc, preds = speller.accuracy_vs_repetitions(
            None, epochs, score_fn=speller.oracle_score_fn)
        curves["oracle"] = acc
    else:
        acc, preds = speller.accuracy_vs_repetitions(bundle, epochs)
        curves["ensemble"] = acc
        if members_too:
            for i, model in enumerate(bundle.models):
                solo = EnsembleBundle([model], [1.0])
                curves[f"member{i}"], _ = speller.accuracy_vs_repetitions(
                    solo, epochs)
    return curves, preds


def _write_curves(curves, predictions, out_prefix, report):
    names = list(curves)
    with open(out_prefix + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repetitions"] + names)
        for j in range(dataformat.REPETITIONS_PER_CHARACTER):
            writer.writerow([j + 1] + [f"{curves[n][j]:.6g}" for n in names])
    report["curves"] = {n: list(map(float, curves[n])) for n in names}
    report["characters"] = predictions
    _write_json(out_prefix + ".json", report)


def cmd_spell(args):
    config = load_config(args.config)
    timer = _Timer()
    with timer("load"):
        bundle = None if args.oracle_scores else load_bundle(args.bundle)
        session = dataformat.read_session(args.session)
    with timer("decode"):
        curves, preds = _spell_curves(bundle, session, config,
                                      oracle=args.oracle_scores)
    report = _report_common(config, {"bundle_seeds":
                                     bundle.seeds if bundle else None}, timer)
    _write_curves(curves, preds, args.out, report)
    name = next(iter(curves))
    print(f"{name} accuracy at 5/10/15 reps: {curves[name][4]:.3f} "
          f"{curves[name][9]:.3f} {curves[name][14]:.3f} -> {args.out}.csv")
    return EXIT_OK


def cmd_ablate(args):
    config = load_config(args.config)
    timer = _Timer()
    with timer("load"):
        bundle = load_bundle(args.bundle)
        session = dataformat.read_session(args.session)
    with timer("decode"):
        curves, preds = _spell_curves(bundle, session, config,
                                      members_too=True)
    report = _report_common(config, {"bundle_seeds": bundle.seeds}, timer)
    _write_curves(curves, preds, args.out, report)
    print(f"ensemble vs {len(bundle)} members -> {args.out}.csv")
    return EXIT_OK


def cmd_simulate(args):
    if (args.auc is None) == (args.dprime is None):
        print("simulate: exactly one of --auc/--dprime is required",
              file=sys.stderr)
        return EXIT_USAGE
    dprime = metrics.d_prime(args.auc) if args.auc is not None else args.dprime
    if dprime < 0:
        print("simulate: d' must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    timer = _Timer()
    with timer("simulate"):
        sim = metrics.simulate_char_accuracy(dprime, args.reps, args.n,
                                             args.seed)
    with timer("analytic"):
        analytic = [metrics.analytic_char_accuracy(dprime, j)
                    for j in range(1, args.reps + 1)]
    with open(args.out + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repetitions", "simulated", "analytic"])
        for j in range(args.reps):
            writer.writerow([j + 1, f"{sim[j]:.6g}", f"{analytic[j]:.6g}"])
    doc = {"dprime": dprime, "auc": args.auc, "n_characters": args.n,
           "seed": args.seed, "simulated": sim.tolist(),
           "analytic": analytic,
           "timings_s": {k: round(v, 4) for k, v in timer.phases.items()}}
    _write_json(args.out + ".json", doc)
    print(f"d'={dprime:.4f}: accuracy {sim[0]:.4f} at 1 rep, "
          f"{sim[-1]:.4f} at {args.reps} -> {args.out}.csv")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="p3speller",
        description="Offline row-column speller pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled session")
    p.add_argument("--out", required=True)
    p.add_argument("--characters", type=int, default=10)
    p.add_argument("--amplitude", type=float, default=5.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--noise-model", choices=["white", "ar1"], default="white")
    p.add_argument("--ar-coefficient", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="EEGB session -> EPB1 epochs")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="EPB1 epochs -> member weights + bundle")
    p.add_argument("--epochs-file", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="override training and sampling seeds")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate",
                       help="bundle + labeled epochs -> confusion report")
    p.add_argument("--bundle", required=True)
    p.add_argument("--epochs-file", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--recompute-weights", default=None,
                   help="also write weights recomputed from this set")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("spell",
                       help="bundle + session -> accuracy curve")
    p.add_argument("--bundle", default=None)
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--oracle-scores", action="store_true",
                   help="score targets 1 and non-targets 0 (needs labels)")
    p.set_defaults(func=cmd_spell)

    p = sub.add_parser("ablate",
                       help="single members vs ensemble accuracy curves")
    p.add_argument("--bundle", required=True)
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("simulate",
                       help="d-prime repetition-accuracy simulation")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--auc", type=float, default=None)
    group.add_argument("--dprime", type=float, default=None)
    p.add_argument("--reps", type=int, default=15)
    p.add_argument("--n", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SessionValidationError, FormatError, MissingLabelsError,
            speller.IncompleteCharacterError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"invalid value: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
