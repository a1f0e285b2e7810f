"""Command-line front end.

Subcommands: gen-data, train, eval, sweep, report, landscape. Every command
validates its full configuration before touching the filesystem, and a fixed
configuration reproduces byte-identical outputs. Exit codes: 0 success,
1 runtime error, 2 usage/config error.

`--config file.json` supplies defaults for any flag (keys are the long
option names with dashes replaced by underscores); explicit flags win.
SHIFTSCOPE_THREADS caps the sweep's worker processes (default 1).
"""

import argparse
import concurrent.futures
import json
import os
import re
import sys

import numpy as np

from .analysis import score_landscape
from .data import (LabeledDataset, SynthConfig, gen_id, gen_shift_sequence,
                   read_csv, write_csv)
from .hyperparam import (SweepGrid, SweepRecord, SweepResult,
                         evaluate_candidate, rank_and_select,
                         residual_singular_mass, select_hyperparams)
from .losses import LossConfig
from .metrics import METRIC_NAMES, compute_metric
from .net import forward, init_net, load_net, save_net
from .scorers import SCORER_NAMES, OdinConfig, fit_scorer
from .train import OptConfig, accuracy, train

SCHEMA_VERSION = 1

LOSS_VARIANTS = ("ce", "full", "ce+dist", "ce+entropy")


class UsageError(Exception):
    """Configuration/usage problem; maps to exit code 2."""


def _fmt(v):
    return f"{v:.17g}"


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_floats(text, what):
    try:
        return [float(tok) for tok in str(text).split(",") if tok != ""]
    except ValueError:
        raise UsageError(f"cannot parse {what} list from {text!r}") from None


def _parse_names(text, valid, what):
    names = [tok.strip() for tok in str(text).split(",") if tok.strip()]
    for name in names:
        if name not in valid:
            raise UsageError(
                f"unknown {what} {name!r}; valid {what}s: {', '.join(valid)}")
    if not names:
        raise UsageError(f"empty {what} list")
    return names


def _require(args, name):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise UsageError(f"missing required --{name}")
    return value


def _delta_token(delta):
    return f"{delta:g}"


_DELTA_RE = re.compile(r"_d([0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)\.csv$")


def _delta_from_name(path, fallback):
    m = _DELTA_RE.search(os.path.basename(path))
    return float(m.group(1)) if m else float(fallback)


def _loss_config(args):
    try:
        variant = args.loss
        if variant == "ce":
            return LossConfig.ce_only()
        if variant == "ce+dist":
            return LossConfig(w_dist=args.w_dist, w_var=0.0, w_corr=0.0,
                              enable_dist=True, enable_entropy=False)
        if variant == "ce+entropy":
            return LossConfig(w_dist=0.0, w_var=args.l2, w_corr=args.l3,
                              enable_dist=False, enable_entropy=True)
        if variant == "full":
            return LossConfig(w_dist=args.w_dist, w_var=args.l2,
                              w_corr=args.l3)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(
        f"unknown loss variant {variant!r}; valid: {', '.join(LOSS_VARIANTS)}")


def _arch(dataset, width, depth):
    return [dataset.dim] + [width] * depth + [dataset.n_classes]


def _n_workers():
    try:
        return max(1, int(os.environ.get("SHIFTSCOPE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# gen-data


def cmd_gen_data(args):
    out_dir = _require(args, "out")
    category = args.category
    if category not in (1, 2, 3):
        raise UsageError(f"--category must be 1, 2 or 3, got {category}")
    deltas = _parse_floats(_require(args, "deltas"), "delta")
    try:
        cfg = SynthConfig(n_classes=args.classes, spread=args.spread,
                          n_per_class=args.n_per_class, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        seq = gen_shift_sequence(cfg, category, deltas, args.n, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    os.makedirs(out_dir, exist_ok=True)
    write_csv(gen_id(cfg), os.path.join(out_dir, "id.csv"))
    for delta, dataset in seq:
        name = f"nas_cat{category}_d{_delta_token(delta)}.csv"
        write_csv(dataset, os.path.join(out_dir, name))
    return 0


# ---------------------------------------------------------------------------
# train


def _train_from_args(dataset, loss_cfg, args):
    sizes = _arch(dataset, args.width, args.depth)
    net0 = init_net(sizes, seed=args.seed, activation=args.activation)
    opt = OptConfig(learning_rate=args.lr, batch_size=args.batch_size)
    return train(net0, dataset, loss_cfg, opt, epochs=args.epochs,
                 seed=args.seed)


def cmd_train(args):
    data_path = _require(args, "data")
    out_path = _require(args, "out")
    loss_cfg = _loss_config(args)
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    dataset = read_csv(data_path)
    try:
        net, log = _train_from_args(dataset, loss_cfg, args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_net(net, out_path)
    log_path = out_path + ".log.csv"
    with open(log_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,total,ce,dist,entropy\n")
        for e in range(len(log)):
            fh.write(f"{e},{_fmt(log.total[e])},{_fmt(log.ce[e])},"
                     f"{_fmt(log.dist[e])},{_fmt(log.entropy[e])}\n")
    print(f"wrote {out_path} and {log_path} "
          f"(final accuracy {accuracy(net, dataset):.4f})")
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args):
    model_path = _require(args, "model")
    id_path = _require(args, "id")
    nas_paths = _require(args, "nas")
    out_path = _require(args, "out")
    scorers = _parse_names(args.scorers, SCORER_NAMES, "scorer")
    metrics = _parse_names(args.metrics, METRIC_NAMES, "metric")

    net = load_net(model_path)
    id_set = read_csv(id_path)
    fit_set = read_csv(args.fit) if args.fit else id_set
    nas_sets = [read_csv(p) for p in nas_paths]
    for path, ds in [(id_path, id_set)] + list(zip(nas_paths, nas_sets)):
        if ds.dim != net.input_dim:
            raise UsageError(
                f"{path}: width {ds.dim} does not match model input "
                f"{net.input_dim}")

    odin_cfg = OdinConfig(temperature=args.odin_t, epsilon=args.odin_eps)
    rows = []
    score_means = []
    for scorer_name in scorers:
        score_fn = fit_scorer(scorer_name, net, fit_set, odin_cfg=odin_cfg)
        id_scores = np.asarray(score_fn(id_set.inputs))
        for i, (path, ds) in enumerate(zip(nas_paths, nas_sets)):
            delta = _delta_from_name(path, i)
            nas_scores = np.asarray(score_fn(ds.inputs))
            for metric in metrics:
                rows.append({
                    "nas_file": os.path.basename(path), "delta": delta,
                    "scorer": scorer_name, "metric": metric,
                    "value": compute_metric(metric, id_scores, nas_scores),
                })
            score_means.append({
                "nas_file": os.path.basename(path), "delta": delta,
                "scorer": scorer_name,
                "id_mean": float(id_scores.mean()),
                "nas_mean": float(nas_scores.mean()),
            })

    report = {
        "schema_version": SCHEMA_VERSION, "kind": "eval-report",
        "model": os.path.basename(model_path),
        "id_file": os.path.basename(id_path),
        "scorers": scorers, "metrics": metrics,
        "rows": rows, "score_means": score_means,
    }
    _write_json(out_path, report)
    return 0


# ---------------------------------------------------------------------------
# sweep


def _sweep_train(dataset, loss_cfg, sizes, activation, seed, lr, batch_size,
                 epochs, pretrain_epochs, finetune_lr):
    """One- or two-phase training used by the sweep.

    With pretrain_epochs > 0 the net first trains with plain cross-entropy,
    then fine-tunes with the candidate objective at finetune_lr; every
    candidate shares the same pretrained starting point.
    """
    net = init_net(sizes, seed=seed, activation=activation)
    opt = OptConfig(learning_rate=lr, batch_size=batch_size)
    phase_seed = seed
    if pretrain_epochs > 0:
        net, _ = train(net, dataset, LossConfig.ce_only(), opt,
                       epochs=pretrain_epochs, seed=seed)
        opt = OptConfig(learning_rate=finetune_lr, batch_size=batch_size)
        phase_seed = seed + 1
    net, _ = train(net, dataset, loss_cfg, opt, epochs=epochs,
                   seed=phase_seed)
    return net


def _sweep_worker(payload):
    """Train and evaluate one grid cell; used by the worker pool."""
    (inputs, labels, sizes, activation, seed, lr, batch_size, epochs,
     pretrain_epochs, finetune_lr, w_dist, w_var, w_corr) = payload
    dataset = LabeledDataset(inputs, labels)
    cfg = LossConfig(w_dist=w_dist, w_var=w_var, w_corr=w_corr)
    net = _sweep_train(dataset, cfg, sizes, activation, seed, lr, batch_size,
                       epochs, pretrain_epochs, finetune_lr)
    raw_var, raw_corr, hm, mass, acc = evaluate_candidate(net, dataset)
    return SweepRecord(w_var=w_var, w_corr=w_corr, raw_var_term=raw_var,
                       raw_corr_term=raw_corr, harmonic_mean=hm,
                       residual_mass=mass, accuracy=acc)


def cmd_sweep(args):
    data_path = _require(args, "data")
    out_path = _require(args, "out")
    try:
        grid = SweepGrid(
            var_weights=tuple(_parse_floats(args.l2, "l2")),
            corr_weights=tuple(_parse_floats(args.l3, "l3")),
            w_dist=args.w_dist)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    if args.pretrain_epochs < 0:
        raise UsageError("--pretrain-epochs must be >= 0")
    finetune_lr = args.finetune_lr if args.finetune_lr is not None else args.lr
    dataset = read_csv(data_path)
    partial_path = out_path + ".partial.jsonl"

    def train_fn(ds, loss_cfg):
        return _sweep_train(ds, loss_cfg, _arch(ds, args.width, args.depth),
                            args.activation, args.seed, args.lr,
                            args.batch_size, args.epochs,
                            args.pretrain_epochs, finetune_lr)

    workers = _n_workers()
    with open(partial_path, "w", encoding="utf-8", newline="\n") as partial:
        def flush_record(rec):
            partial.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
            partial.flush()

        if workers == 1:
            result = select_hyperparams(
                grid, dataset, train_fn,
                accuracy_floor=args.accuracy_floor, on_record=flush_record)
        else:
            net_ce = train_fn(dataset, LossConfig.ce_only())
            ce_acc = accuracy(net_ce, dataset)
            ce_mass = residual_singular_mass(
                forward(net_ce, dataset.inputs).penultimate)
            net_ref = train_fn(dataset, LossConfig(
                w_dist=grid.w_dist, w_var=0.0, w_corr=0.0,
                enable_dist=True, enable_entropy=False))
            ref_mass = residual_singular_mass(
                forward(net_ref, dataset.inputs).penultimate)
            sizes = _arch(dataset, args.width, args.depth)
            payloads = [
                (dataset.inputs, dataset.labels, sizes, args.activation,
                 args.seed, args.lr, args.batch_size, args.epochs,
                 args.pretrain_epochs, finetune_lr,
                 grid.w_dist, w_var, w_corr)
                for w_var, w_corr in grid.cells()]
            records = []
            with concurrent.futures.ProcessPoolExecutor(workers) as pool:
                for rec in pool.map(_sweep_worker, payloads):
                    flush_record(rec)
                    records.append(rec)
            accepted = rank_and_select(records, ref_mass, ce_acc,
                                       args.accuracy_floor)
            result = SweepResult(accepted=accepted, records=records,
                                 ce_accuracy=ce_acc, ce_mass=ce_mass,
                                 reference_mass=ref_mass)

    report = {
        "schema_version": SCHEMA_VERSION, "kind": "sweep-report",
        "grid": {"l2": list(grid.var_weights), "l3": list(grid.corr_weights),
                 "w_dist": grid.w_dist},
        "accuracy_floor": args.accuracy_floor,
        "accepted": (None if result.accepted is None
                     else {"w_var": result.accepted[0],
                           "w_corr": result.accepted[1]}),
        "status": ("accepted" if result.accepted is not None
                   else "no candidate accepted"),
        "ce_accuracy": result.ce_accuracy,
        "ce_mass": result.ce_mass,
        "reference_mass": result.reference_mass,
        "records": [rec.to_dict() for rec in result.records],
    }
    _write_json(out_path, report)
    print(f"sweep: {report['status']}; trail of {len(result.records)} "
          f"records at {out_path}")
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args):
    eval_paths = _require(args, "eval_jsons")
    out_dir = _require(args, "out")
    reports = []
    for path in eval_paths:
        with open(path, "r", encoding="utf-8") as fh:
            rep = json.load(fh)
        if rep.get("kind") != "eval-report":
            raise UsageError(f"{path}: not an eval report")
        reports.append(rep)

    def key_set(rep):
        return sorted({(r["delta"], r["scorer"], r["metric"])
                       for r in rep["rows"]})

    base = key_set(reports[0])
    for path, rep in zip(eval_paths[1:], reports[1:]):
        if key_set(rep) != base:
            raise RuntimeError(
                f"eval files disagree: {eval_paths[0]} has "
                f"{len(base)} (delta, scorer, metric) cells but {path} has "
                f"{len(key_set(rep))} or different ones")

    cells = {}
    for rep in reports:
        for row in rep["rows"]:
            cells.setdefault(
                (row["delta"], row["scorer"], row["metric"]), []).append(
                row["value"])
    means = {}
    for rep in reports:
        for row in rep["score_means"]:
            means.setdefault((row["delta"], row["scorer"]), []).append(
                (row["id_mean"], row["nas_mean"]))

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("delta,scorer,metric,mean,std\n")
        for (delta, scorer, metric) in sorted(cells):
            vals = np.asarray(cells[(delta, scorer, metric)])
            fh.write(f"{_delta_token(delta)},{scorer},{metric},"
                     f"{_fmt(vals.mean())},{_fmt(vals.std())}\n")
    with open(os.path.join(out_dir, "score_means.csv"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("delta,scorer,id_mean,id_std,nas_mean,nas_std\n")
        for (delta, scorer) in sorted(means):
            vals = np.asarray(means[(delta, scorer)])
            fh.write(f"{_delta_token(delta)},{scorer},"
                     f"{_fmt(vals[:, 0].mean())},{_fmt(vals[:, 0].std())},"
                     f"{_fmt(vals[:, 1].mean())},{_fmt(vals[:, 1].std())}\n")
    scorers = sorted({s for (_, s, _) in cells})
    metrics = sorted({m for (_, _, m) in cells})
    for scorer in scorers:
        for metric in metrics:
            name = f"curve_{scorer}_{metric}.csv"
            with open(os.path.join(out_dir, name), "w", encoding="utf-8",
                      newline="\n") as fh:
                fh.write("delta,mean,std\n")
                for (delta, s, m) in sorted(cells):
                    if s == scorer and m == metric:
                        vals = np.asarray(cells[(delta, s, m)])
                        fh.write(f"{_delta_token(delta)},{_fmt(vals.mean())},"
                                 f"{_fmt(vals.std())}\n")
    print(f"aggregated {len(reports)} eval files into {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# landscape


def cmd_landscape(args):
    model_path = _require(args, "model")
    out_path = _require(args, "out")
    scorer_name = args.scorer
    if scorer_name not in SCORER_NAMES:
        raise UsageError(
            f"unknown scorer {scorer_name!r}; valid scorers: "
            f"{', '.join(SCORER_NAMES)}")
    bounds = _parse_floats(args.bounds, "bounds")
    if len(bounds) != 4:
        raise UsageError("--bounds must be xmin,xmax,ymin,ymax")
    res = [int(v) for v in _parse_floats(args.resolution, "resolution")]
    resolution = res[0] if len(res) == 1 else tuple(res[:2])

    net = load_net(model_path)
    if net.input_dim != 2:
        raise UsageError(
            f"landscapes need a 2-D input model, got d={net.input_dim}")
    fit_set = None
    if scorer_name in ("mahalanobis", "mahalanobis-ensemble", "gram"):
        if not args.fit:
            raise UsageError(f"scorer {scorer_name!r} requires --fit data")
        fit_set = read_csv(args.fit)
    odin_cfg = OdinConfig(temperature=args.odin_t, epsilon=args.odin_eps)
    score_fn = fit_scorer(scorer_name, net, fit_set, odin_cfg=odin_cfg)
    try:
        grid = score_landscape(score_fn, bounds, resolution)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,score\n")
        for x, y, s in grid.rows():
            fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(s)}\n")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="shiftscope",
        description="attribute-shift detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic ID/shifted CSVs")
    p.add_argument("--config")
    p.add_argument("--category", type=int, default=2)
    p.add_argument("--deltas", help="comma list, strictly increasing from 0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--n", type=int, default=200,
                   help="samples per shifted set")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--classes", type=int, default=3)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a classifier on a dataset CSV")
    p.add_argument("--config")
    p.add_argument("--data", help="training dataset CSV")
    p.add_argument("--loss", choices=LOSS_VARIANTS, default="ce")
    p.add_argument("--w-dist", type=float, default=0.1,
                   help="class-separation weight magnitude")
    p.add_argument("--l2", type=float, default=0.1,
                   help="variance-term weight")
    p.add_argument("--l3", type=float, default=0.0001,
                   help="correlation-term weight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="model file")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score ID vs shifted files, emit metrics")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--id", help="ID test CSV")
    p.add_argument("--nas", nargs="+", help="shifted CSVs")
    p.add_argument("--fit", help="fit CSV for distance scorers (default: --id)")
    p.add_argument("--scorers", default=",".join(SCORER_NAMES))
    p.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p.add_argument("--odin-t", type=float, default=1000.0)
    p.add_argument("--odin-eps", type=float, default=0.0)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-sweep the entropy-term weights")
    p.add_argument("--config")
    p.add_argument("--data", help="ID training CSV")
    p.add_argument("--l2", default="0.01,0.1,1.0,10.0",
                   help="variance-weight grid")
    p.add_argument("--l3", default="0.0001,0.001,0.01,0.1,1.0",
                   help="correlation-weight grid")
    p.add_argument("--w-dist", type=float, default=0.1)
    p.add_argument("--accuracy-floor", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--pretrain-epochs", type=int, default=0,
                   help="CE pretraining epochs shared by all candidates")
    p.add_argument("--finetune-lr", type=float, default=None,
                   help="candidate-phase learning rate (default: --lr)")
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--out", help="audit-trail JSON path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="aggregate eval JSONs across seeds")
    p.add_argument("--config")
    p.add_argument("--eval-jsons", nargs="+")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("landscape", help="planar score grid for a 2-D model")
    p.add_argument("--config")
    p.add_argument("--model")
    p.add_argument("--scorer", default="msp")
    p.add_argument("--fit", help="fit CSV for distance scorers")
    p.add_argument("--bounds", default="-10,10,-10,10")
    p.add_argument("--resolution", default="50")
    p.add_argument("--odin-t", type=float, default=1000.0)
    p.add_argument("--odin-eps", type=float, default=0.0)
    p.add_argument("--out", help="landscape CSV path")
    p.set_defaults(func=cmd_landscape)

    return parser


def _apply_config(parser, argv):
    """Load --config JSON (if present) as subcommand defaults."""
    if "--config" not in argv:
        return
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[idx + 1]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a JSON object")
    if not argv or argv[0].startswith("-"):
        raise UsageError("--config requires a subcommand")
    sub_actions = [a for a in parser._actions
                   if isinstance(a, argparse._SubParsersAction)]
    subparser = sub_actions[0].choices.get(argv[0])
    if subparser is None:
        return
    dests = {a.dest for a in subparser._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise UsageError(f"config key {key!r} unknown for {argv[0]!r}")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        defaults[dest] = value
    subparser.set_defaults(**defaults)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    except Exception as exc:  # noqa: BLE001 -- CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
