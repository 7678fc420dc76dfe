"""Command-line entry point.

Usage: ``mtft <subcommand> --seed N [--config FILE] [--out DIR] [options]``.

Every option can also come from a flat ``key = value`` config file whose keys
are the long option names (``batch_size`` or ``batch-size``); command-line
flags win over the file. Each run that writes files leaves ``config.txt``
in its output directory, and passing that file back with ``--config``
reproduces the run.

Exit codes: 0 success, 1 invariant or data error (one line on stderr,
prefixed by the module that raised it), 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .data import (
    SceneDataset,
    find_split,
    format_mix,
    make_batch,
    parse_mix,
    read_dataset,
    stack_scenes,
    synth_challenging,
    synth_generate,
    write_dataset,
)
from .data.synth import DEFAULT_MIX
from .eval_train import (
    ABLATION_COLUMNS,
    AblationRow,
    TrainConfig,
    evaluate,
    run_ablation,
    train,
    write_predictions,
)
from .eval_train.ablation import write_ablation
from .eval_train.training import LR_SCHEDULES, eval_masks
from .eval_train.verify import OBJECTIVES, GradcheckSetup, model_gradcheck
from .masking import format_interval, gen_sequence_masks, parse_interval
from .model import VARIANTS, MTFTModel, ModelConfig

log = logging.getLogger("mtft")

CONFIG_SNAPSHOT = "config.txt"
_SNAPSHOT_SKIP = {"command", "config", "out", "force", "threads", "verbose"}


class CliError(RuntimeError):
    pass


# -- option types ---------------------------------------------------------

def _interval_opt(text: str):
    return None if text.strip().lower() == "none" else parse_interval(text)


def _list_of(item: Callable) -> Callable:
    def parse(text: str):
        return [item(part.strip()) for part in text.split(",") if part.strip()]
    parse.__name__ = f"list_of_{item.__name__}"
    return parse


def _variant(text: str) -> str:
    if text not in VARIANTS:
        raise argparse.ArgumentTypeError(f"variant must be one of {','.join(VARIANTS)}")
    return text


def _optional_path(text: str):
    return None if text.strip().lower() == "none" else text


def _mix(text: str) -> str:
    return format_mix(parse_mix(text))


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple) and len(value) == 2:
        return format_interval(value)
    if isinstance(value, list):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- config files ---------------------------------------------------------

def read_config(path: str | os.PathLike) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def write_config(path: Path, args: argparse.Namespace) -> None:
    lines = [f"command = {args.command}\n"]
    for key in sorted(vars(args)):
        if key not in _SNAPSHOT_SKIP and not key.startswith("_"):
            lines.append(f"{key} = {_format(getattr(args, key))}\n")
    path.write_text("".join(lines), encoding="utf-8")


def _apply_config(parser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, raw in values.items():
        if key == "command":
            continue
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            parser.error(f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = _bool(raw)
        elif action.type is not None and not (raw.lower() == "none" and action.default is None):
            try:
                defaults[key] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"config key {key!r}: {exc}")
        else:
            defaults[key] = None if raw.lower() == "none" else raw
    parser.set_defaults(**defaults)


# -- parser ---------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help="seed for every random draw (required)")
    p.add_argument("--config", default=None, help="key = value file; flags override it")
    p.add_argument("--out", required=False, default=None,
                   help="output directory, created atomically" + ("" if out_required else " (optional)"))
    p.add_argument("--force", action="store_true", help="replace an existing output directory")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.set_defaults(_out_required=out_required)


def _model_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--variant", type=_variant, default="mtft", help="vtf | mtf | mtft")
    g.add_argument("--d-model", type=int, default=128)
    g.add_argument("--heads", type=int, default=5, help="attention heads, one per scale 1..n")
    g.add_argument("--layers", type=int, default=4)
    g.add_argument("--d-ff", type=int, default=0, help="feed-forward width (0 -> 2*d_model)")
    g.add_argument("--no-positional", dest="positional", action="store_false",
                   help="drop the sinusoidal position table")
    g.add_argument("--fusion-scale", choices=("dk", "sqrt_dk"), default="dk")
    g.add_argument("--coord-scale", type=float, default=10.0, help="metres per network unit")
    g.add_argument("--dtype", choices=("float64", "float32"), default="float64")


def _train_opts(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--epochs", type=int, default=20)
    g.add_argument("--batch-size", type=int, default=128)
    g.add_argument("--lr-schedule", choices=LR_SCHEDULES, default="constant")
    g.add_argument("--clip-norm", type=float, default=0.0, help="global gradient-norm cap (0 = off)")


def _data_opts(p: argparse.ArgumentParser, split: str) -> None:
    p.add_argument("--data", required=False, default=None, help="dataset root or split directory")
    p.add_argument("--split", default=split)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtft", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--count", type=int, default=1000, help="training scenes")
    p.add_argument("--test-count", type=int, default=0, help="held-out scenes written to test/")
    p.add_argument("--t-h", "--len", dest="t_h", type=int, default=20, help="history steps")
    p.add_argument("--t-f", type=int, default=30, help="future steps")
    p.add_argument("--hz", type=float, default=10.0)
    p.add_argument("--mix", type=_mix, default=format_mix(DEFAULT_MIX),
                   help="family weights, e.g. cv:1,ca:1,lane_change:1,turn:1")
    p.add_argument("--neighbors", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1, help="position noise sigma (m)")
    p.add_argument("--challenging", action="store_true",
                   help="keep only scenes passing the challenging-scenario filter")

    p = sub.add_parser("mask", help="draw sequence masks for a dataset split")
    _common(p)
    _data_opts(p, "train")
    p.add_argument("--interval", type=_interval_opt, default=(30.0, 60.0), help="missing percent, lo-hi")

    p = sub.add_parser("train", help="train one model")
    _common(p)
    _data_opts(p, "train")
    _model_opts(p)
    _train_opts(p)
    p.add_argument("--interval", type=_interval_opt, default=(0.0, 30.0),
                   help="missing percent drawn per epoch, lo-hi or none")

    p = sub.add_parser("eval", help="score a checkpoint")
    _common(p)
    _data_opts(p, "test")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--interval", type=_interval_opt, default=(0.0, 30.0))
    p.add_argument("--horizons", type=_list_of(float), default=None, help="seconds, e.g. 1,2,3")
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--dump-attention", type=_optional_path, default=None, metavar="DIR")
    p.add_argument("--dump-continuity", type=_optional_path, default=None, metavar="DIR")
    p.add_argument("--dump-scenes", type=int, default=8, help="scenes written by the dump options")

    p = sub.add_parser("ablate", help="variant x interval x seed grid")
    _common(p)
    p.add_argument("--data", default=None, help="dataset root holding the train and test splits")
    p.add_argument("--train-split", default="train")
    p.add_argument("--test-split", default="test")
    _model_opts(p)
    _train_opts(p)
    p.add_argument("--variants", type=_list_of(_variant), default=list(VARIANTS))
    p.add_argument("--intervals", type=_list_of(_interval_opt),
                   default=[(0.0, 30.0), (30.0, 60.0), (60.0, 90.0)])
    p.add_argument("--seeds", type=_list_of(int), default=None, help="defaults to --seed")
    p.add_argument("--horizons", type=_list_of(float), default=None)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full loss")
    _common(p, out_required=False)
    p.add_argument("--d-model", type=int, default=8)
    p.add_argument("--len", "--t-h", dest="t_h", type=int, default=6)
    p.add_argument("--t-f", type=int, default=4)
    p.add_argument("--heads", type=int, default=3)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--neighbors", type=int, default=1)
    p.add_argument("--variant", type=_variant, default="mtft")
    p.add_argument("--interval", type=_interval_opt, default=(30.0, 60.0))
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--max-elements", type=int, default=0, help="0 checks every element")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--objective", choices=OBJECTIVES, default="loss",
                   help="loss: the training loss; probe: random projection of the prediction change")

    for name, helptext in (("dump-attention", "write per-head attention matrices"),
                           ("dump-continuity", "write across-time weights and continuity vectors")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _data_opts(p, "test")
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--interval", type=_interval_opt, default=(0.0, 30.0))
        p.add_argument("--scenes", type=int, default=4, help="number of scenes to dump")
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    first = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[first.command]
    if first.config:
        try:
            values = read_config(first.config)
        except OSError as exc:
            sub.error(f"cannot read config: {exc}")
        if values.get("command", first.command) != first.command:
            sub.error(f"config was written for {values['command']!r}, not {first.command!r}")
        _apply_config(sub, values)
        args = parser.parse_args(argv)
    else:
        args = first
    if args.seed is None:
        sub.error("--seed is required (on the command line or in --config)")
    if args._out_required and not args.out:
        sub.error("--out is required")
    for name in ("data", "checkpoint"):
        if hasattr(args, name) and getattr(args, name) is None and name in _needs(args.command):
            sub.error(f"--{name} is required")
    return args


def _needs(command: str) -> set[str]:
    return {"mask": {"data"}, "train": {"data"}, "eval": {"data", "checkpoint"}, "ablate": {"data"},
            "dump-attention": {"data", "checkpoint"}, "dump-continuity": {"data", "checkpoint"}}.get(command, set())


# -- helpers --------------------------------------------------------------

@contextlib.contextmanager
def atomic_dir(out: Path, force: bool = False) -> Iterator[Path]:
    """Yield a scratch directory that is renamed to ``out`` only on success."""
    out = Path(out)
    if out.exists() and not force:
        raise CliError(f"output directory {out} exists (pass --force to replace it)")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    os.replace(tmp, out)


def model_config(args: argparse.Namespace, t_h: int, t_f: int) -> ModelConfig:
    return ModelConfig(t_h=t_h, t_f=t_f, variant=args.variant, d_model=args.d_model, n_heads=args.heads,
                       layers=args.layers, d_ff=args.d_ff, positional=args.positional,
                       fusion_scale=args.fusion_scale, coord_scale=args.coord_scale, dtype=args.dtype)


def train_config(args: argparse.Namespace, model: ModelConfig, interval) -> TrainConfig:
    return TrainConfig(model=model, lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed, interval=interval, lr_schedule=args.lr_schedule,
                       clip_norm=args.clip_norm)


def _load_split(path, split: str) -> SceneDataset:
    return read_dataset(find_split(path, split))


def _metric_rows(path: Path, rows: Sequence[AblationRow]) -> None:
    write_ablation(rows, path)


def _write_matrix(path: Path, rows: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(rows):
            writer.writerow([repr(float(v)) for v in row])


def _dump_batch(model: MTFTModel, dataset: SceneDataset, interval, seed: int, count: int):
    arrays = stack_scenes(dataset.scenes)
    idx = np.arange(min(count, len(arrays)))
    masks = eval_masks(arrays, interval, seed)
    batch = make_batch(arrays, idx, None if masks is None else masks[idx])
    _, trace = model.trace(batch)
    return arrays, idx, batch, trace


def dump_attention(model: MTFTModel, dataset: SceneDataset, interval, seed: int, count: int,
                   out: Path) -> int:
    """Write ``<scene>/<vehicle>_layer<l>_head<i>.csv``; returns the file count."""
    arrays, idx, batch, trace = _dump_batch(model, dataset, interval, seed, count)
    written = 0
    for b, s in enumerate(idx):
        scene = dataset.scenes[s]
        d = out / scene.scene_id
        d.mkdir(parents=True, exist_ok=True)
        ids = scene.vehicle_ids or tuple(f"v{i}" for i in range(scene.history.shape[0]))
        for v, vid in enumerate(ids):
            _write_matrix(d / f"{vid}_mask.csv", batch.seq_mask[b, v][None, :])
            for layer, weights in enumerate(trace.attention):
                for head in range(weights.shape[2]):
                    _write_matrix(d / f"{vid}_layer{layer}_head{head}.csv", weights[b, v, head])
                    written += 1
    return written


def dump_continuity(model: MTFTModel, dataset: SceneDataset, interval, seed: int, count: int,
                    out: Path) -> int:
    """Write per-vehicle across-time weights (n x len) and continuity vectors (n x d_head)."""
    if model.config.variant != "mtft":
        raise CliError(f"continuity vectors exist only for the mtft variant, not {model.config.variant}")
    arrays, idx, batch, trace = _dump_batch(model, dataset, interval, seed, count)
    written = 0
    for b, s in enumerate(idx):
        scene = dataset.scenes[s]
        d = out / scene.scene_id
        d.mkdir(parents=True, exist_ok=True)
        ids = scene.vehicle_ids or tuple(f"v{i}" for i in range(scene.history.shape[0]))
        for v, vid in enumerate(ids):
            _write_matrix(d / f"{vid}_mask.csv", batch.seq_mask[b, v][None, :])
            _write_matrix(d / f"{vid}_weights.csv", trace.across_weights[b, v])
            _write_matrix(d / f"{vid}_continuity.csv", trace.continuity[b, v])
            written += 3
    return written


# -- subcommands ----------------------------------------------------------

def cmd_synth(args, out: Path) -> None:
    total = args.count + args.test_count
    if args.count < 1 or args.test_count < 0:
        raise CliError("--count must be >= 1 and --test-count >= 0")
    gen = synth_challenging if args.challenging else synth_generate
    scenes = gen(total, t_h=args.t_h, t_f=args.t_f, hz=args.hz, kinematics_mix=parse_mix(args.mix),
                 seed=args.seed, n_neighbors=args.neighbors, noise=args.noise)
    splits = [("train", scenes[:args.count])]
    if args.test_count:
        splits.append(("test", scenes[args.count:]))
    for split, part in splits:
        write_dataset(SceneDataset(part, args.t_h, args.t_f, args.hz, split), out)
    print(f"synth: wrote {args.count} train / {args.test_count} test scenes")


def cmd_mask(args, out: Path) -> None:
    ds = _load_split(args.data, args.split)
    if args.interval is None:
        raise CliError("mask needs a missing interval")
    t_h = ds.t_h
    drawn = []
    new_scenes = []
    rng = np.random.default_rng([args.seed, 3])
    for scene in ds.scenes:
        m = gen_sequence_masks((scene.history.shape[0],), t_h, args.interval, rng)
        combined = scene.masks & m
        empty = ~combined.any(axis=1)
        combined[empty] = scene.masks[empty]
        drawn.append(m)
        new_scenes.append(scene.__class__(scene.scene_id, scene.history, combined, scene.future,
                                          scene.hz, scene.offset, scene.vehicle_ids))
    masked = SceneDataset(new_scenes, ds.t_h, ds.t_f, ds.hz, ds.split, format_interval(args.interval),
                          ds.source)
    write_dataset(masked, out)
    with open(out / "masks.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scene_id", "vehicle_id"] + [f"t{t}" for t in range(t_h)])
        for scene, m in zip(ds.scenes, drawn):
            ids = scene.vehicle_ids or tuple(f"v{i}" for i in range(len(m)))
            for vid, bits in zip(ids, m):
                writer.writerow([scene.scene_id, vid] + [int(b) for b in bits])
    print(f"mask: {len(ds)} scenes masked at {format_interval(args.interval)}")


def cmd_train(args, out: Path) -> None:
    ds = _load_split(args.data, args.split)
    cfg = train_config(args, model_config(args, ds.t_h, ds.t_f), args.interval)
    result = train(ds, cfg, out_dir=out)
    print(f"train: {cfg.epochs} epochs, final loss {result.losses[-1]:.6g}" if result.losses
          else "train: 0 epochs")


def cmd_eval(args, out: Path) -> None:
    model = MTFTModel.load(args.checkpoint)
    ds = _load_split(args.data, args.split)
    ev = evaluate(model, ds, args.interval, args.seed, args.horizons, batch_size=args.batch_size)
    row = AblationRow(model.config.variant, args.interval, args.seed, ev.report, [])
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ABLATION_COLUMNS)
        writer.writerow(row.csv_row())
    with open(out / "rmse_by_horizon.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["horizon", "rmse"])
        for h, v in ev.report.rmse_at.items():
            writer.writerow([f"{h:g}", repr(v)])
    write_predictions(out / "predictions.csv", ev, ds.hz)
    if args.dump_attention:
        dump_attention(model, ds, args.interval, args.seed, args.dump_scenes, Path(args.dump_attention))
    if args.dump_continuity:
        dump_continuity(model, ds, args.interval, args.seed, args.dump_scenes, Path(args.dump_continuity))
    r = ev.report
    print(f"eval: ade={r.ade:.4f} fde={r.fde:.4f} mr={r.mr:.4f} n={r.count}")


def cmd_ablate(args, out: Path) -> None:
    train_set = _load_split(args.data, args.train_split)
    test_set = _load_split(args.data, args.test_split)
    base = train_config(args, model_config(args, train_set.t_h, train_set.t_f), None)
    seeds = args.seeds or [args.seed]
    rows = run_ablation(train_set, test_set, base, args.variants, args.intervals, seeds, args.horizons)
    _metric_rows(out, rows)
    print(f"ablate: {len(rows)} runs")


def cmd_gradcheck(args, out: Optional[Path]) -> None:
    setup = GradcheckSetup(d_model=args.d_model, t_h=args.t_h, t_f=args.t_f, n_heads=args.heads,
                           layers=args.layers, neighbors=args.neighbors, variant=args.variant,
                           interval=args.interval or (0.0, 0.0), step=args.step,
                           max_elements=args.max_elements or None, objective=args.objective)
    report = model_gradcheck(setup, args.seed)
    verdict = "pass" if report.passed(args.tol) else "fail"
    line = f"gradcheck: {report} tol={args.tol:g} {verdict}"
    print(line)
    if out is not None:
        (out / "gradcheck.txt").write_text(line + "\n", encoding="utf-8")
    if verdict == "fail":
        raise GradcheckFailure(f"max_rel_err {report.max_rel_err:.3e} >= {args.tol:g} "
                               f"at {report.worst_param}{list(report.worst_index)}")


class GradcheckFailure(RuntimeError):
    __module__ = "mtft.numerics.gradcheck"


def cmd_dump(args, out: Path) -> None:
    model = MTFTModel.load(args.checkpoint)
    ds = _load_split(args.data, args.split)
    fn = dump_attention if args.command == "dump-attention" else dump_continuity
    n = fn(model, ds, args.interval, args.seed, args.scenes, out)
    print(f"{args.command}: wrote {n} matrices")


COMMANDS = {
    "synth": cmd_synth,
    "mask": cmd_mask,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
    "dump-attention": cmd_dump,
    "dump-continuity": cmd_dump,
}


def run(args: argparse.Namespace) -> None:
    handler = COMMANDS[args.command]
    if args.out is None:
        handler(args, None)
        return
    with atomic_dir(Path(args.out), args.force) as tmp:
        write_config(tmp / CONFIG_SNAPSHOT, args)
        handler(args, tmp)


def _error_line(exc: BaseException) -> str:
    module = type(exc).__module__
    if module == "builtins":
        tb = exc.__traceback__
        while tb is not None and tb.tb_next is not None:
            tb = tb.tb_next
        module = tb.tb_frame.f_globals.get("__name__", "mtft") if tb is not None else "mtft"
    message = str(exc).replace("\n", " ")
    return f"{module}: {type(exc).__name__}: {message}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                run(args)
        else:
            run(args)
    except (CliError, ValueError, RuntimeError, OSError, KeyError, FloatingPointError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
