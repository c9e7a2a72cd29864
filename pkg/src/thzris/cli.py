"""Command-line pipeline driver.

    thzris --config cfg.yaml [--seed N] [--out DIR] [--threads N] COMMAND

Commands map to pipeline stages and each prints a one-line summary:

    label     sweep every grid cell           -> labeled_grid.csv
    generate  build the trajectory dataset    -> dataset.txt
    train     train beam + link predictors    -> checkpoints, epochs.csv
    eval      score a checkpoint on the split -> perbeam/heatmap/regions CSVs + SVGs
    report    re-render SVG figures from CSVs

Exit codes: 0 success, 2 configuration problem, 3 missing upstream artifact,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .beams import Link, label_grid, read_labeled_grid, write_labeled_grid
from .config import (
    Config,
    ConfigError,
    build_link_model,
    build_split_spec,
    build_train_settings,
    load_config,
)
from .dataset import build_dataset, read_dataset, split, write_dataset
from .harness import (
    emit_epoch_log,
    emit_metrics,
    emit_regions,
    evaluate,
    make_examples,
    render_figures,
    train,
)
from .seqmodel import load_model, save_model


class DependencyError(RuntimeError):
    """An upstream artifact this command needs does not exist."""


GRID_FILE = "labeled_grid.csv"
DATASET_FILE = "dataset.txt"
BEAM_BEST = "checkpoint_beam_best.npz"
BEAM_FINAL = "checkpoint_beam_final.npz"
LINK_FINAL = "checkpoint_link_final.npz"


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise DependencyError(f"missing {path}; run `thzris {hint}` first")
    return path


def cmd_label(cfg: Config, out: Path, threads: int) -> None:
    lm = build_link_model(cfg)
    lg = label_grid(lm, threads=threads)
    out.mkdir(parents=True, exist_ok=True)
    write_labeled_grid(lg, out / GRID_FILE)
    tally = {link: 0 for link in Link}
    for lab in lg.labels:
        tally[lab.link] += 1
    print(f"label: {len(lg.labels)} cells -> {tally[Link.DIRECT]} direct, "
          f"{tally[Link.RIS]} ris, {tally[Link.OUTAGE]} outage -> {out / GRID_FILE}")


def cmd_generate(cfg: Config, out: Path, threads: int) -> None:
    lg = read_labeled_grid(_require(out / GRID_FILE, "label"))
    lm_scene = build_link_model(cfg).scene
    seed = cfg.dataset.seed
    data = build_dataset(lm_scene, lg, cfg.dataset.n_sequences,
                         np.random.default_rng(seed),
                         n_bs_beams=cfg.codebooks.bs_size,
                         n_ris_beams=cfg.codebooks.ris_size, seed=seed)
    write_dataset(data, out / DATASET_FILE)
    links = [s.link for seq in data.sequences for s in seq.steps]
    print(f"generate: {len(data.sequences)} sequences, direct-link step share "
          f"{np.mean(links):.3f} -> {out / DATASET_FILE}")


def cmd_train(cfg: Config, out: Path, threads: int) -> None:
    data = read_dataset(_require(out / DATASET_FILE, "generate"))
    train_data, val_data = split(data, build_split_spec(cfg))
    settings = build_train_settings(cfg)
    run = train(train_data, val_data, settings)
    emit_epoch_log(run.epoch_log, out)
    meta = {"seed": settings.seed, "dataset_seed": cfg.dataset.seed}
    save_model(run.beam_model_best, out / BEAM_BEST,
               extra_meta={"task": "beam", "best_epoch": run.best_epoch, **meta})
    save_model(run.beam_model, out / BEAM_FINAL, extra_meta={"task": "beam", **meta})
    save_model(run.link_model, out / LINK_FINAL, extra_meta={"task": "link", **meta})
    m = run.final_metrics
    print(f"train: {settings.epochs} epochs in {run.wall_seconds:.1f}s, "
          f"val top-1 {m.topk[1]:.3f} top-3 {m.topk[3]:.3f} top-5 {m.topk[5]:.3f}, "
          f"link {m.link_accuracy:.3f} (best epoch {run.best_epoch}) -> {out / BEAM_BEST}")


def cmd_eval(cfg: Config, out: Path, threads: int, checkpoint: str | None) -> None:
    data = read_dataset(_require(out / DATASET_FILE, "generate"))
    beam_path = Path(checkpoint) if checkpoint else out / BEAM_BEST
    beam_model = load_model(_require(beam_path, "train"))
    link_model = load_model(_require(out / LINK_FINAL, "train"))
    _, val_data = split(data, build_split_spec(cfg))
    ex = make_examples(val_data.sequences, beam_model.window)
    metrics = evaluate(beam_model, link_model, ex)
    emit_metrics(metrics, out)
    grid_path = out / GRID_FILE
    if grid_path.exists():
        emit_regions(beam_model, link_model, ex, read_labeled_grid(grid_path), out)
    render_figures(out)
    print(f"eval: {len(ex)} validation examples, top-1 {metrics.topk[1]:.3f} "
          f"top-3 {metrics.topk[3]:.3f} top-5 {metrics.topk[5]:.3f}, "
          f"link {metrics.link_accuracy:.3f} -> {out}")


def cmd_report(cfg: Config, out: Path, threads: int) -> None:
    if not any((out / name).exists() for name in ("epochs.csv", "perbeam.csv", "heatmap.csv")):
        raise DependencyError(f"no report CSVs under {out}; run `thzris train`/`thzris eval` first")
    written = render_figures(out)
    print(f"report: rendered {len(written)} figures -> {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thzris", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", required=True, help="YAML configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the dataset seed from the config")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for the grid sweep (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("label", help="sweep the grid and write labeled_grid.csv")
    sub.add_parser("generate", help="build dataset.txt from the labeled grid")
    sub.add_parser("train", help="train both predictors, write checkpoints")
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the validation split")
    p_eval.add_argument("--checkpoint", default=None,
                        help=f"beam checkpoint to score (default {BEAM_BEST})")
    sub.add_parser("report", help="re-render SVG figures from existing CSVs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.dataset.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "label":
            cmd_label(cfg, out, args.threads)
        elif args.command == "generate":
            cmd_generate(cfg, out, args.threads)
        elif args.command == "train":
            cmd_train(cfg, out, args.threads)
        elif args.command == "eval":
            cmd_eval(cfg, out, args.threads, args.checkpoint)
        elif args.command == "report":
            cmd_report(cfg, out, args.threads)
        return 0
    except (ConfigError, FileNotFoundError) as e:
        if isinstance(e, FileNotFoundError) and str(e.filename) != str(args.config):
            print(f"error: {e}", file=sys.stderr)
            return 4
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DependencyError as e:
        print(f"dependency error: {e}", file=sys.stderr)
        return 3
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
