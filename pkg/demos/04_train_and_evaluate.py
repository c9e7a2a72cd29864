#!/usr/bin/env python3
"""Train the two predictors on a reduced scene and look at every metric the
harness produces: accuracy curves, the per-beam diagonal, and the beam map
over the grid footprint.

Runs in about a minute; the full-size run is `thzris --config configs/desk.yaml`.
"""

import pathlib

import numpy as np

from thzris.beams import label_grid
from thzris.config import Config, build_link_model, build_split_spec, build_train_settings
from thzris.dataset import build_dataset, split
from thzris.harness import emit_report, evaluate, make_examples, train

out_dir = pathlib.Path(__file__).parent / "output" / "train_demo"
out_dir.mkdir(parents=True, exist_ok=True)

cfg = Config()
cfg.scene.grid_counts = [24, 14, 2]
cfg.channel.bs_antennas = 32
cfg.channel.ris_elements = 64
cfg.codebooks.bs_size = 16
cfg.codebooks.ris_size = 32
cfg.dataset.n_sequences = 2000
cfg.training.epochs = 30

lm = build_link_model(cfg)
print("labeling", lm.scene.grid.n_points, "cells ...")
lg = label_grid(lm)
data = build_dataset(lm.scene, lg, cfg.dataset.n_sequences,
                     np.random.default_rng(cfg.dataset.seed),
                     n_bs_beams=cfg.codebooks.bs_size,
                     n_ris_beams=cfg.codebooks.ris_size, seed=cfg.dataset.seed)
train_data, val_data = split(data, build_split_spec(cfg))

settings = build_train_settings(cfg)
print(f"training {settings.epochs} epochs on {len(train_data.sequences)} sequences ...")
run = train(train_data, val_data, settings)
for row in run.epoch_log[:3] + run.epoch_log[-3:]:
    print(f"  epoch {row.epoch:3d}: loss {row.train_loss:.3f}  top-1 {row.val_top1:.3f}  "
          f"top-3 {row.val_top3:.3f}  link {row.link_acc:.3f}")

ex_val = make_examples(val_data.sequences, settings.window)
metrics = evaluate(run.beam_model_best, run.link_model, ex_val)
print(f"\nbest checkpoint (epoch {run.best_epoch}): top-1 {metrics.topk[1]:.3f}, "
      f"top-3 {metrics.topk[3]:.3f}, top-5 {metrics.topk[5]:.3f}, "
      f"link {metrics.link_accuracy:.3f}")

diag = [(g, s.mean_pred, s.stderr) for g, s in sorted(metrics.per_beam.items())]
print("\nper-beam means (groundtruth -> mean prediction +- stderr):")
for g, mean, err in diag[:8]:
    print(f"  {g:3d} -> {mean:6.2f} +- {err:.2f}")

files = emit_report(run, metrics, lg, out_dir, val_examples=ex_val)
print("\nreport files:")
for f in files:
    print(" ", f)
