"""Training and evaluation harness: windows and labels, the two-task training
loop, top-k and per-beam statistics, and the report files.

The predictor sees a 7-step window and is scored on step 8. Two models are
trained side by side on the same minibatch schedule: one over the beam label
space of width max(|F|, |P|), one binary over the serving link.
"""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass

import numpy as np

from .beams import LabeledGrid, Link
from .dataset import Dataset
from .seqmodel import (
    ModelParams,
    encode_windows,
    fit_position_stats,
    forward,
    init_adam,
    init_model,
    loss_and_grad,
    adam_step,
    params_dict,
)


@dataclass(frozen=True)
class Examples:
    """Windowed training examples: inputs from steps 1..window, labels from
    the step after the window."""

    positions: np.ndarray      # (N, window, 3) meters
    beams: np.ndarray          # (N, window) combined serving indices
    beam_label: np.ndarray     # (N,) best beam at the label step, own codebook
    link_label: np.ndarray     # (N,) 1 direct / 0 assisted at the label step
    label_position: np.ndarray # (N, 3) drone position at the label step

    def __len__(self) -> int:
        return len(self.beam_label)


def make_examples(sequences, window: int = 7) -> Examples:
    """One example per sequence; label from the step right after the window."""
    sequences = list(sequences)
    if not sequences:
        raise ValueError("no sequences to window")
    seq_len = len(sequences[0].steps)
    if window + 1 > seq_len:
        raise ValueError(f"window {window} needs {window + 1} steps, sequences have {seq_len}")
    positions = np.array([[s.position for s in seq.steps[:window]] for seq in sequences])
    beams = np.array([[s.serving_beam for s in seq.steps[:window]] for seq in sequences])
    label_steps = [seq.steps[window] for seq in sequences]
    beam_label = np.array([s.beam_bs if s.link == 1 else s.beam_ris for s in label_steps])
    link_label = np.array([s.link for s in label_steps])
    label_position = np.array([s.position for s in label_steps])
    return Examples(positions=positions, beams=beams, beam_label=beam_label,
                    link_label=link_label, label_position=label_position)


def topk_accuracy(logits: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose label is among the k largest logits; equal
    logits rank lower-index first."""
    logits = np.atleast_2d(logits)
    labels = np.atleast_1d(labels)
    C = logits.shape[1]
    if not (1 <= k <= C):
        raise ValueError(f"need 1 <= k <= {C}, got k={k}")
    ranked = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    return float(np.mean((ranked == labels[:, None]).any(axis=1)))


@dataclass(frozen=True)
class BeamStats:
    mean_pred: float
    stderr: float
    count: int


def per_beam_stats(predictions, labels) -> dict[int, BeamStats]:
    """Per groundtruth beam: mean predicted index and its standard error."""
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels)
    if len(predictions) == 0:
        raise ValueError("no predictions to aggregate")
    stats = {}
    for g in np.unique(labels):
        sel = predictions[labels == g]
        n = len(sel)
        stderr = float(sel.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        stats[int(g)] = BeamStats(mean_pred=float(sel.mean()), stderr=stderr, count=n)
    return stats


@dataclass(frozen=True)
class HeatmapCell:
    x: float
    y: float
    gt_beam: int
    pred_beam: int
    link: int


@dataclass(frozen=True)
class Metrics:
    topk: dict[int, float]
    link_accuracy: float
    per_beam: dict[int, BeamStats]
    heatmap: tuple[HeatmapCell, ...]


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_top1: float
    val_top3: float
    val_top5: float
    link_acc: float


@dataclass(frozen=True)
class TrainSettings:
    """Hyperparameters of the two-task run (defaults follow the handoff
    predictor setup: 2 GRU layers of 20 units, 20% dropout, 50-dim beam
    embedding, Adam at 1e-3 for 100 epochs)."""

    n_bs_beams: int
    n_ris_beams: int
    hidden_size: int = 20
    n_layers: int = 2
    dropout_rate: float = 0.2
    embed_dim: int = 50
    window: int = 7
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    @property
    def beam_classes(self) -> int:
        return max(self.n_bs_beams, self.n_ris_beams)

    @property
    def vocab(self) -> int:
        return self.n_bs_beams + self.n_ris_beams


@dataclass
class TrainRun:
    settings: TrainSettings
    epoch_log: list[EpochStats]
    beam_model: ModelParams          # final parameters
    beam_model_best: ModelParams     # highest validation top-1
    link_model: ModelParams          # final parameters (link task keeps final)
    final_metrics: Metrics
    best_epoch: int
    wall_seconds: float


def _eval_logits(model: ModelParams, ex: Examples, chunk: int = 4096) -> np.ndarray:
    out = []
    for lo in range(0, len(ex), chunk):
        sl = slice(lo, lo + chunk)
        encoded = encode_windows(model.encoder, ex.positions[sl], ex.beams[sl])
        out.append(forward(model, encoded))
    return np.concatenate(out, axis=0)


def _modal(values: np.ndarray) -> int:
    """Most frequent value; ties resolve to the smallest."""
    vals, counts = np.unique(values, return_counts=True)
    return int(vals[np.argmax(counts)])


def evaluate(beam_model: ModelParams, link_model: ModelParams, ex: Examples) -> Metrics:
    beam_logits = _eval_logits(beam_model, ex)
    link_logits = _eval_logits(link_model, ex)
    C = beam_logits.shape[1]
    topk = {k: topk_accuracy(beam_logits, ex.beam_label, min(k, C)) for k in (1, 3, 5)}
    link_accuracy = topk_accuracy(link_logits, ex.link_label, 1)
    beam_pred = np.argmax(beam_logits, axis=1)
    stats = per_beam_stats(beam_pred, ex.beam_label)

    cells = {}
    for i, pos in enumerate(ex.label_position):
        cells.setdefault((float(pos[0]), float(pos[1])), []).append(i)
    heatmap = []
    for (x, y) in sorted(cells):
        idx = np.array(cells[(x, y)])
        heatmap.append(HeatmapCell(
            x=x, y=y,
            gt_beam=_modal(ex.beam_label[idx]),
            pred_beam=_modal(beam_pred[idx]),
            link=_modal(ex.link_label[idx]),
        ))
    return Metrics(topk=topk, link_accuracy=link_accuracy, per_beam=stats,
                   heatmap=tuple(heatmap))


def train(train_data: Dataset, val_data: Dataset, settings: TrainSettings) -> TrainRun:
    """Seeded two-task training with per-epoch validation metrics.

    Aborts with a diagnostic if the loss stops being finite. epochs=0 skips
    the loop and reports the freshly initialized models.
    """
    if not train_data.sequences or not val_data.sequences:
        raise ValueError("both splits must be nonempty")
    started = time.perf_counter()
    ex_train = make_examples(train_data.sequences, settings.window)
    ex_val = make_examples(val_data.sequences, settings.window)

    seeds = np.random.SeedSequence(settings.seed).spawn(4)
    rng_beam = np.random.default_rng(seeds[0])
    rng_link = np.random.default_rng(seeds[1])
    rng_shuffle = np.random.default_rng(seeds[2])
    rng_dropout = np.random.default_rng(seeds[3])

    beam_model = init_model(settings.vocab, settings.beam_classes, rng_beam,
                            embed_dim=settings.embed_dim, hidden_size=settings.hidden_size,
                            n_layers=settings.n_layers, dropout_rate=settings.dropout_rate,
                            window=settings.window)
    link_model = init_model(settings.vocab, 2, rng_link,
                            embed_dim=settings.embed_dim, hidden_size=settings.hidden_size,
                            n_layers=settings.n_layers, dropout_rate=settings.dropout_rate,
                            window=settings.window)
    # Standardization statistics come from the training split only.
    fit_position_stats(beam_model.encoder, ex_train.positions)
    fit_position_stats(link_model.encoder, ex_train.positions)

    beam_params = params_dict(beam_model)
    link_params = params_dict(link_model)
    adam_kw = dict(lr=settings.learning_rate, beta1=settings.adam_beta1,
                   beta2=settings.adam_beta2, eps=settings.adam_eps)
    beam_adam = init_adam(beam_params, **adam_kw)
    link_adam = init_adam(link_params, **adam_kw)

    n = len(ex_train)
    epoch_log: list[EpochStats] = []
    best_top1 = -1.0
    best_epoch = 0
    beam_model_best = copy.deepcopy(beam_model)

    for epoch in range(1, settings.epochs + 1):
        order = rng_shuffle.permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, settings.batch_size):
            batch = order[lo:lo + settings.batch_size]
            loss, grads = loss_and_grad(beam_model, ex_train.positions[batch],
                                        ex_train.beams[batch], ex_train.beam_label[batch],
                                        rng_dropout)
            if not np.isfinite(loss):
                raise RuntimeError(f"beam-task loss diverged at epoch {epoch} "
                                   f"(batch starting {lo}): {loss}")
            adam_step(beam_adam, beam_params, grads)
            loss_sum += loss * len(batch)

            link_loss, link_grads = loss_and_grad(link_model, ex_train.positions[batch],
                                                  ex_train.beams[batch],
                                                  ex_train.link_label[batch], rng_dropout)
            if not np.isfinite(link_loss):
                raise RuntimeError(f"link-task loss diverged at epoch {epoch} "
                                   f"(batch starting {lo}): {link_loss}")
            adam_step(link_adam, link_params, link_grads)

        metrics = evaluate(beam_model, link_model, ex_val)
        row = EpochStats(epoch=epoch, train_loss=loss_sum / n,
                         val_top1=metrics.topk[1], val_top3=metrics.topk[3],
                         val_top5=metrics.topk[5], link_acc=metrics.link_accuracy)
        epoch_log.append(row)
        if row.val_top1 > best_top1:
            best_top1 = row.val_top1
            best_epoch = epoch
            beam_model_best = copy.deepcopy(beam_model)

    final_metrics = evaluate(beam_model, link_model, ex_val)
    if settings.epochs == 0:
        beam_model_best = copy.deepcopy(beam_model)
    return TrainRun(settings=settings, epoch_log=epoch_log, beam_model=beam_model,
                    beam_model_best=beam_model_best, link_model=link_model,
                    final_metrics=final_metrics, best_epoch=best_epoch,
                    wall_seconds=time.perf_counter() - started)


# ---------------------------------------------------------------------------
# Reports

EPOCHS_HEADER = "epoch,train_loss,val_top1,val_top3,val_top5,link_acc"
PERBEAM_HEADER = "beam,count,mean_pred,stderr"
HEATMAP_HEADER = "x,y,gt_beam,pred_beam,link"
REGIONS_HEADER = "region,count,beam_top1,link_acc"


def _f(v) -> str:
    return repr(float(v))


def _write_lines(path, lines) -> None:
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _column_links(labeled_grid: LabeledGrid) -> dict[tuple[int, int], int]:
    """Modal serving link per (ix, iy) column; outage-only columns are skipped."""
    nx, ny, nz = labeled_grid.grid_counts
    columns = {}
    for ix in range(nx):
        for iy in range(ny):
            links = [labeled_grid.label_at((ix, iy, iz)).link for iz in range(nz)]
            flags = [1 if l is Link.DIRECT else 0 for l in links if l is not Link.OUTAGE]
            if flags:
                columns[(ix, iy)] = int(np.round(np.mean(flags)))
    return columns


def boundary_columns(labeled_grid: LabeledGrid, band_width: int = 2) -> set[tuple[int, int]]:
    """Columns within band_width cells (Chebyshev, x-y) of an opposite-link column."""
    columns = _column_links(labeled_grid)
    boundary = set()
    for (ix, iy), link in columns.items():
        for dx in range(-band_width, band_width + 1):
            for dy in range(-band_width, band_width + 1):
                other = columns.get((ix + dx, iy + dy))
                if other is not None and other != link:
                    boundary.add((ix, iy))
                    break
            else:
                continue
            break
    return boundary


def region_accuracy(beam_model: ModelParams, link_model: ModelParams, ex: Examples,
                    labeled_grid: LabeledGrid, band_width: int = 2) -> dict[str, dict]:
    """Accuracy split by where the label step lands: the station-visible
    region, the shadowed region, and a band around the transition between
    them (the band overlaps the other two)."""
    beam_pred = np.argmax(_eval_logits(beam_model, ex), axis=1)
    link_pred = np.argmax(_eval_logits(link_model, ex), axis=1)
    beam_hit = beam_pred == ex.beam_label
    link_hit = link_pred == ex.link_label

    pos_to_flat = {tuple(p): i for i, p in enumerate(map(tuple, labeled_grid.positions))}
    nx, ny, nz = labeled_grid.grid_counts
    in_boundary = boundary_columns(labeled_grid, band_width)
    masks = {"los": ex.link_label == 1, "nlos": ex.link_label == 0}
    band = np.zeros(len(ex), dtype=bool)
    for i, pos in enumerate(map(tuple, ex.label_position)):
        flat = pos_to_flat.get(pos)
        if flat is None:
            raise ValueError(f"example position {pos} is not a grid point of the labeled grid")
        ix, rem = divmod(flat, ny * nz)
        iy = rem // nz
        band[i] = (ix, iy) in in_boundary
    masks["boundary"] = band

    out = {}
    for region, mask in masks.items():
        count = int(mask.sum())
        out[region] = {
            "count": count,
            "beam_top1": float(beam_hit[mask].mean()) if count else 0.0,
            "link_acc": float(link_hit[mask].mean()) if count else 0.0,
        }
    return out


def _plot_epochs(epoch_log, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    epochs = [r.epoch for r in epoch_log]
    ax1.plot(epochs, [r.train_loss for r in epoch_log], label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("cross-entropy")
    ax1.legend()
    for key, label in (("val_top1", "top-1"), ("val_top3", "top-3"),
                       ("val_top5", "top-5"), ("link_acc", "link")):
        ax2.plot(epochs, [getattr(r, key) for r in epoch_log], label=label)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    ax2.set_ylim(0, 1.02)
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_perbeam(per_beam, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 5))
    beams = sorted(per_beam)
    means = [per_beam[b].mean_pred for b in beams]
    errs = [per_beam[b].stderr for b in beams]
    ax.errorbar(beams, means, yerr=errs, fmt="o", markersize=3, capsize=2)
    if beams:
        lo, hi = min(beams), max(beams)
        ax.plot([lo, hi], [lo, hi], "k--", linewidth=0.8)
    ax.set_xlabel("groundtruth beam index")
    ax.set_ylabel("mean predicted index")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_heatmap(heatmap, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    xs = [c.x for c in heatmap]
    ys = [c.y for c in heatmap]
    panels = (("groundtruth beam", [c.gt_beam for c in heatmap]),
              ("predicted beam", [c.pred_beam for c in heatmap]),
              ("serving link (1=direct)", [c.link for c in heatmap]))
    for ax, (title, vals) in zip(axes, panels):
        sc = ax.scatter(xs, ys, c=vals, s=14, marker="s", cmap="viridis")
        ax.set_title(title)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        fig.colorbar(sc, ax=ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_epoch_log(epoch_log, out_dir) -> None:
    """epochs.csv with one row per training epoch."""
    lines = [EPOCHS_HEADER]
    for r in epoch_log:
        lines.append(",".join([str(r.epoch), _f(r.train_loss), _f(r.val_top1),
                               _f(r.val_top3), _f(r.val_top5), _f(r.link_acc)]))
    _write_lines(out_dir / "epochs.csv", lines)


def emit_metrics(metrics: Metrics, out_dir) -> None:
    """perbeam.csv and heatmap.csv for one evaluation."""
    lines = [PERBEAM_HEADER]
    for beam in sorted(metrics.per_beam):
        s = metrics.per_beam[beam]
        lines.append(",".join([str(beam), str(s.count), _f(s.mean_pred), _f(s.stderr)]))
    _write_lines(out_dir / "perbeam.csv", lines)

    lines = [HEATMAP_HEADER]
    for c in metrics.heatmap:
        lines.append(",".join([_f(c.x), _f(c.y), str(c.gt_beam), str(c.pred_beam), str(c.link)]))
    _write_lines(out_dir / "heatmap.csv", lines)


def emit_regions(beam_model: ModelParams, link_model: ModelParams, ex: Examples,
                 labeled_grid: LabeledGrid, out_dir, band_width: int = 2) -> None:
    """regions.csv: accuracy in the visible region, the shadow, and the band
    around the transition between them."""
    regions = region_accuracy(beam_model, link_model, ex, labeled_grid, band_width)
    lines = [REGIONS_HEADER]
    for name in ("los", "nlos", "boundary"):
        r = regions[name]
        lines.append(",".join([name, str(r["count"]), _f(r["beam_top1"]), _f(r["link_acc"])]))
    _write_lines(out_dir / "regions.csv", lines)


def emit_report(run: TrainRun, metrics: Metrics, labeled_grid: LabeledGrid | None,
                out_dir, *, val_examples: Examples | None = None,
                band_width: int = 2) -> list:
    """Write the run's CSV tables and an SVG rendering of each.

    epochs.csv   epoch,train_loss,val_top1,val_top3,val_top5,link_acc
    perbeam.csv  beam,count,mean_pred,stderr
    heatmap.csv  x,y,gt_beam,pred_beam,link
    regions.csv  region,count,beam_top1,link_acc   (needs grid + examples)

    Output is deterministic: identical inputs give byte-identical CSVs.
    Returns the list of files written.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_epoch_log(run.epoch_log, out_dir)
    emit_metrics(metrics, out_dir)
    written = [out_dir / "epochs.csv", out_dir / "perbeam.csv", out_dir / "heatmap.csv"]
    if labeled_grid is not None and val_examples is not None:
        emit_regions(run.beam_model, run.link_model, val_examples, labeled_grid,
                     out_dir, band_width)
        written.append(out_dir / "regions.csv")
    written.extend(render_figures(out_dir))
    return written


def render_figures(out_dir) -> list:
    """Render an SVG next to each report CSV present in out_dir."""
    from pathlib import Path

    out_dir = Path(out_dir)
    written = []
    if (out_dir / "epochs.csv").exists():
        epoch_log = []
        for row in (out_dir / "epochs.csv").read_text().splitlines()[1:]:
            e, tl, t1, t3, t5, la = row.split(",")
            epoch_log.append(EpochStats(int(e), float(tl), float(t1), float(t3),
                                        float(t5), float(la)))
        _plot_epochs(epoch_log, out_dir / "epochs.svg")
        written.append(out_dir / "epochs.svg")
    if (out_dir / "perbeam.csv").exists():
        per_beam = {}
        for row in (out_dir / "perbeam.csv").read_text().splitlines()[1:]:
            b, cnt, mean, err = row.split(",")
            per_beam[int(b)] = BeamStats(mean_pred=float(mean), stderr=float(err), count=int(cnt))
        _plot_perbeam(per_beam, out_dir / "perbeam.svg")
        written.append(out_dir / "perbeam.svg")
    if (out_dir / "heatmap.csv").exists():
        heatmap = []
        for row in (out_dir / "heatmap.csv").read_text().splitlines()[1:]:
            x, y, gt, pred, link = row.split(",")
            heatmap.append(HeatmapCell(float(x), float(y), int(gt), int(pred), int(link)))
        _plot_heatmap(heatmap, out_dir / "heatmap.svg")
        written.append(out_dir / "heatmap.svg")
    return written


def heatmap_adjacent_beam_diffs(heatmap, dx: float, dy: float) -> list[int]:
    """Absolute groundtruth-beam differences between adjacent same-link cells."""
    index = {(round(c.x / dx), round(c.y / dy)): c for c in heatmap}
    diffs = []
    for (gx, gy), cell in index.items():
        for nb in ((gx + 1, gy), (gx, gy + 1)):
            other = index.get(nb)
            if other is not None and other.link == cell.link:
                diffs.append(abs(other.gt_beam - cell.gt_beam))
    return diffs
