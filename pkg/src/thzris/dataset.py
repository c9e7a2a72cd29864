"""Trajectory sequence dataset: generation, shuffling/split, file round-trip.

One record is a 10-step drone trajectory; each step carries the drone
position, the serving-link flag (1 = direct base-station link, 0 = assisted
by the reflector), and the winning beam indices. The combined serving-beam
index puts reflection beams after the base-station codebook, so one
embedding vocabulary of size |F|+|P| covers every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beams import LabeledGrid, Link
from .scene import Scene, generate_trajectory, grid_position

SEQUENCE_LENGTH = 10
FORMAT_VERSION = "v1"


class DatasetFormatError(ValueError):
    """Raised when a dataset file does not parse."""


@dataclass(frozen=True)
class Step:
    """One trajectory step: position in meters, link flag, beam indices.

    beam_bs indexes the base-station codebook (present when the direct link
    exists), beam_ris the reflection codebook. serving_beam is the combined
    index: beam_bs when direct, n_bs_beams + beam_ris otherwise.
    """

    position: tuple[float, float, float]
    link: int
    beam_bs: int | None
    beam_ris: int | None
    serving_beam: int

    def __post_init__(self):
        if self.link not in (0, 1):
            raise ValueError(f"link flag must be 0 or 1, got {self.link}")
        if self.link == 1 and self.beam_bs is None:
            raise ValueError("direct-link step requires beam_bs")
        if self.link == 0 and self.beam_ris is None:
            raise ValueError("assisted step requires beam_ris")


@dataclass(frozen=True)
class TrajectorySequence:
    seq_id: int
    steps: tuple[Step, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.steps) != SEQUENCE_LENGTH:
            raise ValueError(f"sequence {self.seq_id}: expected {SEQUENCE_LENGTH} steps, "
                             f"got {len(self.steps)}")
        for a, b in zip(self.steps, self.steps[1:]):
            moved = sum(pa != pb for pa, pb in zip(a.position, b.position))
            if moved != 1:
                raise ValueError(f"sequence {self.seq_id}: consecutive steps must move "
                                 f"along exactly one axis")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    shuffle_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError(f"train fraction must be in (0, 1), got {self.train_fraction}")


@dataclass(frozen=True)
class Dataset:
    """Sequences plus the header metadata the file format carries."""

    n_bs_beams: int
    n_ris_beams: int
    seed: int
    sequences: tuple[TrajectorySequence, ...]

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        bound = self.n_bs_beams + self.n_ris_beams
        for seq in self.sequences:
            for step in seq.steps:
                if not (0 <= step.serving_beam < bound):
                    raise ValueError(f"sequence {seq.seq_id}: serving beam "
                                     f"{step.serving_beam} outside [0, {bound})")


def _step_from_label(pos, label, n_bs_beams: int) -> Step:
    if label.link is Link.DIRECT:
        return Step(position=tuple(float(v) for v in pos), link=1,
                    beam_bs=label.beam_bs, beam_ris=label.beam_ris,
                    serving_beam=label.beam_bs)
    if label.link is Link.RIS:
        return Step(position=tuple(float(v) for v in pos), link=0,
                    beam_bs=None, beam_ris=label.beam_ris,
                    serving_beam=n_bs_beams + label.beam_ris)
    raise ValueError("outage steps never enter a dataset")


def build_dataset(scene: Scene, labels: LabeledGrid, n_sequences: int,
                  rng: np.random.Generator, *, n_bs_beams: int, n_ris_beams: int,
                  seed: int = 0, max_attempts: int = 1000) -> Dataset:
    """n_sequences outage-free labeled trajectories, deterministic given rng state.

    Starts are drawn uniformly over cells that leave room for the forward
    walk; a trajectory touching an outage cell is discarded and redrawn,
    up to max_attempts times per sequence.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be >= 1")
    grid = scene.grid
    nx, ny, nz = grid.counts
    if nx < SEQUENCE_LENGTH:
        raise ValueError(f"grid nx={nx} cannot hold {SEQUENCE_LENGTH}-step trajectories")
    # Independent substream per sequence: order of generation cannot matter.
    streams = rng.spawn(n_sequences)
    sequences = []
    for seq_id, sub in enumerate(streams):
        for attempt in range(max_attempts):
            start = (int(sub.integers(0, nx - SEQUENCE_LENGTH + 1)),
                     int(sub.integers(0, ny)),
                     int(sub.integers(0, nz)))
            path = generate_trajectory(scene, sub, start, SEQUENCE_LENGTH)
            labs = [labels.label_at(idx) for idx in path]
            if any(l.link is Link.OUTAGE for l in labs):
                continue
            steps = tuple(_step_from_label(grid_position(grid, idx), lab, n_bs_beams)
                          for idx, lab in zip(path, labs))
            sequences.append(TrajectorySequence(seq_id=seq_id, steps=steps))
            break
        else:
            raise RuntimeError(
                f"sequence {seq_id}: no outage-free trajectory in {max_attempts} attempts; "
                f"the scene may be mostly shadowed from both stations")
    return Dataset(n_bs_beams=n_bs_beams, n_ris_beams=n_ris_beams, seed=seed,
                   sequences=tuple(sequences))


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle, then floor(fraction*N) train / remainder validation."""
    n = len(data.sequences)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    order = np.random.default_rng(spec.shuffle_seed).permutation(n)
    n_train = int(np.floor(spec.train_fraction * n))
    pick = lambda idx: Dataset(data.n_bs_beams, data.n_ris_beams, data.seed,
                               tuple(data.sequences[i] for i in idx))
    return pick(order[:n_train]), pick(order[n_train:])


def _fmt_step(step: Step) -> str:
    x, y, z = step.position
    bb = "-" if step.beam_bs is None else str(step.beam_bs)
    br = "-" if step.beam_ris is None else str(step.beam_ris)
    return f"{x!r},{y!r},{z!r},{step.link},{bb},{br}"


def write_dataset(data: Dataset, path) -> None:
    lines = [f"thzris-dataset {FORMAT_VERSION} |F|={data.n_bs_beams} "
             f"|P|={data.n_ris_beams} seed={data.seed}"]
    for seq in data.sequences:
        lines.append(";".join([str(seq.seq_id)] + [_fmt_step(s) for s in seq.steps]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _parse_header(line: str, path) -> tuple[int, int, int]:
    parts = line.split()
    if len(parts) != 5 or parts[0] != "thzris-dataset":
        raise DatasetFormatError(f"{path}:1: not a dataset file header: {line!r}")
    if parts[1] != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}:1: format version {parts[1]!r}, "
                                 f"expected {FORMAT_VERSION!r}")
    try:
        fields = dict(p.split("=", 1) for p in parts[2:])
        return int(fields["|F|"]), int(fields["|P|"]), int(fields["seed"])
    except (KeyError, ValueError) as e:
        raise DatasetFormatError(f"{path}:1: bad header fields: {e}") from e


def _parse_step(text: str, n_bs_beams: int):
    fields = text.split(",")
    if len(fields) != 6:
        raise ValueError(f"step has {len(fields)} fields, expected 6")
    x, y, z = (float(v) for v in fields[:3])
    link = int(fields[3])
    beam_bs = None if fields[4] == "-" else int(fields[4])
    beam_ris = None if fields[5] == "-" else int(fields[5])
    serving = beam_bs if link == 1 else (None if beam_ris is None else n_bs_beams + beam_ris)
    if serving is None:
        raise ValueError("step carries no serving beam")
    return Step(position=(x, y, z), link=link, beam_bs=beam_bs, beam_ris=beam_ris,
                serving_beam=serving)


def read_dataset(path) -> Dataset:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    n_f, n_p, seed = _parse_header(lines[0], path)
    sequences = []
    for ln, row in enumerate(lines[1:], start=2):
        parts = row.split(";")
        seq_id = f"record at line {ln}"
        try:
            seq_id = int(parts[0])
            if len(parts) != 1 + SEQUENCE_LENGTH:
                raise ValueError(f"{len(parts) - 1} steps, expected {SEQUENCE_LENGTH}")
            steps = tuple(_parse_step(p, n_f) for p in parts[1:])
            sequences.append(TrajectorySequence(seq_id=seq_id, steps=steps))
        except ValueError as e:
            raise DatasetFormatError(f"{path}:{ln}: sequence {seq_id}: {e}") from e
    return Dataset(n_bs_beams=n_f, n_ris_beams=n_p, seed=seed, sequences=tuple(sequences))
