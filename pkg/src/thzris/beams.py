"""Beam codebooks, received-power sweeps, and grid labeling.

The serving link at a drone position is decided geometrically: direct when
the base station sees the drone, reflector-assisted when only the elevated
surface does, outage otherwise. The serving beam is found by exhaustive
sweep of a phase-shifter codebook against the synthesized channel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import ArraySpec, OfdmSpec, link_channel
from .scene import Scene, line_of_sight


@dataclass(frozen=True)
class Codebook:
    """Set of beamforming vectors, one per row; every element has modulus
    1/sqrt(n) so each beam is phase-shifter realizable and unit norm."""

    vectors: np.ndarray  # (size, n_elements) complex
    omegas: np.ndarray   # (size,) spatial frequency each beam points at

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("codebook must be a nonempty (size, n_elements) array")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "omegas", np.asarray(self.omegas, dtype=float))

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_elements(self) -> int:
        return self.vectors.shape[1]


class Link(enum.Enum):
    DIRECT = "direct"
    RIS = "ris"
    OUTAGE = "outage"


@dataclass(frozen=True)
class LinkLabel:
    """Serving link at one position, plus the best beam(s) found by sweep.

    beam_bs indexes the base-station codebook, beam_ris the reflection
    codebook; gains are the wideband sweep objective at the winning beam.
    A direct-link label still carries the reflector beam when one exists,
    for reporting.
    """

    link: Link
    beam_bs: int | None = None
    beam_ris: int | None = None
    gain_bs: float | None = None
    gain_ris: float | None = None

    def __post_init__(self):
        if self.link is Link.DIRECT and self.beam_bs is None:
            raise ValueError("direct link requires a base-station beam")
        if self.link is Link.RIS and self.beam_ris is None:
            raise ValueError("reflector-assisted link requires a reflection beam")
        if self.link is Link.OUTAGE and not (self.beam_bs is None and self.beam_ris is None):
            raise ValueError("outage carries no beams")


def dft_codebook(arr: ArraySpec, size: int) -> Codebook:
    """size beams with spatial frequencies 2*i/size, i.e. uniform over
    [-1, 1) modulo the 2-periodic spatial frequency axis. Beams are pairwise
    orthogonal when size equals the element count at half-wavelength spacing."""
    if size < 1:
        raise ValueError(f"codebook size must be >= 1, got {size}")
    n = arr.n_elements
    omegas = 2.0 * np.arange(size) / size
    m = np.arange(n)
    vectors = np.exp(2j * np.pi * arr.spacing_wavelengths * np.outer(omegas, m)) / np.sqrt(n)
    return Codebook(vectors=vectors, omegas=omegas)


def cascade_vector(h_t: np.ndarray, h_r: np.ndarray) -> np.ndarray:
    """Equivalent channel of the reflect path: elementwise h_r * h_t.

    For any reflection vector psi, h_r^T diag(psi) h_t equals
    (h_r * h_t)^T psi, so the sweep can score psi directly against this
    vector. Works on single vectors and on (K, n) per-subcarrier stacks.
    """
    h_t = np.asarray(h_t)
    h_r = np.asarray(h_r)
    if h_t.shape != h_r.shape:
        raise ValueError(f"cascade shape mismatch: {h_t.shape} vs {h_r.shape}")
    return h_r * h_t


def beam_gain(channel: np.ndarray, beam: np.ndarray) -> float:
    """Wideband sweep objective: sum over subcarriers of |beam^T h_k|^2."""
    channel = np.atleast_2d(np.asarray(channel))
    beam = np.asarray(beam)
    if channel.shape[1] != beam.shape[0]:
        raise ValueError(f"channel has {channel.shape[1]} elements, beam has {beam.shape[0]}")
    return float(np.sum(np.abs(channel @ beam) ** 2))


def sweep_gains(channel: np.ndarray, cb: Codebook) -> np.ndarray:
    """beam_gain of every codebook entry against the channel, shape (size,)."""
    channel = np.atleast_2d(np.asarray(channel))
    if channel.shape[1] != cb.n_elements:
        raise ValueError(f"channel has {channel.shape[1]} elements, codebook has {cb.n_elements}")
    return np.sum(np.abs(channel @ cb.vectors.T) ** 2, axis=0)


def best_beam(channel: np.ndarray, cb: Codebook) -> tuple[int, float]:
    """Exhaustive sweep: (argmax index, gain); ties go to the lowest index."""
    gains = sweep_gains(channel, cb)
    idx = int(np.argmax(gains))
    return idx, float(gains[idx])


@dataclass(frozen=True)
class LinkModel:
    """Everything needed to label positions: scene, arrays, numerology,
    codebooks, and the cached reflector feeder channel."""

    scene: Scene
    bs_array: ArraySpec
    ris_array: ArraySpec
    ofdm: OfdmSpec
    codebook_bs: Codebook
    codebook_ris: Codebook
    k_abs: float = 0.0033
    quantize: bool = True
    feeder: np.ndarray | None = None  # derived; leave unset

    def __post_init__(self):
        if self.codebook_bs.n_elements != self.bs_array.n_elements:
            raise ValueError("base-station codebook does not match its array")
        if self.codebook_ris.n_elements != self.ris_array.n_elements:
            raise ValueError("reflection codebook does not match its array")
        if self.feeder is None:
            # Both ends static: compute the BS->reflector channel once.
            feeder = link_channel(self.scene, self.ris_array, self.scene.bs_position,
                                  self.scene.ris_position, self.ofdm,
                                  k_abs=self.k_abs, quantize=self.quantize)
            object.__setattr__(self, "feeder", feeder)


def label_position(lm: LinkModel, pos) -> LinkLabel:
    """Serving link and best beam(s) at a drone position.

    Direct when the base station has line of sight; otherwise
    reflector-assisted when both reflector hops are clear; otherwise outage.
    """
    scene = lm.scene
    pos = np.asarray(pos, dtype=float)
    bs_clear = line_of_sight(scene, scene.bs_position, pos)
    ris_clear = line_of_sight(scene, scene.ris_position, pos)

    beam_ris = gain_ris = None
    if ris_clear and lm.feeder is not None:
        h_drone = link_channel(scene, lm.ris_array, pos, scene.ris_position, lm.ofdm,
                               k_abs=lm.k_abs, quantize=lm.quantize)
        beam_ris, gain_ris = best_beam(cascade_vector(lm.feeder, h_drone), lm.codebook_ris)

    if bs_clear:
        h_bs = link_channel(scene, lm.bs_array, pos, scene.bs_position, lm.ofdm,
                            k_abs=lm.k_abs, quantize=lm.quantize)
        beam_bs, gain_bs = best_beam(h_bs, lm.codebook_bs)
        return LinkLabel(Link.DIRECT, beam_bs=beam_bs, beam_ris=beam_ris,
                         gain_bs=gain_bs, gain_ris=gain_ris)
    if beam_ris is not None:
        return LinkLabel(Link.RIS, beam_ris=beam_ris, gain_ris=gain_ris)
    return LinkLabel(Link.OUTAGE)


@dataclass(frozen=True)
class LabeledGrid:
    """label_position evaluated at every grid point, in indices() order."""

    grid_counts: tuple[int, int, int]
    positions: np.ndarray  # (n_points, 3)
    labels: tuple[LinkLabel, ...]

    def __post_init__(self):
        nx, ny, nz = self.grid_counts
        if len(self.labels) != nx * ny * nz:
            raise ValueError("one label per grid point required")

    def flat_index(self, idx) -> int:
        ix, iy, iz = idx
        nx, ny, nz = self.grid_counts
        if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
            raise ValueError(f"grid index {idx} out of range for counts {self.grid_counts}")
        return (ix * ny + iy) * nz + iz

    def label_at(self, idx) -> LinkLabel:
        return self.labels[self.flat_index(idx)]

    def position_at(self, idx) -> np.ndarray:
        return self.positions[self.flat_index(idx)]


def label_grid(lm: LinkModel, threads: int = 1) -> LabeledGrid:
    """Exhaustive sweep over every grid point of the scene.

    Positions are independent, so the sweep fans out over a thread pool when
    threads > 1; the output ordering (and content) does not depend on it.
    """
    grid = lm.scene.grid
    positions = grid.all_positions()
    if threads <= 1:
        labels = tuple(label_position(lm, p) for p in positions)
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            labels = tuple(pool.map(lambda p: label_position(lm, p), positions, chunksize=64))
    return LabeledGrid(grid_counts=grid.counts, positions=positions, labels=labels)


_GRID_HEADER = "x,y,z,link,beam_bs,beam_ris,gain_bs,gain_ris"


def _fmt_float(v) -> str:
    # repr of a Python float round-trips exactly
    return repr(float(v))


def _fmt_opt_int(v) -> str:
    return "-" if v is None else str(int(v))


def _fmt_opt_float(v) -> str:
    return "-" if v is None else _fmt_float(v)


def write_labeled_grid(lg: LabeledGrid, path) -> None:
    """Tabular export consumed by the report generator (one row per grid point)."""
    nx, ny, nz = lg.grid_counts
    lines = [f"# counts={nx},{ny},{nz}", _GRID_HEADER]
    for pos, lab in zip(lg.positions, lg.labels):
        lines.append(",".join([
            _fmt_float(pos[0]), _fmt_float(pos[1]), _fmt_float(pos[2]),
            lab.link.value,
            _fmt_opt_int(lab.beam_bs),
            _fmt_opt_int(lab.beam_ris),
            _fmt_opt_float(lab.gain_bs),
            _fmt_opt_float(lab.gain_ris),
        ]))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_labeled_grid(path) -> LabeledGrid:
    with open(path) as f:
        lines = f.read().splitlines()
    if len(lines) < 2 or not lines[0].startswith("# counts="):
        raise ValueError(f"{path}: not a labeled-grid file")
    counts = tuple(int(v) for v in lines[0].removeprefix("# counts=").split(","))
    if lines[1] != _GRID_HEADER:
        raise ValueError(f"{path}: unexpected header {lines[1]!r}")
    positions, labels = [], []
    for ln, row in enumerate(lines[2:], start=3):
        parts = row.split(",")
        if len(parts) != 8:
            raise ValueError(f"{path}:{ln}: expected 8 fields, got {len(parts)}")
        positions.append([float(v) for v in parts[:3]])
        link = Link(parts[3])
        opt_int = lambda s: None if s == "-" else int(s)
        opt_float = lambda s: None if s == "-" else float(s)
        labels.append(LinkLabel(link, beam_bs=opt_int(parts[4]), beam_ris=opt_int(parts[5]),
                                gain_bs=opt_float(parts[6]), gain_ris=opt_float(parts[7])))
    return LabeledGrid(grid_counts=counts, positions=np.array(positions), labels=tuple(labels))
