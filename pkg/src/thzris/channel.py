"""Geometric wideband channel synthesis.

A link is described by a small set of propagation paths (delay, arrival
angles, complex gain). Paths are turned into T-spaced delay taps through a
raised-cosine pulse, and taps into per-subcarrier frequency-domain channel
vectors. Frequency channels are plain complex arrays of shape
(n_subcarriers, n_elements), row k being the channel vector at subcarrier k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Scene, line_of_sight

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArraySpec:
    """Uniform linear array: elements along `axis`, spacing in wavelengths."""

    n_elements: int
    spacing_wavelengths: float = 0.5
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {self.n_elements}")
        if self.spacing_wavelengths <= 0:
            raise ValueError("element spacing must be positive")
        ax = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(ax)
        if not np.isclose(norm, 1.0):
            raise ValueError(f"array axis must be a unit vector, |axis|={norm}")


@dataclass(frozen=True)
class Path:
    """One propagation path: delay tau, azimuth/elevation of arrival, complex gain
    (path loss included)."""

    delay: float
    azimuth: float
    elevation: float
    gain: complex

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError(f"path delay must be >= 0, got {self.delay}")
        if not np.isfinite(self.gain):
            raise ValueError("path gain must be finite")


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...]
    scale: float = 1.0  # global gain normalization applied to every path

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if len(self.paths) < 1:
            raise ValueError("a PathSet needs at least one path")


@dataclass(frozen=True)
class OfdmSpec:
    """OFDM numerology: K subcarriers over taps spaced T_s = 1/bandwidth."""

    n_subcarriers: int = 512
    sample_period: float = 1e-9
    n_taps: int | None = None  # defaults to n_subcarriers
    rolloff: float = 0.8

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.n_taps is None:
            object.__setattr__(self, "n_taps", self.n_subcarriers)
        if not (1 <= self.n_taps <= self.n_subcarriers):
            raise ValueError(f"need 1 <= n_taps <= n_subcarriers, got D={self.n_taps}, K={self.n_subcarriers}")
        if not (0.0 <= self.rolloff <= 1.0):
            raise ValueError(f"rolloff must be in [0, 1], got {self.rolloff}")


def arrival_unit_vector(azimuth: float, elevation: float) -> np.ndarray:
    """Unit direction for azimuth theta and elevation phi:
    (cos phi cos theta, cos phi sin theta, sin phi)."""
    ce = np.cos(elevation)
    return np.array([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)])


def angles_from_direction(u) -> tuple[float, float]:
    """Inverse of arrival_unit_vector for a unit 3-vector."""
    u = np.asarray(u, dtype=float)
    elevation = np.arcsin(np.clip(u[2], -1.0, 1.0))
    azimuth = np.arctan2(u[1], u[0])
    return float(azimuth), float(elevation)


def array_response(arr: ArraySpec, azimuth: float, elevation: float) -> np.ndarray:
    """Per-element phase profile of a plane wave from the given direction.

    Element m carries phase 2*pi*spacing*m*Omega with Omega the projection
    of the arrival direction on the array axis; every entry has unit modulus
    and ||a||^2 = n_elements.
    """
    u = arrival_unit_vector(azimuth, elevation)
    omega = float(u @ np.asarray(arr.axis))
    m = np.arange(arr.n_elements)
    return np.exp(2j * np.pi * arr.spacing_wavelengths * m * omega)


def raised_cosine(t, spec: OfdmSpec):
    """Raised-cosine pulse for T-spaced signaling, T = spec.sample_period.

    p(t) = sinc(t/T) * cos(pi*beta*t/T) / (1 - (2*beta*t/T)^2), with the
    removable singularity at |t| = T/(2*beta) replaced by its limit
    (pi/4) * sinc(1/(2*beta)). p(0) = 1 and p(nT) = 0 for integer n != 0.
    """
    t = np.asarray(t, dtype=float)
    T = spec.sample_period
    beta = spec.rolloff
    x = t / T
    if beta == 0.0:
        out = np.sinc(x)
        return out if out.ndim else float(out)
    denom = 1.0 - (2.0 * beta * x) ** 2
    singular = np.abs(denom) < 1e-10
    safe = np.where(singular, 1.0, denom)
    out = np.sinc(x) * np.cos(np.pi * beta * x) / safe
    out = np.where(singular, (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta)), out)
    return out if out.ndim else float(out)


def paths_from_geometry(scene: Scene, arr: ArraySpec, tx, rx, *,
                        k_abs: float = 0.0033, c: float = SPEED_OF_LIGHT) -> PathSet | None:
    """Single direct path between tx and rx, as seen at the receiving array.

    Returns None when a building blocks the segment (no path, not an error).
    Gain magnitude is free-space loss times exponential absorption
    exp(-k_abs*d/2); gain phase is the carrier phase -2*pi*d/lambda.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if not line_of_sight(scene, tx, rx):
        return None
    d = float(np.linalg.norm(rx - tx))
    lam = c / scene.carrier_frequency
    azimuth, elevation = angles_from_direction((tx - rx) / d)
    magnitude = lam / (4.0 * np.pi * d) * np.exp(-0.5 * k_abs * d)
    gain = magnitude * np.exp(-2j * np.pi * d / lam)
    return PathSet(paths=(Path(delay=d / c, azimuth=azimuth, elevation=elevation, gain=gain),))


def quantize_delays(ps: PathSet, spec: OfdmSpec) -> PathSet:
    """Round every path delay to the nearest tap multiple of T_s."""
    T = spec.sample_period
    quantized = tuple(
        Path(delay=round(p.delay / T) * T, azimuth=p.azimuth, elevation=p.elevation, gain=p.gain)
        for p in ps.paths
    )
    return PathSet(paths=quantized, scale=ps.scale)


def delay_taps(ps: PathSet, arr: ArraySpec, spec: OfdmSpec) -> np.ndarray:
    """Delay-domain channel: tap d sums scale*gain*p_rc(d*T_s - tau) times the
    array response of each path. Shape (n_taps, n_elements)."""
    D = spec.n_taps
    t = np.arange(D) * spec.sample_period
    taps = np.zeros((D, arr.n_elements), dtype=complex)
    for p in ps.paths:
        pulse = raised_cosine(t - p.delay, spec)
        a = array_response(arr, p.azimuth, p.elevation)
        taps += ps.scale * p.gain * np.outer(pulse, a)
    return taps


def freq_channel(taps: np.ndarray, spec: OfdmSpec) -> np.ndarray:
    """Frequency-domain channel h_k = sum_d taps[d] * exp(-2j*pi*k*d/K),
    k = 0..K-1, evaluated with an FFT over the tap axis. Shape (K, n_elements)."""
    taps = np.asarray(taps)
    K = spec.n_subcarriers
    if taps.shape[0] > K:
        raise ValueError(f"got {taps.shape[0]} taps for K={K} subcarriers")
    return np.fft.fft(taps, n=K, axis=0)


def link_channel(scene: Scene, arr: ArraySpec, tx, rx, spec: OfdmSpec, *,
                 k_abs: float = 0.0033, quantize: bool = True) -> np.ndarray | None:
    """Frequency channel of the direct tx->rx link, or None when blocked."""
    ps = paths_from_geometry(scene, arr, tx, rx, k_abs=k_abs)
    if ps is None:
        return None
    if quantize:
        ps = quantize_delays(ps, spec)
        for p in ps.paths:
            tap = round(p.delay / spec.sample_period)
            if tap >= spec.n_taps:
                raise ValueError(
                    f"path delay {p.delay:.3e}s lands on tap {tap} but only "
                    f"{spec.n_taps} taps are kept; increase n_taps/bandwidth or shrink the scene")
    return freq_channel(delay_taps(ps, arr, spec), spec)
