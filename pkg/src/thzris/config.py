"""Run configuration: one YAML file drives the whole pipeline.

Every generation parameter (carrier 200 GHz, 1 GHz bandwidth, 512
subcarriers, 64/256 antennas at half-wavelength spacing, single path) and
every network hyperparameter (2 GRU layers of 20 units, 20% dropout, 50-dim
embedding, Adam 1e-3, 100 epochs) lives under its section with these
defaults. Validation happens up front and reports every offending key at
once.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .beams import LinkModel, dft_codebook
from .channel import SPEED_OF_LIGHT, ArraySpec, OfdmSpec
from .dataset import SEQUENCE_LENGTH, SplitSpec
from .harness import TrainSettings
from .scene import Box, GridSpec, Scene, StepPolicy


class ConfigError(ValueError):
    """Configuration failed validation; the message lists offending keys."""


@dataclass
class SceneConfig:
    bs_position: list = field(default_factory=lambda: [-25.0, 0.0, 6.0])
    ris_position: list = field(default_factory=lambda: [15.0, 25.0, 80.0])
    buildings: list = field(default_factory=lambda: [
        {"lo": [-15.0, -20.0, 0.0], "hi": [-7.0, -2.0, 34.0]},
    ])
    grid_origin: list = field(default_factory=lambda: [0.0, -9.72, 40.0])
    grid_spacing: list = field(default_factory=lambda: [0.81, 0.81, 0.8])
    grid_counts: list = field(default_factory=lambda: [40, 25, 4])
    step_weights: list = field(default_factory=lambda: [0.8, 0.2, 0.2])


@dataclass
class ChannelConfig:
    carrier_frequency_hz: float = 200e9
    bandwidth_hz: float = 1e9
    n_subcarriers: int = 512
    n_taps: int | None = None          # null means all subcarriers
    rolloff: float = 0.8
    absorption_per_m: float = 0.0033
    quantize_delays: bool = True
    bs_antennas: int = 64
    ris_elements: int = 256
    antenna_spacing_wavelengths: float = 0.5


@dataclass
class CodebookConfig:
    bs_size: int = 32
    ris_size: int = 64


@dataclass
class DatasetConfig:
    n_sequences: int = 16000
    train_fraction: float = 0.7
    seed: int = 2024


@dataclass
class ModelConfig:
    gru_layers: int = 2
    hidden_size: int = 20
    dropout: float = 0.2
    embed_dim: int = 50
    window: int = 7


@dataclass
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass
class Config:
    scene: SceneConfig = field(default_factory=SceneConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    codebooks: CodebookConfig = field(default_factory=CodebookConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    output_dir: str = "runs/default"

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "scene": SceneConfig,
    "channel": ChannelConfig,
    "codebooks": CodebookConfig,
    "dataset": DatasetConfig,
    "model": ModelConfig,
    "training": TrainingConfig,
}


def config_from_dict(raw: dict) -> Config:
    """Build and validate a Config; unknown keys are configuration errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    problems = []
    kwargs = {}
    for key, value in raw.items():
        if key == "output_dir":
            kwargs["output_dir"] = str(value)
        elif key in _SECTIONS:
            cls = _SECTIONS[key]
            known = cls().__dict__.keys()
            bad = set(value) - set(known)
            if bad:
                problems.append(f"{key}: unknown keys {sorted(bad)}")
                continue
            kwargs[key] = cls(**value)
        else:
            problems.append(f"unknown section {key!r}")
    if problems:
        raise ConfigError("; ".join(problems))
    cfg = Config(**kwargs)
    validate(cfg)
    return cfg


def load_config(path) -> Config:
    with open(path) as f:
        raw = yaml.safe_load(f)
    return config_from_dict(raw or {})


def save_config(cfg: Config, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=False)


def validate(cfg: Config) -> None:
    """Check every cross-field constraint; raise ConfigError naming each
    offending key."""
    bad = []

    s = cfg.scene
    for name in ("bs_position", "ris_position", "grid_origin"):
        if len(getattr(s, name)) != 3:
            bad.append(f"scene.{name}: need 3 components")
    if len(s.grid_spacing) != 3 or any(v <= 0 for v in s.grid_spacing):
        bad.append("scene.grid_spacing: three strictly positive values")
    if len(s.grid_counts) != 3 or any(int(v) < 1 for v in s.grid_counts):
        bad.append("scene.grid_counts: three integers >= 1")
    elif int(s.grid_counts[0]) < SEQUENCE_LENGTH:
        bad.append(f"scene.grid_counts: nx >= {SEQUENCE_LENGTH} needed for "
                   f"{SEQUENCE_LENGTH}-step forward trajectories")
    if len(s.step_weights) != 3 or any(v < 0 for v in s.step_weights) or sum(s.step_weights) == 0:
        bad.append("scene.step_weights: three nonnegative values, not all zero")
    for i, box in enumerate(s.buildings):
        if set(box) != {"lo", "hi"} or len(box["lo"]) != 3 or len(box["hi"]) != 3:
            bad.append(f"scene.buildings[{i}]: need lo/hi 3-vectors")
        elif not all(h > l for l, h in zip(box["lo"], box["hi"])):
            bad.append(f"scene.buildings[{i}]: positive extent on every axis")

    c = cfg.channel
    if c.carrier_frequency_hz <= 0:
        bad.append("channel.carrier_frequency_hz: must be positive")
    if c.bandwidth_hz <= 0:
        bad.append("channel.bandwidth_hz: must be positive")
    if c.n_subcarriers < 1:
        bad.append("channel.n_subcarriers: must be >= 1")
    if c.n_taps is not None and not (1 <= c.n_taps <= c.n_subcarriers):
        bad.append("channel.n_taps: need 1 <= n_taps <= n_subcarriers")
    if not (0.0 <= c.rolloff <= 1.0):
        bad.append("channel.rolloff: must lie in [0, 1]")
    if c.absorption_per_m < 0:
        bad.append("channel.absorption_per_m: must be >= 0")
    if c.bs_antennas < 1 or c.ris_elements < 1:
        bad.append("channel.bs_antennas/ris_elements: must be >= 1")
    if c.antenna_spacing_wavelengths <= 0:
        bad.append("channel.antenna_spacing_wavelengths: must be positive")

    if cfg.codebooks.bs_size < 1 or cfg.codebooks.ris_size < 1:
        bad.append("codebooks.bs_size/ris_size: must be >= 1")

    d = cfg.dataset
    if d.n_sequences < 1:
        bad.append("dataset.n_sequences: must be >= 1")
    if not (0.0 < d.train_fraction < 1.0):
        bad.append("dataset.train_fraction: must lie in (0, 1)")

    m = cfg.model
    if m.gru_layers < 1:
        bad.append("model.gru_layers: must be >= 1")
    if m.hidden_size < 1:
        bad.append("model.hidden_size: must be >= 1")
    if m.embed_dim < 1:
        bad.append("model.embed_dim: must be >= 1")
    if not (0.0 <= m.dropout < 1.0):
        bad.append("model.dropout: must lie in [0, 1)")
    if not (1 <= m.window <= SEQUENCE_LENGTH - 1):
        bad.append(f"model.window: need 1 <= window <= {SEQUENCE_LENGTH - 1} "
                   f"(one step after the window is the label)")

    t = cfg.training
    if t.epochs < 0:
        bad.append("training.epochs: must be >= 0")
    if t.batch_size < 1:
        bad.append("training.batch_size: must be >= 1")
    if t.learning_rate <= 0:
        bad.append("training.learning_rate: must be positive")
    if not (0.0 <= t.adam_beta1 < 1.0 and 0.0 <= t.adam_beta2 < 1.0):
        bad.append("training.adam_beta1/beta2: must lie in [0, 1)")
    if t.adam_eps <= 0:
        bad.append("training.adam_eps: must be positive")

    if not bad:
        # Geometry-dependent checks need valid primitives first.
        try:
            scene = build_scene(cfg)
        except ValueError as e:
            bad.append(f"scene: {e}")
        else:
            if cfg.channel.quantize_delays:
                reach = _max_link_distance(scene)
                n_taps = c.n_taps if c.n_taps is not None else c.n_subcarriers
                window_m = n_taps / c.bandwidth_hz * SPEED_OF_LIGHT
                if reach >= window_m:
                    bad.append(
                        f"channel.n_taps: tap window covers {window_m:.1f} m but the "
                        f"scene needs {reach:.1f} m; raise n_taps/bandwidth or shrink the scene")
    if bad:
        raise ConfigError("; ".join(bad))


def _max_link_distance(scene: Scene) -> float:
    """Longest distance any synthesized link can span in this scene."""
    corners = []
    grid = scene.grid
    nx, ny, nz = grid.counts
    for ix in (0, nx - 1):
        for iy in (0, ny - 1):
            for iz in (0, nz - 1):
                corners.append(grid.origin + np.array(grid.spacing) * [ix, iy, iz])
    ends = [scene.bs_position, scene.ris_position]
    dists = [float(np.linalg.norm(c - e)) for c in corners for e in ends]
    dists.append(float(np.linalg.norm(scene.bs_position - scene.ris_position)))
    return max(dists)


# ---------------------------------------------------------------------------
# Builders from a validated config

def build_scene(cfg: Config) -> Scene:
    s = cfg.scene
    return Scene(
        bs_position=s.bs_position,
        ris_position=s.ris_position,
        buildings=tuple(Box(lo=b["lo"], hi=b["hi"]) for b in s.buildings),
        grid=GridSpec(origin=s.grid_origin, spacing=tuple(s.grid_spacing),
                      counts=tuple(int(v) for v in s.grid_counts)),
        carrier_frequency=cfg.channel.carrier_frequency_hz,
        bandwidth=cfg.channel.bandwidth_hz,
        step_policy=StepPolicy(*s.step_weights),
    )


def build_link_model(cfg: Config) -> LinkModel:
    c = cfg.channel
    scene = build_scene(cfg)
    bs_array = ArraySpec(n_elements=c.bs_antennas,
                         spacing_wavelengths=c.antenna_spacing_wavelengths)
    ris_array = ArraySpec(n_elements=c.ris_elements,
                          spacing_wavelengths=c.antenna_spacing_wavelengths)
    ofdm = OfdmSpec(n_subcarriers=c.n_subcarriers, sample_period=1.0 / c.bandwidth_hz,
                    n_taps=c.n_taps, rolloff=c.rolloff)
    return LinkModel(scene=scene, bs_array=bs_array, ris_array=ris_array, ofdm=ofdm,
                     codebook_bs=dft_codebook(bs_array, cfg.codebooks.bs_size),
                     codebook_ris=dft_codebook(ris_array, cfg.codebooks.ris_size),
                     k_abs=c.absorption_per_m, quantize=c.quantize_delays)


def build_split_spec(cfg: Config) -> SplitSpec:
    # Derived seeds: generation uses dataset.seed, the shuffle uses seed+1,
    # training uses seed+2.
    return SplitSpec(train_fraction=cfg.dataset.train_fraction,
                     shuffle_seed=cfg.dataset.seed + 1)


def build_train_settings(cfg: Config) -> TrainSettings:
    return TrainSettings(
        n_bs_beams=cfg.codebooks.bs_size,
        n_ris_beams=cfg.codebooks.ris_size,
        hidden_size=cfg.model.hidden_size,
        n_layers=cfg.model.gru_layers,
        dropout_rate=cfg.model.dropout,
        embed_dim=cfg.model.embed_dim,
        window=cfg.model.window,
        epochs=cfg.training.epochs,
        batch_size=cfg.training.batch_size,
        learning_rate=cfg.training.learning_rate,
        adam_beta1=cfg.training.adam_beta1,
        adam_beta2=cfg.training.adam_beta2,
        adam_eps=cfg.training.adam_eps,
        seed=cfg.dataset.seed + 2,
    )
