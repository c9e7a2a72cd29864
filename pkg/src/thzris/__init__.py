"""Desk-scale simulator and sequence predictor for drone links served by a
base station or an elevated reflecting surface.

Modules:
    scene    -- world geometry, line-of-sight queries, drone mobility
    channel  -- geometric wideband channel synthesis (delay taps, subcarriers)
    beams    -- beam codebooks, received-power sweeps, link/beam labeling
    dataset  -- trajectory sequence dataset: generation, split, file round-trip
    seqmodel -- GRU sequence classifier with backprop and Adam, from scratch
    harness  -- training/evaluation loops, top-k and per-beam metrics, reports
    config   -- run configuration file loading and validation
    cli      -- command-line pipeline driver
"""

__version__ = "0.1.0"

from .scene import Box, GridSpec, Scene, StepPolicy, default_scene
from .channel import ArraySpec, OfdmSpec, Path, PathSet
from .beams import Codebook, Link, LinkLabel

__all__ = [
    "Box",
    "GridSpec",
    "Scene",
    "StepPolicy",
    "default_scene",
    "ArraySpec",
    "OfdmSpec",
    "Path",
    "PathSet",
    "Codebook",
    "Link",
    "LinkLabel",
    "__version__",
]
