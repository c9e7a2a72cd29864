import numpy as np
import pytest

from thzris.beams import LinkModel, dft_codebook, label_grid
from thzris.channel import ArraySpec, OfdmSpec
from thzris.scene import Box, GridSpec, Scene


def build_small_model(buildings=(), counts=(16, 8, 2)):
    """Compact world with cheap channels for fast unit tests."""
    scene = Scene(bs_position=(-5.0, 0.0, 2.0), ris_position=(3.0, 4.0, 20.0),
                  buildings=buildings,
                  grid=GridSpec(origin=(0.0, -2.0, 10.0), spacing=(0.6, 0.6, 0.4),
                                counts=counts),
                  carrier_frequency=200e9, bandwidth=1e9)
    bs_array = ArraySpec(n_elements=8)
    ris_array = ArraySpec(n_elements=16)
    ofdm = OfdmSpec(n_subcarriers=128, sample_period=1e-9)
    return LinkModel(scene=scene, bs_array=bs_array, ris_array=ris_array, ofdm=ofdm,
                     codebook_bs=dft_codebook(bs_array, 8),
                     codebook_ris=dft_codebook(ris_array, 16))


# Wall that shadows the far part of the grid from the BS but clears the
# feeder path (which crosses the slab above z=3).
SHADOW_WALL = Box(lo=(-4.5, -3.0, 0.0), hi=(-4.0, 1.0, 2.6))


@pytest.fixture(scope="session")
def shadowed_model():
    return build_small_model(buildings=(SHADOW_WALL,))


@pytest.fixture(scope="session")
def shadowed_grid(shadowed_model):
    return label_grid(shadowed_model)
