import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfsir.model import (DiffusionSpec, DriftSpec, GaussianMixture, InitialLawSpec,
                         KernelSpec, ModelConfig)

STD_MIX = GaussianMixture((1.0,), ((0.0,),), ((1.0,),))


def make_config(*, d=1, gamma=0.5, kernel=None, drift=None, diffusion=None,
                probs=(0.9, 0.1, 0.0), mixtures=None) -> ModelConfig:
    if kernel is None:
        kernel = KernelSpec("gaussian", 1.0, 1.0)
    if drift is None:
        drift = DriftSpec("saturating_attraction", a=0.5, ell=1.0)
    if diffusion is None:
        diffusion = DiffusionSpec("constant", (0.5, 0.5, 0.5))
    if mixtures is None:
        mixtures = (STD_MIX,) * 3
    return ModelConfig(d, gamma, kernel, drift, diffusion,
                       InitialLawSpec(probs, mixtures))


@pytest.fixture
def base_config():
    return make_config()


@pytest.fixture
def frozen_config():
    """No motion, no infection, no recovery."""
    return make_config(gamma=0.0, kernel=KernelSpec("constant", 0.0),
                       drift=DriftSpec("zero"),
                       diffusion=DiffusionSpec("constant", (0.0, 0.0, 0.0)))
