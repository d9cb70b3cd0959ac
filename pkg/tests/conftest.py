import numpy as np
import pytest

from Backend.DataIO.synthetic import generate_synthetic
from Backend.Projector.projector import DiversifiedAttentionProjector
from Backend.Trainer.config import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_projector():
    """d_img=5, d_txt=4, E=6, L=4, k=2 (H=2)."""
    return DiversifiedAttentionProjector.create(5, 4, hidden_dim=6, common_dim=4, k=2, seed=3)


@pytest.fixture
def small_dataset():
    return generate_synthetic(4, 12, 10, 8, noise_sigma=0.3, seed=5, test_fraction=0.25)


@pytest.fixture
def small_config():
    return TrainConfig(
        k=2,
        common_dim=8,
        hidden_dim=8,
        batch_size=16,
        epochs=2,
        lr_g=1e-3,
        lr_d=1e-3,
        map_k=10,
        seed=11,
    )
