from __future__ import annotations

import logging

import numpy as np

from Backend.DataIO.feature_files import PairedDataset
from Backend.errors import ConfigError

logger = logging.getLogger(__name__)


def generate_synthetic(
    n_clusters: int,
    n_per_cluster: int,
    dim_img: int,
    dim_txt: int,
    noise_sigma: float,
    seed: int,
    test_fraction: float = 0.0,
    shuffle: bool = True,
) -> PairedDataset:
    """
    Dataset emparejado de prueba.

    Cada cluster tiene un prototipo de imagen y otro de texto independientes,
    ambos N(0, 1); cada instancia es prototipo + ruido gaussiano de desviación
    `noise_sigma`. Con `shuffle` las instancias se permutan con la misma semilla
    y las últimas `test_fraction·n` forman el split de test.
    """
    for name, value in (("n_clusters", n_clusters), ("n_per_cluster", n_per_cluster),
                        ("dim_img", dim_img), ("dim_txt", dim_txt)):
        if value <= 0:
            raise ConfigError(f"{name} debe ser positivo, recibido {value}")
    if noise_sigma < 0.0:
        raise ConfigError(f"noise_sigma no puede ser negativo, recibido {noise_sigma}")
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError(f"test_fraction debe estar en [0, 1), recibido {test_fraction}")

    rng = np.random.default_rng(seed)
    image_prototypes = rng.standard_normal((n_clusters, dim_img))
    text_prototypes = rng.standard_normal((n_clusters, dim_txt))

    labels = np.repeat(np.arange(n_clusters), n_per_cluster)
    image = image_prototypes[labels] + noise_sigma * rng.standard_normal((len(labels), dim_img))
    text = text_prototypes[labels] + noise_sigma * rng.standard_normal((len(labels), dim_txt))

    if shuffle:
        order = rng.permutation(len(labels))
        image, text, labels = image[order], text[order], labels[order]

    n = len(labels)
    test_size = int(round(n * test_fraction))
    logger.info(
        "[generate_synthetic] clusters=%s | por_cluster=%s | dims=%s/%s | sigma=%s | train/test=%s/%s",
        n_clusters,
        n_per_cluster,
        dim_img,
        dim_txt,
        noise_sigma,
        n - test_size,
        test_size,
    )
    return PairedDataset(image, text, labels, n - test_size, test_size)
