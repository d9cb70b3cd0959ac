from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from Backend.errors import ConfigError, DimensionError
from Backend.Numgrad import tensor as ng
from Backend.Numgrad.tensor import Tensor
from Backend.Projector.projector import Modality

logger = logging.getLogger(__name__)

CLAMP_EPS = 1e-12

# y¹ = imagen, y⁰ = texto
IMAGE_LABEL = np.array([1.0, 0.0])
TEXT_LABEL = np.array([0.0, 1.0])


def modality_label(modality: Modality) -> np.ndarray:
    return IMAGE_LABEL.copy() if modality is Modality.IMAGE else TEXT_LABEL.copy()


def _label_rows(label: np.ndarray, n: int) -> Tensor:
    return Tensor.constant(np.tile(np.asarray(label, dtype=np.float64).reshape(1, 2), (n, 1)))


@dataclass
class ClassifierParams:
    w_hidden: Tensor  # L × L/2
    w_out: Tensor     # L/2 × 2

    def as_list(self) -> list[Tensor]:
        return [self.w_hidden, self.w_out]

    def named(self) -> dict[str, Tensor]:
        return {"d_hidden": self.w_hidden, "d_out": self.w_out}

    def frozen(self) -> "ClassifierParams":
        """Copia sin gradiente: el clasificador actúa como constante."""
        return ClassifierParams(self.w_hidden.detach(), self.w_out.detach())


def init_classifier_params(common_dim: int, seed: int | np.random.SeedSequence) -> ClassifierParams:
    if common_dim < 2:
        raise ConfigError(f"el clasificador requiere L >= 2, recibido {common_dim}")
    hidden = common_dim // 2
    rng = np.random.default_rng(seed)
    bound_hidden = 1.0 / np.sqrt(common_dim)
    bound_out = 1.0 / np.sqrt(hidden)
    return ClassifierParams(
        w_hidden=Tensor.parameter(rng.uniform(-bound_hidden, bound_hidden, size=(common_dim, hidden))),
        w_out=Tensor.parameter(rng.uniform(-bound_out, bound_out, size=(hidden, 2))),
    )


def classify(params: ClassifierParams, features: Tensor) -> Tensor:
    """D(·): features abstractas n×L → probabilidades n×2 sobre {imagen, texto}."""
    if features.shape[1] != params.w_hidden.shape[0]:
        raise DimensionError(
            f"classify: features {features.shape} no coinciden con la capa {params.w_hidden.shape}"
        )
    logits = ng.tanh(features @ params.w_hidden) @ params.w_out
    return ng.transpose(ng.softmax_cols(ng.transpose(logits)))


def cross_entropy(pred: Tensor, label: Tensor) -> Tensor:
    """
    l_cel = −Σ_c (y_c·log p_c + (1 − y_c)·log(1 − p_c)), por fila (n×1).

    Con etiquetas one-hot y predicciones softmax equivale al doble de la
    entropía cruzada categórica. Las predicciones se recortan a [ε, 1 − ε].
    """
    if pred.shape != label.shape:
        raise DimensionError(f"cross_entropy: pred {pred.shape} y label {label.shape}")
    p = ng.clamp(pred, CLAMP_EPS, 1.0 - CLAMP_EPS)
    per_entry = label * ng.log(p) + (1.0 - label) * ng.log(1.0 - p)
    ones = Tensor.constant(np.ones((pred.shape[1], 1)))
    return -(per_entry @ ones)


def _modality_terms(
    params: ClassifierParams,
    image: Tensor,
    text: Tensor,
    image_label: np.ndarray,
    text_label: np.ndarray,
) -> Tensor:
    n = image.shape[0]
    image_ce = cross_entropy(classify(params, image), _label_rows(image_label, n))
    text_ce = cross_entropy(classify(params, text), _label_rows(text_label, text.shape[0]))
    return ng.mean(image_ce) + ng.mean(text_ce)


def classifier_loss(params: ClassifierParams, image: Tensor, text: Tensor) -> Tensor:
    """L_D = l_cel(D(v), y¹) + l_cel(D(t), y⁰), promediado en el batch; solo entrena D."""
    return _modality_terms(params, image.detach(), text.detach(), IMAGE_LABEL, TEXT_LABEL)


def confusion_loss(params: ClassifierParams, image: Tensor, text: Tensor) -> Tensor:
    """Término adversarial de L_G: etiquetas invertidas, D congelado."""
    return _modality_terms(params.frozen(), image, text, TEXT_LABEL, IMAGE_LABEL)


def generator_loss(
    graph_loss: Tensor,
    params: ClassifierParams,
    image: Tensor,
    text: Tensor,
    lam: float,
) -> Tensor:
    """L_G = L_gpl + λ·(l_cel(D(v), y⁰) + l_cel(D(t), y¹))."""
    if lam < 0.0:
        raise ConfigError(f"lambda debe ser >= 0, recibido {lam}")
    return graph_loss + confusion_loss(params, image, text) * lam
