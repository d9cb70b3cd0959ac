from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from Backend.errors import ConfigError, ContractError, DegenerateBatchError, NumericDomainError
from Backend.Numgrad import tensor as ng
from Backend.Numgrad.tensor import Tensor
from Backend.Projector.projector import DiversifiedAttentionProjector, Modality, ReshapedEmbedding

logger = logging.getLogger(__name__)

# Familias de distancias dentro del mini-batch: (modalidad fila, modalidad columna).
CROSS = "vt"
IMAGE_IMAGE = "vv"
TEXT_TEXT = "tt"

# Por debajo de este valor d_mean se considera nulo (instancias equivalentes).
DEGENERATE_EPS = 1e-12


@dataclass
class GraphLossWeights:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not math.isfinite(value) or value < 0.0:
                raise ConfigError(f"{name} debe ser finito y >= 0, recibido {value}")


@dataclass
class GraphLossReport:
    l_pdl: Tensor
    l_udp: Tensor
    l_mdp: Tensor
    l_gpl: Tensor

    def values(self) -> dict[str, float]:
        return {
            "l_pdl": self.l_pdl.item(),
            "l_udp": self.l_udp.item(),
            "l_mdp": self.l_mdp.item(),
            "l_gpl": self.l_gpl.item(),
        }


@dataclass
class BatchContext:
    """
    Mini-batch emparejado: la fila i de `image` y de `text` describe el mismo objeto.

    `image`/`text` son las features abstractas n×L; la fila i, leída por bloques
    de H columnas, es la matriz reorganizada v̂ᵢ (o t̂ᵢ). `raw_image`/`raw_text`
    son las entradas con denoising (U, C) usadas solo para las distancias de
    referencia. `d_mean=None` calcula la media dentro del batch.
    """

    image: Tensor
    text: Tensor
    image_attention: Tensor
    text_attention: Tensor
    raw_image: np.ndarray
    raw_text: np.ndarray
    k: int
    d_mean: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.image.shape[0]

    def distances(self, family: str) -> Tensor:
        """Matriz n×n de l_p para una familia, calculada una vez por batch."""
        if family not in self._cache:
            if family == CROSS:
                pair = (self.image, self.image_attention, self.text, self.text_attention)
            elif family == IMAGE_IMAGE:
                pair = (self.image, self.image_attention, self.image, self.image_attention)
            elif family == TEXT_TEXT:
                pair = (self.text, self.text_attention, self.text, self.text_attention)
            else:
                raise ContractError(f"familia de distancias desconocida: {family}")
            self._cache[family] = pair_distance_matrix(*pair, k=self.k)
        return self._cache[family]

    def reference(self) -> np.ndarray:
        if "reference" not in self._cache:
            self._cache["reference"] = reference_distances(self.raw_image, self.raw_text, self.d_mean)
        return self._cache["reference"]


def build_batch_context(
    projector: DiversifiedAttentionProjector,
    raw_image: np.ndarray,
    raw_text: np.ndarray,
    image: Tensor | None = None,
    text: Tensor | None = None,
    d_mean: float | None = None,
) -> BatchContext:
    if len(raw_image) != len(raw_text):
        raise ContractError(f"batch desemparejado: {len(raw_image)} imágenes y {len(raw_text)} textos")
    image = image if image is not None else projector.encode(raw_image, Modality.IMAGE)
    text = text if text is not None else projector.encode(raw_text, Modality.TEXT)
    return BatchContext(
        image=image,
        text=text,
        image_attention=projector.attention_batch(image),
        text_attention=projector.attention_batch(text),
        raw_image=np.asarray(raw_image, dtype=np.float64),
        raw_text=np.asarray(raw_text, dtype=np.float64),
        k=projector.k,
        d_mean=d_mean,
    )


# ── Distancias entre representaciones ────────────────────────────────────────

def pair_distance(
    projector: DiversifiedAttentionProjector,
    x_hat: ReshapedEmbedding,
    y_hat: ReshapedEmbedding,
) -> Tensor:
    """l_p: coseno entre las dos fusiones (co-atención entre modalidades, auto-atención si no)."""
    if x_hat.modality is y_hat.modality:
        first, second = projector.self_attend(x_hat, y_hat), projector.self_attend(y_hat, x_hat)
    else:
        first, second = projector.co_attend(x_hat, y_hat), projector.co_attend(y_hat, x_hat)
    return ng.cosine_distance(ng.transpose(first.vector), ng.transpose(second.vector))


def pair_distance_matrix(
    x: Tensor,
    x_attention: Tensor,
    y: Tensor,
    y_attention: Tensor,
    k: int,
) -> Tensor:
    """
    l_p(x̂ᵢ, ŷⱼ) para todo (i, j) en una sola expresión registrada.

    Ambas fusiones del par usan el mismo peso wᵢⱼ = aᵢ + bⱼ, así que
    f·g = Σ_{c,d} wᵢⱼ[c]·wᵢⱼ[d]·⟨x̂ᵢ[:,c], ŷⱼ[:,d]⟩ y lo mismo para las normas.
    """
    length = x.shape[1]
    if y.shape[1] != length or length % k != 0:
        raise ConfigError(f"pair_distance_matrix: L={length}, {y.shape[1]} incompatibles con k={k}")
    return ng.fused_cosine_distance_matrix(x, x_attention, y, y_attention, k)


# ── Distancias de referencia (espacios originales) ───────────────────────────

def _cosine_distance_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise NumericDomainError("distancia de referencia: instancia de entrada con norma cero")
    unit = x / norms[:, None]
    return np.clip(1.0 - unit @ unit.T, 0.0, 2.0)


def original_distances(raw_image: np.ndarray, raw_text: np.ndarray) -> np.ndarray:
    """d_ori(i, j) = √(d_cos(uᵢ, uⱼ)·d_cos(cᵢ, cⱼ))."""
    return np.sqrt(_cosine_distance_rows(raw_image) * _cosine_distance_rows(raw_text))


def mean_original_distance(d_ori: np.ndarray) -> float:
    n = d_ori.shape[0]
    if n < 2:
        raise ContractError("d_mean requiere al menos dos instancias")
    off_diagonal = ~np.eye(n, dtype=bool)
    return float(d_ori[off_diagonal].mean())


def reference_distances(
    raw_image: np.ndarray,
    raw_text: np.ndarray,
    d_mean: float | None = None,
) -> np.ndarray:
    """Matriz n×n de d = d_ori/d_mean; constante respecto a los parámetros."""
    d_ori = original_distances(raw_image, raw_text)
    scale = mean_original_distance(d_ori) if d_mean is None else d_mean
    if not scale > DEGENERATE_EPS:
        raise DegenerateBatchError("d_mean = 0: todas las instancias del batch son equivalentes")
    return d_ori / scale


def reference_distance(
    u_i: np.ndarray,
    u_j: np.ndarray,
    c_i: np.ndarray,
    c_j: np.ndarray,
    d_mean: float,
) -> float:
    if not d_mean > 0.0:
        raise DegenerateBatchError("d_mean debe ser positivo")
    pair = _cosine_distance_rows(np.vstack([u_i, u_j]))[0, 1] * _cosine_distance_rows(np.vstack([c_i, c_j]))[0, 1]
    return float(np.sqrt(pair) / d_mean)


def global_d_mean(raw_image: np.ndarray, raw_text: np.ndarray) -> float:
    """d_mean sobre todo el conjunto de entrenamiento (una pasada, sin denoising)."""
    value = mean_original_distance(original_distances(raw_image, raw_text))
    logger.info("[global_d_mean] n=%s d_mean=%.6f", len(raw_image), value)
    return value


# ── Términos de la pérdida ───────────────────────────────────────────────────

def _off_diagonal_mask(n: int) -> Tensor:
    return Tensor.constant(1.0 - np.eye(n))


def pairwise_loss(ctx: BatchContext) -> Tensor:
    """L_pdl: media sobre i de l_p(v̂ᵢ, t̂ᵢ)."""
    if ctx.n < 1:
        raise ContractError("pairwise_loss con batch vacío")
    diagonal = Tensor.constant(np.eye(ctx.n))
    return ng.sum(ctx.distances(CROSS) * diagonal) / float(ctx.n)


def unpaired_loss(ctx: BatchContext, signed: bool = False, symmetric: bool = False) -> Tensor:
    """
    L_udp: media sobre i de l_unp(v̂ᵢ,T̂) + l_unp(v̂ᵢ,V̂) + l_unp(t̂ᵢ,T̂), con
    l_unp(xᵢ,Y) = (1/n)·Σ_{j≠i} |l_p(xᵢ,yⱼ) − d(i,j)|.

    `signed` usa la diferencia sin valor absoluto; `symmetric` añade l_unp(t̂ᵢ,V̂).
    """
    n = ctx.n
    if n < 2:
        raise ContractError(f"unpaired_loss requiere n >= 2, recibido {n}")
    reference = Tensor.constant(ctx.reference())
    mask = _off_diagonal_mask(n)
    families = [ctx.distances(CROSS), ctx.distances(IMAGE_IMAGE), ctx.distances(TEXT_TEXT)]
    if symmetric:
        families.append(ng.transpose(ctx.distances(CROSS)))
    terms = []
    for distances in families:
        deviation = distances - reference
        if not signed:
            deviation = ng.abs(deviation)
        terms.append(ng.sum(deviation * mask))
    return reduce(ng.add, terms) / float(n * n)


def mutual_loss(ctx: BatchContext) -> Tensor:
    """L_mdp: media sobre pares ordenados i≠j de las tres diferencias absolutas entre familias."""
    n = ctx.n
    if n < 2:
        raise ContractError(f"mutual_loss requiere n >= 2, recibido {n}")
    cross = ctx.distances(CROSS)
    image = ctx.distances(IMAGE_IMAGE)
    text = ctx.distances(TEXT_TEXT)
    total = ng.abs(cross - image) + ng.abs(cross - text) + ng.abs(image - text)
    return ng.sum(total * _off_diagonal_mask(n)) / float(n * (n - 1))


def graph_pattern_loss(
    ctx: BatchContext,
    weights: GraphLossWeights,
    use_udp: bool = True,
    use_mdp: bool = True,
    udp_signed: bool = False,
    symmetric_udp: bool = False,
) -> GraphLossReport:
    """L_gpl = L_pdl + α·L_udp + β·L_mdp; un término desactivado se reporta como 0."""
    zero = Tensor.constant(0.0)
    l_pdl = pairwise_loss(ctx)
    l_udp = unpaired_loss(ctx, signed=udp_signed, symmetric=symmetric_udp) if use_udp else zero
    l_mdp = mutual_loss(ctx) if use_mdp else zero
    l_gpl = l_pdl + l_udp * weights.alpha + l_mdp * weights.beta
    logger.debug(
        "[graph_pattern_loss] n=%s l_pdl=%.6f l_udp=%.6f l_mdp=%.6f l_gpl=%.6f",
        ctx.n,
        l_pdl.item(),
        l_udp.item(),
        l_mdp.item(),
        l_gpl.item(),
    )
    return GraphLossReport(l_pdl=l_pdl, l_udp=l_udp, l_mdp=l_mdp, l_gpl=l_gpl)
