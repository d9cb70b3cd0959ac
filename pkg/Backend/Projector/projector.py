from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from Backend.errors import ConfigError, ContractError, DimensionError
from Backend.Numgrad import tensor as ng
from Backend.Numgrad.tensor import Tensor

logger = logging.getLogger(__name__)


class Modality(str, Enum):
    IMAGE = "image"
    TEXT = "text"


class FusionMode(str, Enum):
    SELF = "self"
    CO = "co"


@dataclass
class ProjectorParams:
    w_img: Tensor     # d_img × E
    w_txt: Tensor     # d_txt × E
    w_shared: Tensor  # E × L, compartida por ambas modalidades
    w1: Tensor        # D × H
    w2: Tensor        # 1 × D

    def as_list(self) -> list[Tensor]:
        return [self.w_img, self.w_txt, self.w_shared, self.w1, self.w2]

    def named(self) -> dict[str, Tensor]:
        return {
            "w_img": self.w_img,
            "w_txt": self.w_txt,
            "w_shared": self.w_shared,
            "w1": self.w1,
            "w2": self.w2,
        }


@dataclass
class ReshapedEmbedding:
    matrix: Tensor  # H × k
    modality: Modality
    instance_id: int = -1


@dataclass
class AttentionMap:
    weights: Tensor  # k × 1


@dataclass
class FusedRepresentation:
    vector: Tensor  # H × 1
    instance: int
    partner: int
    mode: FusionMode


def _uniform_init(rng: np.random.Generator, rows: int, cols: int, fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor.parameter(rng.uniform(-bound, bound, size=(rows, cols)))


def init_projector_params(
    dim_img: int,
    dim_txt: int,
    hidden_dim: int,
    common_dim: int,
    k: int,
    seed: int | np.random.SeedSequence,
) -> ProjectorParams:
    """Inicializa U(−1/√fan_in, 1/√fan_in) con semilla; H = L/k y D = ⌊H/2⌋ (al menos 1)."""
    if k <= 0 or common_dim % k != 0:
        raise ConfigError(f"k={k} debe dividir L={common_dim}")
    h = common_dim // k
    d = max(h // 2, 1)
    rng = np.random.default_rng(seed)
    return ProjectorParams(
        w_img=_uniform_init(rng, dim_img, hidden_dim, dim_img),
        w_txt=_uniform_init(rng, dim_txt, hidden_dim, dim_txt),
        w_shared=_uniform_init(rng, hidden_dim, common_dim, hidden_dim),
        w1=_uniform_init(rng, d, h, h),
        w2=_uniform_init(rng, 1, d, d),
    )


def denoise(
    x: np.ndarray,
    rate: float,
    rng_seed: int | np.random.Generator,
    training: bool = True,
) -> np.ndarray:
    """Pone a cero cada elemento con probabilidad `rate` (solo en entrenamiento)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"denoise rate debe estar en [0, 1), recibido {rate}")
    if not training or rate == 0.0:
        return np.array(x, dtype=np.float64, copy=True)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    keep = rng.random(np.shape(x)) >= rate
    return np.where(keep, x, 0.0)


def reshape_k(v: Tensor, k: int, modality: Modality, instance_id: int = -1) -> ReshapedEmbedding:
    """L-vector → matriz H×k; la columna j contiene los elementos [jH, (j+1)H)."""
    length = v.data.size
    if k <= 0 or length % k != 0:
        raise ConfigError(f"k={k} no divide L={length}")
    h = length // k
    flat = ng.reshape(v, (1, length)) if v.shape != (1, length) else v
    return ReshapedEmbedding(ng.transpose(ng.reshape(flat, (k, h))), modality, instance_id)


def flatten(x_hat: ReshapedEmbedding) -> Tensor:
    h, k = x_hat.matrix.shape
    return ng.reshape(ng.transpose(x_hat.matrix), (1, h * k))


class DiversifiedAttentionProjector:
    """
    Proyector de atención diversificada.

    Codifica cada modalidad al espacio común con una capa de entrada propia y
    una capa compartida, reorganiza el vector en k sub-representaciones y las
    fusiona con mapas de atención (auto-atención o co-atención).
    Con `use_da=False` los mapas de atención son uniformes (1/k).
    """

    def __init__(self, params: ProjectorParams, k: int, use_da: bool = True) -> None:
        common_dim = params.w_shared.shape[1]
        if k <= 0 or common_dim % k != 0:
            raise ConfigError(f"k={k} debe dividir L={common_dim}")
        self.params = params
        self.k = k
        self.use_da = use_da
        self.common_dim = common_dim
        self.h = common_dim // k
        if params.w1.shape[1] != self.h:
            raise DimensionError(f"W1 {params.w1.shape} no es compatible con H={self.h}")

    @classmethod
    def create(
        cls,
        dim_img: int,
        dim_txt: int,
        hidden_dim: int,
        common_dim: int,
        k: int,
        seed: int,
        use_da: bool = True,
    ) -> "DiversifiedAttentionProjector":
        params = init_projector_params(dim_img, dim_txt, hidden_dim, common_dim, k, seed)
        return cls(params, k, use_da)

    def parameters(self) -> list[Tensor]:
        return self.params.as_list()

    # ── Codificación ─────────────────────────────────────────────────────────
    def encode(self, x: np.ndarray | Tensor, modality: Modality) -> Tensor:
        """Features n×d → features abstractas n×L: tanh(tanh(x·W_mod)·W_shared)."""
        x_t = x if isinstance(x, Tensor) else Tensor.constant(x)
        entry = self.params.w_img if modality is Modality.IMAGE else self.params.w_txt
        if x_t.shape[1] != entry.shape[0]:
            raise DimensionError(
                f"encode({modality.value}): entrada {x_t.shape} no coincide con la capa {entry.shape}"
            )
        return ng.tanh(ng.tanh(x_t @ entry) @ self.params.w_shared)

    def reshape_k(self, v: Tensor, modality: Modality, instance_id: int = -1) -> ReshapedEmbedding:
        return reshape_k(v, self.k, modality, instance_id)

    # ── Atención ─────────────────────────────────────────────────────────────
    def _uniform(self, rows: int, cols: int) -> Tensor:
        return Tensor.constant(np.full((rows, cols), 1.0 / self.k))

    def attention_map(self, x_hat: ReshapedEmbedding) -> AttentionMap:
        """a = softmax((W₂·tanh(W₁·x̂))ᵀ) ∈ ℝᵏ."""
        if x_hat.matrix.shape != (self.h, self.k):
            raise DimensionError(f"x̂ {x_hat.matrix.shape} no es H×k = {(self.h, self.k)}")
        if not self.use_da:
            return AttentionMap(self._uniform(self.k, 1))
        logits = self.params.w2 @ ng.tanh(self.params.w1 @ x_hat.matrix)
        return AttentionMap(ng.softmax_cols(ng.transpose(logits)))

    def attention_batch(self, features: Tensor) -> Tensor:
        """Mapas de atención de un lote de features abstractas n×L → n×k (una fila por instancia)."""
        n = features.shape[0]
        if features.shape[1] != self.common_dim:
            raise DimensionError(f"features {features.shape} no tienen L={self.common_dim} columnas")
        if not self.use_da:
            return self._uniform(n, self.k)
        w1_t = ng.transpose(self.params.w1)
        w2_t = ng.transpose(self.params.w2)
        logits = [
            ng.tanh(ng.slice_cols(features, c * self.h, (c + 1) * self.h) @ w1_t) @ w2_t
            for c in range(self.k)
        ]
        return ng.transpose(ng.softmax_cols(ng.transpose(ng.concat_cols(logits))))

    # ── Fusión ───────────────────────────────────────────────────────────────
    def _fuse(
        self,
        x_i: ReshapedEmbedding,
        own: AttentionMap,
        partner: AttentionMap,
        partner_id: int,
        mode: FusionMode,
    ) -> FusedRepresentation:
        vector = x_i.matrix @ (own.weights + partner.weights)
        return FusedRepresentation(vector, x_i.instance_id, partner_id, mode)

    def self_attend(self, x_i: ReshapedEmbedding, x_j: ReshapedEmbedding) -> FusedRepresentation:
        """Se(xᵢ, xⱼ) = x̂ᵢ·(aᵢ + aⱼ), misma modalidad."""
        if x_i.modality is not x_j.modality:
            raise ContractError("self_attend requiere dos embeddings de la misma modalidad")
        if x_i.matrix.shape != x_j.matrix.shape:
            raise DimensionError(f"self_attend: formas {x_i.matrix.shape} y {x_j.matrix.shape}")
        return self._fuse(
            x_i, self.attention_map(x_i), self.attention_map(x_j), x_j.instance_id, FusionMode.SELF
        )

    def co_attend(self, x_i: ReshapedEmbedding, y_j: ReshapedEmbedding) -> FusedRepresentation:
        """Co(xᵢ, yⱼ) = x̂ᵢ·(aᵢˣ + aⱼʸ), modalidades opuestas."""
        if x_i.modality is y_j.modality:
            raise ContractError("co_attend requiere embeddings de modalidades opuestas")
        return self._fuse(
            x_i, self.attention_map(x_i), self.attention_map(y_j), y_j.instance_id, FusionMode.CO
        )

    def embed(self, x: np.ndarray, modality: Modality) -> list[ReshapedEmbedding]:
        """Codifica y reorganiza cada fila de `x` (sin denoising)."""
        features = self.encode(x, modality)
        return [
            self.reshape_k(ng.slice_rows(features, i, i + 1), modality, i)
            for i in range(features.shape[0])
        ]
