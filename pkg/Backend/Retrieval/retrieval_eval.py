from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from Backend.errors import ConfigError, ContractError, DimensionError
from Backend.GraphLoss.graph_loss import pair_distance, pair_distance_matrix
from Backend.Numgrad.tensor import no_grad
from Backend.Projector.projector import DiversifiedAttentionProjector, Modality, ReshapedEmbedding

logger = logging.getLogger(__name__)

AP_NORMS = ("min-r-k", "rel-at-k")


class Direction(str, Enum):
    IMG2TXT = "Img2Txt"
    TXT2IMG = "Txt2Img"


@dataclass
class ScoreMatrix:
    """Distancias coseno n_query × n_candidate en el espacio común."""

    values: np.ndarray
    direction: Direction

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass
class RetrievalResult:
    per_query_ap: np.ndarray  # NaN para consultas excluidas (R = 0)
    map: float
    k: int
    n_queries: int
    n_excluded: int


def score_pair(
    projector: DiversifiedAttentionProjector,
    query: ReshapedEmbedding,
    candidate: ReshapedEmbedding,
) -> float:
    """d_cos(Co(x̂ᵢ, ŷⱼ), Co(ŷⱼ, x̂ᵢ)) en modo evaluación."""
    if query.modality is candidate.modality:
        raise ContractError("score_pair requiere consulta y candidato de modalidades opuestas")
    with no_grad():
        return pair_distance(projector, query, candidate).item()


def score_matrix(
    projector: DiversifiedAttentionProjector,
    queries: np.ndarray,
    candidates: np.ndarray,
    direction: Direction,
) -> ScoreMatrix:
    """Matriz completa de distancias por co-atención (sin denoising)."""
    query_modality = Modality.IMAGE if direction is Direction.IMG2TXT else Modality.TEXT
    candidate_modality = Modality.TEXT if direction is Direction.IMG2TXT else Modality.IMAGE
    with no_grad():
        q = projector.encode(queries, query_modality)
        c = projector.encode(candidates, candidate_modality)
        distances = pair_distance_matrix(
            q, projector.attention_batch(q), c, projector.attention_batch(c), projector.k
        )
    return ScoreMatrix(np.clip(distances.data, 0.0, 2.0), direction)


def _ranking(scores: np.ndarray) -> np.ndarray:
    # Ascendente por distancia; empates por índice de candidato.
    return np.argsort(scores, axis=1, kind="stable")


def map_at_k(
    scores: ScoreMatrix | np.ndarray,
    query_labels: np.ndarray,
    candidate_labels: np.ndarray,
    k: int = 50,
    ap_norm: str = "min-r-k",
) -> RetrievalResult:
    """
    MAP@k: AP@k = Σ_{r≤k} P(r)·rel(r) / norma, con norma min(R, k) o Σ_{r≤k} rel(r).

    Las consultas sin candidatos relevantes (R = 0) se excluyen del promedio.
    """
    values = scores.values if isinstance(scores, ScoreMatrix) else np.asarray(scores, dtype=np.float64)
    query_labels = np.asarray(query_labels)
    candidate_labels = np.asarray(candidate_labels)
    if k < 1:
        raise ConfigError(f"k debe ser >= 1, recibido {k}")
    if ap_norm not in AP_NORMS:
        raise ConfigError(f"ap_norm debe ser uno de {AP_NORMS}, recibido {ap_norm!r}")
    if values.shape != (len(query_labels), len(candidate_labels)):
        raise DimensionError(
            f"scores {values.shape} no alinean con etiquetas {len(query_labels)}×{len(candidate_labels)}"
        )

    relevance = query_labels[:, None] == candidate_labels[None, :]
    total_relevant = relevance.sum(axis=1)
    ranked = np.take_along_axis(relevance, _ranking(values), axis=1)[:, :k].astype(np.float64)
    hits = np.cumsum(ranked, axis=1)
    precision = hits / np.arange(1, ranked.shape[1] + 1)
    gained = (precision * ranked).sum(axis=1)

    if ap_norm == "min-r-k":
        norm = np.minimum(total_relevant, k).astype(np.float64)
    else:
        norm = ranked.sum(axis=1)

    ap = np.full(len(query_labels), np.nan)
    valid = total_relevant > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ap[valid] = np.where(norm[valid] > 0, gained[valid] / norm[valid], 0.0)
    n_excluded = int((~valid).sum())
    mean_ap = float(ap[valid].mean()) if valid.any() else 0.0
    return RetrievalResult(ap, mean_ap, k, int(valid.sum()), n_excluded)


def evaluate(
    projector: DiversifiedAttentionProjector,
    image: np.ndarray,
    text: np.ndarray,
    labels: np.ndarray,
    k: int = 50,
    ap_norm: str = "min-r-k",
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    Evalúa ambas direcciones sobre el mismo conjunto de objetos.

    Devuelve (métricas con filas Img2Txt, Txt2Img, Avg; AP por consulta).
    """
    t0 = time.perf_counter()
    if labels is None:
        raise ContractError("la evaluación requiere etiquetas")
    img2txt = score_matrix(projector, image, text, Direction.IMG2TXT)
    # La distancia es simétrica en el par: Txt2Img es la transpuesta.
    txt2img = ScoreMatrix(img2txt.values.T.copy(), Direction.TXT2IMG)

    rows, dumps = [], []
    results = {}
    for matrix in (img2txt, txt2img):
        result = map_at_k(matrix, labels, labels, k, ap_norm)
        results[matrix.direction] = result
        rows.append(
            {
                "task": matrix.direction.value,
                "k": k,
                "MAP": result.map,
                "n_queries": result.n_queries,
                "n_excluded": result.n_excluded,
            }
        )
        dumps.append(
            pd.DataFrame(
                {
                    "task": matrix.direction.value,
                    "query": np.arange(len(result.per_query_ap)),
                    "AP": result.per_query_ap,
                }
            )
        )
    rows.append(
        {
            "task": "Avg",
            "k": k,
            "MAP": (results[Direction.IMG2TXT].map + results[Direction.TXT2IMG].map) / 2.0,
            "n_queries": sum(r.n_queries for r in results.values()),
            "n_excluded": sum(r.n_excluded for r in results.values()),
        }
    )
    metrics = pd.DataFrame(rows, columns=["task", "k", "MAP", "n_queries", "n_excluded"])
    logger.info(
        "[evaluate] n=%s | MAP@%s Img2Txt=%.4f Txt2Img=%.4f Avg=%.4f | en %.2fs",
        len(labels),
        k,
        metrics.loc[0, "MAP"],
        metrics.loc[1, "MAP"],
        metrics.loc[2, "MAP"],
        time.perf_counter() - t0,
    )
    return metrics, pd.concat(dumps, ignore_index=True)
