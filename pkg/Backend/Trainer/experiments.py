from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import pandas as pd

from Backend.DataIO.feature_files import PairedDataset
from Backend.errors import ConfigError, ContractError
from Backend.Retrieval.retrieval_eval import evaluate
from Backend.Trainer.config import TrainConfig
from Backend.Trainer.trainer import train

logger = logging.getLogger(__name__)

# Variantes de ablación, en el orden en que se reportan.
ABLATION_VARIANTS: list[tuple[str, dict[str, bool]]] = [
    ("Baseline", dict(use_udp=False, use_mdp=False, use_mc=False, use_da=False)),
    ("+mdp", dict(use_udp=False, use_mdp=True, use_mc=False, use_da=False)),
    ("+udp", dict(use_udp=True, use_mdp=False, use_mc=False, use_da=False)),
    ("+mdp+udp", dict(use_udp=True, use_mdp=True, use_mc=False, use_da=False)),
    ("+mdp+udp+MC", dict(use_udp=True, use_mdp=True, use_mc=True, use_da=False)),
    ("full", dict(use_udp=True, use_mdp=True, use_mc=True, use_da=True)),
]

SCORE_COLUMNS = ["img2txt", "txt2img", "avg"]


def fit_and_score(dataset: PairedDataset, config: TrainConfig) -> dict[str, float]:
    """Entrena sobre el split de entrenamiento y devuelve MAP@k sobre el de test."""
    if dataset.labels is None:
        raise ContractError("los experimentos requieren etiquetas para evaluar")
    result = train(dataset, config)
    test = dataset.test()
    metrics, _ = evaluate(result.model.projector, test.image, test.text, test.labels, config.map_k, config.ap_norm)
    scores = metrics.set_index("task")["MAP"]
    return {"img2txt": float(scores["Img2Txt"]), "txt2img": float(scores["Txt2Img"]), "avg": float(scores["Avg"])}


def ablate(dataset: PairedDataset, config: TrainConfig) -> pd.DataFrame:
    t0 = time.perf_counter()
    rows = []
    for method, flags in ABLATION_VARIANTS:
        logger.info("[ablate] Variante %s | %s", method, flags)
        scores = fit_and_score(dataset, config.replace(**flags))
        rows.append({"method": method, **flags, **scores})
    table = pd.DataFrame(rows, columns=["method", "use_udp", "use_mdp", "use_mc", "use_da", *SCORE_COLUMNS])
    logger.info("[ablate] %s variantes en %.2fs", len(rows), time.perf_counter() - t0)
    return table


def grid_points(
    alphas: Sequence[float], betas: Sequence[float], config: TrainConfig
) -> list[tuple[str, float, float]]:
    """
    Barridos de un eje a la vez: α con β fijo y β con α fijo.

    El valor fijo es el único de la otra lista o, si tiene varios, el de `config`.
    """
    if not alphas or not betas:
        raise ConfigError("grid_search necesita al menos un valor de alpha y uno de beta")
    points: list[tuple[str, float, float]] = []
    if len(alphas) > 1 or len(betas) == 1:
        beta0 = betas[0] if len(betas) == 1 else config.beta
        points += [("alpha", float(a), float(beta0)) for a in alphas]
    if len(betas) > 1:
        alpha0 = alphas[0] if len(alphas) == 1 else config.alpha
        points += [("beta", float(alpha0), float(b)) for b in betas]
    return points


def _grid_point(dataset: PairedDataset, config: TrainConfig, axis: str, alpha: float, beta: float) -> dict:
    scores = fit_and_score(dataset, config.replace(alpha=alpha, beta=beta))
    return {"axis": axis, "alpha": alpha, "beta": beta, **scores}


def grid_search(
    dataset: PairedDataset,
    alphas: Sequence[float],
    betas: Sequence[float],
    config: TrainConfig,
    workers: int = 1,
) -> pd.DataFrame:
    t0 = time.perf_counter()
    points = grid_points(alphas, betas, config)
    logger.info("[grid_search] %s puntos | workers=%s", len(points), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_grid_point, dataset, config, *point) for point in points]
            rows = [future.result() for future in futures]
    else:
        rows = [_grid_point(dataset, config, *point) for point in points]
    table = pd.DataFrame(rows, columns=["axis", "alpha", "beta", *SCORE_COLUMNS])
    logger.info("[grid_search] Fin en %.2fs", time.perf_counter() - t0)
    return table
