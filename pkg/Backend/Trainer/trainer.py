from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from Backend.Adversary.adversary import (
    ClassifierParams,
    classifier_loss,
    generator_loss,
    init_classifier_params,
)
from Backend.DataIO.feature_files import PairedDataset
from Backend.errors import ContractError, NumericDomainError
from Backend.GraphLoss.graph_loss import (
    GraphLossWeights,
    build_batch_context,
    global_d_mean,
    graph_pattern_loss,
)
from Backend.Numgrad.optim import (
    OptimizerKind,
    OptimizerState,
    adam_step,
    init_optimizer_state,
    rmsprop_step,
    zero_grad,
)
from Backend.Numgrad.tensor import Tensor, backward
from Backend.Projector.projector import (
    DiversifiedAttentionProjector,
    Modality,
    ProjectorParams,
    denoise,
    init_projector_params,
)
from Backend.Trainer.config import TrainConfig

logger = logging.getLogger(__name__)

# Flujos aleatorios independientes derivados de la semilla maestra.
_STREAM_PROJECTOR = 1
_STREAM_CLASSIFIER = 2
_STREAM_SHUFFLE = 3
_STREAM_DENOISE = 4

LOG_COLUMNS = ["epoch", "step", "l_pdl", "l_udp", "l_mdp", "l_gpl", "l_D", "l_G", "skipped_batches"]


def _seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, *keys])


@dataclass
class CrossModalModel:
    """Proyector G + clasificador de modalidad D, con la configuración que los creó."""

    projector: DiversifiedAttentionProjector
    classifier: ClassifierParams
    config: TrainConfig
    dim_img: int
    dim_txt: int

    @classmethod
    def initialize(cls, dim_img: int, dim_txt: int, config: TrainConfig) -> "CrossModalModel":
        params = init_projector_params(
            dim_img,
            dim_txt,
            config.hidden_dim,
            config.common_dim,
            config.k,
            _seed_sequence(config.seed, _STREAM_PROJECTOR),
        )
        classifier = init_classifier_params(
            config.common_dim, _seed_sequence(config.seed, _STREAM_CLASSIFIER)
        )
        projector = DiversifiedAttentionProjector(params, config.k, use_da=config.use_da)
        return cls(projector, classifier, config, dim_img, dim_txt)

    def named_parameters(self) -> dict[str, Tensor]:
        return {**self.projector.params.named(), **self.classifier.named()}

    @classmethod
    def from_parameters(
        cls,
        arrays: dict[str, np.ndarray],
        config: TrainConfig,
        dim_img: int,
        dim_txt: int,
    ) -> "CrossModalModel":
        params = ProjectorParams(
            **{name: Tensor.parameter(arrays[name]) for name in ("w_img", "w_txt", "w_shared", "w1", "w2")}
        )
        classifier = ClassifierParams(
            Tensor.parameter(arrays["d_hidden"]), Tensor.parameter(arrays["d_out"])
        )
        projector = DiversifiedAttentionProjector(params, config.k, use_da=config.use_da)
        return cls(projector, classifier, config, dim_img, dim_txt)


@dataclass
class TrainLogRow:
    epoch: int
    step: int
    l_pdl: float
    l_udp: float
    l_mdp: float
    l_gpl: float
    l_D: float
    l_G: float
    skipped_batches: int = 0  # acumulado hasta este paso


@dataclass
class TrainResult:
    model: CrossModalModel
    log: pd.DataFrame
    skipped_batches: int


def _train_step(
    model: CrossModalModel,
    image: np.ndarray,
    text: np.ndarray,
    weights: GraphLossWeights,
    g_state: OptimizerState,
    d_state: OptimizerState,
    d_mean: float | None,
) -> dict[str, float]:
    config = model.config
    projector, classifier = model.projector, model.classifier
    v = projector.encode(image, Modality.IMAGE)
    t = projector.encode(text, Modality.TEXT)

    # La pérdida de grafo no depende de D: se evalúa antes para descartar batches degenerados.
    ctx = build_batch_context(projector, image, text, image=v, text=t, d_mean=d_mean)
    report = graph_pattern_loss(
        ctx,
        weights,
        use_udp=config.use_udp,
        use_mdp=config.use_mdp,
        udp_signed=config.udp_signed,
        symmetric_udp=config.symmetric_udp,
    )

    l_d_value = 0.0
    if config.use_mc:
        d_params = classifier.as_list()
        zero_grad(d_params)
        l_d = classifier_loss(classifier, v, t)
        backward(l_d)
        rmsprop_step(d_state, d_params)
        l_d_value = l_d.item()
        l_g = generator_loss(report.l_gpl, classifier, v, t, config.lam)
    else:
        l_g = report.l_gpl

    g_params = projector.parameters()
    zero_grad(g_params)
    backward(l_g)
    adam_step(g_state, g_params)

    return {**report.values(), "l_D": l_d_value, "l_G": l_g.item()}


def train(dataset: PairedDataset, config: TrainConfig) -> TrainResult:
    """
    Entrenamiento adversarial alternado sobre el split de entrenamiento.

    Por mini-batch: (1) paso de D con RMSprop sobre L_D; (2) paso de G con Adam
    sobre L_G (pérdida de grafo según los flags + término de confusión si use_mc).
    Las etiquetas del dataset no se leen.
    """
    t0 = time.perf_counter()
    split = dataset.train()
    n = split.n
    if n < 2:
        raise ContractError(f"el entrenamiento requiere al menos 2 instancias emparejadas, hay {n}")

    logger.info(
        "[train] Inicio | n=%s | dims=%s/%s | k=%s | L=%s | alpha=%s | beta=%s | lambda=%s | "
        "udp=%s mdp=%s mc=%s da=%s | épocas=%s | batch=%s",
        n,
        split.dim_img,
        split.dim_txt,
        config.k,
        config.common_dim,
        config.alpha,
        config.beta,
        config.lam,
        config.use_udp,
        config.use_mdp,
        config.use_mc,
        config.use_da,
        config.epochs,
        config.batch_size,
    )

    model = CrossModalModel.initialize(split.dim_img, split.dim_txt, config)
    g_state = init_optimizer_state(
        OptimizerKind.ADAM, model.projector.parameters(), config.lr_g, config.weight_decay_g
    )
    d_state = init_optimizer_state(
        OptimizerKind.RMSPROP,
        model.classifier.as_list(),
        config.lr_d,
        config.weight_decay_d,
        alpha=config.rmsprop_alpha,
    )
    weights = GraphLossWeights(config.alpha, config.beta)
    d_mean = None
    if config.d_mean_scope == "global" and config.use_udp:
        d_mean = global_d_mean(split.image, split.text)

    rows: list[TrainLogRow] = []
    skipped = 0
    step = 0
    for epoch in range(1, config.epochs + 1):
        t_epoch = time.perf_counter()
        order = np.random.default_rng(_seed_sequence(config.seed, _STREAM_SHUFFLE, epoch)).permutation(n)
        noise_rng = np.random.default_rng(_seed_sequence(config.seed, _STREAM_DENOISE, epoch))
        epoch_rows = 0
        for start in range(0, n, config.batch_size):
            index = order[start : start + config.batch_size]
            if len(index) < 2:
                logger.debug("[train] Época %s | batch final de %s instancia omitido", epoch, len(index))
                continue
            step += 1
            image = denoise(split.image[index], config.denoise_rate, noise_rng)
            text = denoise(split.text[index], config.denoise_rate, noise_rng)
            try:
                values = _train_step(model, image, text, weights, g_state, d_state, d_mean)
            except NumericDomainError as exc:
                skipped += 1
                logger.warning("[train] Batch omitido | época=%s | paso=%s | %s", epoch, step, exc)
                continue
            rows.append(TrainLogRow(epoch=epoch, step=step, **values, skipped_batches=skipped))
            epoch_rows += 1
            logger.debug(
                "[train] época=%s paso=%s l_gpl=%.5f l_D=%.5f l_G=%.5f",
                epoch,
                step,
                values["l_gpl"],
                values["l_D"],
                values["l_G"],
            )

        if epoch_rows:
            recent = rows[-epoch_rows:]
            logger.info(
                "[train] Época %s/%s | pasos=%s | l_pdl=%.4f | l_gpl=%.4f | l_G=%.4f | en %.2fs",
                epoch,
                config.epochs,
                epoch_rows,
                float(np.mean([r.l_pdl for r in recent])),
                float(np.mean([r.l_gpl for r in recent])),
                float(np.mean([r.l_G for r in recent])),
                time.perf_counter() - t_epoch,
            )

    log = pd.DataFrame([dataclasses.asdict(row) for row in rows], columns=LOG_COLUMNS)
    logger.info(
        "[train] Fin | pasos=%s | batches_omitidos=%s | en %.2fs",
        len(rows),
        skipped,
        time.perf_counter() - t0,
    )
    return TrainResult(model=model, log=log, skipped_batches=skipped)
