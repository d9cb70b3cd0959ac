from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from Backend.errors import ConfigError, ContractError
from Backend.Numgrad.tensor import Tensor

logger = logging.getLogger(__name__)


class OptimizerKind(str, Enum):
    ADAM = "adam"
    RMSPROP = "rmsprop"


@dataclass
class OptimizerState:
    """
    Estado de un optimizador: buffers de momentos por parámetro y contador de pasos.

    El weight decay es desacoplado: en cada paso p ← p − lr·weight_decay·p,
    antes de la actualización adaptativa.
    """

    kind: OptimizerKind
    learning_rate: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    alpha: float = 0.99
    eps: float = 1e-8
    step_count: int = 0
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)


def init_optimizer_state(
    kind: OptimizerKind | str,
    params: Sequence[Tensor],
    learning_rate: float,
    weight_decay: float = 0.0,
    **constants: float,
) -> OptimizerState:
    kind = OptimizerKind(kind)
    if learning_rate <= 0.0:
        raise ConfigError(f"learning_rate debe ser positivo, recibido {learning_rate}")
    if weight_decay < 0.0:
        raise ConfigError(f"weight_decay no puede ser negativo, recibido {weight_decay}")
    state = OptimizerState(kind=kind, learning_rate=learning_rate, weight_decay=weight_decay, **constants)
    state.second_moments = [np.zeros_like(p.data) for p in params]
    if kind is OptimizerKind.ADAM:
        state.first_moments = [np.zeros_like(p.data) for p in params]
    return state


def _check(state: OptimizerState, params: Sequence[Tensor], expected: OptimizerKind) -> None:
    if state.kind is not expected:
        raise ContractError(f"estado de {state.kind.value} usado con un paso de {expected.value}")
    if len(params) != len(state.second_moments):
        raise ContractError(
            f"el estado sigue {len(state.second_moments)} parámetros, recibidos {len(params)}"
        )
    for index, (param, moment) in enumerate(zip(params, state.second_moments)):
        if param.grad is None:
            raise ContractError(f"parámetro {index} sin gradiente (requires_grad=False)")
        if param.shape != moment.shape:
            raise ContractError(f"parámetro {index}: forma {param.shape} ≠ buffer {moment.shape}")


def adam_step(state: OptimizerState, params: Sequence[Tensor]) -> None:
    """Paso de Adam con corrección de sesgo; no toca los gradientes."""
    _check(state, params, OptimizerKind.ADAM)
    state.step_count += 1
    t = state.step_count
    lr = state.learning_rate
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for param, m, v in zip(params, state.first_moments, state.second_moments):
        g = param.grad
        if state.weight_decay:
            param.data -= lr * state.weight_decay * param.data
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        param.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def rmsprop_step(state: OptimizerState, params: Sequence[Tensor]) -> None:
    _check(state, params, OptimizerKind.RMSPROP)
    state.step_count += 1
    lr = state.learning_rate
    for param, v in zip(params, state.second_moments):
        g = param.grad
        if state.weight_decay:
            param.data -= lr * state.weight_decay * param.data
        v *= state.alpha
        v += (1.0 - state.alpha) * g * g
        param.data -= lr * g / (np.sqrt(v) + state.eps)


def zero_grad(params: Sequence[Tensor]) -> None:
    for param in params:
        param.zero_grad()
