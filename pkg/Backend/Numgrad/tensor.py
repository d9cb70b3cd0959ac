from __future__ import annotations

import itertools
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from Backend.errors import ContractError, DimensionError, NumericDomainError

logger = logging.getLogger(__name__)

# Orden global de registro: un nodo siempre tiene secuencia mayor que sus operandos.
_SEQUENCE = itertools.count()
_GRAD_STATE = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_GRAD_STATE, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Desactiva el registro de operaciones en el hilo actual (modo evaluación)."""
    previous = is_grad_enabled()
    _GRAD_STATE.enabled = False
    try:
        yield
    finally:
        _GRAD_STATE.enabled = previous


class Tensor:
    """
    Matriz densa 2-D en float64 con gradiente en modo reverso.

    `grad` existe si y solo si `requires_grad`; tiene la misma forma que `data`.
    Los tensores sin gradiente no se modifican después de construirse.
    """

    def __init__(self, data, requires_grad: bool = False) -> None:
        array = np.array(data, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise DimensionError(f"Tensor admite a lo sumo 2 dimensiones, recibido {array.shape}")
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = np.zeros_like(array) if self.requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._op = "leaf"
        self._seq = next(_SEQUENCE)

    # ── Constructores ────────────────────────────────────────────────────────
    @classmethod
    def parameter(cls, data) -> "Tensor":
        return cls(data, requires_grad=True)

    @classmethod
    def constant(cls, data) -> "Tensor":
        return cls(data, requires_grad=False)

    @classmethod
    def _result(
        cls,
        data: np.ndarray,
        parents: tuple["Tensor", ...],
        op: str,
        backward: Callable[[np.ndarray], None],
    ) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        out.grad = np.zeros_like(data) if out.requires_grad else None
        out._parents = parents if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        out._op = op
        out._seq = next(_SEQUENCE)
        return out

    # ── Propiedades ──────────────────────────────────────────────────────────
    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def is_scalar(self) -> bool:
        return self.data.shape == (1, 1)

    def item(self) -> float:
        if not self.is_scalar():
            raise ContractError(f"item() requiere un tensor 1x1, forma {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor.constant(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # ── Operadores ───────────────────────────────────────────────────────────
    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    def __radd__(self, other) -> "Tensor":
        return self.__add__(other)

    def __sub__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __rsub__(self, other) -> "Tensor":
        return add_scalar(scale(self, -1.0), float(other))

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return hadamard(self, other)
        return scale(self, float(other))

    def __rmul__(self, other) -> "Tensor":
        return self.__mul__(other)

    def __truediv__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return div(self, other)
        return scale(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def _accumulate(target: Tensor, gradient: np.ndarray) -> None:
    if target.requires_grad:
        target.grad += gradient


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: formas incompatibles {a.shape} y {b.shape}")


# ── Operaciones primitivas ───────────────────────────────────────────────────

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: dimensiones internas no coinciden {a.shape} · {b.shape}")

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return Tensor._result(a.data @ b.data, (a, b), "matmul", _backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g)

    return Tensor._result(a.data + b.data, (a, b), "add", _backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, -g)

    return Tensor._result(a.data - b.data, (a, b), "sub", _backward)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("hadamard", a, b)

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return Tensor._result(a.data * b.data, (a, b), "hadamard", _backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("div", a, b)
    if np.any(b.data == 0.0):
        raise NumericDomainError("div: divisor con entradas nulas")
    quotient = a.data / b.data

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g / b.data)
        _accumulate(b, -g * quotient / b.data)

    return Tensor._result(quotient, (a, b), "div", _backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g * factor)

    return Tensor._result(a.data * factor, (a,), "scale", _backward)


def add_scalar(a: Tensor, value: float) -> Tensor:
    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g)

    return Tensor._result(a.data + value, (a,), "add_scalar", _backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g * (1.0 - out * out))

    return Tensor._result(out, (a,), "tanh", _backward)


def abs(a: Tensor) -> Tensor:  # noqa: A001
    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g * np.sign(a.data))

    return Tensor._result(np.abs(a.data), (a,), "abs", _backward)


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.data < 0.0):
        raise NumericDomainError("sqrt: argumento negativo")
    out = np.sqrt(a.data)

    def _backward(g: np.ndarray) -> None:
        with np.errstate(divide="ignore", invalid="ignore"):
            local = np.where(out > 0.0, 0.5 / out, 0.0)
        _accumulate(a, g * local)

    return Tensor._result(out, (a,), "sqrt", _backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise NumericDomainError("log: argumento no positivo")

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g / a.data)

    return Tensor._result(np.log(a.data), (a,), "log", _backward)


def clamp(a: Tensor, low: float, high: float) -> Tensor:
    """Recorta a [low, high]; el gradiente solo pasa por las entradas no recortadas."""
    inside = (a.data >= low) & (a.data <= high)

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g * inside)

    return Tensor._result(np.clip(a.data, low, high), (a,), "clamp", _backward)


def softmax_cols(a: Tensor) -> Tensor:
    """Softmax independiente por columna."""
    shifted = a.data - a.data.max(axis=0, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=0, keepdims=True)

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, out * (g - (g * out).sum(axis=0, keepdims=True)))

    return Tensor._result(out, (a,), "softmax_cols", _backward)


def sum(a: Tensor) -> Tensor:  # noqa: A001
    def _backward(g: np.ndarray) -> None:
        _accumulate(a, np.full(a.shape, g[0, 0]))

    return Tensor._result(np.array([[a.data.sum()]]), (a,), "sum", _backward)


def mean(a: Tensor) -> Tensor:
    count = a.data.size
    if count == 0:
        raise ContractError("mean de un tensor vacío")

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, np.full(a.shape, g[0, 0] / count))

    return Tensor._result(np.array([[a.data.mean()]]), (a,), "mean", _backward)


def reshape(a: Tensor, shape: tuple[int, int]) -> Tensor:
    rows, cols = shape
    if rows * cols != a.data.size:
        raise DimensionError(f"reshape: {a.shape} no se puede llevar a {shape}")

    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g.reshape(a.shape))

    return Tensor._result(a.data.reshape(rows, cols), (a,), "reshape", _backward)


def transpose(a: Tensor) -> Tensor:
    def _backward(g: np.ndarray) -> None:
        _accumulate(a, g.T)

    return Tensor._result(a.data.T.copy(), (a,), "transpose", _backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[1]:
        raise DimensionError(f"slice_cols: rango [{start}, {stop}) fuera de {a.shape}")

    def _backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad[:, start:stop] += g

    return Tensor._result(a.data[:, start:stop].copy(), (a,), "slice_cols", _backward)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[0]:
        raise DimensionError(f"slice_rows: rango [{start}, {stop}) fuera de {a.shape}")

    def _backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad[start:stop, :] += g

    return Tensor._result(a.data[start:stop, :].copy(), (a,), "slice_rows", _backward)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractError("concat_cols sin operandos")
    rows = parts[0].shape[0]
    for part in parts:
        if part.shape[0] != rows:
            raise DimensionError(f"concat_cols: filas distintas {parts[0].shape} y {part.shape}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def _backward(g: np.ndarray) -> None:
        for part, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _accumulate(part, g[:, lo:hi])

    return Tensor._result(
        np.concatenate([p.data for p in parts], axis=1), tuple(parts), "concat_cols", _backward
    )


def cosine_distance(a: Tensor, b: Tensor) -> Tensor:
    """d = 1 − (a·b)/(‖a‖‖b‖), diferenciable; error si alguna norma es cero."""
    _same_shape("cosine_distance", a, b)
    if not np.any(a.data) or not np.any(b.data):
        raise NumericDomainError("cosine_distance: vector de norma cero")
    dot = sum(hadamard(a, b))
    norms = sqrt(hadamard(sum(hadamard(a, a)), sum(hadamard(b, b))))
    return 1.0 - div(dot, norms)


def fused_cosine_distance_matrix(
    x: Tensor,
    x_weights: Tensor,
    y: Tensor,
    y_weights: Tensor,
    k: int,
) -> Tensor:
    """
    D[i, j] = d_cos(fᵢⱼ, gᵢⱼ) con fᵢⱼ = Σ_c wᵢⱼ[c]·xᵢ[c] y gᵢⱼ = Σ_c wᵢⱼ[c]·yⱼ[c],
    donde xᵢ[c] es el bloque c de la fila i (H = L/k columnas) y wᵢⱼ = x_weightsᵢ + y_weightsⱼ.

    Un único nodo: productos por bloques con einsum y retropropagación analítica.
    """
    n, length = x.shape
    m = y.shape[0]
    if y.shape[1] != length or k <= 0 or length % k != 0:
        raise DimensionError(f"fused_cosine_distance_matrix: L={length}, {y.shape[1]} incompatibles con k={k}")
    if x_weights.shape != (n, k) or y_weights.shape != (m, k):
        raise DimensionError(
            f"fused_cosine_distance_matrix: pesos {x_weights.shape}, {y_weights.shape} no son n×k, m×k"
        )
    h = length // k
    xb = x.data.reshape(n, k, h)
    yb = y.data.reshape(m, k, h)
    w = x_weights.data[:, None, :] + y_weights.data[None, :, :]      # n×m×k
    x_rows = x.data.reshape(n * k, h)
    y_rows = y.data.reshape(m * k, h)
    cross = (x_rows @ y_rows.T).reshape(n, k, m, k).transpose(0, 2, 1, 3)  # ⟨xᵢ[c], yⱼ[d]⟩
    gram_x = np.einsum("ich,idh->icd", xb, xb)
    gram_y = np.einsum("jch,jdh->jcd", yb, yb)
    dot = np.einsum("ijc,ijd,ijcd->ij", w, w, cross)
    norm_x = np.einsum("ijc,ijd,icd->ij", w, w, gram_x)
    norm_y = np.einsum("ijc,ijd,jcd->ij", w, w, gram_y)
    if np.any(norm_x <= 0.0) or np.any(norm_y <= 0.0):
        raise NumericDomainError("fused_cosine_distance_matrix: representación fusionada de norma cero")
    denom = np.sqrt(norm_x * norm_y)
    ratio = dot / denom

    def _backward(g: np.ndarray) -> None:
        g_dot = -g / denom
        g_nx = g * ratio / (2.0 * norm_x)
        g_ny = g * ratio / (2.0 * norm_y)
        if x_weights.requires_grad or y_weights.requires_grad:
            g_w = g_dot[:, :, None] * (
                np.einsum("ijcd,ijd->ijc", cross, w) + np.einsum("ijdc,ijd->ijc", cross, w)
            )
            g_w += 2.0 * g_nx[:, :, None] * np.einsum("icd,ijd->ijc", gram_x, w)
            g_w += 2.0 * g_ny[:, :, None] * np.einsum("jcd,ijd->ijc", gram_y, w)
            _accumulate(x_weights, g_w.sum(axis=1))
            _accumulate(y_weights, g_w.sum(axis=0))
        if x.requires_grad or y.requires_grad:
            g_cross = np.einsum("ij,ijc,ijd->ijcd", g_dot, w, w)
            g_gram_x = np.einsum("ij,ijc,ijd->icd", g_nx, w, w)
            g_gram_y = np.einsum("ij,ijc,ijd->jcd", g_ny, w, w)
            g_cross_rows = g_cross.transpose(0, 2, 1, 3).reshape(n * k, m * k)
            g_x = (g_cross_rows @ y_rows).reshape(n, k, h) + 2.0 * np.einsum("icd,idh->ich", g_gram_x, xb)
            g_y = (g_cross_rows.T @ x_rows).reshape(m, k, h) + 2.0 * np.einsum("jcd,jdh->jch", g_gram_y, yb)
            _accumulate(x, g_x.reshape(n, length))
            _accumulate(y, g_y.reshape(m, length))

    return Tensor._result(1.0 - ratio, (x, x_weights, y, y_weights), "fused_cosine_distance_matrix", _backward)


# ── Registro y retropropagación ──────────────────────────────────────────────

@dataclass
class ComputationRecord:
    """Nodos alcanzables desde una salida, en orden de registro."""

    nodes: list[Tensor] = field(default_factory=list)

    @classmethod
    def trace(cls, output: Tensor) -> "ComputationRecord":
        seen: set[int] = set()
        stack = [output]
        nodes: list[Tensor] = []
        while stack:
            node = stack.pop()
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node._parents)
        nodes.sort(key=lambda t: t._seq)
        return cls(nodes)

    def leaves(self) -> list[Tensor]:
        return [node for node in self.nodes if node.is_leaf]

    def replay(self, output: Tensor) -> None:
        for node in self.nodes:
            if not node.is_leaf:
                node.grad.fill(0.0)
        output.grad += 1.0
        for node in reversed(self.nodes):
            if node._backward is not None:
                node._backward(node.grad)


def backward(loss: Tensor) -> None:
    """Acumula ∂loss/∂hoja en cada hoja con requires_grad (sin poner a cero antes)."""
    if not loss.is_scalar():
        raise ContractError(f"backward requiere una pérdida escalar, forma {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward: la pérdida no depende de ningún tensor con gradiente")
    record = ComputationRecord.trace(loss)
    logger.debug("[backward] nodos=%s hojas=%s", len(record.nodes), len(record.leaves()))
    record.replay(loss)
