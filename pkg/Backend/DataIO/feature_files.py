from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from dotenv import dotenv_values

from Backend.errors import (
    BadMagicError,
    ContractError,
    DataLoadError,
    ManifestError,
    NonFiniteValueError,
    PayloadSizeError,
)

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"GPLF"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIII")  # magic, versión, n, dim

MANIFEST_KEYS = ("IMAGE_FEATURES", "TEXT_FEATURES", "LABELS", "TRAIN_SIZE", "TEST_SIZE")


@dataclass
class PairedDataset:
    """
    Features emparejadas: la fila i de `image` y de `text` es el mismo objeto.

    Las primeras `train_size` filas forman el split de entrenamiento y las
    `test_size` siguientes el de test. Las etiquetas solo se usan al evaluar.
    """

    image: np.ndarray
    text: np.ndarray
    labels: np.ndarray | None = None
    train_size: int | None = None
    test_size: int = 0

    def __post_init__(self) -> None:
        self.image = np.asarray(self.image, dtype=np.float64)
        self.text = np.asarray(self.text, dtype=np.float64)
        n = len(self.image)
        if len(self.text) != n:
            raise ContractError(f"dataset desemparejado: {n} imágenes y {len(self.text)} textos")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != n:
                raise ContractError(f"{len(self.labels)} etiquetas para {n} instancias")
        if self.train_size is None:
            self.train_size = n - self.test_size
        if self.train_size < 0 or self.test_size < 0 or self.train_size + self.test_size > n:
            raise ContractError(f"splits {self.train_size}/{self.test_size} no caben en n={n}")

    @property
    def n(self) -> int:
        return len(self.image)

    @property
    def dim_img(self) -> int:
        return self.image.shape[1]

    @property
    def dim_txt(self) -> int:
        return self.text.shape[1]

    def _subset(self, start: int, stop: int) -> "PairedDataset":
        labels = None if self.labels is None else self.labels[start:stop]
        return PairedDataset(self.image[start:stop], self.text[start:stop], labels, stop - start, 0)

    def train(self) -> "PairedDataset":
        return self._subset(0, self.train_size)

    def test(self) -> "PairedDataset":
        """Split de test; si está vacío se evalúa sobre todas las filas."""
        if self.test_size == 0:
            return self._subset(0, self.n)
        start = self.train_size
        return self._subset(start, start + self.test_size)


# ── FeatureFile ──────────────────────────────────────────────────────────────

def write_feature_file(path: str | Path, matrix: np.ndarray) -> Path:
    path = Path(path)
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ContractError(f"se esperaba una matriz 2-D, forma {matrix.shape}")
    n, dim = matrix.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, n, dim))
        handle.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
    return path


def read_feature_file(path: str | Path) -> np.ndarray:
    """Lee un FeatureFile binario (o CSV si la extensión es .csv) a float64."""
    path = Path(path)
    if not path.exists():
        raise DataLoadError(f"no existe el archivo de features {path}")
    if path.suffix.lower() == ".csv":
        try:
            matrix = pd.read_csv(path, header=None).to_numpy(dtype=np.float64)
        except ValueError as exc:
            raise DataLoadError(f"{path}: CSV de features no numérico o vacío ({exc})") from exc
    else:
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise PayloadSizeError(f"{path}: cabecera truncada ({len(raw)} bytes)")
        magic, version, n, dim = _HEADER.unpack_from(raw)
        if magic != FEATURE_MAGIC:
            raise BadMagicError(f"{path}: magic {magic!r}, se esperaba {FEATURE_MAGIC!r}")
        if version != FEATURE_VERSION:
            raise BadMagicError(f"{path}: versión de formato {version} no soportada")
        expected = n * dim * 4
        actual = len(raw) - _HEADER.size
        if actual != expected:
            raise PayloadSizeError(
                f"{path}: payload de {actual} bytes, se esperaban {expected} (n={n}, dim={dim})"
            )
        matrix = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, dim).astype(np.float64)
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteValueError(f"{path}: el payload contiene NaN o infinitos")
    return matrix


def write_feature_csv(path: str | Path, matrix: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(np.asarray(matrix, dtype=np.float32)).to_csv(path, header=False, index=False)
    return path


def read_labels(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataLoadError(f"no existe el archivo de etiquetas {path}")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    try:
        return np.array([int(line) for line in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataLoadError(f"{path}: etiqueta no entera ({exc})") from exc


# ── Manifiesto ───────────────────────────────────────────────────────────────

def _resolve(base: Path, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else base / candidate


def _optional_int(values: dict, key: str, path: Path) -> int | None:
    raw = values.get(key)
    if raw in (None, ""):
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ManifestError(f"{path}: {key}={raw!r} no es entero") from exc


def load(manifest_path: str | Path) -> PairedDataset:
    """Carga y valida el dataset descrito por un manifiesto KEY=valor."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ManifestError(f"no existe el manifiesto {manifest_path}")
    values = dotenv_values(manifest_path)
    for key in ("IMAGE_FEATURES", "TEXT_FEATURES"):
        if not values.get(key):
            raise ManifestError(f"{manifest_path}: falta la clave {key}")

    base = manifest_path.parent
    image = read_feature_file(_resolve(base, values["IMAGE_FEATURES"]))
    text = read_feature_file(_resolve(base, values["TEXT_FEATURES"]))
    labels = read_labels(_resolve(base, values["LABELS"])) if values.get("LABELS") else None

    if len(image) != len(text):
        raise PayloadSizeError(f"{manifest_path}: {len(image)} imágenes y {len(text)} textos")
    if labels is not None and len(labels) != len(image):
        raise PayloadSizeError(f"{manifest_path}: {len(labels)} etiquetas para {len(image)} instancias")

    train_size = _optional_int(values, "TRAIN_SIZE", manifest_path)
    test_size = _optional_int(values, "TEST_SIZE", manifest_path) or 0
    if train_size is not None and train_size + test_size > len(image):
        raise ManifestError(
            f"{manifest_path}: splits {train_size}/{test_size} exceden n={len(image)}"
        )

    dataset = PairedDataset(image, text, labels, train_size, test_size)
    logger.info(
        "[load] %s | n=%s | dim_img=%s | dim_txt=%s | train/test=%s/%s | etiquetas=%s",
        manifest_path.name,
        dataset.n,
        dataset.dim_img,
        dataset.dim_txt,
        dataset.train_size,
        dataset.test_size,
        labels is not None,
    )
    return dataset


def write_dataset(dataset: PairedDataset, out_dir: str | Path) -> Path:
    """Escribe FeatureFiles, etiquetas y manifiesto; devuelve la ruta del manifiesto."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_file(out_dir / "image.gplf", dataset.image)
    write_feature_file(out_dir / "text.gplf", dataset.text)
    lines = ["IMAGE_FEATURES=image.gplf", "TEXT_FEATURES=text.gplf"]
    if dataset.labels is not None:
        (out_dir / "labels.txt").write_text(
            "".join(f"{int(label)}\n" for label in dataset.labels), encoding="utf-8"
        )
        lines.append("LABELS=labels.txt")
    lines += [f"TRAIN_SIZE={dataset.train_size}", f"TEST_SIZE={dataset.test_size}"]
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("[write_dataset] %s | n=%s", manifest, dataset.n)
    return manifest
