from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np

from Backend.errors import CheckpointError
from Backend.Trainer.config import TrainConfig
from Backend.Trainer.trainer import CrossModalModel

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"GPLD"
CHECKPOINT_VERSION = 1
_U32 = struct.Struct("<I")


def _pack_bytes(payload: bytes) -> bytes:
    return _U32.pack(len(payload)) + payload


def save_checkpoint(model: CrossModalModel, path: str | Path) -> Path:
    """
    Formato: magic GPLD | u32 versión | u32 len + JSON de configuración |
    u32 nº de matrices | por matriz: u32 len + nombre, u32 filas, u32 columnas, float64 LE.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"config": model.config.to_dict(), "dim_img": model.dim_img, "dim_txt": model.dim_txt}
    matrices = model.named_parameters()

    chunks = [CHECKPOINT_MAGIC, _U32.pack(CHECKPOINT_VERSION)]
    chunks.append(_pack_bytes(json.dumps(header, sort_keys=True).encode("utf-8")))
    chunks.append(_U32.pack(len(matrices)))
    for name, tensor in matrices.items():
        rows, cols = tensor.shape
        chunks.append(_pack_bytes(name.encode("utf-8")))
        chunks.append(_U32.pack(rows) + _U32.pack(cols))
        chunks.append(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))
    logger.info("[checkpoint] Guardado %s | matrices=%s", path, len(matrices))
    return path


class _Reader:
    def __init__(self, raw: bytes, path: Path) -> None:
        self.raw = raw
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.raw):
            raise CheckpointError(f"{self.path}: checkpoint truncado en el byte {self.offset}")
        chunk = self.raw[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(_U32.size))[0]


def load_checkpoint(path: str | Path) -> CrossModalModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no existe el checkpoint {path}")
    reader = _Reader(path.read_bytes(), path)
    magic = reader.take(4)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: magic {magic!r}, se esperaba {CHECKPOINT_MAGIC!r}")
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: versión de checkpoint {version} no soportada")
    try:
        header = json.loads(reader.take(reader.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: cabecera JSON ilegible ({exc})") from exc

    arrays: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        rows, cols = reader.u32(), reader.u32()
        arrays[name] = np.frombuffer(reader.take(rows * cols * 8), dtype="<f8").reshape(rows, cols).copy()
    if reader.offset != len(reader.raw):
        raise CheckpointError(f"{path}: {len(reader.raw) - reader.offset} bytes sobrantes")

    missing = {"w_img", "w_txt", "w_shared", "w1", "w2", "d_hidden", "d_out"} - set(arrays)
    if missing:
        raise CheckpointError(f"{path}: faltan matrices {sorted(missing)}")

    config = TrainConfig.from_dict(header["config"])
    model = CrossModalModel.from_parameters(arrays, config, int(header["dim_img"]), int(header["dim_txt"]))
    logger.info("[checkpoint] Cargado %s | matrices=%s", path, len(arrays))
    return model
