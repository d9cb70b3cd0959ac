from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from Backend.errors import ConfigError

load_dotenv()

# Backend/Trainer/config.py → sube 3 niveles para llegar a la raíz del proyecto
PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_OUTPUT_DIR = Path(os.getenv("CROSSMODAL_OUTPUT_DIR", str(PROJECT_ROOT / "Data" / "runs")))

D_MEAN_SCOPES = ("batch", "global")
AP_NORMS = ("min-r-k", "rel-at-k")


@dataclass(frozen=True)
class TrainConfig:
    """
    Hiperparámetros de entrenamiento y evaluación.

    Weight decay desacoplado: p ← p − lr·weight_decay·p en cada paso del optimizador.
    """

    k: int = 4
    common_dim: int = 1024  # L
    hidden_dim: int = 1024  # E
    alpha: float = 1.0
    beta: float = 0.1
    lam: float = 0.01
    lr_g: float = 1e-4
    weight_decay_g: float = 1e-4
    lr_d: float = 5e-5
    weight_decay_d: float = 0.0
    rmsprop_alpha: float = 0.99
    batch_size: int = 64
    epochs: int = 200
    denoise_rate: float = 0.1
    seed: int = 0
    use_udp: bool = True
    use_mdp: bool = True
    use_mc: bool = True
    use_da: bool = True
    udp_signed: bool = False
    symmetric_udp: bool = False
    d_mean_scope: str = "batch"
    map_k: int = 50
    ap_norm: str = "min-r-k"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.k <= 0 or self.common_dim % self.k != 0:
            raise ConfigError(f"k={self.k} debe dividir L={self.common_dim}")
        if (self.common_dim // self.k) % 2 != 0:
            raise ConfigError(f"H = L/k = {self.common_dim // self.k} debe ser par (la atención usa D = H/2)")
        if self.common_dim < 2 or self.hidden_dim < 1:
            raise ConfigError(f"dimensiones inválidas L={self.common_dim}, E={self.hidden_dim}")
        for name in ("lr_g", "lr_d"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} debe ser positivo, recibido {getattr(self, name)}")
        for name in ("alpha", "beta", "lam", "weight_decay_g", "weight_decay_d"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ConfigError(f"{name} debe ser finito y >= 0, recibido {value}")
        if not 0.0 < self.rmsprop_alpha < 1.0:
            raise ConfigError(f"rmsprop_alpha debe estar en (0, 1), recibido {self.rmsprop_alpha}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size debe ser >= 2, recibido {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs debe ser >= 1, recibido {self.epochs}")
        if not 0.0 <= self.denoise_rate < 1.0:
            raise ConfigError(f"denoise_rate debe estar en [0, 1), recibido {self.denoise_rate}")
        if self.d_mean_scope not in D_MEAN_SCOPES:
            raise ConfigError(f"d_mean_scope debe ser uno de {D_MEAN_SCOPES}")
        if self.ap_norm not in AP_NORMS:
            raise ConfigError(f"ap_norm debe ser uno de {AP_NORMS}")
        if self.map_k < 1:
            raise ConfigError(f"map_k debe ser >= 1, recibido {self.map_k}")

    def replace(self, **overrides) -> "TrainConfig":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"parámetros desconocidos: {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{key: value for key, value in values.items() if key in known})
