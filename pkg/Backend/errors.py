"""Jerarquía de errores tipados del proyecto.

Todos heredan de `CrossModalError`; la CLI los captura y reporta el módulo
que los originó.
"""


class CrossModalError(Exception):
    """Error base de CrossModal Lab."""


class DimensionError(CrossModalError):
    """Formas de matrices incompatibles."""


class ContractError(CrossModalError):
    """Precondición de una operación no satisfecha."""


class NumericDomainError(CrossModalError):
    """Entrada fuera del dominio numérico (p. ej. norma cero en el coseno)."""


class DegenerateBatchError(NumericDomainError):
    """Mini-batch sin distancias de referencia utilizables (d_mean = 0)."""


class ConfigError(CrossModalError):
    """Valor de configuración inválido."""


class DataLoadError(CrossModalError):
    """Error al leer un archivo de features, manifiesto o checkpoint."""


class BadMagicError(DataLoadError):
    pass


class PayloadSizeError(DataLoadError):
    pass


class NonFiniteValueError(DataLoadError):
    pass


class ManifestError(DataLoadError):
    pass


class CheckpointError(DataLoadError):
    pass
