from typing import Optional


class CensusError(Exception):
    """Base error carrying a stable code and the offending input field"""

    def __init__(self, code: str, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.code = code
        self.field = field
        self.message = message

    def __str__(self) -> str:
        where = f" (field: {self.field})" if self.field else ""
        return f"[{self.code}] {self.message}{where}"


class TopologyError(CensusError):
    """Invalid graph parameters or adjacency"""


class OracleGuardError(CensusError):
    """Exact computation requested on a graph beyond the size guard"""


class EstimationError(CensusError):
    """Estimator input out of range or no usable estimate"""


class ConfigError(CensusError):
    """Invalid experiment configuration or command line"""


class AccessError(CensusError):
    """Link-query discipline violated (vertex not yet reached)"""
