"""Second-order Carleman linearization for the forced logistic and 2D NSHJ flows."""
from .errors import C2FlowError, ConfigError, DivergenceError, DomainError
from .grid import Field2D, GridSpec, divergence, dx, dy, nearest_node

__all__ = [
    "C2FlowError", "ConfigError", "DivergenceError", "DomainError",
    "Field2D", "GridSpec", "divergence", "dx", "dy", "nearest_node",
]
__version__ = "0.1.0"
