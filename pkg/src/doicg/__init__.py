"""Column generation for the single-source capacitated facility location master
with swap (S), rebate (F) and combined (SF) dual-optimal inequalities."""

from .doi import DoiConfig, Variant
from .driver import CgResult, RunParams, repair, run
from .instance import GeneratorParams, Instance, generate, parse_instance, read_instance, scale_capacities

__all__ = [
    "CgResult",
    "DoiConfig",
    "GeneratorParams",
    "Instance",
    "RunParams",
    "Variant",
    "generate",
    "parse_instance",
    "read_instance",
    "repair",
    "run",
    "scale_capacities",
]
__version__ = "0.1.0"
