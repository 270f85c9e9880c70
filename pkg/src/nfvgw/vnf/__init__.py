from .functions import (
    ConversionPair,
    DaConfig,
    DaMode,
    FeasibilityTable,
    RecordMeta,
    da_process,
    default_feasibility,
    imc_convert,
    lb_select,
    pc_convert,
)
from .runtime import (
    Catalogue,
    GatewayFunctionsStore,
    HostPool,
    InstanceState,
    Invocation,
    LbConfig,
    VnfInstance,
    VnfManager,
    VnfPackage,
)

__all__ = [
    "Catalogue",
    "ConversionPair",
    "DaConfig",
    "DaMode",
    "FeasibilityTable",
    "GatewayFunctionsStore",
    "HostPool",
    "InstanceState",
    "Invocation",
    "LbConfig",
    "RecordMeta",
    "VnfInstance",
    "VnfManager",
    "VnfPackage",
    "da_process",
    "default_feasibility",
    "imc_convert",
    "lb_select",
    "pc_convert",
]
