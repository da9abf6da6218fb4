"""Nuclear norm subspace identification."""

from ._core import (
    DimensionError,
    NumericalError,
    __version__,
    generate_data,
    identify,
    identify_output_only,
    prbs_input,
    select_order,
    simulate,
    vaf,
)

__all__ = [
    "DimensionError",
    "NumericalError",
    "__version__",
    "generate_data",
    "identify",
    "identify_output_only",
    "prbs_input",
    "select_order",
    "simulate",
    "vaf",
]
