"""Pump propagation in fiber and Sagnac-loop switching probabilities."""

from ._fibersim import (
    ConfigError,
    DomainError,
    FiberSpec,
    SolverError,
    __version__,
    dispersion_D,
    effective_area_um2,
    energy_span,
    kerr_coefficient,
    propagate,
    resolve_config,
    run,
    switch_curve,
    taylor_betas,
    v_number,
    xpm_coefficient,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "FiberSpec",
    "SolverError",
    "__version__",
    "dispersion_D",
    "effective_area_um2",
    "energy_span",
    "kerr_coefficient",
    "propagate",
    "resolve_config",
    "run",
    "switch_curve",
    "taylor_betas",
    "v_number",
    "xpm_coefficient",
]
