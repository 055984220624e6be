"""
Pydantic models for experiment configuration.
"""

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator
from pydantic_core import PydanticCustomError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OptimizerConfig(_Strict):
    """Descent settings shared by cell and epsilon solves."""

    max_iterations: int = Field(20000, ge=1)
    tolerance: float = Field(1e-8, gt=0, description="Scaled gradient-norm tolerance")
    shrink: float = Field(0.5, gt=0, lt=1, description="Backtracking factor")
    sufficient_decrease: float = Field(1e-4, gt=0, lt=1, description="Armijo constant")
    restarts: int = Field(1, ge=1, description="Starts for nonconvex integrands")
    seed: int = Field(0, ge=0)
    memory: int = Field(10, ge=0, description="Quasi-Newton memory; 0 is plain gradient descent")
    stall_tolerance: float = Field(1e-13, ge=0, description="Relative energy decrease over the stall window")
    stall_window: int = Field(25, ge=1)
    init_amplitude: float = Field(1.0, ge=0, description="Amplitude of random starts")
    record_history: bool = True


# Integrand specs, selected by "kind"

class PNormSpec(_Strict):
    kind: Literal["p_norm"] = "p_norm"
    p: float = Field(2.0, gt=1)


class LaminateSpec(_Strict):
    kind: Literal["laminate"] = "laminate"
    a: List[PositiveFloat] = Field(..., min_length=1, description="Phase coefficients")
    p: float = Field(2.0, gt=1)
    axis: int = Field(0, ge=0, le=1)
    modulated: bool = Field(False, description="Multiply by (1 + x_1/2), p = 2 only")


class DoubleWellSpec(_Strict):
    kind: Literal["double_well"] = "double_well"


class LinearProbeSpec(_Strict):
    kind: Literal["linear_probe"] = "linear_probe"
    phi: List[List[float]] = Field(..., min_length=1)
    p: float = Field(2.0, gt=1)


class WeightedSpec(_Strict):
    kind: Literal["weighted"] = "weighted"
    a: List[PositiveFloat] = Field(..., min_length=1)
    inner: Literal["p_norm", "double_well"] = "double_well"
    p: float = Field(2.0, gt=1)
    axis: int = Field(0, ge=0, le=1)


IntegrandSpec = Annotated[
    Union[PNormSpec, LaminateSpec, DoubleWellSpec, LinearProbeSpec, WeightedSpec],
    Field(discriminator="kind"),
]


class GridConfig(_Strict):
    dim: Literal[1, 2] = 1
    resolution: int = Field(256, ge=2, description="Cells per unit length")


class BinningConfig(_Strict):
    x_bins: PositiveInt = 4
    y_bins: PositiveInt = 16
    merge_radius: float = Field(1e-3, ge=0, description="Relative atom merge radius")
    tail_fraction: Optional[float] = Field(None, gt=0, le=1)


class GeneratorConfig(_Strict):
    """Source of the measure for the ym and check commands."""

    kind: Literal["minimizer", "example_single_scale", "example_double_scale", "periodic_cell"] = (
        "example_single_scale"
    )
    amplitude: float = Field(1.0, description="Corrector amplitude A in u_1 = A sin(2 pi y)/(2 pi)")
    z_resolution: PositiveInt = Field(32, description="Fast-scale quadrature points per axis")
    T: PositiveInt = Field(1, description="Cell size for periodic_cell")


class CheckerConfig(_Strict):
    residual_tol: float = Field(1e-6, gt=0)
    sequence_residual_tol: float = Field(
        0.05, gt=0, description="Residual per unit barycenter norm allowed for measures estimated from sequences"
    )
    slack_tol: float = Field(1e-2, gt=0)
    moment_cap: float = Field(1e6, gt=0)
    T_list: List[PositiveInt] = Field(default_factory=lambda: [1, 2], min_length=1)
    resolution: int = Field(32, ge=2, description="Cells per unit cell for f_hom solves")
    lattice_size: int = Field(3, ge=2)
    plateau_tol: float = Field(1e-3, gt=0)
    probes: int = Field(4, ge=0)
    optimizer: OptimizerConfig = Field(
        default_factory=lambda: OptimizerConfig(restarts=4, max_iterations=5000)
    )


class TrackingConfig(_Strict):
    enabled: bool = False
    tracking_uri: str = "mlruns"
    experiment_name: str = "two-scale-homogenization"


class LoggingConfig(_Strict):
    level: str = "INFO"


def _key_error(key: str, message: str, **context) -> PydanticCustomError:
    """Cross-field error that names the offending top-level key."""
    return PydanticCustomError("invalid_key", message, {"key": key, **context})


class ExperimentConfig(_Strict):
    """Fully resolved experiment description."""

    command: Literal["cell", "epsilon", "ym", "check", "gamma", "examples"] = "cell"
    integrand: IntegrandSpec = Field(default_factory=lambda: LaminateSpec(a=[1.0, 4.0]))
    grid: GridConfig = Field(default_factory=GridConfig)
    F: Union[float, List[float], List[List[float]]] = 1.0
    epsilon_list: List[PositiveFloat] = Field(default_factory=lambda: [1 / 16, 1 / 32, 1 / 64])
    T_list: List[PositiveInt] = Field(default_factory=lambda: [1, 2, 4])
    plateau_tol: float = Field(1e-3, gt=0)
    binning: BinningConfig = Field(default_factory=BinningConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    checker: CheckerConfig = Field(default_factory=CheckerConfig)
    seed: int = Field(0, ge=0)
    output_dir: str = "results"
    threads: PositiveInt = 1
    save_fields: bool = False
    tracking: TrackingConfig = Field(default_factory=TrackingConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @model_validator(mode="after")
    def _check_lists(self):
        if self.command in ("epsilon", "gamma") and not self.epsilon_list:
            raise _key_error("epsilon_list", "must be non-empty for the {command} command", command=self.command)
        if self.command in ("cell", "gamma") and not self.T_list:
            raise _key_error("T_list", "must be non-empty for the {command} command", command=self.command)
        for small, large in zip(self.T_list, self.T_list[1:]):
            if large <= small or large % small:
                raise _key_error("T_list", "must increase through integer multiples")
        return self
