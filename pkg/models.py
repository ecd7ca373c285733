import math
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(
        extra="forbid",
        use_enum_values=False,
    )


# Reaction networks

class Reaction(StrictModel):
    alpha: List[int]
    beta: List[int]
    rate: float = Field(gt=0)
    # Ordered reactant tuple (1-based species) overriding the ascending position
    monomial: Optional[List[int]] = None

    @model_validator(mode="after")
    def check_stoichiometry(self) -> "Reaction":
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta must have the same length")
        if any(a < 0 for a in self.alpha) or any(b < 0 for b in self.beta):
            raise ValueError("stoichiometric coefficients must be non-negative")
        if sum(self.alpha) < 1:
            raise ValueError("pure source reaction; encode sources in F_0 instead")
        if self.monomial is not None:
            if sorted(self.monomial) != list(self.ascending_reactants()):
                raise ValueError("monomial must be a permutation of the reactant multiset")
        return self

    @property
    def order(self) -> int:
        return sum(self.alpha)

    def ascending_reactants(self) -> Tuple[int, ...]:
        return tuple(
            species
            for species, count in enumerate(self.alpha, start=1)
            for _ in range(count)
        )

    def reactant_tuple(self) -> Tuple[int, ...]:
        if self.monomial is not None:
            return tuple(self.monomial)
        return self.ascending_reactants()


class ReactionNetwork(StrictModel):
    species: int = Field(ge=1)
    reactions: List[Reaction] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_lengths(self) -> "ReactionNetwork":
        for idx, reaction in enumerate(self.reactions):
            if len(reaction.alpha) != self.species:
                raise ValueError(
                    f"reaction {idx}: stoichiometric vectors must have length {self.species}"
                )
        return self

    @property
    def max_order(self) -> int:
        return max((r.order for r in self.reactions), default=0)


# Gierer-Meinhardt

class GMParams(StrictModel):
    D1: float = Field(gt=0)
    D2: float = Field(gt=0)
    mu1: float
    mu2: float
    c1: float = Field(ge=0)
    b1: float = 0.0
    b2: float = 0.0


GMParamName = Literal["D1", "D2", "mu1", "mu2", "c1", "b1", "b2"]


# Solvers

class CarlemanMode(str, Enum):
    FULL = "full"
    GROUPED = "grouped"


class SolverConfig(StrictModel):
    dt: float = Field(gt=0)
    t_final: float = Field(gt=0)
    record_every: int = Field(default=1, ge=1)
    blowup_cap: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def check_horizon(self) -> "SolverConfig":
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least dt")
        return self

    @property
    def full_steps(self) -> int:
        return int(math.floor(self.t_final / self.dt + 1e-9))

    @property
    def n_steps(self) -> int:
        """Full steps of dt, plus one shortened step when t_final is not a multiple of dt"""
        remainder = self.t_final - self.full_steps * self.dt
        return self.full_steps + (1 if remainder > 1e-9 * self.dt else 0)

    def step_end(self, step: int) -> float:
        return self.t_final if step == self.n_steps else step * self.dt


class LCHSConfig(StrictModel):
    beta: float = Field(gt=0, lt=1)
    K: float = Field(gt=0)
    nodes: int = Field(ge=2)
    s_nodes: int = Field(default=16, ge=2)
    t: float = Field(ge=0)
    panel_points: int = Field(default=8, ge=2)

    @model_validator(mode="after")
    def check_panels(self) -> "LCHSConfig":
        for name in ("nodes", "s_nodes"):
            if getattr(self, name) % self.panel_points:
                raise ValueError(f"{name} must be a multiple of panel_points={self.panel_points}")
        return self


# Sweeps

class SweepAxis(StrictModel):
    name: GMParamName
    values: List[float] = Field(min_length=1)

    @field_validator("values")
    @classmethod
    def finite_values(cls, values: List[float]) -> List[float]:
        if not all(math.isfinite(v) for v in values):
            raise ValueError("grid values must be finite")
        return values


class SweepSpec(StrictModel):
    model: Literal["gm", "gm-rescaled"] = "gm"
    axes: List[SweepAxis] = Field(min_length=1, max_length=2)
    fixed: GMParams
    k_orders: List[int] = Field(default_factory=lambda: [3], min_length=1)
    mode: CarlemanMode = CarlemanMode.GROUPED
    source_coupling: bool = False
    d2_ratio: Optional[float] = Field(default=None, gt=0)
    n: int = Field(default=50, ge=3)
    d: int = Field(default=1, ge=1, le=3)
    solver: SolverConfig = Field(
        default_factory=lambda: SolverConfig(dt=0.001, t_final=1.0, record_every=10)
    )

    @model_validator(mode="after")
    def check_axes(self) -> "SweepSpec":
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("sweep axes must be distinct parameters")
        if any(k < 1 for k in self.k_orders):
            raise ValueError("truncation orders must be positive")
        return self

    @property
    def n_cells(self) -> int:
        return math.prod(len(axis.values) for axis in self.axes)


# Rates

class ThermoContext(StrictModel):
    kBT: float = Field(gt=0)


class ZwanzigReference(str, Enum):
    THERMAL = "thermal"
    GROUNDSTATE = "groundstate"


# Resource estimation

class EncodingInputs(StrictModel):
    alpha_i: float = Field(ge=0)
    alpha_j_max: float = Field(ge=0)
    kBT: float = Field(gt=0)
    gamma: float = Field(gt=0)
    delta: float = Field(gt=0, le=1)
    epsilon: float = Field(gt=0, lt=1)
    stoich_sum: float = Field(default=1.0, ge=0)
    Delta: float = Field(default=1.0, gt=0)
    E0_estimate: float = 0.0
    max_deltaG: float = Field(default=1.0, gt=0)
    epsilon_be: Optional[float] = Field(default=None, gt=0)


class SystemFacts(StrictModel):
    alpha_M: float = Field(ge=0)
    t: float = Field(ge=0)
    g: float = Field(gt=0)
    beta: float = Field(gt=0, lt=1)
    S: int = Field(ge=1)
    varsigma: int = Field(ge=1)
    n_d: int = Field(ge=1)
    lcu_nodes: int = Field(default=256, ge=2)


class ResourceReport(StrictModel):
    tag: Literal["asymptotic-shape"] = "asymptotic-shape"
    alpha_DeltaG: float = Field(ge=0)
    alpha_exp: float = Field(ge=0)
    alpha_F: float = Field(ge=0)
    K_taylor: int = Field(ge=1)
    queries_DeltaG: float = Field(ge=0)
    queries_UC: float = Field(ge=0)
    queries_F: float = Field(ge=0)
    error_rescale: float = Field(ge=0)
    alpha_M: float = Field(ge=0)
    g: float = Field(ge=0)
    K_lchs: float = Field(ge=0)
    eps1: float = Field(ge=0)
    c_one_norm: float = Field(ge=0)
    queries_lchs: float = Field(ge=0)
    queries_total: float = Field(ge=0)
    combined_error: float = Field(ge=0)
    classical_cost_log10: float = Field(ge=0)
    classical_cost: Optional[float] = None
    inputs: EncodingInputs
    facts: SystemFacts

    def flat(self) -> Dict[str, object]:
        """Single CSV row: report fields followed by the echoed inputs"""
        row = self.model_dump(exclude={"inputs", "facts"})
        row.update({f"in_{k}": v for k, v in self.inputs.model_dump().items()})
        row.update({f"sys_{k}": v for k, v in self.facts.model_dump().items()})
        return row


# Run configuration files

class NetworkSection(StrictModel):
    model: Optional[Literal["gm", "gm-rescaled"]] = None
    gm: Optional[GMParams] = None
    species: Optional[int] = Field(default=None, ge=1)
    reactions: List[Reaction] = Field(default_factory=list)
    sources: Optional[List[float]] = None
    decay: Optional[List[float]] = None
    diffusion: Optional[List[float]] = None
    node_rates: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_definition(self) -> "NetworkSection":
        if self.model is not None:
            if self.gm is None:
                raise ValueError("named models require a [network.gm] parameter table")
            if self.species is not None or self.reactions:
                raise ValueError("give either a named model or explicit reactions, not both")
            return self
        if self.species is None:
            raise ValueError("species is required for explicit networks")
        for name in ("sources", "decay", "diffusion"):
            values = getattr(self, name)
            if values is not None and len(values) != self.species:
                raise ValueError(f"{name} must have length {self.species}")
        if self.diffusion is not None and any(d < 0 for d in self.diffusion):
            raise ValueError("diffusion coefficients must be non-negative")
        return self


class GridSection(StrictModel):
    n: int = Field(ge=3)
    d: int = Field(default=1, ge=1, le=3)


class CarlemanSection(StrictModel):
    k: List[int] = Field(default_factory=lambda: [2, 3], min_length=1)
    repr: CarlemanMode = CarlemanMode.GROUPED
    source_coupling: bool = False

    @field_validator("k")
    @classmethod
    def positive_orders(cls, k: List[int]) -> List[int]:
        if any(order < 1 for order in k):
            raise ValueError("truncation orders must be positive")
        return k


class InitialSection(StrictModel):
    profile: Literal["gm-sinusoid", "constant"] = "gm-sinusoid"
    value: float = 1.0


class OutputSection(StrictModel):
    trajectory: str = "trajectory.csv"
    errors: str = "err.csv"
    metrics: str = "metrics.csv"
    sweep: str = "sweep.csv"
    pattern: Optional[str] = None
    report: str = "report.csv"


class EstimateScenario(StrictModel):
    name: str
    inputs: EncodingInputs
    beta: float = Field(default=0.8, gt=0, lt=1)
    t: Optional[float] = Field(default=None, ge=0)
    k: int = Field(default=3, ge=1)
    lcu_nodes: int = Field(default=256, ge=2)


class RunConfig(StrictModel):
    network: Optional[NetworkSection] = None
    grid: Optional[GridSection] = None
    solver: Optional[SolverConfig] = None
    carleman: CarlemanSection = Field(default_factory=CarlemanSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    sweep: Optional[SweepSpec] = None
    scenarios: List[EstimateScenario] = Field(default_factory=list)
    output: OutputSection = Field(default_factory=OutputSection)
