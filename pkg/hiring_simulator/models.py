from typing import Annotated, Any, ClassVar, Dict, List, Literal, Optional, Type, TypeVar, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    TypeAdapter,
    field_validator,
    model_validator,
)

T = TypeVar("T", bound=BaseModel)

Tier = Literal["smoke", "standard", "full"]
TIER_ORDER: Dict[str, int] = {"smoke": 0, "standard": 1, "full": 2}
DP_TIER_LIMITS: Dict[str, Optional[int]] = {"smoke": 64, "standard": 500, "full": None}

DEFAULT_DENOMINATOR_BOUND = 2**64


def validate_model(model_class: Type[T], data: Any) -> T:
    """Helper function to validate data with a model class."""
    return model_class.model_validate(data)


# -- distributions ----------------------------------------------------------


class Uniform01Spec(BaseModel):
    """Uniform costs on [0, 1]."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform01"] = "uniform01"
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("params")
    @classmethod
    def no_params(cls, value: Dict[str, Any]) -> Dict[str, Any]:
        if value:
            raise ValueError(f"uniform01 takes no parameters, got {sorted(value)}")
        return value

    @property
    def label(self) -> str:
        return "uniform01"


class ExponentialParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rate: float = Field(default=1.0, gt=0)


class ExponentialSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["exponential"]
    params: ExponentialParams = Field(default_factory=ExponentialParams)

    @property
    def label(self) -> str:
        return f"exponential(rate={self.params.rate:g})"


class ParetoParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: float = Field(gt=1)
    scale: float = Field(default=1.0, gt=0)


class ParetoSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["pareto"]
    params: ParetoParams

    @property
    def label(self) -> str:
        return f"pareto(shape={self.params.shape:g},scale={self.params.scale:g})"


class EmpiricalParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    values: List[float] = Field(min_length=2)

    @field_validator("values")
    @classmethod
    def check_values(cls, value: List[float]) -> List[float]:
        if any(v < 0 for v in value):
            raise ValueError("empirical values must be nonnegative")
        if len(set(value)) < 2:
            raise ValueError("empirical values need at least two distinct points")
        return sorted(value)


class EmpiricalSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["empirical"]
    params: EmpiricalParams

    @property
    def label(self) -> str:
        return f"empirical({len(self.params.values)})"


DistributionSpec = Annotated[
    Union[Uniform01Spec, ExponentialSpec, ParetoSpec, EmpiricalSpec],
    Field(discriminator="kind"),
]
DistributionSpecModel: TypeAdapter[DistributionSpec] = TypeAdapter(DistributionSpec)


# -- policies ---------------------------------------------------------------


class Alg1Spec(BaseModel):
    """Threshold halving for uniform costs."""

    model_config = ConfigDict(extra="forbid")

    policy: Literal["alg1"]

    @property
    def label(self) -> str:
        return "alg1"


class Alg2Spec(BaseModel):
    """Repeated halving with contract scale c for uniform costs."""

    model_config = ConfigDict(extra="forbid")

    policy: Literal["alg2"]
    c: float = Field(default=0.75, gt=0)

    @property
    def label(self) -> str:
        return f"alg2(c={self.c:g})"


class Alg3Spec(BaseModel):
    """Quantile thresholds for known distributions."""

    model_config = ConfigDict(extra="forbid")

    policy: Literal["alg3"]

    @property
    def label(self) -> str:
        return "alg3"


class Alg4Spec(BaseModel):
    """Sample-then-wait thresholds for unknown distributions."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    policy: Literal["alg4"]
    lam: int = Field(default=3, alias="lambda", gt=1)

    @property
    def label(self) -> str:
        return f"alg4(lambda={self.lam})"


class Alg5Spec(BaseModel):
    """Optimal sequential employment."""

    model_config = ConfigDict(extra="forbid")

    policy: Literal["alg5"]

    @property
    def label(self) -> str:
        return "alg5"


class DpOptimalSpec(BaseModel):
    """Optimal online policy from the exact dynamic program (uniform costs)."""

    model_config = ConfigDict(extra="forbid")

    policy: Literal["dp_optimal"]
    denominator_bound: Optional[PositiveInt] = DEFAULT_DENOMINATOR_BOUND

    @property
    def label(self) -> str:
        return "dp_optimal"


PolicySpec = Annotated[
    Union[Alg1Spec, Alg2Spec, Alg3Spec, Alg4Spec, Alg5Spec, DpOptimalSpec],
    Field(discriminator="policy"),
]
PolicySpecModel: TypeAdapter[PolicySpec] = TypeAdapter(PolicySpec)

WRAPPABLE_POLICIES = ("alg1", "alg2", "alg3", "alg4")

# thresholds start at τ = 1, so costs must lie in [0, 1]
UNIT_INTERVAL_POLICIES = ("alg1", "alg2")


def within_unit_interval(distribution: DistributionSpec) -> bool:
    match distribution:
        case Uniform01Spec():
            return True
        case EmpiricalSpec():
            return distribution.params.values[-1] <= 1.0
        case _:
            return False


def parse_policy_spec(data: Union[str, bytes, Dict[str, Any]]) -> PolicySpec:
    """
    Parse a policy description into the matching spec model.

    Args:
        data: JSON text or an already decoded mapping

    Returns:
        Pydantic model
    """
    if not data:
        raise ValueError("Empty policy description")
    if isinstance(data, (str, bytes)):
        return PolicySpecModel.validate_json(data)
    return PolicySpecModel.validate_python(data)


def parse_distribution_spec(data: Union[str, bytes, Dict[str, Any]]) -> DistributionSpec:
    """Parse a distribution description into the matching spec model."""
    if isinstance(data, (str, bytes)):
        return DistributionSpecModel.validate_json(data)
    return DistributionSpecModel.validate_python(data)


# -- experiments ------------------------------------------------------------


class ExperimentConfig(BaseModel):
    """A fully validated simulation experiment."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    policy: PolicySpec
    distribution: DistributionSpec = Field(default_factory=Uniform01Spec)
    n: List[PositiveInt] = Field(min_length=1)
    reps: PositiveInt = 1000
    seed: int = Field(default=0, ge=0, lt=2**64)
    out: Optional[str] = None
    truncate_at_n: bool = Field(default=False, alias="truncate-at-n")
    unknown_n: bool = Field(default=False, alias="unknown-n")
    two_concurrent: bool = Field(default=False, alias="two-concurrent")
    tier: Tier = "standard"
    workers: PositiveInt = 1

    @field_validator("n", mode="before")
    @classmethod
    def listify_n(cls, value: Any) -> Any:
        """Accept a single horizon as well as a list."""
        if isinstance(value, (int, str)):
            return [value]
        return value

    @model_validator(mode="after")
    def check_combinations(self) -> "ExperimentConfig":
        problems = []
        if self.unknown_n and not self.two_concurrent:
            problems.append("unknown-n requires two-concurrent")
        if self.two_concurrent and self.policy.policy not in WRAPPABLE_POLICIES:
            problems.append(
                f"two-concurrent applies to {', '.join(WRAPPABLE_POLICIES)}, "
                f"not {self.policy.policy}"
            )
        if self.policy.policy in UNIT_INTERVAL_POLICIES and not within_unit_interval(
            self.distribution
        ):
            problems.append(
                f"{self.policy.policy} needs costs in [0, 1], "
                f"{self.distribution.label} is not supported on [0, 1]"
            )
        if self.policy.policy == "dp_optimal":
            if self.distribution.kind != "uniform01":
                problems.append("dp_optimal is defined for uniform01 costs only")
            limit = DP_TIER_LIMITS[self.tier]
            if limit is not None and max(self.n) > limit:
                problems.append(
                    f"dp_optimal horizon {max(self.n)} exceeds the {self.tier} tier limit {limit}"
                )
        if problems:
            raise ValueError("; ".join(problems))
        return self


# -- markov chains ----------------------------------------------------------


class ChainSpec(BaseModel):
    """
    A threshold-evolution chain.

    ``M_hat`` and ``N_hat`` are the homogeneous chains with parameter p;
    ``M`` and ``N`` are the inhomogeneous chains of the uniform law, with
    contract scale ``c`` for ``N``.
    """

    model_config = ConfigDict(extra="forbid")

    PROBABILITY_FLOORS: ClassVar[Dict[str, float]] = {"M_hat": 0.5, "N_hat": 1.0 / 3.0}

    family: Literal["M_hat", "N_hat", "M", "N"]
    p: Optional[float] = None
    k: PositiveInt
    c: float = Field(default=0.75, gt=0)

    @model_validator(mode="after")
    def check_probability(self) -> "ChainSpec":
        floor = self.PROBABILITY_FLOORS.get(self.family)
        if floor is None:
            return self
        if self.p is None:
            raise ValueError(f"{self.family} needs a transition probability p")
        if not floor < self.p <= 1.0:
            raise ValueError(f"{self.family} needs {floor:.4g} < p <= 1, got p={self.p}")
        return self


# -- reports ----------------------------------------------------------------


class SimulationReport(BaseModel):
    """Aggregated paired statistics of one batch of episodes."""

    model_config = ConfigDict(frozen=True)

    CSV_HEADER: ClassVar[List[str]] = [
        "policy",
        "n",
        "dist",
        "reps",
        "seed",
        "mean_cost",
        "stderr",
        "opt_mean",
        "opt_stderr",
        "ratio",
        "max_concurrency",
        "mean_hires",
    ]

    policy: str
    distribution: str
    n: int
    replications: int
    seed: int
    mean_cost: float
    stderr_cost: Optional[float]
    mean_opt: float
    stderr_opt: Optional[float]
    ratio_of_means: float
    ratio_stderr: Optional[float]
    max_concurrency: int
    mean_hires: float
    truncate_at_n: bool = False

    def csv_row(self) -> List[str]:
        return [
            self.policy,
            str(self.n),
            self.distribution,
            str(self.replications),
            str(self.seed),
            _fmt(self.mean_cost),
            _fmt(self.stderr_cost),
            _fmt(self.mean_opt),
            _fmt(self.stderr_opt),
            _fmt(self.ratio_of_means),
            str(self.max_concurrency),
            _fmt(self.mean_hires),
        ]


class BoundReport(BaseModel):
    """Outcome of one numerical check of a bound."""

    model_config = ConfigDict(frozen=True)

    CSV_HEADER: ClassVar[List[str]] = ["name", "n", "value", "bound", "satisfied"]

    name: str
    n: Optional[int] = None
    value: float
    bound: float
    satisfied: bool

    def csv_row(self) -> List[str]:
        return [
            self.name,
            "" if self.n is None else str(self.n),
            _fmt(self.value),
            _fmt(self.bound),
            "true" if self.satisfied else "false",
        ]


class ChainStats(BaseModel):
    """Monte Carlo averages of one chain family, state by state."""

    model_config = ConfigDict(frozen=True)

    family: str
    p: Optional[float]
    k: int
    reps: int
    state_labels: List[str]
    visits_mean: List[float]
    visits_stderr: List[float]
    transitions_mean: float
    transitions_stderr: float
    ab_transitions_mean: Optional[float] = None
    ab_transitions_stderr: Optional[float] = None
    bj_transitions_mean: Optional[List[float]] = None

    def visits_of(self, label: str) -> float:
        return self.visits_mean[self.state_labels.index(label)]

    def stderr_of(self, label: str) -> float:
        return self.visits_stderr[self.state_labels.index(label)]


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "nan"
    return repr(float(value))
