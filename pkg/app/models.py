from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from math import log10, pi
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from sqlmodel import SQLModel, Field, Relationship

ComplexArray = NDArray[np.complex128]
RealArray = NDArray[np.float64]


class ScenarioId(str, Enum):
    FIG4 = "fig4"
    FIG5 = "fig5"
    FIG6 = "fig6"
    FIG7 = "fig7"
    FIG8 = "fig8"
    CUSTOM = "custom"


class SweepVariable(str, Enum):
    """Sweepable SimConfig fields; values double as the field names."""

    MU = "mu"
    K_ID = "k_id"
    K_EH = "k_eh"
    B_EH = "b_eh"
    B_ID = "b_id"


class BeamformerVariant(str, Enum):
    FULL = "full"
    REDUCED = "reduced"


# Persistent models (stored in database)
class ExperimentRun(SQLModel, table=True):
    __tablename__ = "experiment_runs"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    scenario: ScenarioId = Field(description="Scenario preset the run was built from")
    sweep_name: SweepVariable
    seed: int
    trials: int = Field(ge=1)
    spec_json: str = Field(description="Validated ExperimentSpec as JSON")
    created_at: datetime = Field(default_factory=datetime.utcnow)

    # Relationships
    rows: List["ResultRow"] = Relationship(back_populates="run")


class ResultRow(SQLModel, table=True):
    __tablename__ = "result_rows"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    run_id: int = Field(foreign_key="experiment_runs.id")
    scenario: str = Field(max_length=20)
    sweep_name: str = Field(max_length=20)
    sweep_value: float
    trials: int
    metric: str = Field(max_length=60)
    mean: float
    stderr: float

    # Relationships
    run: ExperimentRun = Relationship(back_populates="rows")


# Non-persistent schemas (for validation, configuration and reports)
class SimConfig(SQLModel, table=False):
    """All scalars of one simulated scenario.

    Noise is normalized to unit variance inside the simulator; the link budget is folded
    into ``effective_snr``.
    """

    m: int = Field(default=4, ge=2, description="Transmit antennas at the base station")
    k_id: int = Field(default=50, ge=1, description="Information-decoding users")
    k_eh: int = Field(default=10, ge=1, description="Energy-harvesting users")
    power_w: float = Field(default=1.0, gt=0, description="Total transmit power in watts")
    noise_power_w: float = Field(default=1e-8, gt=0, description="Receiver noise power in watts")
    path_loss_db: float = Field(default=70.0, description="Attenuation from the base station in dB")
    zeta: float = Field(default=1.0, gt=0, le=1, description="Energy conversion efficiency")
    epsilon: float = Field(default=0.3, ge=0, lt=1, description="Semi-orthogonality threshold")
    mu: float = Field(default=0.7, gt=0, le=1, description="Target SINR ratio against ZF")
    delta_d: float = Field(default=pi / 180, gt=0, description="Unit steering angle in radians")
    b_id: int = Field(default=0, ge=0, le=16, description="Feedback bits per ID user, 0 = perfect CSIT")
    b_eh: int = Field(default=0, ge=0, le=16, description="Feedback bits per EH user, 0 = perfect CSIT")
    seed: int = Field(default=2015, ge=0)

    @property
    def effective_snr(self) -> float:
        return self.power_w * 10 ** (-self.path_loss_db / 10) / self.noise_power_w

    @property
    def effective_snr_db(self) -> float:
        return 10 * log10(self.effective_snr)


class NumericSettings(SQLModel, table=False):
    hermitian_rtol: float = Field(default=1e-10, gt=0)
    rank_rtol: float = Field(default=1e-10, gt=0)
    zero_angle_tol: float = Field(default=1e-12, gt=0)
    degenerate_tol: float = Field(default=1e-12, gt=0)
    feasibility_tol: float = Field(default=1e-9, ge=0)


class OracleConfig(SQLModel, table=False):
    """Settings of the random-restart ascent used as the near-optimal baseline."""

    restarts: int = Field(default=64, ge=1)
    stages: int = Field(default=8, ge=1, description="Penalty annealing stages per restart")
    steps: int = Field(default=40, ge=1, description="Ascent steps per stage")
    step_size: float = Field(default=0.2, gt=0, description="Initial step, roughly an angle in radians")
    step_growth: float = Field(default=1.2, ge=1, description="Step multiplier after an accepted step")
    step_decay: float = Field(default=0.5, gt=0, lt=1, description="Step multiplier after a rejected step")
    min_step: float = Field(default=1e-7, gt=0)
    penalty_start: float = Field(default=1.0, gt=0, description="Initial weight of the SINR margin penalty")
    penalty_growth: float = Field(default=4.0, ge=1, description="Penalty multiplier between stages")
    margin_buffer: float = Field(default=1.0, gt=0, description="Penalized margin band, shrinks as 1/penalty")
    perturbation: float = Field(default=0.5, ge=0, description="Isotropic perturbation of restart points")
    bisection_steps: int = Field(default=40, ge=1)
    seed: int = Field(default=7, ge=0)


class AnalysisInputs(SQLModel, table=False):
    """Scenario scalars plus numerical settings for the closed-form analysis."""

    m: int = Field(default=4, ge=2)
    k_id: int = Field(default=50, ge=1)
    k_eh: int = Field(default=10, ge=1)
    epsilon: float = Field(default=0.3, ge=0, le=1)
    mu: float = Field(default=0.7, gt=0, le=1)
    rho: float = Field(default=10.0 / 3, ge=0, description="Per-beam transmit SNR")
    set_size: Optional[int] = Field(default=None, ge=1, description="|S|; derived from SUS statistics if unset")
    b_eh: int = Field(default=0, ge=0)
    zeta: float = Field(default=1.0, gt=0, le=1)
    quad_rtol: float = Field(default=1e-8, gt=0)
    quad_tail: float = Field(default=1e-10, gt=0, lt=1e-3, description="Chi-square mass left beyond the upper limit")
    quad_initial_nodes: int = Field(default=65, ge=5)
    quad_max_nodes: int = Field(default=2**20 + 1, ge=5)
    wishart_samples: int = Field(default=10_000, ge=1000)
    wishart_seed: int = Field(default=11, ge=0)


class ExperimentSpec(SQLModel, table=False):
    scenario: ScenarioId = Field(default=ScenarioId.CUSTOM)
    system: SimConfig = Field(default_factory=SimConfig)
    sweep_name: SweepVariable = Field(default=SweepVariable.MU)
    sweep_values: List[float] = Field(min_length=1)
    trials: int = Field(default=500, ge=1)
    parallel: int = Field(default=1, ge=1)
    output: str = Field(default="results")
    oracle: bool = Field(default=False, description="Run the oracle baseline where M <= 4 and |S| <= 4")
    oracle_settings: OracleConfig = Field(default_factory=OracleConfig)
    wishart_samples: int = Field(default=10_000, ge=1000)


class MetricRow(SQLModel, table=False):
    """One row of the result table; field order is the CSV column order."""

    scenario: str
    sweep_name: str
    sweep_value: float
    trials: int = Field(ge=0)
    metric: str
    mean: float
    stderr: float = Field(ge=0)


class SusStatistics(SQLModel, table=False):
    step_probabilities: List[float] = Field(description="Pr[k in U_i] for steps i = 1..M")
    expected_candidates: List[float] = Field(description="Expected |U_i| for steps i = 1..M")
    expected_set_size: int = Field(ge=1)


class EhBoundReport(SQLModel, table=False):
    lambda_max_mean: float
    frob_mean: float
    set_size: int
    channel_norm_mean: float
    g_mu: float
    sincos: float
    f_mu: float
    joint_lower: float = Field(description="Lower bound on the expected EH of one joint beam")
    zf_expected: float = Field(description="Expected EH of one ZF beam")
    delta_eh: float = Field(description="Total expected gain over ZF across |S| beams")
    joint_lower_total: float
    zf_expected_total: float


class AsymptoticRates(SQLModel, table=False):
    sum_rate_asymptote: float
    zf_sum_rate_asymptote: float
    per_stream_loss: float
    rate_loss_asymptote: float


class LimitedFeedbackReport(SQLModel, table=False):
    delta_d: float
    lambda_hat_mean: float
    fb_lower: float
    delta_q: float
    fb_lower_total: float
    delta_q_total: float


# Array carriers shared between the numerical services
@dataclass(frozen=True)
class EllipsoidDecomposition:
    eigenvalues: RealArray
    eigenvectors: ComplexArray
    rank: int

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def top_eigenvector(self) -> ComplexArray:
        return self.eigenvectors[:, -1]


@dataclass(frozen=True)
class NullSpaceBasis:
    basis: ComplexArray
    rank: int
    rank_deficient: bool = False

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class ChannelSet:
    h: ComplexArray
    g: ComplexArray
    effective_snr: float


@dataclass(frozen=True)
class QuantizedChannelSet:
    h_hat: ComplexArray
    g_hat: ComplexArray
    h_magnitudes: RealArray
    g_magnitudes: RealArray

    @property
    def h_estimate(self) -> ComplexArray:
        """CQI times CDI, the ID channels as seen by the base station."""
        return self.h_magnitudes[:, None] * self.h_hat

    @property
    def g_estimate(self) -> ComplexArray:
        return self.g_magnitudes[:, None] * self.g_hat


@dataclass(frozen=True)
class UserSelection:
    indices: Tuple[int, ...]
    epsilon: float
    candidate_sizes: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class ZfBeamformers:
    w: ComplexArray
    sinr_zf: RealArray
    rho: float


@dataclass
class AlgorithmState:
    t: int
    r: int
    w_eh: ComplexArray
    boundary: List[int] = field(default_factory=list)
    gradients: RealArray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class JointBeamformers:
    w: ComplexArray
    rho: float
    gamma: RealArray
    sinr: RealArray
    sinr_zf: RealArray
    w_zf: ComplexArray
    variant: BeamformerVariant = BeamformerVariant.FULL
    iterations_used: int = 0
    steering_log: Tuple[Tuple[float, ...], ...] = ()
    boundary: Tuple[int, ...] = ()
    w_eh: Optional[ComplexArray] = None
    energy_trace: Tuple[float, ...] = ()

    @property
    def beam_count(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class OracleResult:
    w: ComplexArray
    eh_value: float
    best_trace: Tuple[float, ...]
    feasible_restarts: int


@dataclass(frozen=True)
class TrialRecord:
    point_index: int
    trial_index: int
    selection: UserSelection
    sinr: RealArray
    gamma: RealArray
    sinr_zf: RealArray
    sum_rate: float
    sum_rate_zf: float
    harvested: float
    harvested_zf: float
    harvested_reduced: float
    harvested_dedicated: float
    steering_cos2: float
    channel_norm: float
    iterations: int
    oracle_value: Optional[float] = None

    @property
    def set_size(self) -> int:
        return self.selection.size
