"""Seeded Monte Carlo sweeps joining simulation with analysis predictions."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, List, Optional

import numpy as np

from app import analysis_service
from app.beamformer_service import add_dedicated_eh_beam, joint_beamform
from app.channel_service import generate_channels, quantize_all
from app.config_service import point_config
from app.metrics_service import (
    harvested_energy,
    nats_to_bits,
    sinr_all,
    sinr_gap_db,
    steering_cos2,
    sum_rate,
)
from app.models import (
    AnalysisInputs,
    BeamformerVariant,
    ExperimentSpec,
    MetricRow,
    OracleConfig,
    SimConfig,
    TrialRecord,
)
from app.oracle_service import oracle_solve
from app.scheduler_service import sus_select

logger = logging.getLogger(__name__)

ORACLE_MAX_ANTENNAS = 4
ORACLE_MAX_USERS = 4


def run_trial(
    cfg: SimConfig, point_index: int, trial_index: int, oracle: Optional[OracleConfig] = None
) -> TrialRecord:
    """One channel draw: schedule, beamform every variant and evaluate on the true channels.

    The base station works on the fed-back channels (exact when no feedback bits are set);
    SINR and energy are always evaluated on the true channels.
    """
    channels = generate_channels(cfg, (point_index, trial_index))
    quantized = quantize_all(channels, cfg)
    h_bs = channels.h if cfg.b_id == 0 else quantized.h_estimate
    g_bs = channels.g if cfg.b_eh == 0 else quantized.g_estimate

    selection = sus_select(h_bs, cfg.epsilon, cfg.m)
    users = list(selection.indices)
    h_s_bs = h_bs[users]
    h_s = channels.h[users]

    joint = joint_beamform(h_s_bs, g_bs, cfg, BeamformerVariant.FULL)
    reduced = joint_beamform(h_s_bs, g_bs, cfg, BeamformerVariant.REDUCED)
    rho = joint.rho
    sinr = sinr_all(h_s, joint.w, rho)
    sinr_zf = sinr_all(h_s, joint.w_zf, rho)

    harvested = harvested_energy(channels.g, joint.w, rho, cfg.zeta)
    if selection.size < cfg.m:
        dedicated = add_dedicated_eh_beam(joint, h_s_bs, g_bs)
        harvested_dedicated = harvested_energy(channels.g, dedicated.w, dedicated.rho, cfg.zeta)
    else:
        # No spare dimension: the variant degenerates to the joint beams.
        harvested_dedicated = harvested

    oracle_value = None
    if oracle is not None and cfg.m <= ORACLE_MAX_ANTENNAS and selection.size <= ORACLE_MAX_USERS:
        result = oracle_solve(h_s_bs, g_bs, rho, cfg.mu, oracle, warm_starts=(joint.w, reduced.w))
        oracle_value = harvested_energy(channels.g, result.w, rho, cfg.zeta)

    return TrialRecord(
        point_index=point_index,
        trial_index=trial_index,
        selection=selection,
        sinr=sinr,
        gamma=joint.gamma,
        sinr_zf=sinr_zf,
        sum_rate=sum_rate(sinr),
        sum_rate_zf=sum_rate(sinr_zf),
        harvested=harvested,
        harvested_zf=harvested_energy(channels.g, joint.w_zf, rho, cfg.zeta),
        harvested_reduced=harvested_energy(channels.g, reduced.w, rho, cfg.zeta),
        harvested_dedicated=harvested_dedicated,
        steering_cos2=float(np.mean(steering_cos2(joint.w_zf, joint.w))),
        channel_norm=float(np.mean(np.sum(np.abs(h_s) ** 2, axis=1))),
        iterations=joint.iterations_used,
        oracle_value=oracle_value,
    )


def _run_trial_job(job: tuple[SimConfig, int, int, Optional[OracleConfig]]) -> TrialRecord:
    return run_trial(*job)


def mean_and_stderr(values: Iterable[float]) -> tuple[float, float]:
    samples = np.asarray(list(values), dtype=np.float64)
    if samples.size < 2:
        return float(samples.mean()), 0.0
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(samples.size))


def trial_metrics(record: TrialRecord) -> dict[str, float]:
    """Per-trial values of every simulated metric, keyed by CSV metric name."""
    metrics = {
        "set_size": float(record.set_size),
        "sum_rate_bits": nats_to_bits(record.sum_rate),
        "sum_rate_zf_bits": nats_to_bits(record.sum_rate_zf),
        "rate_loss_bits": nats_to_bits(record.sum_rate_zf - record.sum_rate),
        "target_sinr_db": float(np.mean(10 * np.log10(record.gamma))),
        "received_sinr_db": float(np.mean(10 * np.log10(record.sinr))),
        "sinr_gap_db": float(np.mean(sinr_gap_db(record.sinr, record.gamma))),
        "min_sinr_ratio": float(np.min(record.sinr / record.sinr_zf)),
        "harvested_joint": record.harvested,
        "harvested_zf": record.harvested_zf,
        "harvested_reduced": record.harvested_reduced,
        "harvested_dedicated": record.harvested_dedicated,
        "harvested_per_beam": record.harvested / record.set_size,
        "steering_cos2": record.steering_cos2,
        "selected_channel_norm": record.channel_norm,
        "iterations": float(record.iterations),
    }
    if record.oracle_value is not None:
        metrics["harvested_oracle"] = record.oracle_value
        metrics["joint_to_oracle"] = record.harvested / record.oracle_value if record.oracle_value > 0 else 1.0
    return metrics


def analysis_inputs(cfg: SimConfig, wishart_samples: int = 10_000) -> AnalysisInputs:
    set_size = analysis_service.sus_statistics(cfg.m, cfg.epsilon, cfg.k_id).expected_set_size
    return AnalysisInputs(
        m=cfg.m,
        k_id=cfg.k_id,
        k_eh=cfg.k_eh,
        epsilon=cfg.epsilon,
        mu=cfg.mu,
        rho=cfg.effective_snr / set_size,
        set_size=set_size,
        b_eh=cfg.b_eh,
        zeta=cfg.zeta,
        wishart_samples=wishart_samples,
        wishart_seed=cfg.seed,
    )


def analysis_metrics(cfg: SimConfig, wishart_samples: int = 10_000) -> dict[str, float]:
    """Closed-form predictions for one configuration, keyed by CSV metric name."""
    inputs = analysis_inputs(cfg, wishart_samples)
    rho, set_size = inputs.rho, inputs.set_size or 1
    bounds = analysis_service.eh_bounds(inputs)
    metrics = {
        "analysis_set_size": float(set_size),
        "analysis_sum_rate_bits": nats_to_bits(
            analysis_service.expected_sum_rate(cfg.mu, rho, cfg.m, cfg.epsilon, cfg.k_id, inputs)
        ),
        "analysis_rate_loss_bits": nats_to_bits(
            analysis_service.rate_loss(cfg.mu, rho, cfg.m, cfg.epsilon, cfg.k_id, inputs=inputs)
        ),
        "analysis_rate_loss_high_snr_bits": nats_to_bits(
            analysis_service.rate_loss(cfg.mu, rho, cfg.m, cfg.epsilon, cfg.k_id, high_snr=True, inputs=inputs)
        ),
        "analysis_g_mu": bounds.g_mu,
        "analysis_joint_lower_per_beam": bounds.joint_lower,
        "analysis_zf_per_beam": bounds.zf_expected,
        "analysis_joint_lower_total": bounds.joint_lower_total,
        "analysis_zf_total": bounds.zf_expected_total,
        "analysis_delta_eh": bounds.delta_eh,
        "analysis_lambda_max": bounds.lambda_max_mean,
    }
    if cfg.k_id >= 2:
        asymptotes = analysis_service.asymptotic_rates(cfg.k_id, cfg.mu, rho, cfg.m)
        metrics["analysis_asymptotic_sum_rate_bits"] = nats_to_bits(asymptotes.sum_rate_asymptote)
        metrics["analysis_asymptotic_rate_loss_bits"] = nats_to_bits(asymptotes.rate_loss_asymptote)
    if cfg.b_eh > 0:
        feedback = analysis_service.limited_feedback_analysis(
            cfg.b_eh, cfg.m, cfg.k_eh, cfg.mu, rho, set_size, bounds.lambda_max_mean, bounds.channel_norm_mean
        )
        metrics["analysis_delta_d"] = feedback.delta_d
        metrics["analysis_fb_lower_total"] = cfg.zeta * feedback.fb_lower_total
        metrics["analysis_delta_q_total"] = cfg.zeta * feedback.delta_q_total
    return metrics


class ExperimentService:
    """Runs experiment specs point by point."""

    @staticmethod
    def run_point(spec: ExperimentSpec, point_index: int, cfg: SimConfig) -> List[TrialRecord]:
        """All trials of one sweep point, in trial order whatever the parallelism."""
        oracle = spec.oracle_settings if spec.oracle else None
        jobs = [(cfg, point_index, trial, oracle) for trial in range(spec.trials)]
        if spec.parallel == 1:
            return [_run_trial_job(job) for job in jobs]
        chunksize = max(1, spec.trials // (4 * spec.parallel))
        with ProcessPoolExecutor(max_workers=spec.parallel) as pool:
            return list(pool.map(_run_trial_job, jobs, chunksize=chunksize))

    @staticmethod
    def point_rows(spec: ExperimentSpec, value: float, records: List[TrialRecord]) -> List[MetricRow]:
        collected: dict[str, list[float]] = {}
        for record in sorted(records, key=lambda r: r.trial_index):
            for name, metric_value in trial_metrics(record).items():
                collected.setdefault(name, []).append(metric_value)
        rows = []
        for name, values in collected.items():
            mean, stderr = mean_and_stderr(values)
            rows.append(ExperimentService._row(spec, value, len(values), name, mean, stderr))
        return rows

    @staticmethod
    def _row(spec: ExperimentSpec, value: float, trials: int, metric: str, mean: float, stderr: float) -> MetricRow:
        return MetricRow(
            scenario=spec.scenario.value,
            sweep_name=spec.sweep_name.value,
            sweep_value=value,
            trials=trials,
            metric=metric,
            mean=mean,
            stderr=stderr,
        )

    @staticmethod
    def analysis_rows(spec: ExperimentSpec, value: float, cfg: SimConfig) -> List[MetricRow]:
        return [
            ExperimentService._row(spec, value, 0, name, prediction, 0.0)
            for name, prediction in analysis_metrics(cfg, spec.wishart_samples).items()
        ]

    @staticmethod
    def run_experiment(spec: ExperimentSpec) -> List[MetricRow]:
        """Simulated mean/stderr rows followed by analysis rows for every sweep point.

        Trial seeds are ``(seed, point index, trial index)``, so results do not depend on
        the parallelism degree and appending sweep points leaves earlier points unchanged.
        """
        rows: List[MetricRow] = []
        for point_index, value in enumerate(spec.sweep_values):
            cfg = point_config(spec, value)
            logger.info(
                f"{spec.scenario.value}: {spec.sweep_name.value}={value} "
                f"({point_index + 1}/{len(spec.sweep_values)}), {spec.trials} trials"
            )
            records = ExperimentService.run_point(spec, point_index, cfg)
            rows.extend(ExperimentService.point_rows(spec, value, records))
            rows.extend(ExperimentService.analysis_rows(spec, value, cfg))
        logger.info(f"{spec.scenario.value}: finished with {len(rows)} rows")
        return rows

    @staticmethod
    def analyze(spec: ExperimentSpec) -> List[MetricRow]:
        """Analysis-only predictions for every sweep point."""
        rows: List[MetricRow] = []
        for value in spec.sweep_values:
            rows.extend(ExperimentService.analysis_rows(spec, value, point_config(spec, value)))
        return rows
