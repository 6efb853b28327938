"""Simulation designs for the block-sparsity estimator and the recovery sensitivity study."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from blocksketch.common.config import Config
from blocksketch.common.errors import BlockSketchError, ConfigError
from blocksketch.common.pool import map_ordered
from blocksketch.estimation import (
    SparsityEstimate,
    estimate_block_sparsity,
    ks_normality,
    studentized_statistic,
)
from blocksketch.recovery import (
    MrePoint,
    RecoveryConfig,
    cosamp_block,
    default_k_grid,
    gaussian_matrix,
    mre_curve,
)
from blocksketch.signal import (
    ComplexBlockSignal,
    block_sparsity_measure,
    make_harmonic_signal,
    make_random_block_signal,
    to_real_block,
)
from blocksketch.sketching import NoiseFamily, NoiseModel, sketch_pair
from blocksketch.stable import RngStream

logger = logging.getLogger(__name__)

DESIGNS = ("a", "b", "c", "d", "e", "f", "g", "recovery", "mre")
RECOVERY_DESIGNS = ("recovery", "mre")


def _load_reference(filename: str) -> dict:
    path = Config.references_dir / filename
    return json.loads(path.read_text())


def gamma_preset(alpha: float) -> Optional[float]:
    presets = _load_reference("designs.json").get("gamma_presets", {})
    value = presets.get(repr(float(alpha)))
    return float(value) if value is not None else None


@dataclass(frozen=True)
class ExperimentSpec:
    design: str
    N: int
    d: int
    block_sparsity: Tuple[int, ...]
    alpha: float
    gamma: float
    sigma: float
    m1: int
    m_alpha: int
    replications: int
    beta: float
    seed: int
    noise_family: NoiseFamily = NoiseFamily.GAUSSIAN
    sigma_sweep: Optional[Tuple[float, ...]] = None
    # recovery study
    m: Optional[int] = None
    trials: Optional[int] = None
    k_grid: Optional[Tuple[int, ...]] = None
    example_k: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "noise_family", NoiseFamily(self.noise_family))
        object.__setattr__(self, "block_sparsity", tuple(int(k) for k in self.block_sparsity))
        if self.sigma_sweep is not None:
            object.__setattr__(self, "sigma_sweep", tuple(float(s) for s in self.sigma_sweep))
        if self.k_grid is not None:
            object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
        object.__setattr__(self, "example_k", tuple(int(k) for k in self.example_k))
        self.validate()

    def validate(self) -> None:
        if self.design not in DESIGNS:
            raise ConfigError(f"unknown design {self.design!r}; choose from {', '.join(DESIGNS)}")
        if self.N < 1 or self.d < 1 or self.N % self.d:
            raise ConfigError(f"N={self.N} must be a positive multiple of d={self.d}")
        if not self.block_sparsity:
            raise ConfigError("at least one block sparsity is required")
        for k in self.block_sparsity:
            if k < 1 or k * self.d > self.N:
                raise ConfigError(f"block sparsity {k} with d={self.d} does not fit in N={self.N}")
        if not (0.0 < self.alpha <= 2.0) or self.alpha == 1.0:
            raise ConfigError(f"alpha must lie in (0, 2] and differ from 1, got {self.alpha}")
        if not self.gamma > 0.0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        for s in self.sigmas():
            if s < 0.0:
                raise ConfigError(f"sigma must be >= 0, got {s}")
        if self.m1 < 1 or self.m_alpha < 1:
            raise ConfigError("m1 and m_alpha must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.design in RECOVERY_DESIGNS:
            n = self.N // self.d
            if not self.m or self.m < 1:
                raise ConfigError("recovery designs need a positive number of rows m")
            if not self.trials or self.trials < 1:
                raise ConfigError("recovery designs need a positive number of trials")
            for k in tuple(self.k_grid or ()) + self.example_k:
                if not 1 <= k <= n:
                    raise ConfigError(f"input block sparsity {k} outside [1, {n}]")

    def sigmas(self) -> Tuple[float, ...]:
        return self.sigma_sweep if self.sigma_sweep else (self.sigma,)

    def noise(self, sigma: Optional[float] = None) -> NoiseModel:
        return NoiseModel(self.sigma if sigma is None else sigma, self.noise_family)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["noise_family"] = self.noise_family.value
        return out

    @classmethod
    def from_design(cls, design: str, **overrides) -> "ExperimentSpec":
        """Defaults for a named design; overrides with value None are ignored."""
        ref = _load_reference("designs.json")
        if design not in ref["designs"]:
            raise ConfigError(f"unknown design {design!r}; choose from {', '.join(DESIGNS)}")
        params = dict(ref["defaults"])
        params.update({k: v for k, v in ref["designs"][design].items() if k != "description"})
        params.update({k: v for k, v in overrides.items() if v is not None})
        if "sigma" in overrides and overrides["sigma"] is not None and "sigma_sweep" not in overrides:
            params["sigma_sweep"] = None
        params["design"] = design
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(params) - fields
        if unknown:
            raise ConfigError(f"unknown experiment fields: {', '.join(sorted(unknown))}")
        return cls(**params)


@dataclass(frozen=True)
class ReplicationRecord:
    setting: int
    block_sparsity: int
    sigma: float
    replication: int
    truth: float
    k_hat: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    covered: Optional[bool]
    studentized: Optional[float]
    warnings: Tuple[str, ...] = ()

    COLUMNS = (
        "setting", "block_sparsity", "sigma", "replication", "truth",
        "k_hat", "ci_low", "ci_high", "covered", "studentized", "warnings",
    )

    def to_row(self) -> dict:
        row = dataclasses.asdict(self)
        row["warnings"] = list(self.warnings)
        return row


@dataclass(frozen=True)
class SettingSummary:
    setting: int
    block_sparsity: int
    sigma: float
    truth: float
    replications: int
    failed: int
    with_ci: int
    mean_k_hat: Optional[float]
    coverage: Optional[float]
    mean_half_width: Optional[float]
    studentized_mean: Optional[float]
    studentized_var: Optional[float]
    ks_statistic: Optional[float]
    ks_pvalue: Optional[float]
    ks_passed: Optional[bool]
    missing_statistic: int
    relative_error_l0: Optional[float]
    warnings: int

    COLUMNS = (
        "setting", "block_sparsity", "sigma", "truth", "replications", "failed", "with_ci",
        "mean_k_hat", "coverage", "mean_half_width", "studentized_mean", "studentized_var",
        "ks_statistic", "ks_pvalue", "ks_passed", "missing_statistic", "relative_error_l0", "warnings",
    )

    def to_row(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class DesignResult:
    spec: ExperimentSpec
    records: Tuple[ReplicationRecord, ...]
    summaries: Tuple[SettingSummary, ...]


def _replicate(
    signal_real, truth: float, spec: ExperimentSpec, noise: NoiseModel, setting: int,
    k: int, r: int,
) -> Tuple[ReplicationRecord, Optional[SparsityEstimate]]:
    rng = RngStream(spec.seed, r)
    try:
        meas = sketch_pair(signal_real, spec.alpha, spec.gamma, spec.m1, spec.m_alpha, noise, rng)
        est = estimate_block_sparsity(meas, spec.beta)
    except BlockSketchError as e:
        logger.warning("replication %d (k=%d, sigma=%g) failed: %s", r, k, noise.sigma, e)
        record = ReplicationRecord(setting, k, noise.sigma, r, truth, None, None, None, None, None,
                                   (f"failed: {e}",))
        return record, None
    record = ReplicationRecord(
        setting=setting,
        block_sparsity=k,
        sigma=noise.sigma,
        replication=r,
        truth=truth,
        k_hat=est.k_hat,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        covered=est.covers(truth),
        studentized=studentized_statistic(est, truth),
        warnings=est.warnings,
    )
    return record, est


def _summarize(setting: int, k: int, sigma: float, truth: float,
               records: Sequence[ReplicationRecord], estimates) -> SettingSummary:
    k_hats = [rec.k_hat for rec in records if rec.k_hat is not None]
    flags = [rec.covered for rec in records if rec.covered is not None]
    stud = [rec.studentized for rec in records if rec.studentized is not None]
    widths = [e.half_width for e in estimates if e is not None and e.has_ci]

    # replications without a studentized value count against normality
    missing = len(records) - len(stud)
    ks = ks_normality(stud) if len(stud) >= 2 else None
    ks_passed = None
    if ks is not None:
        ks_passed = ks.passed and missing <= ks.level * len(records)
    elif missing:
        ks_passed = False
    mean_k = float(np.mean(k_hats)) if k_hats else None
    return SettingSummary(
        setting=setting,
        block_sparsity=k,
        sigma=sigma,
        truth=truth,
        replications=len(records),
        failed=len(records) - len(k_hats),
        with_ci=len(flags),
        mean_k_hat=mean_k,
        coverage=float(np.mean(flags)) if flags else None,
        mean_half_width=float(np.mean(widths)) if widths else None,
        studentized_mean=float(np.mean(stud)) if stud else None,
        studentized_var=float(np.var(stud, ddof=1)) if len(stud) >= 2 else None,
        ks_statistic=ks.statistic if ks else None,
        ks_pvalue=ks.pvalue if ks else None,
        ks_passed=ks_passed,
        missing_statistic=missing,
        relative_error_l0=abs(k - mean_k) / k if mean_k is not None else None,
        warnings=sum(1 for rec in records if rec.warnings),
    )


def run_design(spec: ExperimentSpec, workers: Optional[int] = None) -> DesignResult:
    """Replicate sketch-and-estimate over every (block sparsity, sigma) setting of the experiment.

    Replication r always uses stream (seed, r), so settings share random
    numbers and any run is reproducible from the experiment spec alone.
    """
    records: List[ReplicationRecord] = []
    summaries: List[SettingSummary] = []
    setting = 0
    for k in spec.block_sparsity:
        signal = make_harmonic_signal(k, spec.d, spec.N)
        signal_real = to_real_block(signal)
        truth = block_sparsity_measure(signal, spec.alpha)
        for sigma in spec.sigmas():
            noise = spec.noise(sigma)
            logger.info("design %s: k=%d sigma=%g, %d replications", spec.design, k, sigma, spec.replications)
            results = map_ordered(
                lambda r: _replicate(signal_real, truth, spec, noise, setting, k, r),
                list(range(spec.replications)),
                workers,
            )
            setting_records = [rec for rec, _ in results]
            summary = _summarize(setting, k, sigma, truth, setting_records, [e for _, e in results])
            logger.info(
                "  mean k_hat %.4f (truth %.4f), coverage %s",
                summary.mean_k_hat if summary.mean_k_hat is not None else math.nan,
                truth,
                "n/a" if summary.coverage is None else f"{summary.coverage:.3f}",
            )
            records.extend(setting_records)
            summaries.append(summary)
            setting += 1
    return DesignResult(spec, tuple(records), tuple(summaries))


@dataclass(frozen=True)
class ExampleReconstruction:
    k_in: int
    x_hat: ComplexBlockSignal
    relative_error: float
    iterations: int


@dataclass(frozen=True)
class RecoveryStudy:
    spec: ExperimentSpec
    truth: ComplexBlockSignal
    curve: Tuple[MrePoint, ...]
    examples: Tuple[ExampleReconstruction, ...]
    estimates: Tuple[Optional[float], ...] = field(default_factory=tuple)
    streams: dict = field(default_factory=dict)

    @property
    def argmin_k(self) -> Optional[int]:
        if not self.curve:
            return None
        best = min(p.mre for p in self.curve)
        return min(p.k_in for p in self.curve if p.mre <= best + Config.mre_tie_tolerance)

    @property
    def mean_estimate(self) -> Optional[float]:
        values = [v for v in self.estimates if v is not None]
        return float(np.mean(values)) if values else None


def _recovery_streams(spec: ExperimentSpec):
    base = RngStream(spec.seed, 0)
    return base.child(0), base.child(1)


def recovery_truth(spec: ExperimentSpec) -> ComplexBlockSignal:
    signal_rng, _ = _recovery_streams(spec)
    return make_random_block_signal(spec.N, spec.d, spec.block_sparsity[0], signal_rng)


def run_recovery_study(
    spec: ExperimentSpec,
    workers: Optional[int] = None,
    include_examples: bool = True,
    include_estimates: bool = True,
) -> RecoveryStudy:
    """MRE curve over the k grid, reconstructions at `example_k` and the block-sparsity estimates.

    The estimates use `spec.alpha` (small, to approximate ||x||_{2,0}) and
    replication r draws from stream (seed, r) child 2.
    """
    if spec.design not in RECOVERY_DESIGNS:
        raise ConfigError(f"design {spec.design!r} is not a recovery design")
    signal_rng, matrix_rng = _recovery_streams(spec)
    truth = make_random_block_signal(spec.N, spec.d, spec.block_sparsity[0], signal_rng)
    n = spec.N // spec.d
    grid = list(spec.k_grid) if spec.k_grid else default_k_grid(n)

    logger.info("recovery: MRE over %d input sparsities, %d trials each", len(grid), spec.trials)
    curve = mre_curve(truth, spec.m, grid, spec.trials, matrix_rng, workers=workers)

    examples = []
    if include_examples and spec.example_k:
        # same (A, y) as trial 0 of the curve
        A = gaussian_matrix(spec.m, spec.N, matrix_rng.child(0))
        y = A.apply(truth.entries)
        for k_in in spec.example_k:
            res = cosamp_block(y, A, RecoveryConfig(spec.d, k_in), truth=truth)
            examples.append(ExampleReconstruction(k_in, res.x_hat, res.relative_error, res.iterations))

    estimates: List[Optional[float]] = []
    if include_estimates:
        logger.info("recovery: %d block-sparsity estimates at alpha=%g", spec.replications, spec.alpha)
        truth_real = to_real_block(truth)
        noise = spec.noise()

        def estimate(r: int) -> Optional[float]:
            try:
                meas = sketch_pair(truth_real, spec.alpha, spec.gamma, spec.m1, spec.m_alpha, noise,
                                   RngStream(spec.seed, r).child(2))
                return estimate_block_sparsity(meas, spec.beta).k_hat
            except BlockSketchError as e:
                logger.warning("estimate %d failed: %s", r, e)
                return None

        estimates = map_ordered(estimate, list(range(spec.replications)), workers)

    streams = {
        "signal": signal_rng.ids(),
        "matrix_trial_t": {**matrix_rng.ids(), "child": "t"},
        "estimate_replication_r": {"seed": spec.seed, "stream_id": "r", "path": [2]},
    }
    return RecoveryStudy(spec, truth, tuple(curve), tuple(examples), tuple(estimates), streams)
