"""Characteristic-function estimation of mixed norms and block sparsity.

The alpha-batch measurements have characteristic function

    Psi(t) = exp(-gamma^a ||x~||_{2,a}^a |t|^a) * phi0(sigma t)

so ||x~||_{2,a}^a is read off the empirical characteristic function at a
pilot point t. Two such estimates (alpha and 1) give k_alpha, and the
plug-in asymptotic variance gives a delta-method confidence interval.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from blocksketch.common.config import Config
from blocksketch.common.errors import ConfigError, NumericalError
from blocksketch.sketching import NoiseModel, SketchMeasurements

logger = logging.getLogger(__name__)

VARIANCE_INVALID = "variance_invalid"
CLIPPED_ALPHA = "clipped_alpha"
CLIPPED_1 = "clipped_1"

WARNING_MESSAGES = {
    VARIANCE_INVALID: "variance invalid: increase m or reduce sigma",
    CLIPPED_ALPHA: "alpha-batch norm estimate clipped to 0 (Re(Psi/phi0) >= 1)",
    CLIPPED_1: "1-batch norm estimate clipped to 0 (Re(Psi/phi0) >= 1)",
}


@dataclass(frozen=True)
class NormEstimate:
    alpha: float
    value: float  # estimate of ||x~||_{2,alpha}^alpha
    t_used: float
    m: int
    clipped: bool = False

    @property
    def norm(self) -> float:
        """Estimate of ||x~||_{2,alpha} itself."""
        return self.value ** (1.0 / self.alpha) if self.value > 0 else 0.0


@dataclass(frozen=True)
class SparsityEstimate:
    k_hat: float
    alpha: float
    beta: float
    c_hat_alpha: Optional[float]
    rho_hat_alpha: Optional[float]
    theta_hat_alpha: Optional[float]
    c_hat_1: Optional[float]
    rho_hat_1: Optional[float]
    theta_hat_1: Optional[float]
    w_hat: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    norm_alpha: NormEstimate
    norm_1: NormEstimate
    gamma: float
    noise: NoiseModel
    block_dim: int
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def m1(self) -> int:
        return self.norm_1.m

    @property
    def m_alpha(self) -> int:
        return self.norm_alpha.m

    @property
    def has_ci(self) -> bool:
        return self.ci_low is not None and self.ci_high is not None

    @property
    def half_width(self) -> Optional[float]:
        if not self.has_ci:
            return None
        return 0.5 * (self.ci_high - self.ci_low)

    def covers(self, truth: float) -> Optional[bool]:
        if not self.has_ci:
            return None
        return self.ci_low <= truth <= self.ci_high


def empirical_cf(y: Sequence[float], t: float) -> complex:
    """(1/m) sum exp(i t y_j)."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ConfigError("empirical characteristic function of an empty sample")
    ty = t * y
    return complex(np.mean(np.cos(ty)), np.mean(np.sin(ty)))


def pilot_t(y: Sequence[float], noise: NoiseModel) -> float:
    """min{1 / median|y|, omega0 / sigma}; the noise cap is absent when sigma = 0."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ConfigError("pilot t needs at least one measurement")
    mad = float(np.median(np.abs(y)))
    if mad == 0.0:
        raise ConfigError("median |y| is zero; measurements carry no signal")
    t = 1.0 / mad
    if not noise.is_noiseless:
        t = min(t, noise.omega0 / noise.sigma)
    return t


def estimate_norm(
    y: Sequence[float],
    alpha: float,
    gamma: float,
    noise: NoiseModel,
    t: Optional[float] = None,
) -> NormEstimate:
    """Estimate ||x~||_{2,alpha}^alpha by inverting the characteristic function at t.

    When |Re(Psi_hat / phi0)| >= 1 the estimate is clamped to 0 and flagged.
    """
    y = np.asarray(y, dtype=float)
    if t is None:
        t = pilot_t(y, noise)
    if t == 0.0:
        raise ConfigError("characteristic function inversion needs t != 0")
    denom = noise.scaled_cf(t)
    if denom == 0.0:
        raise NumericalError(f"phi0(sigma t) vanishes at t={t}")

    ratio = abs(empirical_cf(y, t).real / denom)
    if ratio == 0.0:
        raise NumericalError(f"Re(Psi_hat/phi0) is exactly 0 at t={t}; t is far too large")
    if ratio >= 1.0:
        return NormEstimate(alpha, 0.0, float(abs(t)), int(y.size), clipped=True)
    value = -math.log(ratio) / (gamma ** alpha * abs(t) ** alpha)
    return NormEstimate(alpha, value, float(abs(t)), int(y.size))


def theta_variance(alpha: float, c: float, rho: float, noise: NoiseModel) -> float:
    """Limiting variance of the ratio estimate/truth, scaled by m.

    Returned as computed: it can be non-positive under heavy noise and the
    caller decides what to do with that.
    """
    if c == 0.0:
        raise ConfigError("theta is undefined at c = 0")
    ca = abs(c) ** alpha
    phi = noise.cf(rho * abs(c))
    if phi == 0.0:
        raise NumericalError(f"phi0(rho |c|) vanishes at rho={rho}, c={c}")
    phi2 = noise.cf(2.0 * rho * abs(c))
    inner = (
        math.exp(2.0 * ca) / (2.0 * phi * phi)
        + phi2 / (2.0 * phi * phi) * math.exp((2.0 - 2.0 ** alpha) * ca)
        - 1.0
    )
    return inner / (ca * ca)


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ConfigError(f"quantile level must lie in (0, 1), got {p}")
    return float(stats.norm.ppf(p))


def _plug_ins(est: NormEstimate, gamma: float, noise: NoiseModel):
    """(c_hat, rho_hat, theta_hat) for one batch, or Nones when the norm estimate is 0."""
    norm = est.norm
    if norm == 0.0:
        return None, None, None
    c_hat = gamma * est.t_used * norm
    rho_hat = noise.sigma / (gamma * norm)
    try:
        theta = theta_variance(est.alpha, c_hat, rho_hat, noise)
    except (ConfigError, NumericalError, OverflowError):
        theta = None
    return c_hat, rho_hat, theta


def _power(base: float, exponent: float, what: str) -> float:
    if base > 0.0:
        return math.exp(exponent * math.log(base))
    if exponent < 0.0:
        raise NumericalError(f"{what} norm estimate is 0 where it divides the block sparsity")
    return 0.0


def estimate_block_sparsity(
    meas: SketchMeasurements, beta: float = Config.default_beta
) -> SparsityEstimate:
    """k_hat = (N_a)^(1/(1-a)) / (N_1)^(a/(1-a)) with its (1 - beta) confidence interval.

    The interval is withheld, with a `variance_invalid` warning, whenever a
    plug-in variance is not strictly positive.
    """
    alpha = meas.alpha
    if alpha == 1.0:
        raise ConfigError("alpha = 1 is singular for the block-sparsity estimator")
    if not (0.0 < alpha <= 2.0):
        raise ConfigError(f"alpha must lie in (0, 2], got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must lie in (0, 1), got {beta}")
    if meas.m1 == 0 or meas.m_alpha == 0:
        raise ConfigError("both measurement batches must be nonempty")
    if alpha < Config.min_alpha:
        logger.warning("alpha=%g is below %g; the estimate is poorly conditioned", alpha, Config.min_alpha)

    gamma, noise = meas.gamma, meas.noise
    est_a = estimate_norm(meas.batch_alpha, alpha, gamma, noise, pilot_t(meas.batch_alpha, noise))
    est_1 = estimate_norm(meas.batch_1, 1.0, gamma, noise, pilot_t(meas.batch_1, noise))

    warnings = []
    if est_a.clipped:
        warnings.append(CLIPPED_ALPHA)
    if est_1.clipped:
        warnings.append(CLIPPED_1)

    k_hat = _power(est_a.value, 1.0 / (1.0 - alpha), "alpha-batch") * _power(
        est_1.value, -alpha / (1.0 - alpha), "1-batch"
    )

    c_a, rho_a, theta_a = _plug_ins(est_a, gamma, noise)
    c_1, rho_1, theta_1 = _plug_ins(est_1, gamma, noise)

    pi_alpha = meas.pi_alpha
    w_hat = None
    ci_low = ci_high = None
    if theta_a is not None and theta_1 is not None:
        w_hat = (
            theta_a / pi_alpha * (1.0 / (1.0 - alpha)) ** 2
            + theta_1 / (1.0 - pi_alpha) * (alpha / (1.0 - alpha)) ** 2
        )
    valid = (
        theta_a is not None and theta_1 is not None
        and theta_a > 0.0 and theta_1 > 0.0
        and math.isfinite(w_hat) and k_hat > 0.0
    )
    if valid:
        # multiplicative form avoids dividing by (1 - h)
        h = math.sqrt(w_hat / (meas.m1 + meas.m_alpha)) * normal_quantile(1.0 - beta / 2.0)
        ci_low, ci_high = (1.0 - h) * k_hat, (1.0 + h) * k_hat
    else:
        warnings.append(VARIANCE_INVALID)
        logger.debug("no confidence interval: theta_alpha=%s theta_1=%s", theta_a, theta_1)

    return SparsityEstimate(
        k_hat=k_hat,
        alpha=alpha,
        beta=beta,
        c_hat_alpha=c_a,
        rho_hat_alpha=rho_a,
        theta_hat_alpha=theta_a,
        c_hat_1=c_1,
        rho_hat_1=rho_1,
        theta_hat_1=theta_1,
        w_hat=w_hat,
        ci_low=ci_low,
        ci_high=ci_high,
        norm_alpha=est_a,
        norm_1=est_1,
        gamma=gamma,
        noise=noise,
        block_dim=meas.block_dim,
        warnings=tuple(warnings),
    )


def studentized_statistic(est: SparsityEstimate, truth: float) -> Optional[float]:
    """sqrt((m1 + m_alpha) / w_hat) * (k_hat / truth - 1); None without a valid variance."""
    if est.w_hat is None or not est.w_hat > 0.0 or VARIANCE_INVALID in est.warnings:
        return None
    return math.sqrt((est.m1 + est.m_alpha) / est.w_hat) * (est.k_hat / truth - 1.0)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    n: int
    level: float

    @property
    def passed(self) -> bool:
        return self.pvalue >= self.level


def ks_normality(values: Sequence[float], level: float = 0.01) -> KsResult:
    """One-sample Kolmogorov-Smirnov test of `values` against N(0, 1)."""
    values = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    if values.size < 2:
        raise ConfigError("normality test needs at least two finite values")
    res = stats.kstest(values, "norm")
    return KsResult(float(res.statistic), float(res.pvalue), int(values.size), level)


def sparsity_estimate_to_record(est: SparsityEstimate) -> dict:
    """Flat JSON record with the fixed cross-implementation field names."""
    return {
        "spec_version": Config.spec_version,
        "alpha": est.alpha,
        # complex block size; a real signal with an odd block size has none
        "d": est.block_dim // 2 if est.block_dim % 2 == 0 else None,
        "block_dim": est.block_dim,
        "gamma": est.gamma,
        "sigma": est.noise.sigma,
        "noise_family": est.noise.family.value,
        "m1": est.m1,
        "m_alpha": est.m_alpha,
        "k_hat": est.k_hat,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "beta": est.beta,
        "t_alpha": est.norm_alpha.t_used,
        "t_1": est.norm_1.t_used,
        "c_hat_alpha": est.c_hat_alpha,
        "rho_hat_alpha": est.rho_hat_alpha,
        "c_hat_1": est.c_hat_1,
        "rho_hat_1": est.rho_hat_1,
        "theta_alpha": est.theta_hat_alpha,
        "theta_1": est.theta_hat_1,
        "w_hat": est.w_hat,
        "clipped_alpha": est.norm_alpha.clipped,
        "clipped_1": est.norm_1.clipped,
        "warnings": list(est.warnings),
    }
