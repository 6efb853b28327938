"""Measurement batches y_i = <r_i, x~> + sigma * eps_i from stable projection rows."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple, Union

import numpy as np

from blocksketch.common.config import Config
from blocksketch.common.errors import ConfigError
from blocksketch.common.formatting import format_csv
from blocksketch.signal import ComplexBlockSignal, RealBlockSignal, to_real_block
from blocksketch.stable import RngStream, sample_projection_rows

logger = logging.getLogger(__name__)


class NoiseFamily(str, Enum):
    GAUSSIAN = "gaussian"
    CAUCHY = "cauchy"
    NONE = "none"


# largest w with phi0 > 1/2 on [0, w]
_OMEGA0 = {
    NoiseFamily.GAUSSIAN: math.sqrt(2.0 * math.log(2.0)),
    NoiseFamily.CAUCHY: math.log(2.0),
    NoiseFamily.NONE: math.inf,
}


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise sigma * eps with eps drawn from a unit-scale symmetric family."""

    sigma: float = 0.0
    family: NoiseFamily = NoiseFamily.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "family", NoiseFamily(self.family))
        if not (self.sigma >= 0.0) or math.isinf(self.sigma):
            raise ConfigError(f"noise sigma must be finite and >= 0, got {self.sigma}")

    @property
    def is_noiseless(self) -> bool:
        return self.sigma == 0.0 or self.family is NoiseFamily.NONE

    @property
    def omega0(self) -> float:
        return _OMEGA0[self.family]

    def cf(self, t):
        """phi0(t) of the unit-scale family (real, even, phi0(0) = 1)."""
        t = np.asarray(t, dtype=float)
        if self.family is NoiseFamily.GAUSSIAN:
            out = np.exp(-0.5 * t * t)
        elif self.family is NoiseFamily.CAUCHY:
            out = np.exp(-np.abs(t))
        else:
            out = np.ones_like(t)
        return float(out) if out.ndim == 0 else out

    def scaled_cf(self, t):
        """phi0(sigma * t), the noise factor of the measurement characteristic function."""
        if self.is_noiseless:
            return 1.0 if np.ndim(t) == 0 else np.ones_like(np.asarray(t, dtype=float))
        return self.cf(self.sigma * np.asarray(t, dtype=float))

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        """sigma * eps for `size` measurements."""
        if self.is_noiseless:
            return np.zeros(size)
        if self.family is NoiseFamily.GAUSSIAN:
            return self.sigma * gen.standard_normal(size)
        return self.sigma * gen.standard_cauchy(size)


@dataclass(frozen=True)
class SketchMeasurements:
    """Two independent batches: alpha=1 projections for ||x~||_{2,1}, alpha projections for ||x~||_{2,a}^a."""

    batch_1: np.ndarray
    batch_alpha: np.ndarray
    alpha: float
    gamma: float
    block_dim: int
    noise: NoiseModel
    streams: dict = field(default_factory=dict)

    @property
    def m1(self) -> int:
        return int(self.batch_1.size)

    @property
    def m_alpha(self) -> int:
        return int(self.batch_alpha.size)

    @property
    def pi_alpha(self) -> float:
        return self.m_alpha / (self.m1 + self.m_alpha)


def _as_real(signal: Union[RealBlockSignal, ComplexBlockSignal]) -> RealBlockSignal:
    # complex signals are only ever measured through their real transform
    if isinstance(signal, ComplexBlockSignal):
        return to_real_block(signal)
    if not isinstance(signal, RealBlockSignal):
        raise ConfigError(f"cannot sketch a {type(signal).__name__}")
    return signal


def sketch(
    signal: Union[RealBlockSignal, ComplexBlockSignal],
    alpha: float,
    gamma: float,
    m: int,
    noise: NoiseModel,
    rng: RngStream,
) -> np.ndarray:
    """m measurements of the signal; projection rows are drawn in chunks and discarded."""
    x = _as_real(signal)
    if x.is_zero():
        raise ConfigError("cannot sketch the all-zero signal")
    if int(m) != m or m < 1:
        raise ConfigError(f"number of measurements must be a positive integer, got {m}")
    if not (0.0 < alpha <= 2.0):
        raise ConfigError(f"projection alpha must lie in (0, 2], got {alpha}")

    row_rng = rng.child(0)
    noise_rng = rng.child(1)
    values = np.asarray(x.entries, dtype=float)
    y = np.empty(m, dtype=float)
    chunk = Config.sketch_chunk_rows
    for start in range(0, m, chunk):
        count = min(chunk, m - start)
        rows = sample_projection_rows(x.n_blocks, x.block_size, alpha, gamma, row_rng, count)
        # reduction along the contiguous axis is pairwise in numpy
        y[start:start + count] = np.sum(rows * values, axis=1)
    y += noise.sample(noise_rng.generator, m)
    return y


def sketch_pair(
    signal: Union[RealBlockSignal, ComplexBlockSignal],
    alpha: float,
    gamma: float,
    m1: int,
    m_alpha: int,
    noise: NoiseModel,
    rng: RngStream,
) -> SketchMeasurements:
    """Independent alpha=1 and alpha batches on separate child streams of `rng`."""
    x = _as_real(signal)
    rng_1 = rng.child(1)
    rng_alpha = rng.child(2)
    batch_1 = sketch(x, 1.0, gamma, m1, noise, rng_1)
    batch_alpha = sketch(x, alpha, gamma, m_alpha, noise, rng_alpha)
    return SketchMeasurements(
        batch_1=batch_1,
        batch_alpha=batch_alpha,
        alpha=float(alpha),
        gamma=float(gamma),
        block_dim=x.block_size,
        noise=noise,
        streams={"batch_1": rng_1.ids(), "batch_alpha": rng_alpha.ids()},
    )


def write_measurements_csv(y: np.ndarray, alpha: float, gamma: float, noise: NoiseModel) -> str:
    comment = (
        f"alpha={alpha!r},gamma={gamma!r},sigma={noise.sigma!r},"
        f"family={noise.family.value},m={len(y)}"
    )
    return format_csv(({"y": float(v)} for v in y), ["y"], comment=comment)


_META_RE = re.compile(r"(\w+)\s*=\s*([^,\s]+)")


def read_measurements_csv(text: str) -> Tuple[np.ndarray, dict]:
    """Inverse of `write_measurements_csv`: (y, {alpha, gamma, noise, m})."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ConfigError("measurement CSV must start with a '# alpha=..' header line")
    raw = dict(_META_RE.findall(lines[0]))
    try:
        meta = {
            "alpha": float(raw["alpha"]),
            "gamma": float(raw["gamma"]),
            "noise": NoiseModel(float(raw["sigma"]), NoiseFamily(raw["family"])),
            "m": int(raw["m"]),
        }
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad measurement header {lines[0]!r}: {e}")
    if len(lines) < 2 or lines[1].strip() != "y":
        raise ConfigError("measurement CSV needs a single 'y' column")
    try:
        y = np.array([float(v) for v in lines[2:]], dtype=float)
    except ValueError as e:
        raise ConfigError(f"bad measurement value: {e}")
    if y.size != meta["m"]:
        raise ConfigError(f"header says m={meta['m']} but {y.size} values were read")
    return y, meta
