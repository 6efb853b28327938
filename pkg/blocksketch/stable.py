"""Seeded sampling of symmetric alpha-stable variates and isotropic stable vectors.

Scalar variates use the Chambers-Mallows-Stuck transform. Isotropic
vectors S(dim, alpha, gamma) are built as sub-Gaussian mixtures: a Gaussian
vector with per-component variance 2*gamma**2 scaled by the square root of a
totally skewed positive (alpha/2)-stable variate W with E[exp(-sW)] =
exp(-s**(alpha/2)). Both reproduce the characteristic function
exp(-gamma**alpha * ||u||**alpha) exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from blocksketch.common.config import Config
from blocksketch.common.errors import ConfigError

Size = Union[int, Tuple[int, ...], None]

_LOG_MAX = float(np.log(np.finfo(float).max)) - 1.0


class RngStream:
    """Caller-owned random stream identified by (seed, stream_id).

    Backed by a Philox counter-based generator keyed through a SeedSequence,
    so identical ids give identical sequences on every platform and
    `child` streams are independent of their parent. Not thread-safe: one
    stream per thread.
    """

    __slots__ = ("seed", "stream_id", "_path", "_generator")

    def __init__(self, seed: int, stream_id: int = 0, _path: Tuple[int, ...] = ()):
        if seed < 0 or stream_id < 0:
            raise ConfigError("seed and stream_id must be non-negative 64-bit integers")
        if seed >= 2 ** 64 or stream_id >= 2 ** 64:
            raise ConfigError("seed and stream_id must fit in 64 bits")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(int(p) for p in _path)
        entropy = [self.seed, self.stream_id, *self._path]
        self._generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream, deterministic in (seed, stream_id, path, index)."""
        return RngStream(self.seed, self.stream_id, self._path + (int(index),))

    def ids(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id, "path": list(self._path)}

    def __repr__(self) -> str:
        path = f", path={self._path}" if self._path else ""
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}{path})"


@dataclass(frozen=True)
class StableLawParams:
    dim: int
    alpha: float
    gamma: float = field(default=1.0)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ConfigError(f"dim must be a positive integer, got {self.dim}")
        _check_alpha_gamma(self.alpha, self.gamma)


def _check_alpha_gamma(alpha: float, gamma: float) -> None:
    if not (0.0 < alpha <= 2.0) or math.isnan(alpha):
        raise ConfigError(f"alpha must lie in (0, 2], got {alpha}")
    if not (gamma > 0.0) or math.isinf(gamma):
        raise ConfigError(f"gamma must be a positive finite number, got {gamma}")


def _guarded_angles(gen: np.random.Generator, size: Size) -> np.ndarray:
    """Uniform angles on (-pi/2, pi/2), clamped away from the endpoints."""
    guard = Config.cms_angle_guard
    phi = (gen.random(size) - 0.5) * np.pi
    return np.clip(phi, -np.pi / 2 + guard, np.pi / 2 - guard)


def _standard_exponential(gen: np.random.Generator, size: Size) -> np.ndarray:
    w = gen.standard_exponential(size)
    # zero would blow up the CMS power term
    return np.maximum(w, np.finfo(float).tiny)


def sample_scalar_sas(alpha: float, gamma: float, rng: RngStream, size: Size = None):
    """Symmetric alpha-stable variate(s) with characteristic function exp(-gamma^a |t|^a).

    alpha=2 is Normal(0, 2 gamma^2), alpha=1 is Cauchy with scale gamma.
    Returns a float when `size` is None, else an array of that shape.
    """
    _check_alpha_gamma(alpha, gamma)
    gen = rng.generator

    if alpha == 2.0:
        out = gen.normal(0.0, math.sqrt(2.0) * gamma, size)
    else:
        phi = _guarded_angles(gen, size)
        if alpha == 1.0:
            out = gamma * np.tan(phi)
        else:
            w = _standard_exponential(gen, size)
            s = np.sin(alpha * phi)
            with np.errstate(divide="ignore"):
                log_mag = (
                    np.log(np.abs(s))
                    - np.log(np.cos(phi)) / alpha
                    + (1.0 - alpha) / alpha * (np.log(np.cos((1.0 - alpha) * phi)) - np.log(w))
                )
            out = gamma * np.sign(s) * np.exp(np.minimum(log_mag, _LOG_MAX))
    if size is None:
        return float(out)
    return np.asarray(out, dtype=float)


def sample_positive_stable(a: float, rng: RngStream, size: Size = None):
    """Totally skewed positive a-stable variate(s), 0 < a <= 1, with E[exp(-sW)] = exp(-s^a).

    Kanter's form of the CMS transform; a=1 is the point mass at 1.
    """
    if not (0.0 < a <= 1.0):
        raise ConfigError(f"positive stable index must lie in (0, 1], got {a}")
    gen = rng.generator
    if a == 1.0:
        out = np.ones(size) if size is not None else 1.0
        return out

    # U on (0, pi), same guard as the symmetric transform
    u = _guarded_angles(gen, size) + np.pi / 2
    e = _standard_exponential(gen, size)
    # log domain: for small a the powers 1/a and (1-a)/a under/overflow
    log_w = (
        np.log(np.sin(a * u))
        - np.log(np.sin(u)) / a
        + (1.0 - a) / a * (np.log(np.sin((1.0 - a) * u)) - np.log(e))
    )
    out = np.exp(np.minimum(log_w, _LOG_MAX))
    if size is None:
        return float(out)
    return np.asarray(out, dtype=float)


def sample_isotropic_vectors(params: StableLawParams, rng: RngStream, count: int) -> np.ndarray:
    """`count` i.i.d. draws from S(dim, alpha, gamma), shape (count, dim)."""
    if count < 0:
        raise ConfigError(f"count must be non-negative, got {count}")
    gen = rng.generator
    g = gen.normal(0.0, math.sqrt(2.0) * params.gamma, (count, params.dim))
    if params.alpha == 2.0:
        return g
    w = sample_positive_stable(params.alpha / 2.0, rng, size=count)
    return np.sqrt(w)[:, None] * g


def sample_isotropic_vector(params: StableLawParams, rng: RngStream) -> np.ndarray:
    """One draw v from S(dim, alpha, gamma)."""
    return sample_isotropic_vectors(params, rng, 1)[0]


def sample_projection_rows(
    n_blocks: int, block_dim: int, alpha: float, gamma: float, rng: RngStream, count: int
) -> np.ndarray:
    """`count` projection rows, shape (count, n_blocks * block_dim).

    Each row concatenates n_blocks independent S(block_dim, alpha, gamma) draws.
    """
    if n_blocks < 1 or block_dim < 1:
        raise ConfigError("n_blocks and block_dim must be positive")
    params = StableLawParams(block_dim, alpha, gamma)
    draws = sample_isotropic_vectors(params, rng, count * n_blocks)
    return draws.reshape(count, n_blocks * block_dim)


def sample_projection_row(
    n_blocks: int, block_dim: int, alpha: float, gamma: float, rng: RngStream
) -> np.ndarray:
    """One projection row of length n_blocks * block_dim."""
    return sample_projection_rows(n_blocks, block_dim, alpha, gamma, rng, 1)[0]
