"""Model-based CoSaMP for block-sparse complex signals and the sparsity-sensitivity study."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from blocksketch.common.config import Config
from blocksketch.common.errors import BlockSketchError, ConfigError, LeastSquaresError
from blocksketch.common.pool import map_ordered
from blocksketch.signal import ComplexBlockSignal
from blocksketch.stable import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """Dense real m x N matrix applied entrywise to complex vectors."""

    matrix: np.ndarray
    streams: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2:
            raise ConfigError("measurement matrix must be two-dimensional")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        # real matrix: conjugate transpose is the transpose
        return self.matrix.T @ r


def gaussian_matrix(m: int, N: int, rng: RngStream, variance: Optional[float] = None) -> MeasurementMatrix:
    """i.i.d. Normal(0, 1/m) entries unless another variance is given."""
    if m < 1 or N < 1:
        raise ConfigError("matrix dimensions must be positive")
    variance = 1.0 / m if variance is None else variance
    entries = rng.generator.normal(0.0, np.sqrt(variance), (m, N))
    return MeasurementMatrix(entries, streams=rng.ids())


@dataclass(frozen=True)
class RecoveryConfig:
    block_size: int
    block_sparsity: int  # k_in, the sparsity the algorithm is told
    max_iterations: int = Config.recovery_max_iterations
    residual_tolerance: float = Config.recovery_residual_tolerance
    ls_max_iterations: int = Config.ls_max_iterations
    ls_tolerance: float = Config.ls_tolerance
    refit: bool = True
    restarts: int = Config.recovery_restarts

    def __post_init__(self):
        if self.block_size < 1:
            raise ConfigError(f"block size must be positive, got {self.block_size}")
        if self.block_sparsity < 1:
            raise ConfigError(f"input block sparsity must be >= 1, got {self.block_sparsity}")
        if self.max_iterations < 1 or self.ls_max_iterations < 1:
            raise ConfigError("iteration limits must be positive")
        if self.restarts < 0:
            raise ConfigError(f"restarts must be >= 0, got {self.restarts}")


@dataclass(frozen=True)
class RecoveryResult:
    x_hat: ComplexBlockSignal
    iterations: int
    relative_residual: float
    support: Tuple[int, ...]
    relative_error: Optional[float] = None


def relative_error(x_hat: ComplexBlockSignal, x: ComplexBlockSignal) -> float:
    """||x_hat - x||_2 / ||x||_2."""
    ref = np.linalg.norm(x.entries)
    if ref == 0.0:
        raise ConfigError("relative error against the zero signal")
    return float(np.linalg.norm(x_hat.entries - x.entries) / ref)


def _block_norms(v: np.ndarray, d: int) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(v.reshape(-1, d)) ** 2, axis=1))


def _top_blocks(norms: np.ndarray, k: int) -> np.ndarray:
    # stable sort: equal norms keep the lowest block index first
    return np.sort(np.argsort(-norms, kind="stable")[:k])


def _block_columns(blocks: np.ndarray, d: int) -> np.ndarray:
    return (blocks[:, None] * d + np.arange(d)[None, :]).reshape(-1)


def block_hard_threshold(v: ComplexBlockSignal, k: int) -> ComplexBlockSignal:
    """Keep the k blocks of largest l2 norm, zero the rest."""
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    if k > v.n_blocks:
        raise ConfigError(f"cannot keep {k} of {v.n_blocks} blocks")
    keep = _top_blocks(v.block_norms(), k)
    out = np.zeros((v.n_blocks, v.block_size), dtype=np.complex128)
    out[keep] = v.blocks()[keep]
    return ComplexBlockSignal(out.reshape(-1), v.block_size)


def cgls(A: np.ndarray, y: np.ndarray, max_iterations: int, tolerance: float) -> Tuple[np.ndarray, int]:
    """Least squares min ||A z - y|| by conjugate gradients on the normal equations.

    A is real, y may be complex. Stops when ||A^H r|| <= tolerance * ||A^H y||.
    Raises LeastSquaresError on breakdown.
    """
    z = np.zeros(A.shape[1], dtype=np.result_type(y, np.complex128))
    r = y.astype(z.dtype, copy=True)
    s = A.T @ r
    p = s.copy()
    gamma = np.vdot(s, s).real
    stop = tolerance * np.sqrt(gamma)
    if gamma == 0.0:
        return z, 0

    for it in range(1, max_iterations + 1):
        q = A @ p
        qq = np.vdot(q, q).real
        if qq == 0.0 or not np.isfinite(qq):
            raise LeastSquaresError(f"CGLS breakdown at iteration {it} (||Ap||^2 = {qq})")
        step = gamma / qq
        z += step * p
        r -= step * q
        s = A.T @ r
        gamma_new = np.vdot(s, s).real
        if not np.isfinite(gamma_new):
            raise LeastSquaresError(f"CGLS diverged at iteration {it}")
        if np.sqrt(gamma_new) <= stop:
            return z, it
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new

    logger.debug("CGLS stopped at %d iterations without reaching tolerance", max_iterations)
    return z, max_iterations


def _fit_on_blocks(A: MeasurementMatrix, y: np.ndarray, blocks: np.ndarray, cfg: RecoveryConfig) -> np.ndarray:
    cols = _block_columns(blocks, cfg.block_size)
    z, _ = cgls(A.matrix[:, cols], y, cfg.ls_max_iterations, cfg.ls_tolerance)
    full = np.zeros(A.N, dtype=np.complex128)
    full[cols] = z
    return full


def _run_from(
    y: np.ndarray,
    A: MeasurementMatrix,
    cfg: RecoveryConfig,
    x: np.ndarray,
    support: np.ndarray,
    refit: bool,
) -> Tuple[np.ndarray, np.ndarray, float, int]:
    """One CoSaMP run starting from iterate x on `support`.

    Returns (x, support, residual norm, iterations). A residual increase ends
    the run and keeps the previous iterate.
    """
    d, k = cfg.block_size, cfg.block_sparsity
    n = A.N // d
    y_norm = float(np.linalg.norm(y))
    r = y - A.apply(x)
    residual = float(np.linalg.norm(r))
    iterations = 0
    if residual <= cfg.residual_tolerance * y_norm:
        return x, support, residual, iterations

    for iterations in range(1, cfg.max_iterations + 1):
        proxy = A.adjoint(r)
        omega = _top_blocks(_block_norms(proxy, d), min(2 * k, n))
        candidate = np.union1d(omega, support)

        b = _fit_on_blocks(A, y, candidate, cfg)
        new_support = _top_blocks(_block_norms(b, d), k)
        if refit:
            x_new = _fit_on_blocks(A, y, new_support, cfg)
        else:
            keep = _block_columns(new_support, d)
            x_new = np.zeros_like(b)
            x_new[keep] = b[keep]

        r_new = y - A.apply(x_new)
        new_residual = float(np.linalg.norm(r_new))
        if new_residual > residual * (1.0 + 1e-9):
            logger.debug("residual rose from %.3e to %.3e; stopping run", residual, new_residual)
            iterations -= 1
            break
        stalled = np.array_equal(new_support, support) and residual - new_residual <= 1e-12 * y_norm
        x, r, support, residual = x_new, r_new, new_support, new_residual
        if residual <= cfg.residual_tolerance * y_norm or stalled:
            break
    return x, support, residual, iterations


def _restart_seeds(y: np.ndarray, A: MeasurementMatrix, cfg: RecoveryConfig) -> List[np.ndarray]:
    # Seed j keeps the k-1 strongest blocks of A^H y and adds the (k-1+j)-th.
    d, k = cfg.block_size, cfg.block_sparsity
    n = A.N // d
    ranking = np.argsort(-_block_norms(A.adjoint(y), d), kind="stable")
    head = ranking[: k - 1]
    seeds = []
    for j in range(min(cfg.restarts, n - k + 1)):
        seeds.append(np.sort(np.append(head, ranking[k - 1 + j])))
    return seeds


def cosamp_block(
    y: np.ndarray,
    A: MeasurementMatrix,
    cfg: RecoveryConfig,
    truth: Optional[ComplexBlockSignal] = None,
) -> RecoveryResult:
    """Recover a block-sparse complex x from y = A x.

    Each iteration merges the 2k strongest proxy blocks with the current
    support, fits y on the merged columns, prunes to k blocks and refits on
    those (when k*d <= m). When a run from zero stalls or its residual rises
    before reaching tolerance, the search is restarted from supports seeded
    by the proxy A^H y, and the lowest-residual iterate is kept.
    """
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    d, k = cfg.block_size, cfg.block_sparsity
    if y.size != A.m:
        raise ConfigError(f"{y.size} measurements for a matrix with {A.m} rows")
    if A.N % d:
        raise ConfigError(f"signal length {A.N} is not a multiple of block size {d}")
    n = A.N // d
    if k > n:
        raise ConfigError(f"input block sparsity {k} exceeds the {n} available blocks")

    x = np.zeros(A.N, dtype=np.complex128)
    support = np.zeros(0, dtype=int)
    y_norm = float(np.linalg.norm(y))
    residual = y_norm
    iterations = 0
    refit = cfg.refit and k * d <= A.m

    if y_norm > 0.0:
        x, support, residual, iterations = _run_from(y, A, cfg, x, support, refit)
        target = cfg.residual_tolerance * y_norm
        if residual > target:
            for seed in _restart_seeds(y, A, cfg):
                start = _fit_on_blocks(A, y, seed, cfg)
                x_s, support_s, residual_s, used = _run_from(y, A, cfg, start, seed, refit)
                iterations += used
                if residual_s < residual:
                    x, support, residual = x_s, support_s, residual_s
                if residual <= target:
                    break
            logger.debug("restarts ended at relative residual %.3e", residual / y_norm)

    x_hat = ComplexBlockSignal(x, d)
    return RecoveryResult(
        x_hat=x_hat,
        iterations=iterations,
        relative_residual=residual / y_norm if y_norm > 0.0 else 0.0,
        support=tuple(int(j) for j in support),
        relative_error=relative_error(x_hat, truth) if truth is not None else None,
    )


def support_oracle(y: np.ndarray, A: MeasurementMatrix, block_size: int, k: int) -> ComplexBlockSignal:
    """Exhaustive search over all k-block supports; least squares on each, lowest residual wins."""
    y = np.asarray(y, dtype=np.complex128)
    n = A.N // block_size
    best, best_res = None, np.inf
    for blocks in itertools.combinations(range(n), k):
        cols = _block_columns(np.array(blocks), block_size)
        z = np.linalg.lstsq(A.matrix[:, cols], y, rcond=None)[0]
        res = np.linalg.norm(A.matrix[:, cols] @ z - y)
        if res < best_res:
            best_res = res
            best = np.zeros(A.N, dtype=np.complex128)
            best[cols] = z
    return ComplexBlockSignal(best, block_size)


@dataclass(frozen=True)
class MrePoint:
    k_in: int
    mre: float
    trials: int
    failures: int
    errors: Tuple[float, ...] = ()


def default_k_grid(n_blocks: int, coarse: bool = False) -> List[int]:
    """1..n_blocks, or every fourth value from 4 when coarse."""
    if coarse:
        return list(range(4, n_blocks, 4))
    return list(range(1, n_blocks + 1))


def mre_curve(
    truth: ComplexBlockSignal,
    m: int,
    k_grid: Sequence[int],
    trials: int,
    rng: RngStream,
    cfg: Optional[RecoveryConfig] = None,
    workers: Optional[int] = None,
) -> List[MrePoint]:
    """Mean relative error of cosamp_block for each input sparsity in `k_grid`.

    Trial t draws its (A, y) from rng.child(t) and reuses it for every k_in,
    so the grid points are compared on matched measurements. A trial that
    fails counts as relative error 1.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    d = truth.block_size
    base = cfg or RecoveryConfig(block_size=d, block_sparsity=1)
    configs = [
        replace(base, block_size=d, block_sparsity=int(k))
        for k in k_grid
    ]

    def run_trial(t: int) -> List[Tuple[float, bool]]:
        A = gaussian_matrix(m, truth.N, rng.child(t))
        y = A.apply(truth.entries)
        out = []
        for c in configs:
            try:
                res = cosamp_block(y, A, c, truth=truth)
                out.append((res.relative_error, False))
            except (BlockSketchError, FloatingPointError, np.linalg.LinAlgError) as e:
                logger.warning("trial %d with k_in=%d failed: %s", t, c.block_sparsity, e)
                out.append((1.0, True))
        return out

    per_trial = map_ordered(run_trial, list(range(trials)), workers)
    points = []
    for i, c in enumerate(configs):
        errors = tuple(float(per_trial[t][i][0]) for t in range(trials))
        failures = sum(1 for t in range(trials) if per_trial[t][i][1])
        points.append(MrePoint(c.block_sparsity, float(np.mean(errors)), trials, failures, errors))
    return points
