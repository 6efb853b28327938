"""Block signals, the complex-to-real transform, mixed norms and sparsity measures."""
from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from blocksketch.common.errors import ConfigError
from blocksketch.stable import RngStream


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


def _check_block_size(length: int, block_size: int) -> None:
    if int(block_size) != block_size or block_size < 1:
        raise ConfigError(f"block size must be a positive integer, got {block_size}")
    if length == 0 or length % block_size:
        raise ConfigError(
            f"signal length {length} is not a positive multiple of block size {block_size}"
        )


class _BlockSignal:
    entries: np.ndarray
    block_size: int

    @property
    def length(self) -> int:
        return int(self.entries.size)

    @property
    def n_blocks(self) -> int:
        return self.length // self.block_size

    def blocks(self) -> np.ndarray:
        """Read-only (n_blocks, block_size) view."""
        return self.entries.reshape(self.n_blocks, self.block_size)

    def block_norms(self) -> np.ndarray:
        return np.sqrt(self._block_square_sums()).astype(float)

    def _block_square_sums(self) -> np.ndarray:
        raise NotImplementedError

    def is_zero(self) -> bool:
        return not np.any(self.entries)

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.block_size == other.block_size and np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ComplexBlockSignal(_BlockSignal):
    """Length-N complex vector partitioned into N/d consecutive blocks of size d."""

    entries: np.ndarray
    block_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_array(self.entries, np.complex128))
        _check_block_size(self.entries.size, self.block_size)
        object.__setattr__(self, "block_size", int(self.block_size))

    @property
    def N(self) -> int:
        return self.length

    def _block_square_sums(self) -> np.ndarray:
        # extended precision, pairwise reduction along each block
        parts = self.blocks()
        re_sq = np.square(parts.real, dtype=np.longdouble)
        im_sq = np.square(parts.imag, dtype=np.longdouble)
        return np.sum(re_sq + im_sq, axis=1)

    def scaled(self, factor: complex) -> "ComplexBlockSignal":
        return ComplexBlockSignal(self.entries * factor, self.block_size)


@dataclass(frozen=True, eq=False)
class RealBlockSignal(_BlockSignal):
    """Real vector with block structure; produced from complex signals by `to_real_block`."""

    entries: np.ndarray
    block_size: int = 2

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen_array(self.entries, np.float64))
        _check_block_size(self.entries.size, self.block_size)
        object.__setattr__(self, "block_size", int(self.block_size))

    def _block_square_sums(self) -> np.ndarray:
        return np.sum(np.square(self.blocks(), dtype=np.longdouble), axis=1)

    def scaled(self, factor: float) -> "RealBlockSignal":
        return RealBlockSignal(self.entries * factor, self.block_size)


Signal = Union[ComplexBlockSignal, RealBlockSignal]


@dataclass(frozen=True)
class SparsityMeasureSpec:
    """Order alpha of the k_alpha measure; 0, 1 and inf dispatch to their closed-form limits."""

    alpha: float

    def __post_init__(self):
        if math.isnan(self.alpha) or self.alpha < 0:
            raise ConfigError(f"sparsity measure order must be >= 0, got {self.alpha}")

    @property
    def is_count(self) -> bool:
        return self.alpha == 0.0

    @property
    def is_entropy(self) -> bool:
        return self.alpha == 1.0

    @property
    def is_peak_ratio(self) -> bool:
        return math.isinf(self.alpha)


def to_real_block(signal: ComplexBlockSignal) -> RealBlockSignal:
    """Interleave (real, imag) pairs: block j becomes (a, b, a, b, ...) of length 2d."""
    interleaved = np.empty(2 * signal.N, dtype=np.float64)
    interleaved[0::2] = signal.entries.real
    interleaved[1::2] = signal.entries.imag
    return RealBlockSignal(interleaved, 2 * signal.block_size)


def from_real_block(signal: RealBlockSignal) -> ComplexBlockSignal:
    """Inverse of `to_real_block`."""
    if signal.block_size % 2:
        raise ConfigError(f"real block size must be even to de-interleave, got {signal.block_size}")
    entries = signal.entries[0::2] + 1j * signal.entries[1::2]
    return ComplexBlockSignal(entries, signal.block_size // 2)


def _log_mixed_norm(norms: np.ndarray, alpha: float) -> float:
    nz = norms[norms > 0]
    if nz.size == 0:
        return -math.inf
    return float(logsumexp(alpha * np.log(nz))) / alpha


def mixed_norm(signal: Signal, alpha: float) -> float:
    """(sum_j ||block_j||_2^alpha)^(1/alpha)."""
    if not alpha > 0:
        raise ConfigError(f"mixed norm order must be > 0, got {alpha}")
    norms = signal.block_norms()
    if math.isinf(alpha):
        return float(norms.max())
    return math.exp(_log_mixed_norm(norms, alpha))


def nonzero_blocks(signal: Signal) -> int:
    """Exact block count ||x||_{2,0}."""
    return int(np.count_nonzero(signal.block_norms()))


def block_sparsity_measure(signal: Signal, spec: Union[SparsityMeasureSpec, float]) -> float:
    """k_alpha of the signal's block-norm profile."""
    if not isinstance(spec, SparsityMeasureSpec):
        spec = SparsityMeasureSpec(float(spec))
    norms = signal.block_norms()
    nz = norms[norms > 0]
    if nz.size == 0:
        raise ConfigError("sparsity measures are undefined for the all-zero signal")

    if spec.is_count:
        return float(nz.size)
    if spec.is_peak_ratio:
        return float(nz.sum() / nz.max())
    if spec.is_entropy:
        p = nz / nz.sum()
        return math.exp(-float(np.sum(p * np.log(p))))

    alpha = spec.alpha
    log_ratio = _log_mixed_norm(nz, alpha) - _log_mixed_norm(nz, 1.0)
    return math.exp(alpha / (1.0 - alpha) * log_ratio)


def sparsity_measure(signal: Union[ComplexBlockSignal, np.ndarray], alpha: float) -> float:
    """Entry-wise s_alpha, i.e. k_alpha with block size 1."""
    entries = signal.entries if isinstance(signal, ComplexBlockSignal) else signal
    return block_sparsity_measure(ComplexBlockSignal(entries, 1), alpha)


def make_harmonic_signal(block_sparsity: int, d: int, N: int) -> ComplexBlockSignal:
    """Compressible test signal with block norms proportional to 1/j.

    Block j in 1..k has every entry c(1+i)/(sqrt(2 d) j), later blocks are
    zero, and c makes ||x||_2 = 1.
    """
    k = int(block_sparsity)
    if k < 1 or d < 1 or N < 1:
        raise ConfigError("block sparsity, block size and length must be positive")
    if N % d:
        raise ConfigError(f"length {N} is not a multiple of block size {d}")
    if k * d > N:
        raise ConfigError(f"{k} blocks of size {d} do not fit in length {N}")

    entries = np.zeros(N, dtype=np.complex128)
    scale = (1.0 + 1.0j) * math.sqrt(2.0) / 2.0 / math.sqrt(d)
    for j in range(1, k + 1):
        entries[(j - 1) * d: j * d] = scale / j

    unnormalized = ComplexBlockSignal(entries, d)
    c = 1.0 / mixed_norm(unnormalized, 2.0)
    return unnormalized.scaled(c)


def make_random_block_signal(N: int, d: int, block_sparsity: int, rng: RngStream) -> ComplexBlockSignal:
    """Random support of `block_sparsity` blocks; real and imaginary parts i.i.d. N(0, 1)."""
    if N % d:
        raise ConfigError(f"length {N} is not a multiple of block size {d}")
    n = N // d
    if not 1 <= block_sparsity <= n:
        raise ConfigError(f"block sparsity must lie in [1, {n}], got {block_sparsity}")
    gen = rng.generator
    support = np.sort(gen.choice(n, size=block_sparsity, replace=False))
    values = gen.standard_normal((block_sparsity, d)) + 1j * gen.standard_normal((block_sparsity, d))
    entries = np.zeros((n, d), dtype=np.complex128)
    entries[support] = values
    return ComplexBlockSignal(entries.reshape(-1), d)


_HEADER_RE = re.compile(r"(\w+)\s*=\s*([^,\s]+)")


def write_signal_csv(signal: ComplexBlockSignal) -> str:
    """`# N=..,d=..` line, then `index,real,imag` rows (0-based index)."""
    out = io.StringIO()
    out.write(f"# N={signal.N},d={signal.block_size}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["index", "real", "imag"])
    for i, z in enumerate(signal.entries):
        writer.writerow([i, repr(float(z.real)), repr(float(z.imag))])
    return out.getvalue()


def read_signal_csv(text: str) -> ComplexBlockSignal:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ConfigError("signal CSV must start with a '# N=..,d=..' header line")
    meta = dict(_HEADER_RE.findall(lines[0]))
    try:
        N = int(meta["N"])
        d = int(meta["d"])
    except (KeyError, ValueError):
        raise ConfigError(f"bad signal header: {lines[0]!r}")
    if N < 1:
        raise ConfigError(f"signal length must be positive, got N={N}")

    reader = csv.DictReader(lines[1:])
    if reader.fieldnames is None or not {"index", "real", "imag"} <= set(reader.fieldnames):
        raise ConfigError("signal CSV needs columns index, real, imag")
    entries = np.zeros(N, dtype=np.complex128)
    seen = set()
    for row in reader:
        try:
            i = int(row["index"])
            value = complex(float(row["real"]), float(row["imag"]))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad signal row {row}: {e}")
        if not 0 <= i < N:
            raise ConfigError(f"signal index {i} outside 0..{N - 1}")
        if i in seen:
            raise ConfigError(f"signal index {i} appears twice")
        seen.add(i)
        entries[i] = value
    if len(seen) != N:
        raise ConfigError(f"header says N={N} but {len(seen)} rows were read")
    return ComplexBlockSignal(entries, d)
