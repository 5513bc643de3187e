"""DNSP OFDM frame construction and the frequency-domain channel model.

A frame carries N subcarriers. Data symbols are precoded by an orthonormal
Walsh-Hadamard matrix, then nulled at P equispaced bins where the pilot is
placed instead. Everything is double-precision complex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError

log = logging.getLogger(__name__)

# Gray map, first bit selects the imaginary sign, second bit the real sign.
_QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2.0)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class OfdmConfig:
    """Static frame parameters.

    ``power_fraction`` is the share of ``total_power`` given to the pilots.
    """

    n_subcarriers: int = 256
    n_pilots: int = 8
    n_slots: int = 16
    n_taps: int = 8
    power_fraction: float = 0.2
    total_power: float = 1.0

    def __post_init__(self):
        n, p = self.n_subcarriers, self.n_pilots
        if n <= 0 or p <= 0 or self.n_slots <= 0 or self.n_taps <= 0:
            raise ConfigError("n_subcarriers, n_pilots, n_slots and n_taps must be positive")
        if p > n:
            raise ConfigError(f"n_pilots={p} exceeds n_subcarriers={n}")
        if not _is_power_of_two(n):
            raise ConfigError(f"n_subcarriers={n} must be a power of two for the Walsh-Hadamard precoder")
        if not 0.0 <= self.power_fraction <= 1.0:
            raise ConfigError(f"power_fraction={self.power_fraction} outside [0, 1]")
        if self.total_power <= 0:
            raise ConfigError("total_power must be positive")
        if self.n_taps > p:
            log.warning("n_taps=%d > n_pilots=%d: LS tap recovery will alias", self.n_taps, p)
        if n % p:
            log.warning("n_subcarriers=%d not divisible by n_pilots=%d: LS recovery is approximate", n, p)

    @property
    def pilot_spacing(self) -> int:
        return self.n_subcarriers // self.n_pilots

    @property
    def data_power(self) -> float:
        return (1.0 - self.power_fraction) * self.total_power

    @property
    def pilot_power(self) -> float:
        return self.power_fraction * self.total_power

    @property
    def exact_grid(self) -> bool:
        """True when pilots sample the frequency response uniformly and L <= P."""
        return self.n_subcarriers % self.n_pilots == 0 and self.n_taps <= self.n_pilots


@dataclass(frozen=True)
class PilotPattern:
    indices: np.ndarray
    mask: np.ndarray

    @property
    def n_pilots(self) -> int:
        return len(self.indices)


@dataclass
class FrameSignal:
    data_symbols: np.ndarray
    transmit: np.ndarray
    received: np.ndarray | None = None
    bits: np.ndarray | None = field(default=None, repr=False)


def walsh_hadamard(order: int) -> np.ndarray:
    """Orthonormal Sylvester-Hadamard matrix of the given order.

    >>> walsh_hadamard(2) * np.sqrt(2)
    array([[ 1.,  1.],
           [ 1., -1.]])
    """
    if not _is_power_of_two(int(order)):
        raise ConfigError(f"Walsh-Hadamard order must be a power of two, got {order}")
    h = np.ones((1, 1))
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h / np.sqrt(order)


def qpsk_modulate(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 2:
        raise InputError(f"QPSK needs an even number of bits, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise InputError("bits must be 0 or 1")
    return _QPSK_POINTS[2 * bits[0::2] + bits[1::2]]


def qpsk_demodulate(symbols) -> np.ndarray:
    """Hard decision; an exactly-zero component decides bit 0."""
    symbols = np.asarray(symbols).ravel()
    out = np.empty(2 * symbols.size, dtype=np.uint8)
    out[0::2] = symbols.imag < 0
    out[1::2] = symbols.real < 0
    return out


def pilot_indices(n_subcarriers: int, n_pilots: int) -> np.ndarray:
    """Indices p*Q, Q = floor(N/P)."""
    return np.arange(n_pilots) * (n_subcarriers // n_pilots)


def nulling_pattern(cfg: OfdmConfig) -> PilotPattern:
    indices = pilot_indices(cfg.n_subcarriers, cfg.n_pilots)
    mask = np.zeros(cfg.n_subcarriers, dtype=bool)
    mask[indices] = True
    return PilotPattern(indices=indices, mask=mask)


def pilot_sequence(cfg: OfdmConfig, seed: int = 0) -> np.ndarray:
    """Unit-modulus QPSK pilot values on the pilot bins, zero elsewhere."""
    rng = np.random.default_rng(seed)
    pattern = nulling_pattern(cfg)
    c = np.zeros(cfg.n_subcarriers, dtype=complex)
    c[pattern.indices] = _QPSK_POINTS[rng.integers(0, 4, size=cfg.n_pilots)]
    return c


def build_transmit(s, c, pattern: PilotPattern, cfg: OfdmConfig, W: np.ndarray) -> FrameSignal:
    s = np.asarray(s, dtype=complex)
    c = np.asarray(c, dtype=complex)
    n = cfg.n_subcarriers
    if s.shape != (n,) or c.shape != (n,) or W.shape != (n, n) or pattern.mask.shape != (n,):
        raise InputError(f"dimension mismatch: s{s.shape} c{c.shape} W{W.shape}, expected N={n}")
    x = np.sqrt(cfg.data_power) * (W @ s)
    x[pattern.mask] = np.sqrt(cfg.pilot_power) * c[pattern.mask]
    return FrameSignal(data_symbols=s, transmit=x)


def cscg(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(x: FrameSignal, H, sigma2: float, rng: np.random.Generator) -> FrameSignal:
    if sigma2 < 0:
        raise InputError("noise variance must be non-negative")
    y = np.asarray(H) * x.transmit
    if sigma2 > 0:
        y = y + cscg(rng, y.shape, sigma2)
    return FrameSignal(data_symbols=x.data_symbols, transmit=x.transmit, received=y, bits=x.bits)


def time_domain_equivalence_check(x: FrameSignal, taps, cp_len: int, tol: float = 1e-9) -> bool:
    """Run IDFT, cyclic prefix, linear convolution, CP removal and DFT explicitly,
    and compare with the per-bin product used everywhere else."""
    taps = np.asarray(taps, dtype=complex)
    n_taps = len(taps)
    if cp_len < n_taps - 1:
        raise InputError(f"cyclic prefix {cp_len} shorter than channel memory {n_taps - 1}")
    X = np.asarray(x.transmit, dtype=complex)
    n = len(X)
    time = np.fft.ifft(X)
    with_cp = np.concatenate([time[n - cp_len:], time]) if cp_len else time
    rx = np.convolve(with_cp, taps)[cp_len:cp_len + n]
    Y = np.fft.fft(rx)
    H = np.fft.fft(np.concatenate([taps, np.zeros(n - n_taps)]))
    return bool(np.max(np.abs(Y - H * X)) <= tol)


def random_bits(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2, size=shape, dtype=np.uint8)


def build_transmit_block(bits, c, pattern: PilotPattern, cfg: OfdmConfig, W: np.ndarray) -> np.ndarray:
    """Transmit matrix (N, M) for M frames whose bits are the rows of ``bits`` (M, 2N)."""
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[1] != 2 * cfg.n_subcarriers:
        raise InputError(f"bits must have shape (M, {2 * cfg.n_subcarriers}), got {bits.shape}")
    S = qpsk_modulate(bits).reshape(bits.shape[0], cfg.n_subcarriers).T
    X = np.sqrt(cfg.data_power) * (W @ S)
    X[pattern.indices] = np.sqrt(cfg.pilot_power) * np.asarray(c)[pattern.indices, None]
    return X
