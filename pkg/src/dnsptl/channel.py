"""Tapped-delay-line Rayleigh fading with an exponential power-delay profile.

Each "region" (source or target domain) is a :class:`DomainScenario`. Taps
evolve across the M slots of a sample as a first-order autoregression, and are
constant within a slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .ofdm import OfdmConfig, cscg


@dataclass(frozen=True)
class DomainScenario:
    scenario_id: str
    pdp_decay: float
    n_taps: int = 8
    slot_correlation: float = 0.99
    seed_space: int = 0

    def __post_init__(self):
        if self.pdp_decay <= 0:
            raise InputError("pdp_decay must be positive")
        if not 0.0 <= self.slot_correlation <= 1.0:
            raise InputError("slot_correlation must lie in [0, 1]")
        if self.n_taps <= 0:
            raise InputError("n_taps must be positive")

    def pdp_weights(self) -> np.ndarray:
        """Per-tap mean power, normalized to sum to one."""
        w = np.exp(-np.arange(self.n_taps) / self.pdp_decay)
        return w / w.sum()


@dataclass
class ChannelRealization:
    taps: np.ndarray  # (L, M)
    freq_response: np.ndarray  # (N, M)
    noise_var: float = 0.0


def freq_response(taps, n: int) -> np.ndarray:
    """N-point forward DFT of the zero-padded taps along axis 0."""
    taps = np.asarray(taps, dtype=complex)
    if taps.shape[0] > n:
        raise InputError(f"{taps.shape[0]} taps do not fit in a {n}-point DFT")
    return np.fft.fft(taps, n=n, axis=0)


def draw_taps(sc: DomainScenario, n_slots: int, rng: np.random.Generator) -> np.ndarray:
    w = sc.pdp_weights()[:, None]
    alpha = sc.slot_correlation
    innov = cscg(rng, (sc.n_taps, n_slots)) * np.sqrt(w)
    taps = np.empty_like(innov)
    taps[:, 0] = innov[:, 0]
    drive = np.sqrt(1.0 - alpha * alpha)
    for m in range(1, n_slots):
        taps[:, m] = alpha * taps[:, m - 1] + drive * innov[:, m]
    return taps


def draw_channel(sc: DomainScenario, cfg: OfdmConfig, rng: np.random.Generator,
                 noise_var: float = 0.0) -> ChannelRealization:
    if sc.n_taps != cfg.n_taps:
        raise InputError(f"scenario has {sc.n_taps} taps, config expects {cfg.n_taps}")
    taps = draw_taps(sc, cfg.n_slots, rng)
    return ChannelRealization(taps=taps, freq_response=freq_response(taps, cfg.n_subcarriers),
                              noise_var=noise_var)


def snr_to_noise_var(snr_db: float, total_power: float = 1.0) -> float:
    if total_power <= 0:
        raise InputError("total power must be positive")
    return total_power / 10.0 ** (snr_db / 10.0)


def default_scenarios(n_taps: int = 8) -> tuple[list[DomainScenario], DomainScenario]:
    """Three source regions and one target region with shifted statistics."""
    sources = [
        DomainScenario(f"source-{i}", decay, n_taps, 0.99, seed_space=i)
        for i, decay in enumerate((2.0, 4.0, 8.0))
    ]
    target = DomainScenario("target", 3.0, n_taps, 0.95, seed_space=100)
    return sources, target
