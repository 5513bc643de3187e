"""Pilot-based channel estimation: LS with DFT interpolation, LMMSE, NMSE.

DFT conventions (these pin noiseless exactness when P divides N and L <= P):

    h_hat[l]  = (1/P) * sum_p H_P[p] * exp(+2j*pi*p*l/P)      (numpy ifft)
    H_LS[k]   = sum_l h_tilde[l] * exp(-2j*pi*k*l/N)           (numpy fft)

All functions accept a single frame ``(N,)`` or a slot matrix ``(N, M)``;
subcarriers run along axis 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, MetricError
from .ofdm import OfdmConfig, PilotPattern


@dataclass
class LsEstimate:
    pilot_estimates: np.ndarray  # (P, ...)
    time_taps: np.ndarray  # (P, ...)
    padded_taps: np.ndarray  # (N, ...)
    full_response: np.ndarray  # (N, ...)


def pilot_observations(Y, c, pattern: PilotPattern, cfg: OfdmConfig) -> np.ndarray:
    """Per-pilot LS values ``Y[pQ] / (sqrt(E_c) c[pQ])``."""
    Y = np.asarray(Y)
    c = np.asarray(c)
    ref = np.sqrt(cfg.pilot_power) * c[pattern.indices]
    if np.any(np.abs(ref) == 0):
        raise ZeroDivisionError("pilot reference is zero at a pilot bin (zero pilot value or zero pilot power)")
    shape = (-1,) + (1,) * (Y.ndim - 1)
    return Y[pattern.indices] / ref.reshape(shape)


def ls_interpolate(pilot_estimates, n_subcarriers: int) -> LsEstimate:
    H_p = np.asarray(pilot_estimates, dtype=complex)
    h_hat = np.fft.ifft(H_p, axis=0)
    padded = np.zeros((n_subcarriers,) + H_p.shape[1:], dtype=complex)
    padded[: H_p.shape[0]] = h_hat
    return LsEstimate(
        pilot_estimates=H_p,
        time_taps=h_hat,
        padded_taps=padded,
        full_response=np.fft.fft(padded, axis=0),
    )


def ls_estimate(Y, c, pattern: PilotPattern, cfg: OfdmConfig) -> LsEstimate:
    return ls_interpolate(pilot_observations(Y, c, pattern, cfg), cfg.n_subcarriers)


def frequency_correlation(pdp_weights, rows, cols, n_subcarriers: int) -> np.ndarray:
    """R[k, k'] = sum_l w_l exp(-2j*pi*(k - k')*l/N) for k in rows, k' in cols."""
    w = np.asarray(pdp_weights, dtype=float)
    lags = np.arange(len(w))
    f_rows = np.exp(-2j * np.pi * np.outer(rows, lags) / n_subcarriers)
    f_cols = np.exp(-2j * np.pi * np.outer(cols, lags) / n_subcarriers)
    return (f_rows * w) @ f_cols.conj().T


def lmmse_filter(pdp_weights, sigma2: float, pattern: PilotPattern, cfg: OfdmConfig) -> np.ndarray:
    """N x P Wiener interpolator applied to per-pilot LS values."""
    w = np.asarray(pdp_weights, dtype=float)
    if sigma2 < 0:
        raise InputError("noise variance must be non-negative")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
        raise InputError("pdp weights must be non-negative and sum to one")
    n = cfg.n_subcarriers
    r_fp = frequency_correlation(w, np.arange(n), pattern.indices, n)
    r_pp = r_fp[pattern.indices]
    reg = r_pp + (sigma2 / cfg.pilot_power) * np.eye(len(pattern.indices))
    # r_fp @ inv(reg), via a solve on the Hermitian system
    return np.linalg.solve(reg.conj().T, r_fp.conj().T).conj().T


def lmmse_estimate(Y, c, pattern: PilotPattern, pdp_weights, sigma2: float, cfg: OfdmConfig) -> np.ndarray:
    H_p = pilot_observations(Y, c, pattern, cfg)
    return lmmse_filter(pdp_weights, sigma2, pattern, cfg) @ H_p


def nmse(H_hat, H) -> float:
    """Squared Frobenius error normalized by the reference energy."""
    H_hat = np.asarray(H_hat)
    H = np.asarray(H)
    if H_hat.shape != H.shape:
        raise InputError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    ref = np.sum(np.abs(H) ** 2)
    if ref == 0:
        raise MetricError("NMSE undefined for an all-zero reference")
    return float(np.sum(np.abs(H_hat - H) ** 2) / ref)


def dataset_nmse(H_hat, H) -> float:
    """Mean of per-sample NMSE; the leading axis indexes samples."""
    H_hat = np.asarray(H_hat)
    H = np.asarray(H)
    if H_hat.shape != H.shape:
        raise InputError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    axes = tuple(range(1, H.ndim))
    ref = np.sum(np.abs(H) ** 2, axis=axes)
    if np.any(ref == 0):
        raise MetricError("NMSE undefined for an all-zero reference")
    return float(np.mean(np.sum(np.abs(H_hat - H) ** 2, axis=axes) / ref))
