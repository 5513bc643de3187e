"""Equalization, data recovery and bit-error rate.

Recovery inverts the transmit chain: zero the pilot bins (their data was
never sent), undo the orthonormal precoder, and take hard QPSK decisions.
The precoded energy discarded at the pilot bins is the source of the DNSP
symbol-misidentification floor.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .ofdm import OfdmConfig, PilotPattern, qpsk_demodulate

ZF_EPS = 1e-12
# decision statistics this close to zero are ties (nulling can cancel a symbol exactly)
TIE_TOL = 1e-9


def zf_equalize(Y, H_hat, return_count: bool = False):
    Y = np.asarray(Y, dtype=complex)
    H_hat = np.asarray(H_hat, dtype=complex)
    if Y.shape != H_hat.shape:
        raise InputError(f"shape mismatch {Y.shape} vs {H_hat.shape}")
    ok = np.abs(H_hat) >= ZF_EPS
    out = np.zeros_like(Y)
    out[ok] = Y[ok] / H_hat[ok]
    if return_count:
        return out, int(np.count_nonzero(~ok))
    return out


def mmse_equalize(Y, H_hat, sigma2: float, Es_bin: float) -> np.ndarray:
    if sigma2 < 0 or Es_bin <= 0:
        raise InputError("need sigma2 >= 0 and Es_bin > 0")
    Y = np.asarray(Y, dtype=complex)
    H_hat = np.asarray(H_hat, dtype=complex)
    if Y.shape != H_hat.shape:
        raise InputError(f"shape mismatch {Y.shape} vs {H_hat.shape}")
    denom = np.abs(H_hat) ** 2 + sigma2 / Es_bin
    out = np.zeros_like(Y)
    ok = denom > 0
    out[ok] = H_hat.conj()[ok] * Y[ok] / denom[ok]
    return out


def detect_bits(equalized, pattern: PilotPattern, W: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Bits of one frame ``(2N,)``, or of M frames ``(M, 2N)`` for an ``(N, M)`` input."""
    v = np.array(equalized, dtype=complex)
    v[pattern.indices] = 0.0
    s_hat = W.T @ v
    if cfg.data_power > 0:
        s_hat = s_hat / np.sqrt(cfg.data_power)
    re, im = s_hat.real.copy(), s_hat.imag.copy()
    re[np.abs(re) < TIE_TOL] = 0.0
    im[np.abs(im) < TIE_TOL] = 0.0
    s_hat = re + 1j * im
    if v.ndim == 1:
        return qpsk_demodulate(s_hat)
    return np.stack([qpsk_demodulate(col) for col in s_hat.T])


def ber(bits_hat, bits_true) -> float:
    a = np.asarray(bits_hat).ravel()
    b = np.asarray(bits_true).ravel()
    if a.shape != b.shape:
        raise InputError(f"bit vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise InputError("empty bit vectors")
    return float(np.count_nonzero(a != b) / a.size)
