"""Monte-Carlo BER over M-slot blocks for any combination of estimator and equalizer.

Estimators map a simulated block (see :func:`pipeline.simulate_sample`) to an
(N, M) channel estimate. Built-ins: ``perfect``, ``ls`` and ``lmmse``; a
trained model is wrapped with :func:`model_estimator`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DomainScenario
from .detection import detect_bits, mmse_equalize, zf_equalize
from .estimators import lmmse_filter
from .ofdm import OfdmConfig, nulling_pattern, pilot_sequence, walsh_hadamard
from .pipeline import sample_seed, simulate_sample
from .recnn import ReCNN, from_network, to_network

STREAM_LINK = 9


@dataclass
class BerCount:
    errors: int = 0
    bits: int = 0

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")


def model_estimator(model: ReCNN):
    def estimate(block):
        x = to_network(block["H_ls"][None])
        return from_network(model.predict(x), *block["H_ls"].shape)[0]

    return estimate


def builtin_estimators(sc: DomainScenario, cfg: OfdmConfig, snr_sigma2: float) -> dict:
    filt = lmmse_filter(sc.pdp_weights(), snr_sigma2, nulling_pattern(cfg), cfg)
    return {
        "perfect": lambda blk: blk["H"],
        "ls": lambda blk: blk["H_ls"],
        "lmmse": lambda blk: filt @ blk["pilots"],
    }


def simulate_ber(cfg: OfdmConfig, sc: DomainScenario, snr_db: float, n_blocks: int, estimators: dict,
                 equalizers=("zf", "mmse"), seed: int = 0, pilot_seed: int = 0) -> dict:
    """Returns ``{(estimator, equalizer): BerCount}``; every pair sees the same frames."""
    pattern = nulling_pattern(cfg)
    c = pilot_sequence(cfg, pilot_seed)
    W = walsh_hadamard(cfg.n_subcarriers)
    counts = {(e, q): BerCount() for e in estimators for q in equalizers}
    for b in range(n_blocks):
        rng = np.random.default_rng(sample_seed(seed, STREAM_LINK, b))
        blk = simulate_sample(sc, cfg, snr_db, rng, c, W, pattern)
        for name, est in estimators.items():
            H_hat = est(blk)
            for eq in equalizers:
                if eq == "zf":
                    v = zf_equalize(blk["Y"], H_hat)
                else:
                    v = mmse_equalize(blk["Y"], H_hat, blk["sigma2"], cfg.data_power)
                bits = detect_bits(v, pattern, W, cfg)
                cnt = counts[(name, eq)]
                cnt.errors += int(np.count_nonzero(bits != blk["bits"]))
                cnt.bits += blk["bits"].size
    return counts
