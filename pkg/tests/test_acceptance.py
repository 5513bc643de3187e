"""Acceptance gate: nine criteria, each printing one PASS/FAIL line.

Criteria 4-7 share one trained pipeline per seed (small scale, three seeds),
built once per session. Set ``DNSPTL_ACCEPTANCE_CACHE=<dir>`` to keep the
trained models between sessions; without it everything is retrained.
"""

import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from dnsptl import pipeline as pl
from dnsptl.channel import freq_response, snr_to_noise_var
from dnsptl.estimators import ls_estimate, nmse
from dnsptl.harness.cli import EXIT_OK, main
from dnsptl.harness.config import defaults
from dnsptl.link import builtin_estimators, model_estimator, simulate_ber
from dnsptl.nn import BatchNorm, Conv2D, Dense, ReLU, Sequential, grad_check
from dnsptl.ofdm import OfdmConfig, cscg, nulling_pattern, pilot_sequence
from dnsptl.recnn import ReCNN, desk_scale_config, load_model, save_model

SEEDS = (0, 1, 2)
EVAL_SNRS = (0, 10, 20)
EVAL_SAMPLES = 200          # per SNR and seed: 200 blocks x 8 slots = 1600 frames
BOOTSTRAP = 2000


def _bootstrap_upper(diffs, rng, q=95):
    """One-sided upper confidence bound on the mean of paired differences."""
    diffs = np.asarray(diffs)
    idx = rng.integers(0, len(diffs), (BOOTSTRAP, len(diffs)))
    return float(np.percentile(diffs[idx].mean(axis=1), q))


def _bootstrap_less(a, b, rng, q=95):
    """Bootstrap upper bound of mean(a) - mean(b) for independent samples."""
    a, b = np.asarray(a), np.asarray(b)
    ma = a[rng.integers(0, len(a), (BOOTSTRAP, len(a)))].mean(axis=1)
    mb = b[rng.integers(0, len(b), (BOOTSTRAP, len(b)))].mean(axis=1)
    return float(np.percentile(ma - mb, q))


def _per_sample_nmse(est, true):
    return np.array([nmse(e, h) for e, h in zip(est, true)])


# ------------------------------------------------------------------ 1


def test_criterion_1_gradients(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    bn = BatchNorm(3)
    bn.gamma.value[...] = rng.uniform(0.5, 2.0, 3)
    checks = {
        "conv": (Conv2D(2, 3, 5, rng), rng.standard_normal((2, 7, 6, 2))),
        "batchnorm": (bn, rng.standard_normal((4, 5, 5, 3))),
        "relu": (ReLU(), rng.standard_normal((2, 4, 4, 3))),
        "dense": (Dense(10, 7, rng), rng.standard_normal((3, 10))),
        "conv+bn+relu": (Sequential(Conv2D(2, 4, 3, rng), BatchNorm(4), ReLU()), rng.standard_normal((4, 8, 8, 2))),
        "recnn-small": (ReCNN(desk_scale_config("small"), seed=0, dtype=np.float64),
                        rng.standard_normal((2, 64, 8, 1))),
    }
    worst = {}
    for name, (fragment, x) in checks.items():
        kw = {"max_entries": 40} if name == "recnn-small" else {}
        worst[name] = grad_check(fragment, x, tolerance=1e-4, **kw).max_rel_error
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-4 and elapsed < 120
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert verdict(1, ok, f"max rel err {max(worst.values()):.2e} <= 1e-4 ({detail}); {elapsed:.0f}s < 120s")


# ------------------------------------------------------------------ 2


def test_criterion_2_ls_exactness(verdict):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(2 ** rng.integers(3, 10))
        p = int(2 ** rng.integers(1, int(np.log2(n)) + 1))
        n_taps = int(rng.integers(1, p + 1))
        cfg = OfdmConfig(n, p, n_taps=n_taps)
        pat, c = nulling_pattern(cfg), pilot_sequence(cfg, int(rng.integers(1 << 30)))
        H = freq_response(cscg(rng, n_taps), n)
        Y = H * (np.sqrt(cfg.pilot_power) * c)  # data bins do not enter the estimate
        worst = max(worst, nmse(ls_estimate(Y, c, pat, cfg).full_response, H))
    ok = worst < 1e-10
    assert verdict(2, ok, f"worst noiseless LS NMSE {worst:.1e} < 1e-10 over 100 (N,P,L); "
                          f"{time.perf_counter() - t0:.1f}s")


# ------------------------------------------------------------------ 3


def test_criterion_3_classical_ordering(verdict):
    cfg = OfdmConfig(64, 8, n_slots=8)
    _, target = defaults("small").scenarios()
    rng = np.random.default_rng(3)
    ls, mm = {}, {}
    for i, snr in enumerate(EVAL_SNRS):
        # 500 blocks x 8 slots = 4000 frames per SNR
        ds = pl.generate_dataset(target, 500, cfg, [snr], seed=3, stream=3000 + i)
        H = ds.true_response()
        ls[snr] = _per_sample_nmse(ds.ls_response(), H)
        mm[snr] = _per_sample_nmse(pl.lmmse_response(ds, [target], cfg), H)
    bounds = [_bootstrap_upper(mm[s] - ls[s], rng) for s in EVAL_SNRS]
    decr = [_bootstrap_less(d[b], d[a], rng) for d in (ls, mm) for a, b in zip(EVAL_SNRS, EVAL_SNRS[1:])]
    ok = all(b < 0 for b in bounds) and all(d < 0 for d in decr)
    table = "; ".join(f"{s} dB LS {ls[s].mean():.3g} LMMSE {mm[s].mean():.3g}" for s in EVAL_SNRS)
    assert verdict(3, ok, f"LMMSE < LS and both decreasing at 95% bootstrap ({table})")


# ------------------------------------------------------------------ 4-7 shared pipeline


@dataclass
class SeedRun:
    seed: int
    pretrained: ReCNN
    finetuned: ReCNN
    pre_seconds: float
    fin_seconds: float
    fin_steps: int
    pre_steps: int
    fin_samples: int
    conv_frozen_ok: bool
    eval_sets: dict


def _train_seed(seed, cache):
    cfg = defaults("small").with_seed(seed)
    ofdm = cfg.ofdm_config()
    sources, target = cfg.scenarios()
    t, tc = cfg.training, cfg.train_config()
    eval_sets = {snr: pl.generate_dataset(target, EVAL_SAMPLES, ofdm, [snr], seed, pl.STREAM_TARGET_EVAL * 100 + i)
                 for i, snr in enumerate(EVAL_SNRS)}
    tgt_train, _ = pl.generate_dataset(target, t.target_samples, ofdm, t.snr_grid, seed,
                                       pl.STREAM_TARGET).split(t.target_train)
    pre_path = cache / f"pre{seed}.bin" if cache else None
    if pre_path and pre_path.exists():
        model, pre_seconds = load_model(pre_path), float((cache / f"pre{seed}.sec").read_text())
    else:
        train = pl.generate_dataset(sources, t.source_samples, ofdm, t.snr_grid, seed, pl.STREAM_SOURCE)
        val = pl.generate_dataset(sources, t.validation_samples, ofdm, t.snr_grid, seed, pl.STREAM_SOURCE_VAL)
        model = ReCNN(cfg.arch(), seed=seed)
        pre_seconds = pl.pretrain(model, train, tc, val).seconds
        if cache:
            save_model(model, pre_path)
            (cache / f"pre{seed}.sec").write_text(repr(pre_seconds))
    pretrained = model.copy()
    conv_before = [p.value.copy() for p in model.conv_parameters()]
    res = pl.finetune(model, tgt_train, tc)
    frozen_ok = all(np.array_equal(a, p.value) for a, p in zip(conv_before, model.conv_parameters()))
    return SeedRun(seed, pretrained, model, pre_seconds, res.seconds, res.steps, tc.gradsteps_pretrain,
                   len(tgt_train), frozen_ok, eval_sets)


@pytest.fixture(scope="session")
def runs():
    cache = os.environ.get("DNSPTL_ACCEPTANCE_CACHE")
    cache = Path(cache) if cache else None
    if cache:
        cache.mkdir(parents=True, exist_ok=True)
    return [_train_seed(s, cache) for s in SEEDS]


def test_criterion_4_learning_beats_lmmse(runs, verdict):
    _, target = defaults("small").scenarios()
    ofdm = defaults("small").ofdm_config()
    learned = np.mean([pl.transfer_test(r.finetuned, r.eval_sets[10]) for r in runs])
    lmmse = np.mean([pl.lmmse_nmse(r.eval_sets[10], [target], ofdm) for r in runs])
    minutes = sum(r.pre_seconds + r.fin_seconds for r in runs) / 60
    ok = learned < lmmse and minutes < 30
    assert verdict(4, ok, f"10 dB transfer NMSE {learned:.4g} < LMMSE {lmmse:.4g} (3 seeds); "
                          f"training {minutes:.1f} min < 30")


def test_criterion_5_transfer_benefit(runs, verdict):
    fin = np.mean([pl.transfer_test(r.finetuned, r.eval_sets[0]) for r in runs])
    pre = np.mean([pl.no_transfer_test(r.pretrained, r.eval_sets[0]) for r in runs])
    ok = fin <= 0.9 * pre
    assert verdict(5, ok, f"0 dB transfer NMSE {fin:.4g} <= 0.9 x no-transfer {pre:.4g} = {0.9 * pre:.4g} (3 seeds)")


def test_criterion_6_finetune_economy(runs, verdict):
    ok = all(r.fin_samples <= 300 and r.fin_steps * 10 <= r.pre_steps and r.conv_frozen_ok
             and r.finetuned.conv_frozen and r.fin_seconds < r.pre_seconds / 10 for r in runs)
    r = runs[0]
    assert verdict(6, ok, f"{r.fin_samples} target samples, {r.fin_steps} <= {r.pre_steps}/10 steps, "
                          f"conv bit-frozen, {r.fin_seconds:.1f}s vs {r.pre_seconds:.0f}s pretrain")


def test_criterion_7_ber_ordering(runs, verdict):
    cfg = defaults("small")
    ofdm = cfg.ofdm_config()
    _, target = cfg.scenarios()
    blocks = 40  # per seed: 3 x 40 x 8 slots x 128 bits = 122,880 bits
    totals = {}
    for r in runs:
        est = builtin_estimators(target, ofdm, snr_to_noise_var(20))
        est["proposed"] = model_estimator(r.finetuned)
        counts = simulate_ber(ofdm, target, 20, blocks, est, equalizers=("mmse",), seed=100 + r.seed)
        for key, cnt in counts.items():
            e, b = totals.get(key[0], (0, 0))
            totals[key[0]] = (e + cnt.errors, b + cnt.bits)
    ber = {k: e / b for k, (e, b) in totals.items()}
    bits = totals["proposed"][1]
    ok = bits >= 100_000 and ber["proposed"] < ber["lmmse"] and ber["perfect"] <= min(ber["proposed"], ber["lmmse"])
    assert verdict(7, ok, f"20 dB BER perfect {ber['perfect']:.3g} <= learned+MMSE {ber['proposed']:.3g} "
                          f"< LMMSE+MMSE {ber['lmmse']:.3g} over {bits} bits")


# ------------------------------------------------------------------ 8


def test_criterion_8_power_split(verdict):
    _, target = defaults("small").scenarios()
    rng = np.random.default_rng(8)
    scores = {}
    for i, rho in enumerate((0.1, 0.2, 0.3)):
        cfg = OfdmConfig(64, 8, n_slots=8, power_fraction=rho)
        ds = pl.generate_dataset(target, 500, cfg, [10], seed=8, stream=4000 + i)
        scores[rho] = _per_sample_nmse(ds.ls_response(), ds.true_response())
    bounds = [_bootstrap_less(scores[b], scores[a], rng) for a, b in ((0.1, 0.2), (0.2, 0.3))]
    ok = all(b < 0 for b in bounds)
    detail = " > ".join(f"rho {r:g}: {s.mean():.3g}" for r, s in scores.items())
    assert verdict(8, ok, f"LS NMSE at 10 dB decreasing with pilot power at 95% bootstrap ({detail})")


# ------------------------------------------------------------------ 9


def test_criterion_9_determinism(tmp_path, verdict):
    ini = tmp_path / "det.ini"
    ini.write_text("[ofdm]\nn_subcarriers = 32\nn_pilots = 8\nn_slots = 4\n"
                   "[training]\ngradsteps_pretrain = 30\ngradsteps_finetune = 3\nbatch_size = 4\n"
                   "source_samples = 40\nvalidation_samples = 10\ntarget_samples = 20\ntarget_train = 12\n"
                   "[sweep]\npilots = 4, 8\npower_fractions = 0.1, 0.3\neval_snr = 0, 20\n"
                   "eval_frames = 8\nber_blocks = 4\n")
    stages = ("gen-data", "pretrain", "finetune", "eval", "baselines", "ber", "report")
    dirs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for stage in stages:
            assert main([stage, "--config", str(ini), "--scale", "small", "--out", str(out), "--seed", "9"]) == EXIT_OK
        dirs.append(out)
    a, b = dirs
    reports = sorted(p.relative_to(a) for d in ("tables", "series") for p in (a / d).iterdir())
    reports.append(Path("config.snapshot"))
    same = all((a / rel).read_bytes() == (b / rel).read_bytes() for rel in reports)
    assert verdict(9, same, f"{len(reports)} report files byte-identical across two runs")
