"""Dataset generation, pre-training, fine-tuning and NMSE evaluation.

Every sample is drawn from its own generator seeded by
``SeedSequence([seed, stream, index])``; the per-sample seed is kept in the
dataset metadata so any sample can be regenerated in isolation, and two
datasets built from different ``(stream, index)`` ranges never share a draw.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import DomainScenario, draw_channel, snr_to_noise_var
from .errors import ContainerError, InputError, TrainingError
from .estimators import dataset_nmse, lmmse_filter, ls_interpolate, pilot_observations
from .nn.container import read_container, write_container
from .nn.layers import mse_loss
from .nn.optim import Adam
from .ofdm import (OfdmConfig, build_transmit_block, cscg, nulling_pattern, pilot_sequence,
                   random_bits, walsh_hadamard)
from .recnn import ReCNN, from_network, to_network

log = logging.getLogger(__name__)

DATASET_MAGIC = b"DNSPDSET"
TRAIN_SNR_GRID = tuple(range(0, 40, 5))
EVAL_SNR_GRID = tuple(range(0, 22, 2))

# generator streams; keep these distinct so splits never overlap
STREAM_SOURCE = 1
STREAM_SOURCE_VAL = 2
STREAM_TARGET = 3
STREAM_TARGET_EVAL = 4


@dataclass(frozen=True)
class SampleMeta:
    scenario_id: str
    snr_db: float
    seed: int


@dataclass
class Dataset:
    """LS network inputs and true-channel labels for S samples.

    ``inputs`` is (2S, N, M, 1) and ``labels`` is (2S, N*M); rows 2i and
    2i+1 are the real and imaginary parts of sample i. ``pilot_estimates``
    keeps the per-pilot LS values (S, P, M) so classical estimators can be
    scored on exactly the same frames.
    """

    inputs: np.ndarray
    labels: np.ndarray
    pilot_estimates: np.ndarray
    meta: list[SampleMeta] = field(default_factory=list)

    def __post_init__(self):
        if len(self.inputs) != len(self.labels) or len(self.inputs) != 2 * len(self.meta):
            raise InputError("inputs, labels and meta disagree on the sample count")

    def __len__(self):
        return len(self.meta)

    @property
    def n_subcarriers(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_slots(self) -> int:
        return self.inputs.shape[2]

    def rows(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        return np.stack([2 * idx, 2 * idx + 1], axis=1).ravel()

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        rows = self.rows(idx)
        return Dataset(self.inputs[rows], self.labels[rows], self.pilot_estimates[idx],
                       [self.meta[i] for i in idx])

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        return self.subset(np.arange(n_first)), self.subset(np.arange(n_first, len(self)))

    def ls_response(self) -> np.ndarray:
        return self.inputs[0::2, ..., 0] + 1j * self.inputs[1::2, ..., 0]

    def true_response(self) -> np.ndarray:
        return from_network(self.labels, self.n_subcarriers, self.n_slots)


@dataclass
class TrainConfig:
    lr_pretrain: float = 1e-4
    lr_finetune: float = 1e-4
    batch_size: int = 20
    gradsteps_pretrain: int = 3000
    gradsteps_finetune: int = 300
    snr_grid: tuple = TRAIN_SNR_GRID
    seed: int = 0
    beta1: float = 0.99
    beta2: float = 0.999

    def __post_init__(self):
        if self.batch_size < 2:
            raise InputError("batch size must be at least 2 (batch norm)")
        if self.gradsteps_pretrain < 1 or self.gradsteps_finetune < 1:
            raise InputError("gradient step counts must be positive")


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)
    val_nmse: list = field(default_factory=list)
    best_step: int = 0
    seconds: float = 0.0
    steps: int = 0


# ---------------------------------------------------------------- data


def sample_seed(seed: int, stream: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, stream, index]).generate_state(1, np.uint64)[0])


def simulate_sample(sc: DomainScenario, cfg: OfdmConfig, snr_db: float, rng: np.random.Generator,
                    c=None, W=None, pattern=None) -> dict:
    """One M-slot block: channel, fresh bits per slot, received frames, LS estimates."""
    pattern = nulling_pattern(cfg) if pattern is None else pattern
    c = pilot_sequence(cfg) if c is None else c
    W = walsh_hadamard(cfg.n_subcarriers) if W is None else W
    sigma2 = snr_to_noise_var(snr_db, cfg.total_power)
    ch = draw_channel(sc, cfg, rng, noise_var=sigma2)
    bits = random_bits(rng, (cfg.n_slots, 2 * cfg.n_subcarriers))
    X = build_transmit_block(bits, c, pattern, cfg, W)
    Y = ch.freq_response * X
    if sigma2 > 0:
        Y = Y + cscg(rng, Y.shape, sigma2)
    H_p = pilot_observations(Y, c, pattern, cfg)
    return {"H": ch.freq_response, "Y": Y, "X": X, "bits": bits, "sigma2": sigma2,
            "pilots": H_p, "H_ls": ls_interpolate(H_p, cfg.n_subcarriers).full_response}


def generate_dataset(scenarios, count: int, cfg: OfdmConfig, snr_grid=TRAIN_SNR_GRID, seed: int = 0,
                     stream: int = STREAM_SOURCE, pilot_seed: int = 0) -> Dataset:
    """``count`` samples, each from a uniformly chosen scenario at a uniformly chosen SNR."""
    if count <= 0:
        raise InputError("count must be positive")
    if isinstance(scenarios, DomainScenario):
        scenarios = [scenarios]
    snr_grid = list(snr_grid)
    pattern = nulling_pattern(cfg)
    c = pilot_sequence(cfg, pilot_seed)
    W = walsh_hadamard(cfg.n_subcarriers)
    n, m = cfg.n_subcarriers, cfg.n_slots
    H_ls = np.empty((count, n, m), dtype=complex)
    H_true = np.empty((count, n, m), dtype=complex)
    pilots = np.empty((count, cfg.n_pilots, m), dtype=complex)
    meta = []
    for i in range(count):
        s = sample_seed(seed, stream, i)
        rng = np.random.default_rng(s)
        sc = scenarios[rng.integers(len(scenarios))] if len(scenarios) > 1 else scenarios[0]
        snr = float(snr_grid[rng.integers(len(snr_grid))])
        blk = simulate_sample(sc, cfg, snr, rng, c, W, pattern)
        H_ls[i], H_true[i], pilots[i] = blk["H_ls"], blk["H"], blk["pilots"]
        meta.append(SampleMeta(sc.scenario_id, snr, s))
    labels = to_network(H_true).reshape(2 * count, n * m)
    return Dataset(to_network(H_ls), labels, pilots, meta)


def save_dataset(ds: Dataset, path) -> None:
    """Binary container plus a ``.meta.tsv`` sidecar with one line per sample."""
    path = Path(path)
    header = {"count": len(ds), "n_subcarriers": ds.n_subcarriers, "n_slots": ds.n_slots,
              "n_pilots": ds.pilot_estimates.shape[1], "layout": "re-im-interleaved/NM-subcarrier-major"}
    write_container(path, DATASET_MAGIC, header, [
        ({"name": "inputs"}, ds.inputs),
        ({"name": "labels"}, ds.labels),
        ({"name": "pilot_estimates"}, ds.pilot_estimates),
    ])
    lines = ["index\tscenario_id\tsnr_db\tseed"]
    lines += [f"{i}\t{m.scenario_id}\t{m.snr_db:g}\t{m.seed}" for i, m in enumerate(ds.meta)]
    Path(str(path) + ".meta.tsv").write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    header, entries = read_container(path, DATASET_MAGIC)
    arrays = {info["name"]: arr for info, arr in entries}
    sidecar = Path(str(path) + ".meta.tsv")
    if not sidecar.exists():
        raise ContainerError(f"missing metadata sidecar {sidecar}")
    meta = []
    for line in sidecar.read_text().splitlines()[1:]:
        _, sid, snr, seed = line.split("\t")
        meta.append(SampleMeta(sid, float(snr), int(seed)))
    if len(meta) != header["count"]:
        raise ContainerError(f"{sidecar}: {len(meta)} rows, header says {header['count']}")
    return Dataset(arrays["inputs"], arrays["labels"], arrays["pilot_estimates"], meta)


# ---------------------------------------------------------------- training


def _check_finite(loss, step, phase):
    if not np.isfinite(loss):
        raise TrainingError(f"{phase}: loss became {loss} at step {step}; lower the learning rate")


def evaluate_nmse(model: ReCNN, ds: Dataset) -> float:
    """Inference-mode NMSE averaged over samples. Consumes no randomness."""
    pred = from_network(model.predict(ds.inputs), ds.n_subcarriers, ds.n_slots)
    return dataset_nmse(pred, ds.true_response())


def pretrain(model: ReCNN, train: Dataset, tc: TrainConfig, val: Dataset | None = None,
             val_every: int | None = None) -> TrainResult:
    """Adam on uniformly resampled batches; keeps the best-validation checkpoint."""
    if len(train) == 0:
        raise InputError("empty training set")
    rng = np.random.default_rng(np.random.SeedSequence([tc.seed, 11]))
    opt = Adam(model.trainable_parameters(), lr=tc.lr_pretrain, beta1=tc.beta1, beta2=tc.beta2)
    val_every = val_every or max(1, len(train) // tc.batch_size)
    result = TrainResult()
    best, best_snap = np.inf, None
    t0 = time.perf_counter()
    for step in range(1, tc.gradsteps_pretrain + 1):
        rows = train.rows(rng.integers(0, len(train), tc.batch_size))
        out = model.forward(train.inputs[rows], train=True)
        loss, grad = mse_loss(out, train.labels[rows])
        _check_finite(loss, step, "pretrain")
        model.backward(grad.astype(model.dtype), input_grad=False)
        opt.step()
        result.losses.append(loss)
        if val is not None and (step % val_every == 0 or step == tc.gradsteps_pretrain):
            score = evaluate_nmse(model, val)
            result.val_nmse.append((step, score))
            log.info("pretrain step %d loss %.4g val nmse %.4g", step, loss, score)
            if score < best:
                best, best_snap, result.best_step = score, model.snapshot(), step
    if best_snap is not None:
        model.restore(best_snap)
    result.steps = tc.gradsteps_pretrain
    result.seconds = time.perf_counter() - t0
    return result


def finetune(model: ReCNN, train: Dataset, tc: TrainConfig) -> TrainResult:
    """Freeze the conv stack and train only the dense layers on target data.

    With the conv stack frozen its output is a fixed function of the input, so
    the denoised maps are computed once up front.
    """
    model.freeze_convolutional()
    features = np.concatenate([model.denoise(train.inputs[i:i + 256], train=False)
                               for i in range(0, len(train.inputs), 256)])
    rng = np.random.default_rng(np.random.SeedSequence([tc.seed, 23]))
    opt = Adam(model.trainable_parameters(), lr=tc.lr_finetune, beta1=tc.beta1, beta2=tc.beta2)
    result = TrainResult()
    t0 = time.perf_counter()
    for step in range(1, tc.gradsteps_finetune + 1):
        rows = train.rows(rng.integers(0, len(train), tc.batch_size))
        out = model.dense_stack.forward(features[rows], train=True)
        loss, grad = mse_loss(out, train.labels[rows])
        _check_finite(loss, step, "finetune")
        model.dense_stack.backward(grad.astype(model.dtype))
        opt.step()
        result.losses.append(loss)
    result.steps = tc.gradsteps_finetune
    result.seconds = time.perf_counter() - t0
    return result


def no_transfer_test(model: ReCNN, target: Dataset) -> float:
    return evaluate_nmse(model, target)


def transfer_test(model: ReCNN, target_test: Dataset) -> float:
    return evaluate_nmse(model, target_test)


# ---------------------------------------------------------------- baselines


def ls_nmse(ds: Dataset) -> float:
    return dataset_nmse(ds.ls_response(), ds.true_response())


def lmmse_response(ds: Dataset, scenarios, cfg: OfdmConfig) -> np.ndarray:
    """Genie LMMSE (true PDP and noise variance) on every sample of ``ds``."""
    by_id = {sc.scenario_id: sc for sc in scenarios}
    pattern = nulling_pattern(cfg)
    cache = {}
    out = np.empty((len(ds), cfg.n_subcarriers, ds.n_slots), dtype=complex)
    for i, m in enumerate(ds.meta):
        key = (m.scenario_id, m.snr_db)
        if key not in cache:
            sigma2 = snr_to_noise_var(m.snr_db, cfg.total_power)
            cache[key] = lmmse_filter(by_id[m.scenario_id].pdp_weights(), sigma2, pattern, cfg)
        out[i] = cache[key] @ ds.pilot_estimates[i]
    return out


def lmmse_nmse(ds: Dataset, scenarios, cfg: OfdmConfig) -> float:
    return dataset_nmse(lmmse_response(ds, scenarios, cfg), ds.true_response())
