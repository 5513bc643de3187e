"""Experiment stages over a results directory.

Layout under ``out``::

    config.snapshot          effective config (INI)
    data/                    dataset containers + .meta.tsv sidecars
    models/                  pretrained.bin, finetuned.bin
    tables/                  <stage>.csv / <stage>.json
    series/                  gnuplot two-column files

Each stage reads what earlier stages wrote and raises
:class:`DependencyError` when something is missing.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .. import pipeline as pl
from ..channel import snr_to_noise_var
from ..errors import DependencyError, TrainingError
from ..link import builtin_estimators, model_estimator, simulate_ber
from ..nn.gradcheck import grad_check
from ..recnn import ReCNN, desk_scale_config, load_model, save_model
from .config import ExperimentConfig, load_config
from .report import ResultRow, emit_report, load_rows

log = logging.getLogger(__name__)

STAGES = ("gen-data", "pretrain", "finetune", "eval", "baselines", "ber", "grad-check", "report")
METHODS = ("LS", "LMMSE", "NoTransfer", "Proposed")
STREAM_EVAL_BASE = 1000
STREAM_SWEEP_BASE = 2000


class Workspace:
    def __init__(self, out):
        self.root = Path(out)
        self.data = self.root / "data"
        self.models = self.root / "models"
        self.tables = self.root / "tables"

    def prepare(self, cfg: ExperimentConfig):
        for d in (self.root, self.data, self.models, self.tables, self.root / "series"):
            d.mkdir(parents=True, exist_ok=True)
        (self.root / "config.snapshot").write_text(cfg.snapshot())

    def dataset(self, name):
        return self.data / f"{name}.bin"

    def eval_set(self, snr):
        return self.data / f"eval_snr{snr:g}.bin"

    def need(self, path, stage):
        if not Path(path).exists():
            raise DependencyError(f"{path} not found; run '{stage}' first")
        return path


def _load(ws: Workspace, name, stage="gen-data"):
    return pl.load_dataset(ws.need(ws.dataset(name), stage))


def gen_data(cfg: ExperimentConfig, ws: Workspace):
    ofdm = cfg.ofdm_config()
    sources, target = cfg.scenarios()
    t, seed = cfg.training, cfg.training.seed
    grid = t.snr_grid
    pl.save_dataset(pl.generate_dataset(sources, t.source_samples, ofdm, grid, seed, pl.STREAM_SOURCE),
                    ws.dataset("source_train"))
    pl.save_dataset(pl.generate_dataset(sources, t.validation_samples, ofdm, grid, seed, pl.STREAM_SOURCE_VAL),
                    ws.dataset("source_val"))
    tgt = pl.generate_dataset(target, t.target_samples, ofdm, grid, seed, pl.STREAM_TARGET)
    train, test = tgt.split(t.target_train)
    pl.save_dataset(train, ws.dataset("target_train"))
    pl.save_dataset(test, ws.dataset("target_test"))
    for i, snr in enumerate(cfg.sweep.eval_snr):
        ds = pl.generate_dataset(target, cfg.sweep.eval_frames, ofdm, [snr], seed, STREAM_EVAL_BASE + i)
        pl.save_dataset(ds, ws.eval_set(snr))
    print(f"datasets: source {t.source_samples}+{t.validation_samples}, target "
          f"{t.target_train}/{t.target_samples - t.target_train}, {len(cfg.sweep.eval_snr)} eval sets")


def pretrain(cfg: ExperimentConfig, ws: Workspace):
    train, val = _load(ws, "source_train"), _load(ws, "source_val")
    model = ReCNN(cfg.arch(), seed=cfg.training.seed)
    res = pl.pretrain(model, train, cfg.train_config(), val)
    save_model(model, ws.models / "pretrained.bin")
    print(f"pretrained {res.steps} steps in {res.seconds:.1f}s; best validation NMSE "
          f"{min(v for _, v in res.val_nmse):.4g} at step {res.best_step}")


def finetune(cfg: ExperimentConfig, ws: Workspace):
    model = load_model(ws.need(ws.models / "pretrained.bin", "pretrain"))
    train = _load(ws, "target_train")
    res = pl.finetune(model, train, cfg.train_config())
    save_model(model, ws.models / "finetuned.bin")
    print(f"fine-tuned {res.steps} steps on {len(train)} target samples in {res.seconds:.1f}s")


def evaluate(cfg: ExperimentConfig, ws: Workspace):
    pre = load_model(ws.need(ws.models / "pretrained.bin", "pretrain"))
    fin = load_model(ws.need(ws.models / "finetuned.bin", "finetune"))
    _, target = cfg.scenarios()
    ofdm = cfg.ofdm_config()
    seed = cfg.training.seed
    rows = []
    for snr in cfg.sweep.eval_snr:
        ds = pl.load_dataset(ws.need(ws.eval_set(snr), "gen-data"))
        scores = {"LS": pl.ls_nmse(ds), "LMMSE": pl.lmmse_nmse(ds, [target], ofdm),
                  "NoTransfer": pl.no_transfer_test(pre, ds), "Proposed": pl.transfer_test(fin, ds)}
        rows += [ResultRow(m, float(snr), nmse=float(scores[m]), n_frames=len(ds) * ofdm.n_slots, seed=seed)
                 for m in METHODS]
    emit_report(rows, ws.root, "nmse", cfg.as_dict())
    return rows


def _classical_rows(cfg, ofdm, target, stream, label):
    rows = []
    for i, snr in enumerate(cfg.sweep.eval_snr):
        ds = pl.generate_dataset(target, cfg.sweep.eval_frames, ofdm, [snr], cfg.training.seed, stream + i)
        n = len(ds) * ofdm.n_slots
        rows.append(ResultRow(f"LS ({label})", float(snr), nmse=pl.ls_nmse(ds), n_frames=n, seed=cfg.training.seed))
        rows.append(ResultRow(f"LMMSE ({label})", float(snr), nmse=pl.lmmse_nmse(ds, [target], ofdm),
                              n_frames=n, seed=cfg.training.seed))
    return rows


def baselines(cfg: ExperimentConfig, ws: Workspace):
    """Classical NMSE sweeps over pilot count and pilot power fraction; one table each."""
    _, target = cfg.scenarios()
    written = []
    for j, p in enumerate(cfg.sweep.pilots):
        rows = _classical_rows(cfg, cfg.ofdm_config(n_pilots=p), target, STREAM_SWEEP_BASE + 100 * j, f"P={p}")
        emit_report(rows, ws.root, f"nmse_P{p}", cfg.as_dict())
        written.append(f"nmse_P{p}")
    for j, rho in enumerate(cfg.sweep.power_fractions):
        rows = _classical_rows(cfg, cfg.ofdm_config(power_fraction=rho), target,
                               STREAM_SWEEP_BASE + 1000 + 100 * j, f"rho={rho:g}")
        emit_report(rows, ws.root, f"nmse_rho{rho:g}", cfg.as_dict())
        written.append(f"nmse_rho{rho:g}")
    print("tables:", ", ".join(written))
    return written


def ber(cfg: ExperimentConfig, ws: Workspace):
    """BER per (estimator, equalizer); the learned estimator joins when a fine-tuned model exists."""
    _, target = cfg.scenarios()
    ofdm = cfg.ofdm_config()
    model_path = ws.models / "finetuned.bin"
    model = load_model(model_path) if model_path.exists() else None
    if model is None:
        log.warning("%s missing; BER table covers classical estimators only", model_path)
    rows = []
    for snr in cfg.sweep.eval_snr:
        est = builtin_estimators(target, ofdm, snr_to_noise_var(snr, ofdm.total_power))
        if model is not None:
            est["proposed"] = model_estimator(model)
        counts = simulate_ber(ofdm, target, snr, cfg.sweep.ber_blocks, est, seed=cfg.training.seed)
        names = {"perfect": "Perfect", "ls": "LS", "lmmse": "LMMSE", "proposed": "Proposed"}
        for (e, q), cnt in counts.items():
            rows.append(ResultRow(f"{names[e]}+{q.upper()}", float(snr), ber=cnt.ber,
                                  n_frames=cfg.sweep.ber_blocks * ofdm.n_slots, seed=cfg.training.seed))
    emit_report(rows, ws.root, "ber", cfg.as_dict())
    return rows


def run_grad_check(cfg: ExperimentConfig, ws: Workspace):
    """End-to-end check of the small network in double precision."""
    model = ReCNN(desk_scale_config("small"), seed=cfg.training.seed, dtype=np.float64)
    x = np.random.default_rng(cfg.training.seed).standard_normal((2, 64, 8, 1))
    report = grad_check(model, x, tolerance=1e-4, max_entries=40)
    print(report)
    for name, err in report.per_tensor.items():
        print(f"  {name:<14} {err:.3e}")
    if not report.passed:
        raise TrainingError(f"gradient check failed: {report}")
    return report


def summarize(cfg: ExperimentConfig, ws: Workspace):
    """Concatenate every stage table into ``summary``."""
    rows = []
    for path in sorted(ws.tables.glob("*.json")):
        if path.stem != "summary":
            rows += load_rows(path)
    if not rows:
        raise DependencyError(f"no tables under {ws.tables}; run 'eval', 'baselines' or 'ber' first")
    emit_report(rows, ws.root, "summary", cfg.as_dict())
    for r in rows:
        value = f"nmse {r.nmse:.4g}" if r.nmse is not None else f"ber {r.ber:.4g}"
        print(f"{r.method:<22} {r.snr_db:5g} dB  {value}")
    return rows


HANDLERS = {
    "gen-data": gen_data,
    "pretrain": pretrain,
    "finetune": finetune,
    "eval": evaluate,
    "baselines": baselines,
    "ber": ber,
    "grad-check": run_grad_check,
    "report": summarize,
}


def run_experiment(config_path=None, stages=("gen-data", "pretrain", "finetune", "eval", "ber", "report"),
                   out="out", scale=None, seed=None):
    cfg = load_config(config_path, scale)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    ws = Workspace(out)
    ws.prepare(cfg)
    results = {}
    for stage in stages:
        log.info("stage %s", stage)
        results[stage] = HANDLERS[stage](cfg, ws)
    return results
