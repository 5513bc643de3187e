"""INI experiment configuration.

Sections and keys (all optional; defaults are the full-size setup)::

    [scenario]  source_decays, source_alpha, target_decay, target_alpha, n_taps
    [ofdm]      n_subcarriers, n_pilots, n_slots, power_fraction, total_power
    [network]   scale
    [training]  lr_pretrain, lr_finetune, batch_size, gradsteps_pretrain, gradsteps_finetune,
                snr_grid, source_samples, validation_samples, target_samples, target_train, seed
    [sweep]     pilots, power_fractions, eval_snr, eval_frames, ber_blocks

``--scale small`` swaps in the CI-sized defaults before the file is applied,
so values written in the file always win.
"""

from __future__ import annotations

import configparser
import logging
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..channel import DomainScenario
from ..errors import ConfigError
from ..ofdm import OfdmConfig
from ..pipeline import EVAL_SNR_GRID, TRAIN_SNR_GRID, TrainConfig
from ..recnn import desk_scale_config

log = logging.getLogger(__name__)


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class ScenarioSection:
    source_decays: tuple = (2.0, 4.0, 8.0)
    source_alpha: float = 0.99
    target_decay: float = 3.0
    target_alpha: float = 0.95
    n_taps: int = 8


@dataclass(frozen=True)
class OfdmSection:
    n_subcarriers: int = 256
    n_pilots: int = 8
    n_slots: int = 16
    power_fraction: float = 0.2
    total_power: float = 1.0


@dataclass(frozen=True)
class NetworkSection:
    scale: str = "paper"


@dataclass(frozen=True)
class TrainingSection:
    lr_pretrain: float = 1e-4
    lr_finetune: float = 1e-4
    batch_size: int = 20
    gradsteps_pretrain: int = 40_000
    gradsteps_finetune: int = 2_000
    snr_grid: tuple = tuple(float(s) for s in TRAIN_SNR_GRID)
    source_samples: int = 6_000
    validation_samples: int = 2_000
    target_samples: int = 500
    target_train: int = 300
    seed: int = 0


@dataclass(frozen=True)
class SweepSection:
    pilots: tuple = (4, 8, 16)
    power_fractions: tuple = (0.1, 0.2, 0.3)
    eval_snr: tuple = tuple(float(s) for s in EVAL_SNR_GRID)
    eval_frames: int = 200
    ber_blocks: int = 100


SECTIONS = {
    "scenario": ScenarioSection,
    "ofdm": OfdmSection,
    "network": NetworkSection,
    "training": TrainingSection,
    "sweep": SweepSection,
}

# CI-sized defaults; same topology, far less compute
SMALL = {
    "ofdm": {"n_subcarriers": 64, "n_slots": 8},
    "network": {"scale": "small"},
    # the small net plateaus within ~800 steps at 1e-3; 1e-4 needs >3000,
    # which would not fit three seeds in the 30 min budget
    "training": {"lr_pretrain": 1e-3, "gradsteps_pretrain": 1_000, "gradsteps_finetune": 100,
                 "source_samples": 1_500, "validation_samples": 500},
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    ofdm: OfdmSection = field(default_factory=OfdmSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # ---------------------------------------------------------- derived objects

    def ofdm_config(self, **override) -> OfdmConfig:
        o = self.ofdm
        kw = dict(n_subcarriers=o.n_subcarriers, n_pilots=o.n_pilots, n_slots=o.n_slots,
                  n_taps=self.scenario.n_taps, power_fraction=o.power_fraction, total_power=o.total_power)
        kw.update(override)
        return OfdmConfig(**kw)

    def scenarios(self) -> tuple[list[DomainScenario], DomainScenario]:
        s = self.scenario
        sources = [DomainScenario(f"source-{i}", d, s.n_taps, s.source_alpha, seed_space=i)
                   for i, d in enumerate(s.source_decays)]
        return sources, DomainScenario("target", s.target_decay, s.n_taps, s.target_alpha, seed_space=100)

    def train_config(self) -> TrainConfig:
        t = self.training
        return TrainConfig(lr_pretrain=t.lr_pretrain, lr_finetune=t.lr_finetune, batch_size=t.batch_size,
                           gradsteps_pretrain=t.gradsteps_pretrain, gradsteps_finetune=t.gradsteps_finetune,
                           snr_grid=t.snr_grid, seed=t.seed)

    def arch(self):
        return desk_scale_config(self.network.scale, self.ofdm.n_subcarriers, self.ofdm.n_slots)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, training=replace(self.training, seed=seed))

    def as_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            sec = getattr(self, name)
            out[name] = {f.name: (list(v) if isinstance(v := getattr(sec, f.name), tuple) else v)
                         for f in fields(sec)}
        return out

    def snapshot(self) -> str:
        """INI text that parses back to this exact config."""
        lines = []
        for name in SECTIONS:
            sec = getattr(self, name)
            lines.append(f"[{name}]")
            lines += [f"{f.name} = {_fmt(getattr(sec, f.name))}" for f in fields(sec)]
            lines.append("")
        return "\n".join(lines)

    def validate(self) -> "ExperimentConfig":
        t = self.training
        if t.target_train >= t.target_samples:
            raise ConfigError("target_train must leave samples for the test split")
        if t.gradsteps_finetune * 10 > t.gradsteps_pretrain:
            log.warning("gradsteps_finetune exceeds gradsteps_pretrain / 10; fine-tuning is no longer cheap")
        self.ofdm_config()
        self.train_config()
        self.arch()
        return self


def defaults(scale: str = "paper") -> ExperimentConfig:
    if scale not in ("paper", "small"):
        raise ConfigError(f"unknown scale {scale!r}; expected 'small' or 'paper'")
    cfg = ExperimentConfig()
    if scale == "small":
        cfg = replace(cfg, **{sec: replace(getattr(cfg, sec), **kv) for sec, kv in SMALL.items()})
    return cfg


def _line_numbers(text: str) -> dict:
    where, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section:
            where[(section, m.group(1).strip().lower())] = no
    return where


def parse_config(text: str, source: str = "<config>", scale: str | None = None) -> ExperimentConfig:
    """Parse INI text on top of the defaults for ``scale``.

    ``scale`` given here overrides ``[network] scale`` in the text.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: expected a [section] header before {exc.line.strip()!r}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}: cannot parse {line.strip()!r} (expected key = value)") from None
    except configparser.Error as exc:
        where = f":{exc.lineno}" if getattr(exc, "lineno", None) else ""
        raise ConfigError(f"{source}{where}: {exc.message}") from None
    lines = _line_numbers(text)
    file_scale = parser.get("network", "scale", fallback=None)
    cfg = defaults(scale or (file_scale.strip() if file_scale else "paper"))
    updates = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}:{lines.get((section, None), '?')}: unknown section [{section}]")
        current = getattr(cfg, section)
        kinds = {f.name: type(getattr(current, f.name)) for f in fields(current)}
        values = {}
        for key, raw in parser.items(section):
            at = f"{source}:{lines.get((section, key), '?')}"
            if key not in kinds:
                raise ConfigError(f"{at}: unknown key {key!r} in [{section}]")
            if section == "network" and key == "scale" and scale:
                continue
            try:
                if kinds[key] is tuple:
                    values[key] = _ints(raw) if key == "pilots" else _floats(raw)
                else:
                    values[key] = kinds[key](raw.strip())
            except ValueError:
                raise ConfigError(f"{at}: [{section}] {key} = {raw!r} is not a valid "
                                  f"{'list' if kinds[key] is tuple else kinds[key].__name__}") from None
        updates[section] = replace(current, **values)
    cfg = replace(cfg, **updates)
    try:
        return cfg.validate()
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path=None, scale: str | None = None) -> ExperimentConfig:
    if path is None:
        return defaults(scale or "paper").validate()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), scale)
