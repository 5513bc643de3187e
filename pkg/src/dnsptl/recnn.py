"""Residual CNN channel denoiser with a dense refinement stack.

Data flow for an input batch ``(B, N, M, 1)``::

    noise    = conv_stack(x)             # C1 .. Cn, same spatial size
    denoised = x - noise
    flat     = denoised.reshape(B, N*M)  # subcarrier-major, then slot
    out      = F2(F1(flat))              # both linear

Complex channels are fed as two real samples (real part, imaginary part)
through the same network; see :func:`to_network` / :func:`from_network`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .nn.container import read_container, write_container
from .nn.layers import BatchNorm, Conv2D, Dense, Parameter, ReLU, Sequential

MODEL_MAGIC = b"DNSPRCN\x00"


@dataclass(frozen=True)
class ArchSpec:
    scale: str
    n_subcarriers: int
    n_slots: int
    n_conv: int
    n_filters: int
    dense_width: int
    kernel_size: int = 5

    def __post_init__(self):
        if self.n_conv < 2:
            raise ConfigError("need at least an input and an output convolution")
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel size must be odd")

    @property
    def flat_size(self) -> int:
        return self.n_subcarriers * self.n_slots

    def parameter_count(self) -> dict:
        """Closed-form parameter count per layer group."""
        k2, f, mn, w = self.kernel_size ** 2, self.n_filters, self.flat_size, self.dense_width
        return {
            "conv_first": k2 * f + f,
            "conv_middle": (self.n_conv - 2) * (k2 * f * f + f + 2 * f),
            "conv_last": k2 * f + 1,
            "dense_1": mn * w + w,
            "dense_2": w * mn + mn,
        }

    def describe(self) -> str:
        return (f"scale={self.scale} N={self.n_subcarriers} M={self.n_slots} conv={self.n_conv} "
                f"filters={self.n_filters} kernel={self.kernel_size} dense={self.dense_width}")


def desk_scale_config(scale: str = "small", n_subcarriers=None, n_slots=None) -> ArchSpec:
    """``paper`` is the full published network; ``small`` keeps the topology at CI size.

    Overriding ``n_subcarriers``/``n_slots`` rescales the dense width to 1.25*N*M
    (exactly 5120 at the full 256 x 16 size).
    """
    if scale == "paper":
        n, m, n_conv, filters = 256, 16, 14, 48
    elif scale == "small":
        n, m, n_conv, filters = 64, 8, 6, 16
    else:
        raise ConfigError(f"unknown scale {scale!r}; expected 'small' or 'paper'")
    n = n_subcarriers or n
    m = n_slots or m
    return ArchSpec(scale, n, m, n_conv, filters, dense_width=(5 * n * m) // 4)


class ReCNN:
    def __init__(self, arch: ArchSpec, seed: int = 0, dtype=np.float32):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        k, f = arch.kernel_size, arch.n_filters
        blocks = [Conv2D(1, f, k, rng, dtype, name="C1"), ReLU()]
        self.batch_norms = []
        for i in range(2, arch.n_conv):
            bn = BatchNorm(f, dtype=dtype, name=f"BN{i}")
            self.batch_norms.append(bn)
            blocks += [Conv2D(f, f, k, rng, dtype, name=f"C{i}"), ReLU(), bn]
        blocks.append(Conv2D(f, 1, k, rng, dtype, name=f"C{arch.n_conv}"))
        self.conv_stack = Sequential(*blocks)
        self.convs = [b for b in blocks if isinstance(b, Conv2D)]
        self.dense1 = Dense(arch.flat_size, arch.dense_width, rng, dtype, name="F1")
        self.dense2 = Dense(arch.dense_width, arch.flat_size, rng, dtype, name="F2")
        self.dense_stack = Sequential(self.dense1, self.dense2)

    def children(self):
        return [self.conv_stack, self.dense_stack]

    # -------------------------------------------------------------- params

    def parameters(self) -> list[Parameter]:
        return self.conv_stack.parameters() + self.dense_stack.parameters()

    def conv_parameters(self) -> list[Parameter]:
        return self.conv_stack.parameters()

    def dense_parameters(self) -> list[Parameter]:
        return self.dense_stack.parameters()

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self.parameters() if not p.frozen]

    def count_parameters(self, trainable_only=False) -> int:
        params = self.trainable_parameters() if trainable_only else self.parameters()
        return int(sum(p.size for p in params))

    @property
    def conv_frozen(self) -> bool:
        return all(p.frozen for p in self.conv_parameters())

    # -------------------------------------------------------------- passes

    def _check_input(self, x):
        expected = (self.arch.n_subcarriers, self.arch.n_slots, 1)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ConfigError(f"input shape {x.shape} does not match (batch, {expected})")

    def denoise(self, x, train=False):
        """Residual-subtracted map, flattened to (B, N*M)."""
        self._check_input(x)
        x = np.asarray(x, dtype=self.dtype)
        noise = self.conv_stack.forward(x, train)
        return (x - noise).reshape(x.shape[0], -1)

    def forward(self, x, train=True):
        flat = self.denoise(x, train)
        return self.dense_stack.forward(flat, train)

    def backward(self, g, input_grad=True):
        """Gradient w.r.t. the input (skip path minus conv path).

        With ``input_grad=False`` the input gradient is not formed, and a frozen
        conv stack is not traversed at all.
        """
        g_flat = self.dense_stack.backward(g)
        g_map = g_flat.reshape(g_flat.shape[0], self.arch.n_subcarriers, self.arch.n_slots, 1)
        if not input_grad and self.conv_frozen:
            return None
        self.convs[0].need_input_grad = input_grad
        # denoised = x - noise, so the conv stack sees the negated gradient
        g_conv = self.conv_stack.backward(-g_map)
        return g_map + g_conv if input_grad else None

    def predict(self, x, batch_size=256):
        outs = [self.forward(x[i:i + batch_size], train=False) for i in range(0, len(x), batch_size)]
        return np.concatenate(outs) if outs else np.zeros((0, self.arch.flat_size), self.dtype)

    # -------------------------------------------------------------- transfer

    def freeze_convolutional(self) -> "ReCNN":
        for p in self.conv_parameters():
            p.frozen = True
        for bn in self.batch_norms:
            bn.locked = True
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad[...] = 0

    # -------------------------------------------------------------- state

    def state_entries(self) -> list[tuple[dict, np.ndarray]]:
        entries = [({"name": p.name, "kind": "param", "frozen": p.frozen}, p.value) for p in self.parameters()]
        for i, bn in enumerate(self.batch_norms):
            entries.append(({"name": f"BN{i + 2}.running_mean", "kind": "buffer", "locked": bn.locked},
                            bn.running_mean))
            entries.append(({"name": f"BN{i + 2}.running_var", "kind": "buffer", "locked": bn.locked},
                            bn.running_var))
        return entries

    def snapshot(self) -> list[np.ndarray]:
        return [arr.copy() for _, arr in self.state_entries()]

    def restore(self, snap: list[np.ndarray]) -> None:
        params = self.parameters()
        for p, arr in zip(params, snap):
            p.value[...] = arr
        rest = snap[len(params):]
        for i, bn in enumerate(self.batch_norms):
            bn.running_mean = rest[2 * i].copy()
            bn.running_var = rest[2 * i + 1].copy()

    def copy(self) -> "ReCNN":
        clone = ReCNN(self.arch, seed=0, dtype=self.dtype)
        clone.restore(self.snapshot())
        for src, dst in zip(self.parameters(), clone.parameters()):
            dst.frozen = src.frozen
        for src, dst in zip(self.batch_norms, clone.batch_norms):
            dst.locked = src.locked
        return clone


def recnn_forward(model: ReCNN, x, mode="train"):
    if mode not in ("train", "infer"):
        raise ConfigError(f"mode must be 'train' or 'infer', got {mode!r}")
    return model.forward(x, train=(mode == "train"))


def freeze_convolutional(model: ReCNN) -> ReCNN:
    return model.freeze_convolutional()


def to_network(H) -> np.ndarray:
    """Complex (S, N, M) -> real (2S, N, M, 1): real part then imaginary part per sample."""
    H = np.asarray(H)
    out = np.empty((2 * H.shape[0],) + H.shape[1:] + (1,), dtype=np.float64)
    out[0::2, ..., 0] = H.real
    out[1::2, ..., 0] = H.imag
    return out


def from_network(flat, n_subcarriers: int, n_slots: int) -> np.ndarray:
    """Real (2S, N*M) network rows -> complex (S, N, M)."""
    flat = np.asarray(flat, dtype=np.float64).reshape(-1, 2, n_subcarriers, n_slots)
    return flat[:, 0] + 1j * flat[:, 1]


# ---------------------------------------------------------------- persistence


def save_model(model: ReCNN, path) -> None:
    meta = {"arch": asdict(model.arch), "descriptor": model.arch.describe(), "dtype": model.dtype.str}
    write_container(path, MODEL_MAGIC, meta, model.state_entries())


def load_model(path) -> ReCNN:
    meta, entries = read_container(path, MODEL_MAGIC)
    arch = ArchSpec(**meta["arch"])
    model = ReCNN(arch, seed=0, dtype=np.dtype(meta["dtype"]))
    expected = model.state_entries()
    if [e[0]["name"] for e in expected] != [info["name"] for info, _ in entries]:
        raise ConfigError(f"{path}: layer manifest does not match architecture ({arch.describe()})")
    model.restore([arr for _, arr in entries])
    for p, (info, _) in zip(model.parameters(), entries):
        p.frozen = bool(info["frozen"])
    n_params = len(model.parameters())
    for i, bn in enumerate(model.batch_norms):
        bn.locked = bool(entries[n_params + 2 * i][0]["locked"])
    return model
