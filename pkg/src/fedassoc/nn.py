"""Minimal dense-network engine: exact forward/backward passes in numpy.

Networks are plain stacks of affine layers with one hidden activation and a
linear output. Everything is float64 and pure-value: a network only changes
through an explicit apply call, so target-network clones stay frozen until
they are re-copied.

Checkpoint file layout (little endian), version 1:

    bytes 0..3   magic b"DNET"
    uint32       format version (1)
    uint32       activation code (0=relu, 1=tanh, 2=linear)
    uint32       number of dims D
    int64[D]     layer dims, input first
    then per layer i in order: float64 weights row-major (dims[i+1] x dims[i]),
    float64 biases (dims[i+1],)
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass
class DenseNet:
    """Weights (out x in) and biases per layer, plus the hidden activation."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class GradientSet:
    """Parameter gradients shaped exactly like their network."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(
            [dw * factor for dw in self.d_weights],
            [db * factor for db in self.d_biases],
        )

    def global_norm(self) -> float:
        total = 0.0
        for arr in self.d_weights + self.d_biases:
            flat = arr.ravel()
            total += float(np.dot(flat, flat))
        return float(np.sqrt(total))


def init_net(dims: Sequence[int], seed_or_rng, activation: str = "relu") -> DenseNet:
    """Glorot-uniform weights, zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"dims must list at least input and output sizes, got {dims}")
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = (
        seed_or_rng
        if isinstance(seed_or_rng, np.random.Generator)
        else np.random.default_rng(seed_or_rng)
    )
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNet(weights=weights, biases=biases, activation=activation)


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the network; returns (output, cache) with cache feeding backward.

    Accepts a single input vector or a (batch, in) matrix; the output matches
    the input's leading shape.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x.reshape(1, -1) if single else x
    if a.shape[1] != net.weights[0].shape[1]:
        raise ValueError(
            f"input dim {a.shape[1]} does not match net input {net.weights[0].shape[1]}"
        )
    cache = []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T
        z += b
        cache.append((a, z))
        a = z if i == last else _act(z, net.activation)
    return (a[0] if single else a), cache


def backward(
    net: DenseNet, cache: list, output_gradient: np.ndarray
) -> tuple[GradientSet, np.ndarray]:
    """Exact reverse-mode gradients plus the gradient w.r.t. the input.

    `output_gradient` carries dL/dy per sample; parameter gradients come back
    summed over the batch, the input gradient per sample.
    """
    dout = np.asarray(output_gradient, dtype=float)
    single = dout.ndim == 1
    da = dout.reshape(1, -1) if single else dout
    if len(cache) != len(net.weights):
        raise ValueError("cache does not match network depth")
    if da.shape != (cache[-1][1].shape[0], net.weights[-1].shape[0]):
        raise ValueError("output gradient shape mismatch")
    d_weights = [None] * len(net.weights)
    d_biases = [None] * len(net.weights)
    last = len(net.weights) - 1
    for i in range(last, -1, -1):
        a_in, z = cache[i]
        dz = da if i == last else da * _act_grad(z, net.activation)
        d_weights[i] = dz.T @ a_in
        d_biases[i] = dz.sum(axis=0)
        da = dz @ net.weights[i]
    grads = GradientSet(d_weights=d_weights, d_biases=d_biases)
    return grads, (da[0] if single else da)


def sgd_apply(net: DenseNet, grads: GradientSet, lr: float) -> None:
    """In-place plain gradient step; rejects non-finite gradients."""
    # A finite squared norm implies every entry is finite (nan/inf propagate).
    for arr in grads.d_weights + grads.d_biases:
        flat = arr.ravel()
        if not np.isfinite(np.dot(flat, flat)):
            raise ValueError("non-finite gradient")
    for w, b, dw, db in zip(net.weights, net.biases, grads.d_weights, grads.d_biases):
        if w.shape != dw.shape or b.shape != db.shape:
            raise ValueError("gradient shape mismatch")
        w -= lr * dw
        b -= lr * db


def clip_global_norm(grad_sets: Sequence[GradientSet], max_norm: float) -> float:
    """Jointly rescale gradient sets so the combined norm is <= max_norm.

    Returns the pre-clip norm. A non-finite max_norm disables clipping.
    """
    total = 0.0
    for g in grad_sets:
        n = g.global_norm()
        total += n * n
    norm = float(np.sqrt(total))
    if np.isfinite(max_norm) and norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grad_sets:
            for arr in g.d_weights + g.d_biases:
                arr *= scale
    return norm


def clone(net: DenseNet) -> DenseNet:
    return DenseNet(
        weights=[w.copy() for w in net.weights],
        biases=[b.copy() for b in net.biases],
        activation=net.activation,
    )


def copy_into_target(main: DenseNet, target: DenseNet) -> DenseNet:
    """Overwrite the target's parameters with bit-equal copies of the main's."""
    if main.dims != target.dims or main.activation != target.activation:
        raise ValueError("architecture mismatch between main and target")
    for wt, wm in zip(target.weights, main.weights):
        wt[...] = wm
    for bt, bm in zip(target.biases, main.biases):
        bt[...] = bm
    return target


def net_fingerprint(net: DenseNet) -> str:
    """Hash of all parameters; equal iff the parameters are bit-equal."""
    h = hashlib.sha256()
    for w, b in zip(net.weights, net.biases):
        h.update(np.ascontiguousarray(w).tobytes())
        h.update(np.ascontiguousarray(b).tobytes())
    return h.hexdigest()


# --------------------------------------------------------------------------
# Learning-rate schedule
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LrSchedule:
    """Linear decay from lr_start (episode 1) to lr_end (decay_episodes)."""

    lr_start: float = 0.01
    lr_end: float = 0.001
    decay_episodes: int = 250

    def __post_init__(self) -> None:
        if not self.lr_start >= self.lr_end > 0:
            raise ValueError("need lr_start >= lr_end > 0")
        if self.decay_episodes < 1:
            raise ValueError("decay_episodes must be >= 1")


def lr_at(schedule: LrSchedule, episode: int) -> float:
    if episode < 1:
        raise ValueError("episode is 1-based")
    if schedule.decay_episodes <= 1:
        return schedule.lr_end if episode > 1 else schedule.lr_start
    frac = min(1.0, (episode - 1) / (schedule.decay_episodes - 1))
    return schedule.lr_start + (schedule.lr_end - schedule.lr_start) * frac


# --------------------------------------------------------------------------
# Checkpoint format
# --------------------------------------------------------------------------

_MAGIC = b"DNET"
_VERSION = 1


def save_net(path, net: DenseNet) -> None:
    dims = net.dims
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, _ACTIVATIONS.index(net.activation), len(dims)))
        fh.write(np.asarray(dims, dtype="<i8").tobytes())
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_net(path) -> DenseNet:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a DNET checkpoint")
        version, act_code, ndims = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        dims = np.frombuffer(fh.read(8 * ndims), dtype="<i8")
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            weights.append(w.reshape(fan_out, fan_in).copy())
            biases.append(np.frombuffer(fh.read(8 * fan_out), dtype="<f8").copy())
    return DenseNet(weights=weights, biases=biases, activation=_ACTIVATIONS[act_code])
