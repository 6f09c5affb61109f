"""Multilayer perceptron, squared-error gradients, and Adam, all in numpy.

Hidden layers use ReLU, the output layer is affine.  The loss used for
Q-learning is the mean squared error between scalar targets and the output
units selected by a per-sample action index, so gradients flow only through
each sample's chosen output.  Everything is float64.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumError, MalformedFileError, NumericalError, \
    VersionMismatchError

_MAGIC = b"QNET"
_VERSION = 1
_ACTIVATION = "relu"


@dataclass
class MlpParams:
    """layers[l] = (W, b) with W shaped (fan_in, fan_out)."""
    layers: list

    @property
    def layer_sizes(self):
        sizes = [self.layers[0][0].shape[0]]
        sizes.extend(w.shape[1] for w, _ in self.layers)
        return tuple(sizes)

    @property
    def n_outputs(self):
        return self.layers[-1][0].shape[1]

    def copy(self):
        return MlpParams([(w.copy(), b.copy()) for w, b in self.layers])


def init_mlp(layer_sizes, rng):
    """Glorot-uniform weights, zero biases."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output sizes")
    layers = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return MlpParams(layers)


def _forward_cached(params, x):
    """Returns (activations per layer incl. input, pre-activations)."""
    acts = [x]
    pres = []
    last = len(params.layers) - 1
    for l, (w, b) in enumerate(params.layers):
        z = acts[-1] @ w + b
        pres.append(z)
        acts.append(np.maximum(z, 0.0) if l < last else z)
    return acts, pres


def mlp_forward(params, x):
    """Evaluate the network on a single input (1-D) or a batch (2-D)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.layer_sizes[0]:
        raise ValueError(
            f"input width {x.shape[1]}, network expects {params.layer_sizes[0]}")
    out = _forward_cached(params, x)[0][-1]
    if not np.all(np.isfinite(out)):
        raise NumericalError("network produced non-finite outputs")
    return out[0] if single else out


def loss_and_gradient(params, inputs, actions, targets):
    """Mean squared error on the selected outputs, with full backprop.

    inputs: (B, d); actions: (B,) int indices; targets: (B,) floats.
    Returns (loss, grads) with grads structured like params.layers.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError("inputs must be a batch, shape (B, d)")
    batch = inputs.shape[0]
    if actions.shape != (batch,) or targets.shape != (batch,):
        raise ValueError("actions and targets must both have shape (B,)")
    if not np.all(np.isfinite(targets)):
        raise NumericalError("non-finite targets")

    acts, pres = _forward_cached(params, inputs)
    out = acts[-1]
    if not np.all(np.isfinite(out)):
        raise NumericalError("network produced non-finite outputs")
    rows = np.arange(batch)
    picked = out[rows, actions]
    diff = picked - targets
    loss = float(np.mean(diff ** 2))

    d_z = np.zeros_like(out)
    d_z[rows, actions] = 2.0 * diff / batch
    grads = [None] * len(params.layers)
    for l in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[l]
        grads[l] = (acts[l].T @ d_z, d_z.sum(axis=0))
        if l > 0:
            d_z = (d_z @ w.T) * (pres[l - 1] > 0.0)
    return loss, grads


@dataclass
class LrSchedule:
    """Inverse-time decay: rate(t) = alpha0 / (1 + decay * t)."""
    alpha0: float = 1e-4
    decay: float = 1e-3

    def __post_init__(self):
        if self.alpha0 <= 0.0 or self.decay < 0.0:
            raise ValueError("need alpha0 > 0 and decay >= 0")

    def rate(self, timestep):
        return self.alpha0 / (1.0 + self.decay * timestep)


@dataclass
class AdamState:
    m: list
    v: list
    timestep: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params, beta1=0.9, beta2=0.999, eps=1e-8):
    def zeros():
        return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]
    return AdamState(m=zeros(), v=zeros(), timestep=0,
                     beta1=beta1, beta2=beta2, eps=eps)


def adam_update(params, grads, opt, sched):
    """One Adam step in place; the step size comes from the schedule at the
    pre-increment timestep, so the very first update uses alpha0."""
    rate = sched.rate(opt.timestep)
    t = opt.timestep + 1
    c1 = 1.0 - opt.beta1 ** t
    c2 = 1.0 - opt.beta2 ** t
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(
            params.layers, grads, opt.m, opt.v):
        for theta, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * np.square(g)
            theta -= rate * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    opt.timestep = t
    return params, opt


def save_weights(params, path):
    """Binary dump: magic, format version, activation name, layer sizes,
    row-major float64 weights then biases per layer, and a trailing CRC32
    over everything after the magic."""
    sizes = params.layer_sizes
    body = struct.pack("<I", _VERSION)
    name = _ACTIVATION.encode()
    body += struct.pack("<I", len(name)) + name
    body += struct.pack("<I", len(sizes))
    body += struct.pack(f"<{len(sizes)}I", *sizes)
    for w, b in params.layers:
        body += np.ascontiguousarray(w, dtype=np.float64).tobytes()
        body += np.ascontiguousarray(b, dtype=np.float64).tobytes()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(_MAGIC + body + struct.pack("<I", crc))


def load_weights(path):
    """Inverse of save_weights; round trips are bit-exact."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(_MAGIC) + 8 or raw[:len(_MAGIC)] != _MAGIC:
        raise MalformedFileError(f"{path}: not a weight file")
    body, (crc,) = raw[len(_MAGIC):-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumError(f"{path}: checksum mismatch")
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(body):
            raise MalformedFileError(f"{path}: truncated")
        vals = struct.unpack_from(fmt, body, off)
        off += size
        return vals

    (version,) = take("<I")
    if version != _VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, supported: {_VERSION}")
    (name_len,) = take("<I")
    if off + name_len > len(body):
        raise MalformedFileError(f"{path}: truncated")
    name = body[off:off + name_len].decode(errors="replace")
    off += name_len
    if name != _ACTIVATION:
        raise MalformedFileError(f"{path}: unknown activation {name!r}")
    (n_sizes,) = take("<I")
    if n_sizes < 2:
        raise MalformedFileError(f"{path}: needs at least two layer sizes")
    sizes = take(f"<{n_sizes}I")
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        n_w, n_b = fan_in * fan_out, fan_out
        if off + 8 * (n_w + n_b) > len(body):
            raise MalformedFileError(f"{path}: truncated weight payload")
        w = np.frombuffer(body, dtype=np.float64, count=n_w,
                          offset=off).reshape(fan_in, fan_out).copy()
        off += 8 * n_w
        b = np.frombuffer(body, dtype=np.float64, count=n_b, offset=off).copy()
        off += 8 * n_b
        layers.append((w, b))
    if off != len(body):
        raise MalformedFileError(f"{path}: {len(body) - off} trailing bytes")
    return MlpParams(layers)
