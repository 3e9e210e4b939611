"""Dense feed-forward networks with hand-written backpropagation.

Parameters are stored as a flat list ``[W0, b0, W1, b1, ...]`` with
``W_i`` of shape ``(fan_in, fan_out)``; gradients use the same layout.
Inputs may be a single vector ``(d,)`` or a batch ``(B, d)``.

Checkpoint byte layout (``save`` / ``load``)::

    line 1   b"RISNN\\n"                    magic
    line 2   b"1\\n"                        format version
    line 3   UTF-8 JSON header + b"\\n"      layer_sizes, hidden_activation,
                                            output_activation, squash_mask
    rest     float64 little-endian values of W0, b0, W1, b1, ... in order,
             each array flattened in C order
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeMismatchError

MAGIC = b"RISNN\n"
FORMAT_VERSION = 1


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "relu": (lambda x: np.maximum(x, 0.0), lambda y: (y > 0).astype(float)),
    "sigmoid": (_sigmoid, lambda y: y * (1.0 - y)),
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
}


class DenseNet:
    """Fully connected network.

    ``output_activation`` is ``"identity"`` or ``"sigmoid"``. With ``"sigmoid"``
    an optional boolean ``squash_mask`` restricts the squashing to some output
    dimensions; the rest stay linear.
    """

    def __init__(
        self,
        layer_sizes: Sequence[int],
        hidden_activation: str = "tanh",
        output_activation: str = "identity",
        squash_mask: Optional[Sequence[bool]] = None,
        rng: Optional[np.random.Generator] = None,
        final_init_scale: Optional[float] = None,
    ):
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ShapeMismatchError(f"invalid layer sizes {layer_sizes}")
        if hidden_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {hidden_activation!r}")
        if output_activation not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        if output_activation == "sigmoid":
            mask = np.ones(self.layer_sizes[-1], bool) if squash_mask is None else np.asarray(squash_mask, bool)
            if mask.shape != (self.layer_sizes[-1],):
                raise ShapeMismatchError("squash_mask length differs from output size")
        else:
            mask = np.zeros(self.layer_sizes[-1], bool)
        self.squash_mask = mask
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: list[np.ndarray] = []
        n_layers = len(self.layer_sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            bound = 1.0 / math.sqrt(fan_in)
            if i == n_layers - 1 and final_init_scale is not None:
                bound = final_init_scale
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, fan_out))

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_size:
            raise ShapeMismatchError(f"expected input width {self.input_size}, got shape {x.shape}")
        return x, single

    def _output(self, z: np.ndarray) -> np.ndarray:
        if not self.squash_mask.any():
            return z
        out = z.copy()
        out[:, self.squash_mask] = _sigmoid(z[:, self.squash_mask])
        return out

    def forward_cache(self, x):
        x, single = self._check_input(x)
        act, _ = _ACTIVATIONS[self.hidden_activation]
        outs = [x]
        h = x
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            h = act(z) if i < n_layers - 1 else self._output(z)
            outs.append(h)
        return (h[0] if single else h), (outs, single)

    def forward(self, x) -> np.ndarray:
        return self.forward_cache(x)[0]

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)

    def backward_cache(self, cache, upstream) -> tuple[list[np.ndarray], np.ndarray]:
        outs, single = cache
        g = np.asarray(upstream, dtype=float)
        if single:
            g = g[None, :]
        if g.shape != outs[-1].shape:
            raise ShapeMismatchError(f"upstream gradient shape {g.shape} != output shape {outs[-1].shape}")
        _, dact = _ACTIVATIONS[self.hidden_activation]
        if self.squash_mask.any():
            g = g.copy()
            y = outs[-1][:, self.squash_mask]
            g[:, self.squash_mask] *= y * (1.0 - y)
        n_layers = len(self.params) // 2
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for i in reversed(range(n_layers)):
            h_in = outs[i]
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
            if i > 0:
                g = g * dact(h_in)
        return grads, (g[0] if single else g)

    def backward(self, x, upstream) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(upstream * forward(x))`` w.r.t. parameters and input."""
        _, cache = self.forward_cache(x)
        return self.backward_cache(cache, upstream)

    # -- parameter utilities ---------------------------------------------

    def copy(self) -> "DenseNet":
        clone = object.__new__(DenseNet)
        clone.__dict__.update(self.__dict__)
        clone.layer_sizes = list(self.layer_sizes)
        clone.squash_mask = self.squash_mask.copy()
        clone.params = [p.copy() for p in self.params]
        return clone

    def same_shape(self, other: "DenseNet") -> bool:
        return [p.shape for p in self.params] == [p.shape for p in other.params]

    def soft_update_from(self, source: "DenseNet", rate: float) -> None:
        """``self <- rate * source + (1 - rate) * self``."""
        if not self.same_shape(source):
            raise ShapeMismatchError("soft update between differently shaped networks")
        for t, s in zip(self.params, source.params):
            t *= 1.0 - rate
            t += rate * s

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise ShapeMismatchError(f"expected {self.n_params} values, got {flat.size}")
        i = 0
        for p in self.params:
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    def header(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "squash_mask": [bool(m) for m in self.squash_mask],
        }

    def save(self, path) -> None:
        payload = self.get_flat().astype("<f8").tobytes()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(f"{FORMAT_VERSION}\n".encode())
            fh.write(json.dumps(self.header(), sort_keys=True).encode("utf-8") + b"\n")
            fh.write(payload)

    @classmethod
    def load(cls, path) -> "DenseNet":
        data = Path(path).read_bytes()
        if not data.startswith(MAGIC):
            raise ValueError(f"{path}: not a network checkpoint")
        rest = data[len(MAGIC) :]
        version, rest = rest.split(b"\n", 1)
        if int(version) != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {int(version)}")
        header, payload = rest.split(b"\n", 1)
        meta = json.loads(header.decode("utf-8"))
        net = cls(
            meta["layer_sizes"],
            meta["hidden_activation"],
            meta["output_activation"],
            meta["squash_mask"] if meta["output_activation"] == "sigmoid" else None,
        )
        net.set_flat(np.frombuffer(payload, dtype="<f8"))
        return net


class SGD:
    def __init__(self, lr: float = 1e-2):
        if not lr > 0:
            raise ValueError("learning rate must be > 0")
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not lr > 0:
            raise ValueError("learning rate must be > 0")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: Optional[list[np.ndarray]] = None
        self.v: Optional[list[np.ndarray]] = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * math.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr_t * m / (np.sqrt(v) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr)
    if name == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def apply_gradients(net: DenseNet, grads: list[np.ndarray], opt) -> DenseNet:
    """Apply one optimizer step in place; returns ``net`` for chaining."""
    if len(grads) != len(net.params) or any(g.shape != p.shape for g, p in zip(grads, net.params)):
        raise ShapeMismatchError("gradient shapes do not match network parameters")
    opt.step(net.params, grads)
    return net


def gradient_check(net: DenseNet, x, upstream=None, step: float = 1e-5, rng=None) -> float:
    """Largest relative error between backprop and central differences.

    The scalar probed is ``sum(upstream * forward(x))``; relative error is
    ``|analytic - numeric| / (|analytic| + 1e-8)``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.asarray(x, dtype=float)
    out = net.forward(x)
    if upstream is None:
        upstream = rng.standard_normal(out.shape)
    grads, _ = net.backward(x, upstream)
    worst = 0.0
    for p, g in zip(net.params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = float(np.sum(upstream * net.forward(x)))
            flat[i] = orig - step
            minus = float(np.sum(upstream * net.forward(x)))
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * step)
            worst = max(worst, abs(gflat[i] - numeric) / (abs(gflat[i]) + 1e-8))
    return worst
