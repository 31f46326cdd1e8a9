"""Small dense networks with hand-written reverse-mode gradients.

Everything is float64. Weights are stored as ``(fan_in, fan_out)`` so a
batch of row vectors maps through ``x @ W + b``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, NumericError, ParseError

DEFAULT_HIDDEN = (64, 64)
_BLOB_MAGIC = b"CTXB"


def _tanh(z):
    return np.tanh(z)


def _relu(z):
    return np.maximum(z, 0.0)


_ACTIVATIONS = {"tanh": _tanh, "relu": _relu, "identity": lambda z: z}


def _activation_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray | None:
    if name == "tanh":
        return 1.0 - post * post
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    return None


@dataclass
class GradBundle:
    grads: list[np.ndarray]
    input_grad: np.ndarray | None = None
    _norm: float | None = field(default=None, repr=False)

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in self.grads)))
        return self._norm

    def scaled(self, factor: float) -> "GradBundle":
        return GradBundle([g * factor for g in self.grads], self.input_grad)

    def __add__(self, other: "GradBundle") -> "GradBundle":
        return GradBundle([a + b for a, b in zip(self.grads, other.grads)])

    @staticmethod
    def concat(*bundles: "GradBundle") -> "GradBundle":
        return GradBundle([g for b in bundles for g in b.grads])

    def split(self, sizes: Sequence[int]) -> list["GradBundle"]:
        out, start = [], 0
        for n in sizes:
            out.append(GradBundle(self.grads[start:start + n]))
            start += n
        return out


class Mlp:
    """Fully connected network.

    ``sizes`` lists every layer width including input and output, e.g.
    ``[obs_dim, 64, 64, n_actions]``. Weights are drawn from
    ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; ``out_scale`` shrinks the last
    layer's initial weights.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        hidden: str = "tanh",
        output: str = "identity",
        rng: np.random.Generator | None = None,
        out_scale: float = 1.0,
    ):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise InvalidArgument(f"invalid layer sizes {sizes}")
        if hidden not in ("tanh", "relu") or output not in ("identity", "tanh"):
            raise InvalidArgument(f"unsupported activations {hidden}/{output}")
        self.sizes = [int(s) for s in sizes]
        self.hidden = hidden
        self.output = output
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: list[np.ndarray] = []
        n_layers = len(self.sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
            if i == n_layers - 1:
                w *= out_scale
                b *= out_scale
            self.params += [w, b]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def _act(self, layer: int) -> str:
        return self.output if layer == self.n_layers - 1 else self.hidden

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise InvalidArgument(f"expected input width {self.sizes[0]}, got shape {x.shape}")
        return x, single

    def forward(self, x) -> np.ndarray:
        x, single = self._check_input(x)
        h = x
        for i in range(self.n_layers):
            h = _ACTIVATIONS[self._act(i)](h @ self.params[2 * i] + self.params[2 * i + 1])
        return h[0] if single else h

    __call__ = forward

    def forward_cached(self, x):
        x, single = self._check_input(x)
        acts = [x]
        pres = []
        h = x
        for i in range(self.n_layers):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            h = _ACTIVATIONS[self._act(i)](z)
            pres.append(z)
            acts.append(h)
        out = h[0] if single else h
        return out, (acts, pres, single)

    def backward(self, cache, grad_out, input_grad: bool = False, param_grads: bool = True) -> GradBundle:
        """Gradients of a scalar loss whose derivative w.r.t. the output is ``grad_out``."""
        acts, pres, single = cache
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != acts[-1].shape:
            raise InvalidArgument(f"upstream gradient shape {g.shape} != output shape {acts[-1].shape}")
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for i in reversed(range(self.n_layers)):
            d = _activation_grad(self._act(i), pres[i], acts[i + 1])
            if d is not None:
                g = g * d
            if param_grads:
                grads[2 * i] = acts[i].T @ g
                grads[2 * i + 1] = g.sum(axis=0)
            if i > 0 or input_grad:
                g = g @ self.params[2 * i].T
        dx = None
        if input_grad:
            dx = g[0] if single else g
        if not param_grads:
            grads = []
        return GradBundle(grads, dx)

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.sizes = list(self.sizes)
        new.hidden = self.hidden
        new.output = self.output
        new.params = [p.copy() for p in self.params]
        return new

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != len(self.params) or any(a.shape != b.shape for a, b in zip(params, self.params)):
            raise InvalidArgument("parameter shapes do not match the network")
        for dst, src in zip(self.params, params):
            dst[...] = src

    def n_params(self) -> int:
        return sum(p.size for p in self.params)


def forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def backward(net: Mlp, x, upstream) -> GradBundle:
    """Reverse-mode gradients of ``sum(upstream * net(x))`` w.r.t. parameters."""
    _, cache = net.forward_cached(x)
    return net.backward(cache, upstream)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params: Sequence[np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, beta1, beta2, eps)

    def arrays(self) -> list[np.ndarray]:
        return [np.array([float(self.t)])] + self.m + self.v

    def load_arrays(self, arrays: Sequence[np.ndarray]) -> None:
        n = len(self.m)
        if len(arrays) != 2 * n + 1:
            raise InvalidArgument("optimizer state does not match")
        self.t = int(arrays[0][0])
        for dst, src in zip(self.m + self.v, arrays[1:]):
            dst[...] = src


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: GradBundle | Sequence[np.ndarray], lr: float):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if not lr > 0:
        raise InvalidArgument(f"learning rate must be > 0, got {lr}")
    gs = grads.grads if isinstance(grads, GradBundle) else list(grads)
    for g in gs:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient passed to adam_step")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def clip_global_norm(grads: GradBundle, max_norm: float) -> GradBundle:
    if max_norm < 0:
        raise InvalidArgument("max_norm must be >= 0")
    norm = grads.norm
    if norm > max_norm:
        out = grads.scaled(max_norm / norm)
        return out
    return grads


def arrays_to_blob(arrays: Sequence[np.ndarray]) -> bytes:
    """Serialize arrays as magic + u32 header length + JSON shape header + raw little-endian f8."""
    arrays = [np.ascontiguousarray(a, dtype="<f8") for a in arrays]
    header = json.dumps({"dtype": "<f8", "shapes": [list(a.shape) for a in arrays]}, separators=(",", ":"))
    hb = header.encode()
    return _BLOB_MAGIC + struct.pack("<I", len(hb)) + hb + b"".join(a.tobytes() for a in arrays)


def blob_to_arrays(blob: bytes) -> list[np.ndarray]:
    if blob[:4] != _BLOB_MAGIC:
        raise ParseError("not a parameter blob")
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + hlen].decode())
    offset = 8 + hlen
    out = []
    for shape in header["shapes"]:
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        out.append(a)
        offset += 8 * count
    if offset != len(blob):
        raise ParseError("trailing bytes in parameter blob")
    return out
