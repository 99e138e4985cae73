"""Dense networks from scratch: MLP forward/backward, Adam, soft updates, replay.

All parameters of a network live in one flat float64 vector; per-layer
weight and bias arrays are views into it.  That keeps optimizer steps,
target tracking and cross-agent parameter averaging single vector ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class Mlp:
    """Affine layers with ReLU between them and a linear output.

    ``sizes`` lists every layer width including input and output, e.g.
    ``(160, 128, 128, 5)``.  ``(1, 1)`` is a single affine map.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None,
                 params: np.ndarray | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        self.shapes = [(a, b) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        n = sum(a * b + b for a, b in self.shapes)
        if params is not None:
            params = np.asarray(params, dtype=np.float64)
            if params.shape != (n,):
                raise ValueError(f"expected {n} parameters, got shape {params.shape}")
            self.params = params.copy()
        else:
            self.params = np.zeros(n)
        self._bind()
        if params is None and rng is not None:
            self._init_uniform(rng)

    def _bind(self) -> None:
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        off = 0
        for a, b in self.shapes:
            self.weights.append(self.params[off:off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(self.params[off:off + b])
            off += b

    def _init_uniform(self, rng: np.random.Generator) -> None:
        for (fan_in, _), w, b in zip(self.shapes, self.weights, self.biases):
            bound = 1.0 / np.sqrt(fan_in)
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    def copy(self) -> Mlp:
        return Mlp(self.sizes, params=self.params)

    def set_params(self, flat: np.ndarray) -> None:
        if flat.shape != self.params.shape:
            raise ValueError(f"shape mismatch: {flat.shape} vs {self.params.shape}")
        self.params[...] = flat

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Return the output and the layer inputs needed by backward.

        The cache holds the input followed by each hidden layer's post-ReLU
        activation; a unit is active exactly where its activation is > 0.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_size:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.input_size}")
        cache = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w
            z += b
            if i < last:
                h = np.maximum(z, 0.0, out=z)
                cache.append(h)
            else:
                h = z
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list[np.ndarray], grad_out: np.ndarray, *,
                 param_grad: bool = True, input_grad: bool = True
                 ) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Gradients of a scalar loss given dL/d(output).

        Returns ``(flat parameter gradient, gradient w.r.t. the input)``;
        either can be skipped (returned as None).  Batched inputs sum the
        per-example parameter gradients.
        """
        grad = np.empty_like(self.params) if param_grad else None
        g = np.asarray(grad_out, dtype=np.float64)
        off = self.params.size
        for i in range(len(self.weights) - 1, -1, -1):
            a, b = self.shapes[i]
            off -= a * b + b
            if param_grad:
                h_in = cache[i]
                gw = grad[off:off + a * b].reshape(a, b)
                gb = grad[off + a * b:off + a * b + b]
                if g.ndim == 1:
                    np.outer(h_in, g, out=gw)
                    gb[...] = g
                else:
                    np.matmul(h_in.T, g, out=gw)
                    g.sum(axis=0, out=gb)
            if i == 0:
                g = g @ self.weights[0].T if input_grad else None
            else:
                g = g @ self.weights[i].T
                g *= cache[i] > 0.0
        return grad, g


@dataclass
class Adam:
    """Bias-corrected Adam over a flat parameter vector."""

    n: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    _tmp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.m = np.zeros(self.n)
        self.v = np.zeros(self.n)
        self._tmp = np.empty(self.n)

    def reset(self) -> None:
        self.m.fill(0.0)
        self.v.fill(0.0)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        if grads.shape != params.shape or params.shape != self.m.shape:
            raise ValueError("parameter/gradient/moment shapes differ")
        self.t += 1
        m, v, tmp = self.m, self.v, self._tmp
        m *= self.beta1
        np.multiply(grads, 1.0 - self.beta1, out=tmp)
        m += tmp
        v *= self.beta2
        np.multiply(grads, grads, out=tmp)
        tmp *= 1.0 - self.beta2
        v += tmp
        # bias corrections folded into the step size and epsilon
        c1 = 1.0 - self.beta1 ** self.t
        c2 = np.sqrt(1.0 - self.beta2 ** self.t)
        np.sqrt(v, out=tmp)
        tmp += self.eps * c2
        np.divide(m, tmp, out=tmp)
        tmp *= self.lr * c2 / c1
        params -= tmp

    def copy(self) -> Adam:
        out = Adam(self.n, self.lr, self.beta1, self.beta2, self.eps, self.t)
        out.m[...] = self.m
        out.v[...] = self.v
        return out


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if target.params.shape != online.params.shape:
        raise ValueError("target and online networks differ in shape")
    if tau == 1.0:
        target.params[...] = online.params
    else:
        target.params *= 1.0 - tau
        target.params += tau * online.params
    return target


class BufferNotReady(RuntimeError):
    pass


class ReplayBuffer:
    """Fixed-capacity ring of (state, action, reward, next_state, done)."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.state_dim = state_dim
        # np.zeros pages are committed lazily, so a large capacity costs nothing until filled
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state: np.ndarray, action: int, reward: float, next_state: np.ndarray, done: bool) -> None:
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def ready(self, batch_size: int) -> bool:
        return self.size >= batch_size

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform draw with replacement: (states, actions, rewards, next_states, dones)."""
        if not self.ready(batch_size):
            raise BufferNotReady(f"buffer holds {self.size} < {batch_size} transitions")
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])


def save_params(net: Mlp, path: str | Path) -> None:
    """CSV: a ``# sizes`` header, then one parameter per line."""
    lines = ["# sizes " + ",".join(map(str, net.sizes))]
    lines.extend(repr(float(v)) for v in net.params)
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path) -> Mlp:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# sizes "):
        raise ValueError(f"{path}: missing '# sizes' header")
    sizes = [int(s) for s in lines[0][len("# sizes "):].split(",")]
    values = np.array([float(v) for v in lines[1:] if v.strip()])
    return Mlp(sizes, params=values)
