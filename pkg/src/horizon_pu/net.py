"""Minimal dense feedforward network with exact backpropagation.

Hidden layers use ReLU (derivative 0 at exactly 0).  The first layer accepts
sparse count vectors and goes through the CSR kernels; every later layer is
dense.  Weights are stored as ``(fan_in, fan_out)`` so a layer is
``X @ W + b``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .corpus import CsrBatch, SparseVec

_DTYPES = {"float32": np.float32, "float64": np.float64}
_net_ids = itertools.count()


class NonFiniteError(FloatingPointError):
    """Raised when a loss or gradient stops being finite."""


class StaleCacheError(RuntimeError):
    """A forward cache was used against a different or since-updated network."""


@dataclass(frozen=True)
class NetConfig:
    seed: int = 0
    init: str = "he_uniform"
    epsilon: float = 1e-5
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must be in (0, 0.5), got {self.epsilon}")
        if self.init not in ("he_uniform", "zeros"):
            raise ValueError(f"unknown init scheme {self.init!r}")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}")


@dataclass
class ForwardCache:
    net_id: int
    version: int
    inputs: object
    pre: list
    post: list


class DenseNet:
    """Stack of affine layers with ReLU between them.

    With ``scalar_output=True`` (the default) the last layer has width 1 and
    no activation, so the network produces a raw real-valued score.  With
    ``scalar_output=False`` the last layer is also rectified; that form is
    used as a shared feature trunk.
    """

    def __init__(self, weights, biases, scalar_output=True):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for W, b in zip(weights, biases):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError("bias shape does not match weight matrix")
        for W, W_next in zip(weights, weights[1:]):
            if W.shape[1] != W_next.shape[0]:
                raise ValueError("inconsistent consecutive layer dimensions")
        if scalar_output and weights[-1].shape[1] != 1:
            raise ValueError("final layer must have width 1")
        self.weights = [np.ascontiguousarray(W) for W in weights]
        self.biases = [np.ascontiguousarray(b) for b in biases]
        self.scalar_output = scalar_output
        self.id = next(_net_ids)
        self.version = 0

    @classmethod
    def init(cls, layer_dims, cfg: NetConfig = NetConfig(), scalar_output=True, seed=None):
        """He-style uniform init with fan-in scaling; biases start at zero."""
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2 or min(layer_dims) < 1:
            raise ValueError(f"bad layer dims {layer_dims}")
        dtype = _DTYPES[cfg.dtype]
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
            if cfg.init == "zeros":
                W = np.zeros((fan_in, fan_out))
            else:
                bound = np.sqrt(6.0 / fan_in)
                W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            weights.append(W.astype(dtype))
            biases.append(np.zeros(fan_out, dtype=dtype))
        return cls(weights, biases, scalar_output=scalar_output)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        """Parameters in layer order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.scalar_output)

    def touch(self):
        self.version += 1

    def forward(self, X):
        """Batch forward.  Returns (output, cache).

        ``X`` may be a :class:`CsrBatch`, a :class:`SparseVec` (treated as a
        batch of one) or a dense ``(n, d)`` array.  Output is ``(n,)`` scores
        for a scalar-output net, ``(n, width)`` features otherwise.
        """
        if isinstance(X, SparseVec):
            X = CsrBatch.from_vectors([X])
        if isinstance(X, CsrBatch):
            if X.dim != self.input_dim:
                raise ValueError(f"input dim {X.dim} != network input dim {self.input_dim}")
            z = _kernels.csr_matmul(X.indptr, X.indices, X.data, self.weights[0])
        else:
            X = np.asarray(X, dtype=self.dtype)
            if X.ndim != 2 or X.shape[1] != self.input_dim:
                raise ValueError(f"input shape {X.shape} incompatible with input dim {self.input_dim}")
            z = X @ self.weights[0]
        z += self.biases[0]
        pre, post = [z], []
        last = len(self.weights) - 1
        for i in range(1, len(self.weights) + 1):
            a = np.maximum(z, 0) if (i <= last or not self.scalar_output) else z
            post.append(a)
            if i > last:
                break
            z = a @ self.weights[i]
            z += self.biases[i]
            pre.append(z)
        out = post[-1]
        if self.scalar_output:
            out = out[:, 0]
        return out, ForwardCache(self.id, self.version, X, pre, post)

    def backward(self, cache: ForwardCache, upstream, need_input_grad=False):
        """Gradients of ``sum(upstream * output)`` w.r.t. every parameter.

        Returns ``(grads, input_grad)`` where ``grads`` follows
        :meth:`params` order and ``input_grad`` is ``None`` unless requested
        (dense inputs only).
        """
        if cache.net_id != self.id or cache.version != self.version:
            raise StaleCacheError("forward cache does not belong to the current network state")
        n = cache.pre[0].shape[0]
        g = np.asarray(upstream, dtype=self.dtype)
        if self.scalar_output:
            g = np.broadcast_to(g, (n,)).reshape(n, 1)
        else:
            g = np.broadcast_to(g, cache.pre[-1].shape)
        grads = [None] * (2 * len(self.weights))
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            if i < last or not self.scalar_output:
                g = g * (cache.pre[i] > 0)
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                grads[2 * i] = cache.post[i - 1].T @ g
                g = g @ self.weights[i].T
        X = cache.inputs
        if isinstance(X, CsrBatch):
            grads[0] = _kernels.csr_t_matmul(X.indptr, X.indices, X.data, np.ascontiguousarray(g), X.dim)
            input_grad = None
            if need_input_grad:
                raise ValueError("input gradient is only available for dense inputs")
        else:
            grads[0] = X.T @ g
            input_grad = g @ self.weights[0].T if need_input_grad else None
        return grads, input_grad


def forward(net: DenseNet, x):
    """Single-example convenience wrapper: returns (score, cache)."""
    out, cache = net.forward(x)
    if net.scalar_output and out.shape[0] == 1:
        return float(out[0]), cache
    return out, cache


def backward(net: DenseNet, cache: ForwardCache, upstream_grad):
    grads, _ = net.backward(cache, upstream_grad)
    return grads


def concat(first: DenseNet, second: DenseNet) -> DenseNet:
    """One network equal to ``second(first(x))``; ``first`` must be a rectified trunk."""
    if first.scalar_output:
        raise ValueError("first network must end in a rectified layer")
    if first.layer_dims[-1] != second.input_dim:
        raise ValueError("trunk width does not match head input")
    return DenseNet(
        [W.copy() for W in first.weights + second.weights],
        [b.copy() for b in first.biases + second.biases],
        second.scalar_output,
    )


# ---------------------------------------------------------------------------
# loss and probability view
# ---------------------------------------------------------------------------


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def logistic_loss(score, y):
    """ln(1 + exp(-y * score)), overflow-safe; scalar in, scalar out."""
    out = np.logaddexp(0.0, -np.asarray(y, dtype=np.float64) * np.asarray(score, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def logistic_loss_grad(score, y):
    """d/dscore of :func:`logistic_loss`."""
    y = np.asarray(y, dtype=np.float64)
    return -y * sigmoid(-y * np.asarray(score, dtype=np.float64))


def clamp_prob(score, epsilon=1e-5):
    """Probability view sigmoid(score) clipped to [epsilon, 1 - epsilon]."""
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must be in (0, 0.5)")
    p = np.clip(sigmoid(score), epsilon, 1.0 - epsilon)
    return float(p) if np.ndim(p) == 0 else p


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass
class OptimState:
    """Optimizer hyperparameters plus per-tensor moment buffers.

    Weight decay is applied as ``weight_decay * param`` added to the gradient
    of every tensor that is updated in a step.  Each tensor keeps its own
    step counter, so tensors that are skipped in a step (for example heads of
    other tasks) are left untouched.
    """

    kind: str = "adam"
    lr: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _state: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be >= 0")

    def update(self, params, grads):
        if len(params) != len(grads):
            raise ValueError("one gradient per parameter required")
        for p, g in zip(params, grads):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteError("non-finite gradient; aborting update")
        for p, g in zip(params, grads):
            g = np.asarray(g, dtype=p.dtype)
            if self.weight_decay:
                g = g + p.dtype.type(self.weight_decay) * p
            if self.kind == "sgd":
                p -= p.dtype.type(self.lr) * g
                continue
            entry = self._state.get(id(p))
            if entry is None or entry[0] is not p:
                entry = [p, np.zeros_like(p), np.zeros_like(p), 0]
                self._state[id(p)] = entry
            entry[3] += 1
            _kernels.adam_update(p, np.ascontiguousarray(g), entry[1], entry[2],
                                 self.lr, self.beta1, self.beta2, self.eps, entry[3])


def step(net: DenseNet, grads, optim: OptimState) -> DenseNet:
    optim.update(net.params(), grads)
    net.touch()
    return net
