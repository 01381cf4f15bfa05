"""Small reverse-mode autodiff engine for the real and complex arrays used by the network.

Complex values are stored as ``complex128``, which is bit-for-bit a pair of
``float64`` planes (``arr.view(np.float64)`` interleaves re/im). The loss is
real, so every complex leaf ``z = x + iy`` carries the gradient

    grad = dL/dx + i dL/dy,

and its float64 view is exactly the real-pair gradient. With this convention
an upstream gradient ``g`` of ``C = A @ B`` gives ``g @ B^H`` and ``A^H @ g``;
real inputs keep only the real part of the pulled-back gradient.
"""

from __future__ import annotations

from collections import deque

import numpy as np
from scipy.special import erf

from .errors import ShapeMismatch, SolveFailed

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    __slots__ = ("value", "grad", "parents", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, parents=(), name: str = ""):
        v = np.asarray(value)
        if v.dtype.kind not in "fc":
            v = v.astype(np.float64)
        self.value = v
        self.grad = None
        # parents: tuple of (Tensor, backward_fn mapping upstream grad -> grad for that parent)
        self.parents = parents
        self.requires_grad = requires_grad or any(p.requires_grad for p, _ in parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_complex(self) -> bool:
        return self.value.dtype.kind == "c"

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.value.dtype}, grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _fit(g: np.ndarray, parent: Tensor) -> np.ndarray:
    g = _unbroadcast(g, parent.shape)
    if not parent.is_complex and np.iscomplexobj(g):
        g = g.real
    return g


def _make(value, *pairs) -> Tensor:
    live = tuple((p, fn) for p, fn in pairs if p.requires_grad)
    return Tensor(value, parents=live)


# ---------------------------------------------------------------- primitives

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.value + b.value
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return _make(out, (a, lambda g: _fit(g, a)), (b, lambda g: _fit(g, b)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return add(a, scale(b, -1.0))


def scale(a, s: float) -> Tensor:
    """Multiplication by a real constant."""
    a = as_tensor(a)
    return _make(a.value * s, (a, lambda g: g * s))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul of {a.shape} and {b.shape}")
    av, bv = a.value, b.value
    out = av @ bv
    return _make(out,
                 (a, lambda g: _fit(g @ np.swapaxes(bv, -1, -2).conj(), a)),
                 (b, lambda g: _fit(np.swapaxes(av, -1, -2).conj() @ g, b)))


def linear_map(x, W, b=None) -> Tensor:
    """``x @ W^T + b`` acting on the last axis of ``x``."""
    out = matmul(x, transpose(W))
    return out if b is None else add(out, b)


def hadamard(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    try:
        out = av * bv
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return _make(out, (a, lambda g: _fit(g * np.conj(bv), a)), (b, lambda g: _fit(g * np.conj(av), b)))


def hadamard_mask(a, mask: np.ndarray) -> Tensor:
    """Elementwise product with a constant real mask."""
    return hadamard(a, Tensor(np.asarray(mask, dtype=np.float64)))


def transpose(a, axes=None) -> Tensor:
    """Plain (non-conjugating) axis permutation; default swaps the last two axes."""
    a = as_tensor(a)
    nd = a.value.ndim
    if axes is None:
        axes = tuple(range(nd - 2)) + (nd - 1, nd - 2)
    inv = np.argsort(axes)
    return _make(np.transpose(a.value, axes), (a, lambda g: np.transpose(g, inv)))


def conj(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.conj(a.value), (a, lambda g: np.conj(g)))


def conj_transpose(a) -> Tensor:
    return conj(transpose(a))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _make(a.value.reshape(shape), (a, lambda g: g.reshape(old)))


def _gelu_parts(x: np.ndarray):
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    return x * cdf, cdf


def _gelu_slope(x: np.ndarray, cdf: np.ndarray) -> np.ndarray:
    return cdf + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def gelu_real(x: np.ndarray) -> np.ndarray:
    return _gelu_parts(x)[0]


def gelu_real_grad(x: np.ndarray) -> np.ndarray:
    return _gelu_slope(x, _gelu_parts(x)[1])


def gelu(a) -> Tensor:
    """Exact GeLU ``x Phi(x)`` applied separately to the real and imaginary planes."""
    a = as_tensor(a)
    v = a.value
    if a.is_complex:
        re, cdf_r = _gelu_parts(v.real)
        im, cdf_i = _gelu_parts(v.imag)
        out = re + 1j * im

        def back(g):
            return g.real * _gelu_slope(v.real, cdf_r) + 1j * (g.imag * _gelu_slope(v.imag, cdf_i))
        return _make(out, (a, back))
    out, cdf = _gelu_parts(v)
    return _make(out, (a, lambda g: np.real(g) * _gelu_slope(v, cdf)))


def reduce_frobenius_sq(a) -> Tensor:
    """``sum |a|^2`` as a real scalar."""
    a = as_tensor(a)
    v = a.value
    out = np.sum(v.real ** 2 + v.imag ** 2) if a.is_complex else np.sum(v * v)
    return _make(np.float64(out), (a, lambda g: 2.0 * np.real(g) * v))


def trace_real(a) -> Tensor:
    """``Re tr`` over the last two axes (batched)."""
    a = as_tensor(a)
    n = a.shape[-1]
    if a.shape[-2] != n:
        raise ShapeMismatch(f"trace of non-square {a.shape}")
    out = np.real(np.trace(a.value, axis1=-2, axis2=-1))
    eye = np.eye(n)

    def back(g):
        g = np.real(np.asarray(g))
        return g[..., None, None] * eye
    return _make(out, (a, back))


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape, dt = a.shape, a.value.dtype
    return _make(np.sum(a.value), (a, lambda g: np.broadcast_to(g, shape).astype(dt, copy=True)))


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    return scale(sum_all(a), 1.0 / max(a.value.size, 1))


def hermitian_solve(H, X) -> Tensor:
    """``H^{-1} X`` for (batched) Hermitian positive definite ``H``.

    Backward: ``gX = H^{-H} gY`` and ``gH = -gX Y^H``.
    """
    H, X = as_tensor(H), as_tensor(X)
    Hv = H.value
    if Hv.shape[-1] != Hv.shape[-2] or Hv.shape[-1] != X.shape[-2]:
        raise ShapeMismatch(f"solve of {Hv.shape} with {X.shape}")
    try:
        # the Cholesky factorization is only the positive-definiteness check
        np.linalg.cholesky(Hv)
        Y = np.linalg.solve(Hv, X.value)
    except np.linalg.LinAlgError as exc:
        raise SolveFailed(f"regularized Gram solve failed: {exc}") from exc
    if not np.all(np.isfinite(Y)):
        raise SolveFailed("regularized Gram solve produced non-finite values")
    Hh = np.swapaxes(Hv, -1, -2).conj()
    cache = {}

    def gx(g):
        if "gX" not in cache:
            cache["gX"] = np.linalg.solve(Hh, g)
        return cache["gX"]

    return _make(Y,
                 (H, lambda g: _fit(-gx(g) @ np.swapaxes(Y, -1, -2).conj(), H)),
                 (X, lambda g: _fit(gx(g), X)))


# ---------------------------------------------------------------- backward

def topological_order(root: Tensor, order: str = "dfs") -> list[Tensor]:
    """Nodes reachable from ``root`` with every node before its parents.

    ``order="dfs"`` and ``order="bfs"`` give two different valid orders (Kahn's
    algorithm with a LIFO or FIFO frontier).
    """
    pending = {}
    seen = {id(root)}
    stack = [root]
    nodes = []
    while stack:
        t = stack.pop()
        nodes.append(t)
        for p, _ in t.parents:
            pending[id(p)] = pending.get(id(p), 0) + 1
            if id(p) not in seen:
                seen.add(id(p))
                stack.append(p)
    if order not in ("dfs", "bfs"):
        raise ValueError(f"unknown order {order!r}")
    frontier = deque([root])
    out = []
    while frontier:
        t = frontier.pop() if order == "dfs" else frontier.popleft()
        out.append(t)
        for p, _ in t.parents:
            pending[id(p)] -= 1
            if pending[id(p)] == 0:
                frontier.append(p)
    if len(out) != len(nodes):
        raise RuntimeError("graph is not acyclic")
    return out


def backward(root: Tensor, order: str = "dfs") -> None:
    """Accumulate ``d root / d leaf`` into ``.grad`` of every leaf that requires it."""
    if root.value.size != 1 or np.iscomplexobj(root.value):
        raise ShapeMismatch("backward needs a real scalar root")
    grads = {id(root): np.ones_like(root.value)}
    for t in topological_order(root, order):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if not t.parents:
            g = np.ascontiguousarray(g, dtype=t.value.dtype)
            t.grad = g if t.grad is None else t.grad + g
            continue
        for p, fn in t.parents:
            gp = fn(g)
            k = id(p)
            grads[k] = gp if k not in grads else grads[k] + gp


def parameter(value, name: str = "") -> Tensor:
    return Tensor(np.array(value, copy=True), requires_grad=True, name=name)


# ---------------------------------------------------------------- checks

def grad_check(f, params: list[Tensor], probe_count: int = 16, step: float = 1e-5,
               seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f()`` must build and return a real scalar ``Tensor`` from ``params``.
    Probes are random real scalars inside the float64 views of the parameters.
    """
    for p in params:
        p.zero_grad()
    backward(f())
    views = [p.value.view(np.float64).reshape(-1) for p in params]
    gviews = [(p.grad if p.grad is not None else np.zeros_like(p.value)).view(np.float64).reshape(-1)
              for p in params]
    sizes = np.array([v.size for v in views])
    rng = np.random.default_rng(seed)
    flat = rng.choice(sizes.sum(), size=min(probe_count, int(sizes.sum())), replace=False)
    bounds = np.cumsum(sizes)
    worst = 0.0
    for idx in np.sort(flat):
        k = int(np.searchsorted(bounds, idx, side="right"))
        j = int(idx - (bounds[k - 1] if k else 0))
        v = views[k]
        old = v[j]
        v[j] = old + step
        fp = float(f().value)
        v[j] = old - step
        fm = float(f().value)
        v[j] = old
        fd = (fp - fm) / (2.0 * step)
        err = abs(gviews[k][j] - fd) / max(1e-8, abs(fd))
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------- optimizer

class AdamState:
    def __init__(self, params: list[Tensor], lr: float = 0.01, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step = 0
        self.m = [np.zeros(p.value.view(np.float64).shape) for p in params]
        self.v = [np.zeros(p.value.view(np.float64).shape) for p in params]


def adam_step(state: AdamState, params: list[Tensor], grads=None) -> None:
    """In-place Adam update with bias correction and decoupled weight decay."""
    if grads is None:
        grads = [p.grad for p in params]
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        x = p.value.view(np.float64)
        if g is None:
            g = np.zeros_like(p.value)
        gr = np.ascontiguousarray(g, dtype=p.value.dtype).view(np.float64)
        if gr.shape != x.shape:
            raise ShapeMismatch(f"gradient shape {gr.shape} != parameter shape {x.shape}")
        if state.weight_decay:
            x *= 1.0 - state.lr * state.weight_decay
        m *= b1
        m += (1.0 - b1) * gr
        v *= b2
        v += (1.0 - b2) * gr * gr
        x -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
