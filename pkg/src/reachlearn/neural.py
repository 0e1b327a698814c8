"""Numpy LSTM + two ReLU layers + linear head, with exact BPTT and Adam.

Shapes use a time-major layout: inputs ``(T, B, n_in)``, targets
``(T, B, n_out)``. Gate blocks in the fused LSTM matrices are ordered
input, forget, cell candidate, output.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

PARAM_NAMES = ("Wx", "Wh", "b", "W1", "b1", "W2", "b2", "Wo", "bo")


class ShapeError(ValueError):
    pass


def param_shapes(n_in: int, hidden: int, n_out: int) -> dict[str, tuple[int, ...]]:
    return {
        "Wx": (n_in, 4 * hidden),
        "Wh": (hidden, 4 * hidden),
        "b": (4 * hidden,),
        "W1": (hidden, hidden),
        "b1": (hidden,),
        "W2": (hidden, hidden),
        "b2": (hidden,),
        "Wo": (hidden, n_out),
        "bo": (n_out,),
    }


class WeightSet:
    """Named parameter arrays. Arithmetic helpers return new objects."""

    def __init__(self, params: dict[str, np.ndarray]):
        missing = set(PARAM_NAMES) - set(params)
        if missing:
            raise ShapeError(f"missing parameters: {sorted(missing)}")
        self.params = {k: np.asarray(params[k], dtype=np.float64) for k in PARAM_NAMES}
        n_in, four_h = self.params["Wx"].shape
        expected = param_shapes(n_in, four_h // 4, self.params["Wo"].shape[1])
        for k, shape in expected.items():
            if self.params[k].shape != shape:
                raise ShapeError(f"{k} has shape {self.params[k].shape}, expected {shape}")

    @property
    def n_in(self) -> int:
        return self.params["Wx"].shape[0]

    @property
    def hidden(self) -> int:
        return self.params["Wh"].shape[0]

    @property
    def n_out(self) -> int:
        return self.params["Wo"].shape[1]

    def __getitem__(self, key):
        return self.params[key]

    def items(self):
        return ((k, self.params[k]) for k in PARAM_NAMES)

    def copy(self) -> "WeightSet":
        return WeightSet({k: v.copy() for k, v in self.items()})

    def zeros_like(self) -> "WeightSet":
        return WeightSet({k: np.zeros_like(v) for k, v in self.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for _, v in self.items()])

    def with_flat(self, vec) -> "WeightSet":
        out, i = {}, 0
        for k, v in self.items():
            out[k] = np.asarray(vec[i:i + v.size], dtype=np.float64).reshape(v.shape)
            i += v.size
        return WeightSet(out)

    def global_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(v * v) for _, v in self.items())))

    def checksum(self) -> str:
        h = hashlib.sha256()
        for _, v in self.items():
            h.update(np.ascontiguousarray(v, dtype="<f8").tobytes())
        return h.hexdigest()

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for _, v in self.items())

    def __eq__(self, other):
        return isinstance(other, WeightSet) and all(
            np.array_equal(v, other.params[k]) for k, v in self.items()
        )

    def __repr__(self):
        return f"WeightSet(n_in={self.n_in}, hidden={self.hidden}, n_out={self.n_out})"


def init_weights(n_in: int, hidden: int, n_out: int, rng: np.random.Generator,
                 forget_bias: float = 1.0) -> WeightSet:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, forget-gate bias ``forget_bias``."""
    params = {}
    for k, shape in param_shapes(n_in, hidden, n_out).items():
        if k.startswith("b"):
            params[k] = np.zeros(shape)
        else:
            lim = 1.0 / np.sqrt(shape[0] if k != "Wx" else n_in + hidden)
            params[k] = rng.uniform(-lim, lim, size=shape)
    params["b"][hidden:2 * hidden] = forget_bias
    return WeightSet(params)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _check_state(weights: WeightSet, x, h, c):
    x, h, c = (np.asarray(a, dtype=np.float64) for a in (x, h, c))
    if x.shape[-1] != weights.n_in:
        raise ShapeError(f"input has {x.shape[-1]} features, expected {weights.n_in}")
    if h.shape[-1] != weights.hidden or c.shape != h.shape:
        raise ShapeError(f"state shapes {h.shape}/{c.shape} do not match hidden={weights.hidden}")
    return x, h, c


def lstm_step(weights: WeightSet, x, h, c):
    x, h, c = _check_state(weights, x, h, c)
    H = weights.hidden
    z = x @ weights["Wx"] + h @ weights["Wh"] + weights["b"]
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = sigmoid(z[..., 3 * H:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def head(weights: WeightSet, h):
    a1 = np.maximum(h @ weights["W1"] + weights["b1"], 0.0)
    a2 = np.maximum(a1 @ weights["W2"] + weights["b2"], 0.0)
    return a2 @ weights["Wo"] + weights["bo"]


def forward_pass(weights: WeightSet, x, h, c):
    """One time step: returns ``(prediction, h', c')``."""
    h_new, c_new = lstm_step(weights, x, h, c)
    return head(weights, h_new), h_new, c_new


@dataclass
class _Cache:
    xs: np.ndarray
    hs: np.ndarray  # (T+1, B, H), hs[0] is the initial state
    cs: np.ndarray
    gates: np.ndarray  # (T, B, 4H) post-nonlinearity
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray


def _forward(p, xs, h0=None, c0=None):
    """Dtype-generic forward over a parameter dict; returns predictions and cache."""
    T, B, _ = xs.shape
    H = p["Wh"].shape[0]
    dt = xs.dtype
    hs = np.zeros((T + 1, B, H), dtype=dt)
    cs = np.zeros((T + 1, B, H), dtype=dt)
    if h0 is not None:
        hs[0] = h0
    if c0 is not None:
        cs[0] = c0
    gates = np.empty((T, B, 4 * H), dtype=dt)
    zx = xs @ p["Wx"] + p["b"]
    Wh = p["Wh"]
    for t in range(T):
        z = zx[t] + hs[t] @ Wh
        gt = gates[t]
        gt[:, :2 * H] = sigmoid(z[:, :2 * H])
        gt[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        gt[:, 3 * H:] = sigmoid(z[:, 3 * H:])
        cs[t + 1] = gt[:, H:2 * H] * cs[t] + gt[:, :H] * gt[:, 2 * H:3 * H]
        hs[t + 1] = gt[:, 3 * H:] * np.tanh(cs[t + 1])
    z1 = hs[1:] @ p["W1"] + p["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ p["W2"] + p["b2"]
    a2 = np.maximum(z2, 0.0)
    preds = a2 @ p["Wo"] + p["bo"]
    return preds, _Cache(xs, hs, cs, gates, z1, a1, z2, a2)


def forward_sequence(weights: WeightSet, xs, h0=None, c0=None, return_cache=False):
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 3 or xs.shape[-1] != weights.n_in:
        raise ShapeError(f"inputs must be (T, B, {weights.n_in}), got {xs.shape}")
    preds, cache = _forward(weights.params, xs, h0, c0)
    return (preds, cache) if return_cache else preds


def mse(preds, targets) -> float:
    """Mean over steps and sequences of the squared Euclidean error."""
    d = np.asarray(preds) - np.asarray(targets)
    return float(np.mean(np.sum(d * d, axis=-1)))


def loss_and_gradients(weights: WeightSet, xs, ys, dtype=np.float64):
    """MSE loss and its exact gradient by backpropagation through time.

    Every sequence starts from zero memory. ``dtype`` selects the compute
    precision; gradients are always returned as float64.
    """
    xs = np.asarray(xs, dtype=dtype)
    ys = np.asarray(ys, dtype=dtype)
    if xs.ndim != 3 or xs.shape[-1] != weights.n_in:
        raise ShapeError(f"inputs must be (T, B, {weights.n_in}), got {xs.shape}")
    p = {k: v.astype(dtype, copy=False) for k, v in weights.items()}
    preds, k = _forward(p, xs)
    if ys.shape != preds.shape:
        raise ShapeError(f"targets {ys.shape} do not match predictions {preds.shape}")
    T, B, _ = preds.shape
    H = weights.hidden
    diff = preds - ys
    loss = float(np.mean(np.sum(diff * diff, axis=-1, dtype=np.float64)))
    dpred = (2.0 / (T * B)) * diff

    flat = lambda a: a.reshape(T * B, -1)  # noqa: E731
    g = {}
    g["Wo"] = flat(k.a2).T @ flat(dpred)
    g["bo"] = dpred.sum(axis=(0, 1))
    dz2 = (dpred @ p["Wo"].T) * (k.z2 > 0)
    g["W2"] = flat(k.a1).T @ flat(dz2)
    g["b2"] = dz2.sum(axis=(0, 1))
    dz1 = (dz2 @ p["W2"].T) * (k.z1 > 0)
    g["W1"] = flat(k.hs[1:]).T @ flat(dz1)
    g["b1"] = dz1.sum(axis=(0, 1))
    dh_out = dz1 @ p["W1"].T

    dz = np.empty((T, B, 4 * H), dtype=dtype)
    dh_next = np.zeros((B, H), dtype=dtype)
    dc_next = np.zeros((B, H), dtype=dtype)
    Wh_T = p["Wh"].T
    for t in range(T - 1, -1, -1):
        gt = k.gates[t]
        i, f, gg, o = gt[:, :H], gt[:, H:2 * H], gt[:, 2 * H:3 * H], gt[:, 3 * H:]
        tc = np.tanh(k.cs[t + 1])
        dh = dh_out[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d = dz[t]
        d[:, :H] = dc * gg * i * (1.0 - i)
        d[:, H:2 * H] = dc * k.cs[t] * f * (1.0 - f)
        d[:, 2 * H:3 * H] = dc * i * (1.0 - gg * gg)
        d[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = d @ Wh_T
    g["Wx"] = flat(k.xs).T @ flat(dz)
    g["Wh"] = flat(k.hs[:-1]).T @ flat(dz)
    g["b"] = dz.sum(axis=(0, 1))
    return loss, WeightSet({name: v.astype(np.float64) for name, v in g.items()})


def stack_batch(batch):
    """Turn a list of ``(inputs (T, n_in), targets (T, n_out))`` into time-major arrays."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    lengths = {len(x) for x, _ in batch}
    if len(lengths) != 1:
        raise ShapeError(f"sequences in a batch must share a length, got {sorted(lengths)}")
    xs = np.stack([np.asarray(x, float) for x, _ in batch], axis=1)
    ys = np.stack([np.asarray(y, float) for _, y in batch], axis=1)
    return xs, ys


def bptt_gradients(weights: WeightSet, batch) -> WeightSet:
    xs, ys = stack_batch(batch)
    return loss_and_gradients(weights, xs, ys)[1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 40
    clip_norm: float = 5.0
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "eps", "batch_size", "epochs", "clip_norm", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decay rates must lie in (0, 1)")


@dataclass
class OptimizerState:
    m: WeightSet
    v: WeightSet
    step: int = 0

    @classmethod
    def fresh(cls, weights: WeightSet) -> "OptimizerState":
        return cls(weights.zeros_like(), weights.zeros_like(), 0)


def clip_by_global_norm(grads: WeightSet, max_norm: float) -> WeightSet:
    norm = grads.global_norm()
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return WeightSet({k: v * scale for k, v in grads.items()})


def optimizer_update(weights: WeightSet, grads: WeightSet, state: OptimizerState,
                     config: TrainConfig = TrainConfig()):
    """Adam step after global-norm clipping; inputs are left untouched."""
    grads = clip_by_global_norm(grads, config.clip_norm)
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_w, new_m, new_v = {}, {}, {}
    for k, w in weights.items():
        g = grads[k]
        m = b1 * state.m[k] + (1 - b1) * g
        v = b2 * state.v[k] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_w[k] = w - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[k], new_v[k] = m, v
    return WeightSet(new_w), OptimizerState(WeightSet(new_m), WeightSet(new_v), t)


def finite_diff_check(weights: WeightSet, batch, step: float = 1e-5, grad_fn=None) -> float:
    """Largest relative disagreement between analytic and central-difference gradients.

    The numeric side runs in extended precision so round-off does not swamp
    tiny gradient components. ``grad_fn(weights, batch)`` defaults to
    :func:`bptt_gradients`; pass another to verify (or sabotage) a route.
    """
    xs, ys = stack_batch(batch)
    analytic = (grad_fn or bptt_gradients)(weights, batch).flat()
    ext = np.longdouble
    xs, ys = xs.astype(ext), ys.astype(ext)
    theta = weights.flat().astype(ext)
    shapes = [(k, v.shape, v.size) for k, v in weights.items()]

    def loss_at(vec):
        p, i = {}, 0
        for k, shape, size in shapes:
            p[k] = vec[i:i + size].reshape(shape)
            i += size
        d = _forward(p, xs)[0] - ys
        return np.mean(np.sum(d * d, axis=-1))

    numeric = np.empty(theta.size)
    for j in range(theta.size):
        orig = theta[j]
        theta[j] = orig + step
        lp = loss_at(theta)
        theta[j] = orig - step
        lm = loss_at(theta)
        theta[j] = orig
        numeric[j] = float((lp - lm) / (2 * step))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_instance(rng: np.random.Generator, hidden: int = 4, steps: int = 5,
                    n_seq: int = 2, n_in: int = 6, n_out: int = 2):
    """Small random network and batch for gradient verification."""
    w = init_weights(n_in, hidden, n_out, rng)
    w = WeightSet({k: v + rng.normal(scale=0.3, size=v.shape) for k, v in w.items()})
    batch = [
        (rng.normal(size=(steps, n_in)), rng.normal(size=(steps, n_out)))
        for _ in range(n_seq)
    ]
    return w, batch
