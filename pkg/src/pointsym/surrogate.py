"""Residual models F(x, u^(n)) = f(S_in) - S_out and their Jacobians.

Two interchangeable implementations of the right-hand side ``f``: closed
forms for the built-in equations and a fully connected network trained with
Adan. Both return exact Jacobians (no finite differences).
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .symexpr import JetSpace, JetVar, UnhousedVariableError

__all__ = [
    "RhsModel",
    "AnalyticRhs",
    "MlpRhs",
    "MlpConfig",
    "Adan",
    "ResidualSpec",
    "ANALYTIC_NAMES",
    "analytic_rhs",
    "train_mlp",
    "split_indices",
    "training_rows",
    "jacobian_f",
    "residual_jacobian",
    "save_model",
    "load_model",
]

log = logging.getLogger(__name__)


class RhsModel:
    """``f``: inputs (N, n_in) -> outputs (N, l), with ``jacobian`` (N, l, n_in)."""

    input_names: list[str]
    output_names: list[str]

    def eval(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim != 2 or z.shape[1] != len(self.input_names):
            raise ValueError(f"expected inputs of shape (N, {len(self.input_names)}), got {z.shape}")
        return z


# ---------------------------------------------------------------- analytic


@dataclass
class AnalyticRhs(RhsModel):
    name: str
    input_names: list[str]
    output_names: list[str]
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    df: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def eval(self, z):
        return self.f(self._check(z))

    def jacobian(self, z):
        return self.df(self._check(z))


def _stack(*cols):
    return np.stack(cols, axis=-1)


def _heat():
    def f(z):
        return z[:, 2:3]

    def df(z):
        J = np.zeros((len(z), 1, 3))
        J[:, 0, 2] = 1.0
        return J

    return ["u", "u_x", "u_xx"], ["u_t"], f, df


def _burgers():
    def f(z):
        return (z[:, 2] + z[:, 1] ** 2)[:, None]

    def df(z):
        J = np.zeros((len(z), 1, 3))
        J[:, 0, 1] = 2 * z[:, 1]
        J[:, 0, 2] = 1.0
        return J

    return ["u", "u_x", "u_xx"], ["u_t"], f, df


def _kdv():
    def f(z):
        u, ux, uxxx = z[:, 0], z[:, 1], z[:, 3]
        return (-uxxx - u * ux)[:, None]

    def df(z):
        J = np.zeros((len(z), 1, 4))
        J[:, 0, 0] = -z[:, 1]
        J[:, 0, 1] = -z[:, 0]
        J[:, 0, 3] = -1.0
        return J

    return ["u", "u_x", "u_xx", "u_xxx"], ["u_t"], f, df


_BLOCK2D = ["", "_x", "_y", "_xx", "_xy", "_yy"]


def _wave2d():
    def f(z):
        return (z[:, 3] + z[:, 5])[:, None]

    def df(z):
        J = np.zeros((len(z), 1, 6))
        J[:, 0, 3] = J[:, 0, 5] = 1.0
        return J

    return ["u" + s for s in _BLOCK2D], ["u_tt"], f, df


def _schrodinger2d():
    # columns: u block 0..5, v block 6..11
    def f(z):
        u, v = z[:, 0], z[:, 6]
        lu, lv = z[:, 3] + z[:, 5], z[:, 9] + z[:, 11]
        m = u * u + v * v
        return _stack(-0.5 * lv + v * m, 0.5 * lu - u * m)

    def df(z):
        u, v = z[:, 0], z[:, 6]
        J = np.zeros((len(z), 2, 12))
        J[:, 0, 0] = 2 * u * v
        J[:, 0, 6] = u * u + 3 * v * v
        J[:, 0, 9] = J[:, 0, 11] = -0.5
        J[:, 1, 0] = -(3 * u * u + v * v)
        J[:, 1, 6] = -2 * u * v
        J[:, 1, 3] = J[:, 1, 5] = 0.5
        return J

    names = ["u" + s for s in _BLOCK2D] + ["v" + s for s in _BLOCK2D]
    return names, ["u_t", "v_t"], f, df


def _rd2d(beta=1.0, d1=0.1, d2=0.1):
    def f(z):
        u, v = z[:, 0], z[:, 6]
        a = u * u + v * v
        ut = (1 - a) * u + beta * a * v + d1 * (z[:, 3] + z[:, 5])
        vt = -beta * a * u + (1 - a) * v + d2 * (z[:, 9] + z[:, 11])
        return _stack(ut, vt)

    def df(z):
        u, v = z[:, 0], z[:, 6]
        a = u * u + v * v
        J = np.zeros((len(z), 2, 12))
        # d/du, d/dv of (1-a)u + beta a v
        J[:, 0, 0] = 1 - a - 2 * u * u + 2 * beta * u * v
        J[:, 0, 6] = -2 * u * v + beta * (a + 2 * v * v)
        J[:, 0, 3] = J[:, 0, 5] = d1
        # d/du, d/dv of -beta a u + (1-a) v
        J[:, 1, 0] = -beta * (a + 2 * u * u) - 2 * u * v
        J[:, 1, 6] = -2 * beta * u * v + 1 - a - 2 * v * v
        J[:, 1, 9] = J[:, 1, 11] = d2
        return J

    names = ["u" + s for s in _BLOCK2D] + ["v" + s for s in _BLOCK2D]
    return names, ["u_t", "v_t"], f, df


def _circle():
    def f(z):
        return (z[:, 0] ** 2 + z[:, 1] ** 2 - 1)[:, None]

    def df(z):
        return (2 * z)[:, None, :]

    return ["x", "y"], [], f, df


_METRIC = np.array([1.0, -1.0, -1.0, -1.0])


def _minkowski():
    def f(z):
        return (z**2 @ _METRIC)[:, None]

    def df(z):
        return (2 * z * _METRIC)[:, None, :]

    return ["p0", "p1", "p2", "p3"], [], f, df


_ANALYTIC = {
    "heat": _heat,
    "burgers": _burgers,
    "kdv": _kdv,
    "wave2d": _wave2d,
    "schrodinger2d": _schrodinger2d,
    "rd2d": _rd2d,
    "circle": _circle,
    "minkowski": _minkowski,
}
ANALYTIC_NAMES = tuple(_ANALYTIC)


def analytic_rhs(name: str) -> AnalyticRhs:
    try:
        ins, outs, f, df = _ANALYTIC[name]()
    except KeyError:
        raise KeyError(f"no analytic right-hand side for {name!r}; valid options: {', '.join(ANALYTIC_NAMES)}") from None
    return AnalyticRhs(name, ins, outs, f, df)


# ---------------------------------------------------------------- network


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


_ACT = {
    "sigmoid": (_sigmoid, lambda a: a * (1.0 - a)),
    "relu": (lambda x: np.maximum(x, 0.0), lambda a: (a > 0).astype(float)),
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
}


@dataclass
class MlpConfig:
    hidden_layers: int = 3
    width: int = 200
    activation: str = "sigmoid"
    lr: float = 3e-3
    batch_size: int = 256
    epochs: int = 200
    seed: int = 0
    val_fraction: float = 0.1
    max_train: int | None = 20000
    loss: str = "mse"
    dtype: str = "float32"          # training precision; the returned model is float64
    schedule: str = "cosine"        # or "constant"

    def __post_init__(self):
        if self.width < 1 or self.hidden_layers < 0:
            raise ValueError("width must be >= 1 and hidden_layers >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.activation not in _ACT:
            raise ValueError(f"unknown activation {self.activation!r}; valid options: {', '.join(_ACT)}")
        if self.loss not in ("mse", "bce"):
            raise ValueError("loss must be 'mse' or 'bce'")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError("schedule must be 'constant' or 'cosine'")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")


def _as_real(a) -> np.ndarray:
    a = np.asarray(a)
    return a if a.dtype in (np.float32, np.float64) else a.astype(float)


class MlpRhs(RhsModel):
    """Fully connected network; the last layer is affine.

    ``weights[k]`` has shape (fan_in, fan_out) and ``y = act(x W + b)``.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], activation: str,
                 input_names: Sequence[str], output_names: Sequence[str], info: dict | None = None):
        if activation not in _ACT:
            raise ValueError(f"unknown activation {activation!r}")
        self.weights = [_as_real(w) for w in weights]
        self.biases = [_as_real(b) for b in biases]
        self.activation = activation
        self.input_names = list(input_names)
        self.output_names = list(output_names)
        self.info = dict(info or {})
        if self.weights[0].shape[0] != len(self.input_names):
            raise ValueError("first layer fan-in does not match the inputs")

    @classmethod
    def init(cls, n_in: int, n_out: int, cfg: MlpConfig, input_names, output_names) -> "MlpRhs":
        rng = np.random.default_rng(cfg.seed)
        sizes = [n_in] + [cfg.width] * cfg.hidden_layers + [n_out]
        Ws, bs = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(a)
            Ws.append(rng.uniform(-bound, bound, size=(a, b)))
            bs.append(rng.uniform(-bound, bound, size=b))
        return cls(Ws, bs, cfg.activation, input_names, output_names, {"seed": cfg.seed})

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[1]

    def _forward(self, z):
        act = _ACT[self.activation][0]
        hs = [z]
        h = z
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = act(h @ W + b)
            hs.append(h)
        return h @ self.weights[-1] + self.biases[-1], hs

    def eval(self, z):
        return self._forward(self._check(z))[0]

    def jacobian(self, z):
        z = self._check(z)
        dact = _ACT[self.activation][1]
        _, hs = self._forward(z)
        M = None  # running d h_k / d z, shape (N, n_in, width_k)
        for W, h in zip(self.weights[:-1], hs[1:]):
            M = W[None] if M is None else M @ W
            M = M * dact(h)[:, None, :]
        M = self.weights[-1][None] if M is None else M @ self.weights[-1]
        J = np.broadcast_to(M, (len(z), *M.shape[1:]))
        return np.ascontiguousarray(np.swapaxes(J, 1, 2))

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def astype(self, dtype) -> "MlpRhs":
        return MlpRhs([W.astype(dtype) for W in self.weights], [b.astype(dtype) for b in self.biases],
                      self.activation, self.input_names, self.output_names, self.info)

    def grads(self, z, dy):
        """Backprop of ``sum(dy * eval(z))`` with respect to every parameter."""
        return self._backward(self._forward(z)[1], dy)

    def _backward(self, hs, dy):
        dact = _ACT[self.activation][1]
        g = []
        delta = dy
        for k in range(len(self.weights) - 1, -1, -1):
            g.append(delta.sum(axis=0))
            g.append(hs[k].T @ delta)
            if k:
                delta = (delta @ self.weights[k].T) * dact(hs[k])
        g.reverse()  # -> [W0, b0, W1, b1, ...]
        return g


class Adan:
    """Adaptive Nesterov momentum (Xie et al.) without weight decay."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, betas=(0.98, 0.92, 0.99), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2, self.b3 = betas
        self.eps = eps
        self.k = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.n = [np.zeros_like(p) for p in params]
        self.prev = [None] * len(params)

    def step(self, grads: list[np.ndarray]) -> None:
        self.k += 1
        b1, b2, b3 = self.b1, self.b2, self.b3
        bc1 = 1 - b1**self.k
        bc2 = 1 - b2**self.k
        sq3 = float(np.sqrt(1 - b3**self.k))
        for i, (p, g) in enumerate(zip(self.params, grads)):
            m, v, n = self.m[i], self.v[i], self.n[i]
            diff = np.zeros_like(g) if self.prev[i] is None else g - self.prev[i]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * diff
            t = g + b2 * diff
            n *= b3
            n += (1 - b3) * t * t
            upd = m / bc1 + (b2 / bc2) * v
            upd /= np.sqrt(n) / sq3 + self.eps
            p -= self.lr * upd
            self.prev[i] = g


def _loss_and_grad(out, y, loss: str):
    if loss == "mse":
        r = out - y
        return float(np.mean(r * r)), 2.0 * r / r.size
    # logistic loss on the logit
    p = _sigmoid(out)
    eps = 1e-12
    val = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    return float(val), (p - y) / out.size


def _eval_loss(model: MlpRhs, z, y, loss: str, chunk: int = 8192) -> float:
    total = 0.0
    for s in range(0, len(z), chunk):
        total += _loss_and_grad(model._forward(z[s:s + chunk])[0], y[s:s + chunk], loss)[0] * len(z[s:s + chunk])
    return total / len(z)


def split_indices(n: int, cfg: MlpConfig, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(train rows, validation rows) used by :func:`train_mlp` for ``n`` points.

    A pure function of (n, cfg), so the training set can be recovered later.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    val_idx, tr_idx = order[:n_val], order[n_val:]
    if cfg.max_train is not None and len(tr_idx) > cfg.max_train:
        tr_idx = tr_idx[: cfg.max_train]
    return tr_idx, val_idx[:20000]


def train_mlp(z: np.ndarray, y: np.ndarray, cfg: MlpConfig, input_names: Sequence[str],
              output_names: Sequence[str]) -> MlpRhs:
    """Fit ``y = f(z)`` by minibatch Adan; returns the final-epoch network in float64."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if len(z) != len(y):
        raise ValueError("inputs and targets differ in length")
    rng = np.random.default_rng(cfg.seed)
    tr_idx, val_idx = split_indices(len(z), cfg, rng)
    dt = np.dtype(cfg.dtype)
    net = MlpRhs.init(z.shape[1], y.shape[1], cfg, input_names, output_names).astype(dt)
    # one flat parameter buffer; the layers are views into it
    flat = np.concatenate([q.ravel() for q in net.params()])
    views, pos = [], 0
    for q in net.params():
        views.append(flat[pos:pos + q.size].reshape(q.shape))
        pos += q.size
    net.weights, net.biases = views[0::2], views[1::2]
    opt = Adan([flat], lr=cfg.lr)
    ztr, ytr = z[tr_idx].astype(dt), y[tr_idx].astype(dt)
    history = []
    for epoch in range(cfg.epochs):
        if cfg.schedule == "cosine":
            opt.lr = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * epoch / cfg.epochs))
        perm = rng.permutation(len(ztr))
        total = 0.0
        for s in range(0, len(perm), cfg.batch_size):
            bt = perm[s:s + cfg.batch_size]
            out, hs = net._forward(ztr[bt])
            loss, dy = _loss_and_grad(out, ytr[bt], cfg.loss)
            if not np.isfinite(loss):
                raise FloatingPointError(f"training diverged at epoch {epoch}")
            opt.step([np.concatenate([g.ravel() for g in net._backward(hs, dy)])])
            total += loss * len(bt)
        history.append(total / max(len(perm), 1))
    model = net.astype(np.float64)
    info = {"seed": cfg.seed, "config": asdict(cfg), "train_loss": history[-1] if history else None,
            "n_points": int(len(z)), "n_train": int(len(tr_idx)), "n_val": int(len(val_idx))}
    if len(val_idx):
        info["val_loss"] = _eval_loss(model, z[val_idx], y[val_idx], cfg.loss)
    model.info = info
    return model


def training_rows(model: RhsModel, n: int) -> np.ndarray | None:
    """Rows of an ``n``-point dataset the model was trained on (None if unknown)."""
    info = getattr(model, "info", {}) or {}
    if info.get("n_points") != n or "config" not in info:
        return None
    cfg = MlpConfig(**info["config"])
    return np.sort(split_indices(n, cfg)[0])


def jacobian_f(model: RhsModel, z: np.ndarray) -> np.ndarray:
    """Jacobian at a single input vector, shape (l, n_in)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size != len(model.input_names):
        raise ValueError(f"expected an input vector of length {len(model.input_names)}")
    return model.jacobian(z[None])[0]


# ---------------------------------------------------------------- residual


@dataclass
class ResidualSpec:
    """F = f(S_in) - S_out over the row set ``S_in + S_out``."""

    model: RhsModel
    space: JetSpace
    inputs: list[JetVar] = field(init=False)
    outputs: list[JetVar] = field(init=False)

    def __post_init__(self):
        self.inputs = [self.space.lookup(n) for n in self.model.input_names]
        self.outputs = [self.space.lookup(n) for n in self.model.output_names]
        if set(self.inputs) & set(self.outputs):
            raise ValueError("inputs and outputs overlap")
        if self.outputs and len(self.outputs) != len(self.model.output_names):
            raise ValueError("output count mismatch")

    @property
    def rows(self) -> list[JetVar]:
        return self.inputs + self.outputs

    @property
    def l(self) -> int:
        return len(self.outputs) if self.outputs else 1

    def _gather(self, pt, vars_) -> np.ndarray:
        cols = []
        for v in vars_:
            try:
                cols.append(np.atleast_1d(np.asarray(pt[v], dtype=float)))
            except KeyError:
                raise UnhousedVariableError(v, self.space.name(v)) from None
        return np.stack(cols, axis=-1)

    def residual(self, pt) -> np.ndarray:
        z = self._gather(pt, self.inputs)
        out = self.model.eval(z)
        if self.outputs:
            out = out - self._gather(pt, self.outputs)
        return out


def residual_jacobian(spec: ResidualSpec, pt) -> np.ndarray:
    """J_F over ``spec.rows``: (l, R) for scalar points, (N, l, R) for columns of N."""
    scalar = all(np.ndim(pt[v]) == 0 for v in spec.inputs if v in pt)
    z = spec._gather(pt, spec.inputs)
    if spec.outputs:
        spec._gather(pt, spec.outputs)
    Jf = spec.model.jacobian(z)
    N, l, n_in = Jf.shape
    out = np.zeros((N, l, n_in + len(spec.outputs)))
    out[:, :, :n_in] = Jf
    for k in range(len(spec.outputs)):
        out[:, k, n_in + k] = -1.0
    return out[0] if scalar else out


# ---------------------------------------------------------------- persistence


def save_model(model: RhsModel, path: str | Path) -> None:
    """``<stem>.json`` header + ``<stem>.bin`` blob of W0, b0, W1, b1, ... (row-major f64 LE)."""
    stem = Path(path)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    from .io import dumps

    if isinstance(model, AnalyticRhs):
        header = {"kind": "analytic", "name": model.name}
        stem.with_suffix(".json").write_text(dumps(header) + "\n")
        return
    if not isinstance(model, MlpRhs):
        raise TypeError(f"cannot persist {type(model).__name__}")
    header = {
        "kind": "mlp",
        "activation": model.activation,
        "layer_shapes": [list(W.shape) for W in model.weights],
        "layer_order": "W0, b0, W1, b1, ...; W_k shape (fan_in, fan_out), y = act(x W + b)",
        "input_names": model.input_names,
        "output_names": model.output_names,
        "info": model.info,
        "version": 1,
    }
    blob = np.concatenate([p.astype("<f8").reshape(-1) for p in model.params()])
    stem.with_suffix(".bin").write_bytes(blob.tobytes())
    stem.with_suffix(".json").write_text(dumps(header) + "\n")


def load_model(path: str | Path) -> RhsModel:
    stem = Path(path)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    header = json.loads(stem.with_suffix(".json").read_text())
    if header["kind"] == "analytic":
        return analytic_rhs(header["name"])
    blob = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    Ws, bs, pos = [], [], 0
    for a, b in header["layer_shapes"]:
        Ws.append(blob[pos:pos + a * b].reshape(a, b).copy())
        pos += a * b
        bs.append(blob[pos:pos + b].copy())
        pos += b
    if pos != blob.size:
        raise ValueError("weight blob size does not match the header")
    return MlpRhs(Ws, bs, header["activation"], header["input_names"], header["output_names"], header.get("info"))
