"""Feed-forward network regressor for the recursive PtU driver.

Plain numpy: GELU hidden layers, identity output, MSE loss, Adam with a
reduce-on-plateau learning-rate schedule, an ensemble of independently
seeded fits and a multiplicative post-calibration that restores the
balance property.
"""
from __future__ import annotations

import json
import logging
import zlib
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import erf

from .errors import ConfigError, InsufficientDataError, NumericalError, TrainingError

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class FnnConfig:
    hidden: tuple[int, ...] = (20, 15)
    learning_rate: float = 1e-3
    batch_size: int = 8192
    epochs: int = 500
    validation_fraction: float = 0.1
    plateau_factor: float = 0.9
    plateau_patience: int = 5
    ensemble: int = 10
    seed: int = 0
    min_samples: int = 20
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h <= 0 for h in self.hidden):
            raise ConfigError("hidden", "layer widths must be positive")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction", "must lie in (0, 1)")
        if self.ensemble < 1:
            raise ConfigError("ensemble", "must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs", "must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate", "must be > 0")
        if not 0 < self.plateau_factor <= 1:
            raise ConfigError("plateau_factor", "must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FnnConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown fnn config key")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "FnnConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("fnn", {}))


# -- network -----------------------------------------------------------------

Params = list  # [W1, b1, W2, b2, ..., W_out, b_out]


def gelu(x):
    return x * 0.5 * (1.0 + erf(x / _SQRT2))


def gelu_grad(x):
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def layer_sizes(d: int, hidden: Sequence[int]) -> list[int]:
    return [d, *hidden, 1]


def n_parameters(d: int, hidden: Sequence[int] = (20, 15)) -> int:
    s = layer_sizes(d, hidden)
    return sum((a + 1) * b for a, b in zip(s[:-1], s[1:]))


def init_params(d: int, hidden: Sequence[int], rng: np.random.Generator) -> Params:
    """Glorot-uniform weights and zero biases."""
    params = []
    s = layer_sizes(d, hidden)
    for a, b in zip(s[:-1], s[1:]):
        limit = np.sqrt(6.0 / (a + b))
        params += [rng.uniform(-limit, limit, size=(a, b)), np.zeros(b)]
    return params


def forward(params: Params, X: np.ndarray) -> np.ndarray:
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        h = gelu(z) if k < n_layers - 1 else z
    return h[:, 0]


def loss_and_grad(params: Params, X: np.ndarray, y: np.ndarray) -> tuple[float, Params]:
    """Mean squared error and its gradient with respect to every parameter."""
    n_layers = len(params) // 2
    acts = [X]
    pre = []
    h = X
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        pre.append(z)
        h = gelu(z) if k < n_layers - 1 else z
        acts.append(h)
    r = h[:, 0] - y
    n = len(y)
    loss = float(r @ r / n)
    delta = (2.0 / n) * r[:, None]
    grads: Params = [None] * len(params)
    for k in range(n_layers - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = (delta @ params[2 * k].T) * gelu_grad(pre[k - 1])
    return loss, grads


def flatten(params: Params) -> np.ndarray:
    return np.concatenate([p.ravel() for p in params])


def unflatten(vec: np.ndarray, like: Params) -> Params:
    out, pos = [], 0
    for p in like:
        out.append(vec[pos:pos + p.size].reshape(p.shape))
        pos += p.size
    return out


# -- model -----------------------------------------------------------------------

@dataclass(frozen=True)
class FnnModel:
    """Ensemble of networks on standardized inputs, output in response units."""

    members: tuple[Params, ...] = field(repr=False)
    x_mean: np.ndarray = field(repr=False)
    x_sd: np.ndarray = field(repr=False)
    scale: float = 1.0
    history: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.scale > 0:
            raise NumericalError(f"calibration scale must be > 0, got {self.scale}")

    @property
    def d(self) -> int:
        return len(self.x_mean)

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.members[0])

    def raw_predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"feature dimension {X.shape[-1] if X.ndim else 0} does not match model input {self.d}")
        Z = (X - self.x_mean) / self.x_sd
        return np.mean([forward(m, Z) for m in self.members], axis=0)

    def predict(self, X) -> np.ndarray:
        return self.raw_predict(X) * self.scale

    def to_dict(self) -> dict:
        return {
            "layers": [[list(p.shape) for p in m] for m in self.members][0],
            "members": [[p.tolist() for p in m] for m in self.members],
            "x_mean": self.x_mean.tolist(),
            "x_sd": self.x_sd.tolist(),
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FnnModel":
        members = tuple([np.asarray(p, dtype=np.float64) for p in m] for m in d["members"])
        return cls(members=members, x_mean=np.asarray(d["x_mean"], dtype=np.float64),
                   x_sd=np.asarray(d["x_sd"], dtype=np.float64), scale=float(d["scale"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "FnnModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def validation_mask(claim_ids: Sequence[str] | None, n: int, fraction: float) -> np.ndarray:
    """Deterministic split by a CRC32 hash of the claim id (index if ids are absent)."""
    keys = [str(c).encode() for c in claim_ids] if claim_ids is not None else [str(k).encode() for k in range(n)]
    buckets = np.array([zlib.crc32(k) % 10_000 for k in keys])
    return buckets < fraction * 10_000


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[~(sd > 0)] = 1.0
    return mean, sd


def _train_member(Z, t, Zv, tv, cfg: FnnConfig, seed: int) -> tuple[Params, list[float]]:
    rng = np.random.Generator(np.random.Philox(seed))
    params = init_params(Z.shape[1], cfg.hidden, rng)
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    lr = cfg.learning_rate
    n = len(t)
    bs = min(cfg.batch_size, n)
    best, wait, step = np.inf, 0, 0
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = loss_and_grad(params, Z[idx], t[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}, step {step} (lr={lr:g})")
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for k, g in enumerate(grads):
                m1[k] = b1 * m1[k] + (1 - b1) * g
                m2[k] = b2 * m2[k] + (1 - b2) * g * g
                params[k] = params[k] - lr * (m1[k] / c1) / (np.sqrt(m2[k] / c2) + eps)
        r = forward(params, Zv) - tv
        val = float(r @ r / len(tv))
        if not np.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch} (lr={lr:g})")
        history.append(val)
        if val < best:
            best, wait = val, 0
        else:
            wait += 1
            if wait >= cfg.plateau_patience:
                lr *= cfg.plateau_factor
                wait = 0
    return params, history


def train_fnn(X, y, config: FnnConfig | None = None, claim_ids: Sequence[str] | None = None) -> FnnModel:
    """Ensemble of ``config.ensemble`` networks seeded ``seed, seed+1, ...``.

    Inputs and response are standardized on the learning part of the
    sample; the response scaling is folded into the output layer, so the
    returned networks predict in response units.  Not calibrated.
    """
    cfg = config or FnnConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n < cfg.min_samples:
        raise InsufficientDataError(f"FNN needs at least {cfg.min_samples} samples, got {n}")
    val = validation_mask(claim_ids, n, cfg.validation_fraction)
    if val.all() or not val.any():
        val = np.zeros(n, dtype=bool)
    learn = ~val
    x_mean, x_sd = _standardize(X[learn])
    y_mean = float(y[learn].mean())
    y_sd = float(y[learn].std()) or 1.0
    Z = (X - x_mean) / x_sd
    t = (y - y_mean) / y_sd
    Zl, tl = Z[learn], t[learn]
    Zv, tv = (Z[val], t[val]) if val.any() else (Zl, tl)

    members, histories = [], []
    for k in range(cfg.ensemble):
        params, hist = _train_member(Zl, tl, Zv, tv, cfg, cfg.seed + k)
        params[-2] = params[-2] * y_sd
        params[-1] = params[-1] * y_sd + y_mean
        members.append(params)
        histories.append(tuple(hist))
    return FnnModel(members=tuple(members), x_mean=x_mean, x_sd=x_sd, scale=1.0, history=tuple(histories))


def calibrate_balance(model: FnnModel, X, y) -> FnnModel:
    """Rescale so that in-sample predictions sum to the response total."""
    raw = model.raw_predict(X).sum()
    if raw == 0 or not np.isfinite(raw):
        raise NumericalError("cannot calibrate: raw prediction total is zero")
    scale = float(np.sum(y) / raw)
    if not scale > 0:
        raise NumericalError(f"calibration scale {scale} is not positive (prediction and response totals differ in sign)")
    return replace(model, scale=scale)


def predict_fnn(model: FnnModel, X) -> np.ndarray:
    return model.predict(X)


class FnnRegressor:
    """Pluggable regressor for :func:`~oneshot_reserving.regression.run_oneshot`."""

    def __init__(self, config: FnnConfig | None = None, calibrate: bool = True):
        self.config = config or FnnConfig()
        self.calibrate = calibrate

    def fit(self, X, y, weights=None, columns=None, claim_ids=None) -> FnnModel:
        model = train_fnn(X, y, self.config, claim_ids)
        return calibrate_balance(model, X, y) if self.calibrate else model
