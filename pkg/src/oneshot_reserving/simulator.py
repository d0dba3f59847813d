"""Synthetic individual claims histories with known lower triangle.

Each claim has a latent severity ``X`` (lognormal, shifted by a line of
business effect) and a latent payment path indexed by development since
accident: ``B_0 = X * eps_0`` and, while the claim is open,
``B_{j+1} = B_j + B_j (g_j - 1) eps_{j+1}`` with configured multipliers
``g_j`` and mean-one lognormal noise, so ``E[B_{j+1} | B_j] = g_j B_j``.
After the payment at ``j`` the claim settles with hazard ``h_j`` and never
reopens.  The claim is reported at delay ``T``; cumulative paid is 0 before
``T`` and ``B_j`` from ``T`` on (the first payment is a catch-up).  With a
given probability the payment at ``j = 0`` is zero.  Claims incurred is
paid plus, for open claims, the true outstanding amount times a lognormal
error whose spread shrinks to zero at ``J``.

Settlement and development do not depend on ``T``, so individual ratios
``C_J / C_j`` are homogeneous across reporting delays and development is
stationary across accident periods; the aggregate CL factors have the
closed form :func:`expected_cl_factors`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .claims import Portfolio, censor  # noqa: F401  (re-exported)
from .errors import ConfigError

MONTHS = 12
DAYS_PER_PERIOD = 365


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the claims generator; tuple fields are indexed by lag."""

    I: int = 10
    J: int = 6
    claims_per_period: float = 2000.0
    delay_probs: tuple[float, ...] = (0.70, 0.18, 0.07, 0.03, 0.015, 0.005, 0.0)
    severity_mu: float = 8.0
    severity_sigma: float = 1.0
    line_share: float = 0.4
    line_effect: float = 0.5
    dev_multipliers: tuple[float, ...] = (2.2, 1.4, 1.15, 1.06, 1.03, 1.01)
    payment_noise: float = 0.5
    zero_first_payment: float = 0.15
    closing_hazard: tuple[float, ...] = (0.35, 0.35, 0.4, 0.45, 0.5, 0.6, 1.0)
    incurred_noise: float = 0.6
    large_late_developers: bool = False
    large_factor: float = 200.0
    deterministic_counts: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("delay_probs", "dev_multipliers", "closing_hazard"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        I, J = self.I, self.J
        if not (isinstance(I, int) and isinstance(J, int)) or J < 1:
            raise ConfigError("J", "I and J must be integers with J >= 1")
        if not I > J:
            raise ConfigError("I", f"need I > J, got I={I}, J={J}")
        p = np.asarray(self.delay_probs)
        if len(p) != J + 1:
            raise ConfigError("delay_probs", f"need {J + 1} probabilities for lags 0..J, got {len(p)}")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigError("delay_probs", "must be non-negative and sum to 1")
        if len(self.dev_multipliers) != J:
            raise ConfigError("dev_multipliers", f"need {J} multipliers, got {len(self.dev_multipliers)}")
        if any(g < 1 for g in self.dev_multipliers):
            raise ConfigError("dev_multipliers", "must be >= 1 (incremental payments are non-negative)")
        h = np.asarray(self.closing_hazard)
        if len(h) != J + 1:
            raise ConfigError("closing_hazard", f"need {J + 1} hazards for lags 0..J, got {len(h)}")
        if np.any(h < 0) or np.any(h > 1):
            raise ConfigError("closing_hazard", "hazards must lie in [0, 1]")
        if not 0 <= self.zero_first_payment < 1:
            raise ConfigError("zero_first_payment", "must lie in [0, 1)")
        if not 0 <= self.line_share <= 1:
            raise ConfigError("line_share", "must lie in [0, 1]")
        if not self.claims_per_period > 0:
            raise ConfigError("claims_per_period", "must be > 0")
        for name in ("severity_sigma", "payment_noise", "incurred_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown simulator config key")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("simulator", data))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def replace(self, **changes) -> "SimConfig":
        return SimConfig(**{**asdict(self), **changes})


def settlement_probabilities(closing_hazard: Sequence[float]) -> np.ndarray:
    """``P(tau = t)`` for ``t = 0..J``, where ``tau`` is the lag after whose payment the claim settles."""
    h = np.asarray(closing_hazard)
    still_open = np.concatenate([[1.0], np.cumprod(1.0 - h[:-1])])
    p = still_open * h
    p[-1] = still_open[-1]  # open at J counts as settling at J
    return p


def expected_path(cfg: SimConfig) -> np.ndarray:
    """``E[B_j] / E[X]`` (zero first payment applied at ``j = 0``)."""
    g = np.asarray(cfg.dev_multipliers)
    cum = np.concatenate([[1.0], np.cumprod(g)])
    pt = settlement_probabilities(cfg.closing_hazard)
    out = np.array([sum(pt[t] * cum[min(j, t)] for t in range(cfg.J + 1)) for j in range(cfg.J + 1)])
    out[0] *= 1.0 - cfg.zero_first_payment
    return out


def expected_cl_factors(cfg: SimConfig) -> np.ndarray:
    """Population CL factors ``E[C_{i,j+1}] / E[C_{i,j}]`` of the generator."""
    reported = np.cumsum(cfg.delay_probs)
    col = reported * expected_path(cfg)
    return col[1:] / col[:-1]


def _lognormal_mean_one(rng, sigma, size):
    if sigma == 0:
        return np.ones(size)
    return rng.lognormal(-0.5 * sigma * sigma, sigma, size)


def _simulate_period(cfg: SimConfig, i: int, rng: np.random.Generator) -> dict:
    J = cfg.J
    n = int(round(cfg.claims_per_period)) if cfg.deterministic_counts else int(rng.poisson(cfg.claims_per_period))
    lags = np.arange(J + 1)
    T = rng.choice(J + 1, size=n, p=np.asarray(cfg.delay_probs))
    line = (rng.random(n) < cfg.line_share).astype(np.float64)
    month = rng.integers(1, MONTHS + 1, size=n).astype(np.float64)
    days = T * DAYS_PER_PERIOD + rng.integers(0, DAYS_PER_PERIOD, size=n)
    X = np.exp(cfg.severity_mu + cfg.line_effect * line) * _lognormal_mean_one(rng, cfg.severity_sigma, n)

    g = np.asarray(cfg.dev_multipliers)
    h = np.asarray(cfg.closing_hazard)
    eps = _lognormal_mean_one(rng, cfg.payment_noise, (n, J + 1))
    first_zero = rng.random(n) < cfg.zero_first_payment
    settles = rng.random((n, J + 1)) < h[None, :]
    settles[:, J] = True
    tau = np.argmax(settles, axis=1)                       # first settling lag

    B = np.empty((n, J + 1))
    B[:, 0] = X * eps[:, 0]
    for j in range(J):
        grow = tau > j
        B[:, j + 1] = B[:, j] + np.where(grow, B[:, j] * (g[j] - 1.0) * eps[:, j + 1], 0.0)
    path = B.copy()
    path[first_zero, 0] = 0.0
    active = lags[None, :] >= T[:, None]
    paid = np.where(active, path, 0.0)
    status = (active & (lags[None, :] < tau[:, None])).astype(np.float64)

    ult = paid[:, -1]
    spread = cfg.incurred_noise * (J - lags) / J
    inc_noise = np.exp(rng.standard_normal((n, J + 1)) * spread[None, :] - 0.5 * spread[None, :] ** 2)
    incurred = np.where(active, paid + status * (ult[:, None] - paid) * inc_noise, 0.0)
    incurred[:, J] = np.where(active[:, J], paid[:, J], 0.0)

    ids = np.array([f"{i:03d}-{c:06d}" for c in range(n)], dtype=str)
    return dict(ids=ids, acc=np.full(n, i), T=T, paid=paid, status=status, incurred=incurred,
                line=line, month=month, days=days.astype(np.float64))


def _inject_large_late(cfg: SimConfig, parts: list, rng: np.random.Generator) -> None:
    """Two claims of fully developed periods, open until lag 4, explode at lags 3-4."""
    J = cfg.J
    if J < 4:
        return
    hit = 0
    for part in parts:
        if hit == 2:
            break
        early = np.flatnonzero(part["T"] == 0)
        if len(early) == 0:
            continue
        r = int(early[rng.integers(len(early))])
        paid = part["paid"][r]
        inc = np.diff(paid, prepend=0.0)
        base = max(paid[0], np.exp(cfg.severity_mu))
        inc[3] += cfg.large_factor * base * 0.6
        inc[4] += cfg.large_factor * base * 0.4
        paid[:] = np.cumsum(inc)
        part["status"][r, :5] = 1.0
        part["status"][r, 5:] = 0.0
        part["incurred"][r] = np.where(part["status"][r] > 0, paid[-1], paid)
        hit += 1


def simulate(config: SimConfig | None = None, **overrides) -> Portfolio:
    """Full-square portfolio (ground truth included), deterministic per seed.

    Every accident period draws from its own substream of a Philox
    generator, so periods can be generated in any order.
    """
    cfg = config or SimConfig()
    if overrides:
        cfg = cfg.replace(**overrides)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.I + 1)
    parts = []
    for i in range(1, cfg.I + 1):
        parts.append(_simulate_period(cfg, i, np.random.Generator(np.random.Philox(seeds[i - 1]))))
    if cfg.large_late_developers:
        _inject_large_late(cfg, parts[: cfg.I - cfg.J], np.random.Generator(np.random.Philox(seeds[cfg.I])))
    if sum(len(p["ids"]) for p in parts) == 0:
        raise ConfigError("claims_per_period", "no claims were generated")

    def cat(key):
        return np.concatenate([p[key] for p in parts])

    return Portfolio(
        cat("ids"), cat("acc"), cat("T"), cat("paid"), cat("status"), cat("incurred"),
        statics={"line": cat("line"), "accident_month": cat("month"), "report_delay_days": cat("days")},
        I=cfg.I, has_lower_triangle=True,
    )
