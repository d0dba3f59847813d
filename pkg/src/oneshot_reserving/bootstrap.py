"""Non-parametric bootstrap of individual claims histories.

Replicates draw reported claims with replacement, refit the reserving
method on the resample and apply the refitted factors or regressions to
the original, fixed conditioning data (latest diagonal or original
claims).  The spread of the replicate reserves is estimation error only;
process uncertainty is not bootstrapped.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import pandas as pd

from .chain_ladder import oneshot_ultimates
from .claims import Portfolio, aggregate
from .errors import ConfigError, NumericalError, ReservingError
from .ibnr import build_s_triangle, ibnr_from_factors, s_triangle_ultimates
from .rbns import initial_ultimates, observed_view, predict_rbns_cl, rbns_reserves
from .regression import ModelSpec, apply_fits, run_oneshot

logger = logging.getLogger(__name__)

DEFAULT_B = 1000
MAX_FAILURE_RATE = 0.01


def resample_portfolio(portfolio: Portfolio, rng: np.random.Generator, *, stratified: bool = False,
                       period: int | None = None) -> Portfolio:
    """Draw claims with replacement, keeping the total sample size.

    Default: one urn over all reported claims of all accident periods.
    ``stratified`` resamples within each period; ``period`` resamples only
    that accident period and keeps the others unchanged.
    """
    p = observed_view(portfolio)
    n = len(p)
    if period is not None:
        keep = np.flatnonzero(p.accident_period != period)
        pool = np.flatnonzero(p.accident_period == period)
        rows = np.concatenate([keep, pool[rng.integers(0, len(pool), len(pool))]]) if len(pool) else keep
    elif stratified:
        parts = []
        for i in range(1, p.I + 1):
            pool = np.flatnonzero(p.accident_period == i)
            if len(pool):
                parts.append(pool[rng.integers(0, len(pool), len(pool))])
        rows = np.concatenate(parts)
    else:
        rows = rng.integers(0, n, n)
    return p.take(np.sort(rows))


def _reserve_vector(d: Mapping[int, float], I: int) -> np.ndarray:
    return np.array([d[i] for i in range(1, I + 1)], dtype=np.float64)


def _latest_ptu_apply(p: Portfolio, F: np.ndarray) -> np.ndarray:
    """Per-claim ultimates ``C_{latest} * F_{I-i}`` of RBNS claims (settled kept)."""
    ult = initial_ultimates(p)
    open_ = p.accident_period > p.I - p.J
    lag = p.I - p.accident_period[open_]
    ult[open_] = p.latest()[open_] * F[lag]
    return ult


class Method:
    """A reserving method split into fit (on any sample) and apply (to fixed data)."""

    name = "method"
    per_claim = False

    def fit(self, p: Portfolio) -> Any:
        raise NotImplementedError

    def apply(self, p: Portfolio, fitted: Any) -> tuple[np.ndarray, np.ndarray | None]:
        """Reserves per period and, for per-claim methods, per-claim ultimates."""
        raise NotImplementedError


class ClMethod(Method):
    """Aggregate CL: refit PtU factors, apply to the original latest diagonal."""

    name = "cl"

    def fit(self, p):
        return oneshot_ultimates(aggregate(p, "observed"))[1]

    def apply(self, p, F):
        tri = aggregate(p, "observed")
        latest = tri.latest()
        res = np.zeros(p.I)
        for r in range(p.I):
            k = p.I - (r + 1)
            if k < p.J:
                res[r] = latest[r] * (F[k] - 1.0)
        return res, None


class RbnsClMethod(Method):
    """RBNS one-shot CL on consistent cohorts."""

    name = "rbns-cl"
    per_claim = True

    def fit(self, p):
        return predict_rbns_cl(p).rbns_factors

    def apply(self, p, F):
        ult = _latest_ptu_apply(p, F)
        return _reserve_vector(rbns_reserves(p, ult), p.I), ult


class RegressionMethod(Method):
    """Any model spec of the recursive regression driver."""

    per_claim = True

    def __init__(self, spec: ModelSpec, regressor=None):
        self.spec = spec
        self.regressor = regressor
        self.name = f"lr:{spec.variant.value}"

    def fit(self, p):
        return run_oneshot(p, self.spec, self.regressor).fits

    def apply(self, p, fits):
        ult = apply_fits(p, fits, self.spec)
        return _reserve_vector(rbns_reserves(p, ult), p.I), ult


class SIbnrMethod(Method):
    """IBNR from the S-triangle of an RBNS method's per-claim ultimates.

    A replicate refits the RBNS method and the S-triangle CL factors on the
    resample and applies both to the original claims.
    """

    def __init__(self, rbns: Method | None = None):
        self.rbns = rbns or RbnsClMethod()
        self.name = f"s-ibnr:{self.rbns.name}"

    def fit(self, p):
        rbns_fit = self.rbns.fit(p)
        _, ult = self.rbns.apply(p, rbns_fit)
        F = s_triangle_ultimates(build_s_triangle(p, ult))[1]
        return rbns_fit, F

    def apply(self, p, fitted):
        rbns_fit, F = fitted
        _, ult = self.rbns.apply(p, rbns_fit)
        ibnr = ibnr_from_factors(build_s_triangle(p, ult), F)
        return _reserve_vector(ibnr, p.I), None


def make_method(method, regressor=None) -> Method:
    """``"cl"``, ``"rbns-cl"``, ``"s-ibnr"``, ``"lr:<VARIANT>"``, a :class:`ModelSpec` or a :class:`Method`."""
    if isinstance(method, Method):
        return method
    if isinstance(method, ModelSpec):
        return RegressionMethod(method, regressor)
    if method in ("cl", "cl-oneshot", "mack"):
        return ClMethod()
    if method == "rbns-cl":
        return RbnsClMethod()
    if method == "s-ibnr":
        return SIbnrMethod()
    if isinstance(method, str) and method.startswith("lr:"):
        return RegressionMethod(ModelSpec(variant=method[3:]), regressor)
    raise ConfigError("method", f"unknown bootstrap method {method!r}")


@dataclass(frozen=True)
class BootstrapResult:
    """Replicate reserves (``B x I``; failed replicates are NaN rows) and summaries."""

    method: str
    B: int
    seed: int
    point_by_period: np.ndarray
    replicates: np.ndarray = field(repr=False)
    failed: np.ndarray = field(repr=False)
    ind_rmse_replicates: np.ndarray | None = field(default=None, repr=False)
    stratified: bool = False

    @property
    def I(self) -> int:
        return len(self.point_by_period)

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())

    @property
    def ok(self) -> np.ndarray:
        return self.replicates[~self.failed]

    @property
    def totals(self) -> np.ndarray:
        return self.replicates.sum(axis=1)

    @property
    def point_total(self) -> float:
        return float(self.point_by_period.sum())

    @property
    def mean(self) -> float:
        return float(self.ok.sum(axis=1).mean())

    @property
    def sd(self) -> float:
        """Bootstrap estimation error of the total reserve."""
        return float(self.ok.sum(axis=1).std(ddof=1))

    @property
    def mean_by_period(self) -> dict[int, float]:
        return {i + 1: float(v) for i, v in enumerate(self.ok.mean(axis=0))}

    @property
    def sd_by_period(self) -> dict[int, float]:
        return {i + 1: float(v) for i, v in enumerate(self.ok.std(axis=0, ddof=1))}

    @property
    def ind_rmse_sd_by_period(self) -> dict[int, float] | None:
        if self.ind_rmse_replicates is None:
            return None
        ok = self.ind_rmse_replicates[~self.failed]
        return {i + 1: float(v) for i, v in enumerate(np.nanstd(ok, axis=0, ddof=1))}

    def summary(self) -> dict:
        return {
            "method": self.method,
            "B": self.B,
            "seed": self.seed,
            "stratified": self.stratified,
            "uncertainty": "estimation error only",
            "point_total": self.point_total,
            "mean": self.mean,
            "sd": self.sd,
            "n_failed": self.n_failed,
            "mean_by_period": self.mean_by_period,
            "sd_by_period": self.sd_by_period,
        }

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.replicates, columns=[f"period_{i}" for i in range(1, self.I + 1)])
        df.insert(0, "total_prediction", self.totals)
        df.insert(0, "replicate_id", np.arange(self.B))
        return df

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def replicate_generators(seed: int, B: int) -> list[np.random.Generator]:
    """One independent Philox substream per replicate."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(B)]


def bootstrap_estimation_error(portfolio: Portfolio, method="cl", B: int = DEFAULT_B, seed: int = 0, *,
                               workers: int = 1, stratified: bool = False, period: int | None = None,
                               regressor=None, truth: Portfolio | None = None) -> BootstrapResult:
    """Bootstrap estimation error of the reserves of ``method``.

    A replicate whose fit fails numerically is skipped and counted; more
    than 1% failures raise :class:`NumericalError`.  With ``truth`` and a
    per-claim method the replicate Ind.RMSE per period is recorded as well.
    Results do not depend on ``workers``.
    """
    if B < 2:
        raise ConfigError("B", "need at least 2 bootstrap replicates")
    m = make_method(method, regressor)
    base = observed_view(portfolio)
    point, _ = m.apply(base, m.fit(base))
    gens = replicate_generators(seed, B)
    use_truth = truth is not None and m.per_claim
    true_ult = truth.ultimate()[truth.index_of(base.claim_ids)] if use_truth else None

    def one(b):
        sample = resample_portfolio(base, gens[b], stratified=stratified, period=period)
        try:
            res, ult = m.apply(base, m.fit(sample))
        except (ReservingError, ArithmeticError) as exc:
            logger.debug("bootstrap replicate %d failed: %s", b, exc)
            return None, None
        return res, (_period_rmse(base, ult, true_ult) if use_truth else None)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(one, range(B)))
    else:
        out = [one(b) for b in range(B)]

    reps = np.full((B, base.I), np.nan)
    failed = np.zeros(B, dtype=bool)
    rmse = np.full((B, base.I), np.nan) if use_truth else None
    for b, (res, rm) in enumerate(out):
        if res is None:
            failed[b] = True
            continue
        reps[b] = res
        if rmse is not None:
            rmse[b] = rm
    n_failed = int(failed.sum())
    if n_failed > MAX_FAILURE_RATE * B:
        raise NumericalError(f"{n_failed} of {B} bootstrap replicates failed (limit {MAX_FAILURE_RATE:.0%})")
    if n_failed:
        logger.warning("%d of %d bootstrap replicates failed and were skipped", n_failed, B)
    if B - n_failed < 2:
        raise NumericalError("fewer than two successful bootstrap replicates")
    return BootstrapResult(method=m.name, B=B, seed=seed, point_by_period=point, replicates=reps,
                           failed=failed, ind_rmse_replicates=rmse, stratified=stratified)


def _period_rmse(p: Portfolio, ult: np.ndarray, true_ult: np.ndarray) -> np.ndarray:
    """Ind.RMSE per period as an array (NaN for periods without claims)."""
    idx = p.accident_period - 1
    sq = np.bincount(idx, weights=(ult - true_ult) ** 2, minlength=p.I)
    n = np.bincount(idx, minlength=p.I)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(sq / n)
