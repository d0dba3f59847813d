"""RBNS-only one-shot chain-ladder and the RBNS/IBNR split of CL reserves."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .chain_ladder import oneshot_ultimates
from .claims import Portfolio, aggregate, censor
from .errors import DegenerateTriangleError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepCohort:
    """Claims used at one recursion step ``j -> j-1`` (``lag = j - 1``).

    ``train_rows`` feed both numerator and denominator (or the regression
    fit); ``predict_rows`` are the RBNS claims of accident period ``I - lag``.
    """

    lag: int
    train_rows: np.ndarray
    predict_rows: np.ndarray
    fit: Any = None


@dataclass(frozen=True)
class RbnsPrediction:
    """Per-claim RBNS ultimates for all reported claims of a censored portfolio."""

    portfolio: Portfolio = field(repr=False)
    ultimates: np.ndarray = field(repr=False)
    rbns_factors: np.ndarray | None
    rbns_reserves_by_period: dict[int, float]
    ibnr_by_period: dict[int, float] | None = None
    steps: tuple[StepCohort, ...] = field(default=(), repr=False)

    @property
    def I(self) -> int:
        return self.portfolio.I

    @property
    def J(self) -> int:
        return self.portfolio.J

    @property
    def per_claim_ultimates(self) -> dict[tuple[int, str], float]:
        p = self.portfolio
        return {(int(i), str(c)): float(u) for i, c, u in zip(p.accident_period, p.claim_ids, self.ultimates)}

    @property
    def ultimates_by_period(self) -> dict[int, float]:
        p = self.portfolio
        s = np.bincount(p.accident_period - 1, weights=self.ultimates, minlength=p.I)
        return {i + 1: float(v) for i, v in enumerate(s)}

    @property
    def latest_by_period(self) -> dict[int, float]:
        p = self.portfolio
        s = np.bincount(p.accident_period - 1, weights=p.latest(), minlength=p.I)
        return {i + 1: float(v) for i, v in enumerate(s)}

    @property
    def total_rbns_reserve(self) -> float:
        return float(sum(self.rbns_reserves_by_period.values()))

    @property
    def fits(self) -> list:
        return [s.fit for s in self.steps]

    def with_ibnr(self, ibnr: Mapping[int, float]) -> "RbnsPrediction":
        return replace(self, ibnr_by_period=dict(ibnr))


def observed_view(portfolio: Portfolio) -> Portfolio:
    """The data available at the evaluation date (IBNR claims removed)."""
    return censor(portfolio) if portfolio.has_lower_triangle else portfolio


def rbns_reserves(portfolio: Portfolio, ultimates: np.ndarray) -> dict[int, float]:
    """``sum_nu hat C_{i,J|nu} - C_{i,I-i}`` per accident period (0 when settled)."""
    p = portfolio
    diff = np.bincount(p.accident_period - 1, weights=ultimates - p.latest(), minlength=p.I)
    out = {}
    for r in range(p.I):
        i = r + 1
        out[i] = 0.0 if i <= p.I - p.J else float(diff[r])
    return out


def initial_ultimates(portfolio: Portfolio) -> np.ndarray:
    """Observed ultimates for settled periods ``i <= I - J``, NaN elsewhere."""
    p = portfolio
    ult = np.full(len(p), np.nan)
    settled = p.accident_period <= p.I - p.J
    ult[settled] = p.paid_cum[settled, p.J]
    return ult


def step_rows(portfolio: Portfolio, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Learning rows (``i <= I - lag - 1``, ``T <= lag``) and prediction rows (``i = I - lag``)."""
    p = portfolio
    reported = p.reporting_delay <= lag
    train = np.flatnonzero(reported & (p.accident_period <= p.I - lag - 1))
    pred = np.flatnonzero(reported & (p.accident_period == p.I - lag))
    return train, pred


def predict_rbns_cl(portfolio: Portfolio) -> RbnsPrediction:
    """Recursive one-shot CL on consistent RBNS cohorts.

    At each step the PtU factor is the ratio of (predicted) ultimates to
    payments at ``lag`` over the identical cohort ``T <= lag``; RBNS claims of
    period ``I - lag`` are grossed up with it.
    """
    p = observed_view(portfolio)
    I, J = p.I, p.J
    ult = initial_ultimates(p)
    F = np.empty(J)
    steps = []
    for j in range(J, 0, -1):
        lag = j - 1
        train, pred = step_rows(p, lag)
        den = p.paid_cum[train, lag].sum()
        if not den > 0:
            raise DegenerateTriangleError(lag, f"RBNS PtU denominator is non-positive at lag {lag}")
        F[lag] = ult[train].sum() / den
        ult[pred] = p.paid_cum[pred, lag] * F[lag]
        steps.append(StepCohort(lag, train, pred))
    return RbnsPrediction(
        portfolio=p,
        ultimates=ult,
        rbns_factors=F,
        rbns_reserves_by_period=rbns_reserves(p, ult),
        steps=tuple(steps),
    )


def ibnr_decompose(portfolio: Portfolio, rbns_pred: RbnsPrediction,
                   cl_ultimates: Mapping[int, float]) -> dict[int, float]:
    """IBNR per period as CL ultimate minus the sum of RBNS ultimates.

    Negative values are returned unchanged and logged.
    """
    p = observed_view(portfolio)
    if (p.I, p.J) != (rbns_pred.I, rbns_pred.J):
        raise ValueError("RBNS prediction was computed on a different portfolio geometry")
    rbns_ult = rbns_pred.ultimates_by_period
    out = {}
    for i in range(1, p.I + 1):
        out[i] = 0.0 if i <= p.I - p.J else float(cl_ultimates[i] - rbns_ult[i])
    negative = [i for i, v in out.items() if v < 0]
    if negative:
        logger.warning("negative IBNR reserve in accident period(s) %s", negative)
    return out


def negative_ibnr_flags(ibnr: Mapping[int, float]) -> dict[int, bool]:
    return {i: v < 0 for i, v in ibnr.items()}


def cl_split(portfolio: Portfolio) -> tuple[dict[int, float], RbnsPrediction]:
    """CL ultimates plus the RBNS prediction carrying its IBNR split."""
    p = observed_view(portfolio)
    ult, _ = oneshot_ultimates(aggregate(p))
    cl_ult = {r + 1: float(u) for r, u in enumerate(ult)}
    pred = predict_rbns_cl(p)
    return cl_ult, pred.with_ibnr(ibnr_decompose(p, pred, cl_ult))
