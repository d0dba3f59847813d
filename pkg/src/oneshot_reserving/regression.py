"""Regression-driven one-shot PtU forecasts for RBNS claims.

The generic driver :func:`run_oneshot` walks ``j = J..1``; at each step it
fits a regression of the (recursively predicted) ultimates on the claim
features at lag ``j - 1`` over the learning cohort ``T <= j-1, i <= I-j``,
and applies it to the RBNS claims of accident period ``I - (j-1)``.  Any
regressor with ``fit(X, y, weights, columns, claim_ids) -> model`` and
``model.predict(X)`` can be plugged in.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from .claims import Portfolio
from .errors import ConfigError, InsufficientDataError, SchemaError, SingularFitError
from .rbns import RbnsPrediction, StepCohort, initial_ultimates, observed_view, rbns_reserves, step_rows

logger = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"


class Variant(str, Enum):
    WEIGHTED_FACTOR = "WEIGHTED_FACTOR"
    LR_PAID = "LR_PAID"
    LR_PAID_STATUS = "LR_PAID_STATUS"
    LR_ALL_COV = "LR_ALL_COV"
    MODEL_C = "MODEL_C"
    MODEL_I = "MODEL_I"
    MODEL_CO = "MODEL_CO"
    MODEL_IO = "MODEL_IO"
    MODEL_CIO = "MODEL_CIO"
    FNN_ALL_COV = "FNN_ALL_COV"


_NEEDS_STATUS = {Variant.LR_PAID_STATUS, Variant.LR_ALL_COV, Variant.MODEL_CO, Variant.MODEL_IO,
                 Variant.MODEL_CIO, Variant.FNN_ALL_COV}
_NEEDS_INCURRED = {Variant.MODEL_I, Variant.MODEL_IO, Variant.MODEL_CIO}


@dataclass(frozen=True)
class ModelSpec:
    """Which features enter the per-step regression and how they are encoded.

    ``delay_covariate`` selects the reporting-delay input of the all-covariate
    variants: ``"days"`` uses the static column ``delay_days_column``
    censored at ``censor_days``; ``"periods"`` uses the reporting delay ``T``.
    """

    variant: Variant = Variant.LR_PAID
    epsilon: float = 1e-3
    censor_days: float = 365.0
    month_encoding: str = "dummy"
    delay_covariate: str = "days"
    month_column: str = "accident_month"
    delay_days_column: str = "report_delay_days"
    static_columns: tuple[str, ...] | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError:
            raise ConfigError("variant", f"unknown variant {self.variant!r}") from None
        if self.variant is Variant.WEIGHTED_FACTOR and not self.epsilon > 0:
            raise ConfigError("epsilon", "must be > 0 for WEIGHTED_FACTOR")
        if self.month_encoding not in ("dummy", "continuous"):
            raise ConfigError("month_encoding", "must be 'dummy' or 'continuous'")
        if self.delay_covariate not in ("days", "periods"):
            raise ConfigError("delay_covariate", "must be 'days' or 'periods'")
        if not self.censor_days > 0:
            raise ConfigError("censor_days", "must be > 0")
        if self.static_columns is not None:
            object.__setattr__(self, "static_columns", tuple(self.static_columns))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown model config key")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ModelSpec":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("model", data))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        if d["static_columns"] is not None:
            d["static_columns"] = list(d["static_columns"])
        return d

    def check(self, portfolio: Portfolio) -> None:
        if self.variant in _NEEDS_STATUS and not portfolio.has_status:
            raise SchemaError(f"{self.variant.value} needs claim status data")
        if self.variant in _NEEDS_INCURRED and not portfolio.has_incurred:
            raise SchemaError(f"{self.variant.value} needs claims incurred data")


# -- least squares -----------------------------------------------------------

@dataclass(frozen=True)
class LeastSquaresFit:
    """(Weighted) least-squares coefficients; pruned columns carry coefficient 0."""

    coef: np.ndarray
    columns: tuple[str, ...]
    pruned: tuple[str, ...]
    std_errors: np.ndarray
    n_obs: int
    rss: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != len(self.coef):
            raise ValueError(f"design has {X.shape[1]} columns, model has {len(self.coef)}")
        return X @ self.coef

    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.columns, map(float, self.coef)))


def fit_least_squares(X, y, weights=None, columns: Sequence[str] | None = None, *,
                      prune: bool = True, tol: float = 1e-10) -> LeastSquaresFit:
    """Minimise ``sum w (y - X theta)^2`` through the normal equations.

    The Gram matrix is equilibrated to unit diagonal and factorised by an
    incremental Cholesky decomposition in column order; a column whose
    Schur complement falls below ``tol`` is linearly dependent on the
    preceding ones.  With ``prune`` such columns are dropped (coefficient 0)
    with a warning, otherwise :class:`SingularFitError` is raised.  One step
    of iterative refinement follows the solve.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    n, p = X.shape
    if n == 0:
        raise InsufficientDataError("empty learning sample")
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    columns = tuple(columns) if columns is not None else tuple(f"x{k}" for k in range(p))
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")

    Xw = X * w[:, None]
    G = X.T @ Xw
    d = np.sqrt(np.diag(G))

    keep: list[int] = []
    dropped: list[int] = []
    L = np.zeros((p, p))
    for k in range(p):
        if not d[k] > 0:
            dropped.append(k)
            continue
        m = len(keep)
        g = G[keep, k] / (d[keep] * d[k]) if m else np.empty(0)
        z = solve_triangular(L[:m, :m], g, lower=True) if m else g
        schur = 1.0 - z @ z
        if schur > tol:
            L[m, :m] = z
            L[m, m] = np.sqrt(schur)
            keep.append(k)
        else:
            dropped.append(k)
    if dropped:
        names = [columns[k] for k in dropped]
        if not prune:
            raise SingularFitError(names)
        logger.warning("pruned degenerate design column(s): %s", ", ".join(names))
    if not keep:
        raise SingularFitError(columns, "no usable design columns")

    m = len(keep)
    Lk = L[:m, :m]
    dk = d[keep]
    Xk = X[:, keep]

    def solve(rhs):
        u = solve_triangular(Lk, rhs / dk, lower=True)
        return solve_triangular(Lk.T, u, lower=False) / dk

    theta = solve(Xw[:, keep].T @ y)
    r = y - Xk @ theta
    theta = theta + solve(Xk.T @ (w * r))
    r = y - Xk @ theta

    coef = np.zeros(p)
    coef[keep] = theta
    rss = float(np.sum(w * r * r))
    se = np.full(p, np.nan)
    if n > m:
        sigma2 = rss / (n - m)
        Linv = solve_triangular(Lk, np.eye(m), lower=True)
        cov_scaled = Linv.T @ Linv
        se[keep] = np.sqrt(np.maximum(sigma2 * np.diag(cov_scaled), 0.0)) / dk
    return LeastSquaresFit(coef=coef, columns=columns, pruned=tuple(columns[k] for k in dropped),
                           std_errors=se, n_obs=n, rss=rss)


class LeastSquaresRegressor:
    """Default regressor: Gaussian linear model with identity link."""

    def __init__(self, prune: bool = True):
        self.prune = prune

    def fit(self, X, y, weights=None, columns=None, claim_ids=None) -> LeastSquaresFit:
        return fit_least_squares(X, y, weights, columns, prune=self.prune)


class Regressor(Protocol):
    def fit(self, X, y, weights=None, columns=None, claim_ids=None) -> Any: ...


def fit_weighted_factor(response, current, epsilon: float = 1e-3) -> float:
    """Closed-form minimiser of the epsilon-weighted square loss.

    ``sum response / sum max(current, epsilon)``.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon", "must be > 0")
    response = np.asarray(response, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    if response.size == 0:
        raise InsufficientDataError("empty learning sample")
    return float(response.sum() / np.maximum(current, epsilon).sum())


def cl_step_sample(portfolio: Portfolio, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Individual pairs ``(C_{i,j|nu}, C_{i,j+1|nu})`` behind the CL factor ``f_j``.

    The cohort is ``i <= I-(j+1)``, ``T <= j+1``; claims reported at ``j+1``
    enter with their masked value 0 at ``j``.
    """
    p = portfolio
    rows = np.flatnonzero((p.accident_period <= p.I - (j + 1)) & (p.reporting_delay <= j + 1))
    return p.column("paid_cum", j, rows), p.column("paid_cum", j + 1, rows)


# -- design matrices ----------------------------------------------------------

@dataclass(frozen=True)
class Design:
    X: np.ndarray
    y: np.ndarray | None
    weights: np.ndarray | None
    columns: tuple[str, ...]


MONTH_LEVELS = tuple(range(1, 13))


def _static_features(portfolio: Portfolio, rows: np.ndarray, spec: ModelSpec) -> tuple[list, list]:
    cols, names = [], []
    statics = portfolio.statics
    selected = spec.static_columns if spec.static_columns is not None else tuple(statics)
    for name in selected:
        if name not in statics:
            raise SchemaError(f"static covariate {name!r} not in portfolio")
        v = statics[name][rows]
        if name == spec.month_column and spec.month_encoding == "dummy":
            for level in MONTH_LEVELS[1:]:
                cols.append((v == level).astype(np.float64))
                names.append(f"{name}_{level}")
        elif name == spec.delay_days_column:
            if spec.delay_covariate == "days":
                cols.append(np.minimum(v, spec.censor_days))
                names.append(f"{name}_cens{spec.censor_days:g}")
        else:
            cols.append(v.astype(np.float64))
            names.append(name)
    if spec.delay_covariate == "periods":
        cols.append(portfolio.reporting_delay[rows].astype(np.float64))
        names.append("reporting_delay")
    return cols, names


def build_design(portfolio: Portfolio, rows: np.ndarray, lag: int, spec: ModelSpec,
                 response: np.ndarray | None = None) -> Design:
    """Design matrix of the claims ``rows`` using features observed at ``lag``.

    ``response`` is the full per-claim array of (predicted) ultimates; its
    entries at ``rows`` become ``y``.
    """
    rows = np.asarray(rows, dtype=np.int64)
    n = len(rows)
    v = spec.variant
    C = portfolio.column("paid_cum", lag, rows)
    O = portfolio.column("status_open", lag, rows) if v in _NEEDS_STATUS else None
    Inc = portfolio.column("incurred", lag, rows) if v in _NEEDS_INCURRED else None
    one = np.ones(n)
    weights = None

    if v is Variant.WEIGHTED_FACTOR:
        x = np.maximum(C, spec.epsilon)
        cols, names = [x], [f"max(C,{spec.epsilon:g})"]
        weights = 1.0 / x
    elif v in (Variant.LR_PAID, Variant.MODEL_C):
        cols, names = [one, C], [INTERCEPT, "C"]
    elif v in (Variant.LR_PAID_STATUS, Variant.MODEL_CO):
        cols, names = [one, C, O, C * O], [INTERCEPT, "C", "O", "C:O"]
    elif v is Variant.MODEL_I:
        cols, names = [one, Inc], [INTERCEPT, "I"]
    elif v is Variant.MODEL_IO:
        cols, names = [one, Inc, O, Inc * O], [INTERCEPT, "I", "O", "I:O"]
    elif v is Variant.MODEL_CIO:
        cols = [one, C, Inc, O, C * O, Inc * O]
        names = [INTERCEPT, "C", "I", "O", "C:O", "I:O"]
    elif v is Variant.LR_ALL_COV:
        sc, sn = _static_features(portfolio, rows, spec)
        cols, names = [one, C, C * O, *sc], [INTERCEPT, "C", "C:O", *sn]
    elif v is Variant.FNN_ALL_COV:
        sc, sn = _static_features(portfolio, rows, spec)
        cols, names = [C, O, C * O, *sc], ["C", "O", "C:O", *sn]
    else:  # pragma: no cover
        raise ConfigError("variant", f"unsupported variant {v}")

    X = np.column_stack(cols) if n else np.empty((0, len(cols)))
    y = None if response is None else np.asarray(response, dtype=np.float64)[rows]
    return Design(X=X, y=y, weights=weights, columns=tuple(names))


# -- generic recursive driver ------------------------------------------------

@dataclass(frozen=True)
class PtUFit:
    """Fitted predictor of one recursion step plus in-sample diagnostics."""

    lag: int
    model: Any
    columns: tuple[str, ...]
    n_train: int
    response_total: float
    prediction_total: float

    @property
    def balance_residual(self) -> float:
        return self.prediction_total - self.response_total

    @property
    def coefficients(self) -> dict[str, float] | None:
        return self.model.coefficients() if hasattr(self.model, "coefficients") else None

    @property
    def std_errors(self) -> dict[str, float] | None:
        se = getattr(self.model, "std_errors", None)
        return None if se is None else dict(zip(self.columns, map(float, se)))

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.model.predict(X), dtype=np.float64)


def _check_gate(portfolio: Portfolio, rows: np.ndarray, lag: int) -> None:
    if np.any(portfolio.reporting_delay[rows] > lag):
        raise AssertionError(f"cohort gate violated at lag {lag}: claim reported after lag in sample")


def run_oneshot(portfolio: Portfolio, spec: ModelSpec, regressor: Regressor | None = None) -> RbnsPrediction:
    """Generic recursive one-shot PtU forecast for RBNS claims.

    The returned prediction carries one :class:`PtUFit` per step in
    ``steps[k].fit``, ordered from lag ``J-1`` down to 0.
    """
    regressor = regressor or LeastSquaresRegressor()
    p = observed_view(portfolio)
    spec.check(p)
    ult = initial_ultimates(p)
    steps = []
    for j in range(p.J, 0, -1):
        lag = j - 1
        train, pred = step_rows(p, lag)
        if len(train) == 0:
            raise InsufficientDataError(f"empty learning sample at lag {lag}")
        _check_gate(p, train, lag)
        _check_gate(p, pred, lag)
        d = build_design(p, train, lag, spec, ult)
        model = regressor.fit(d.X, d.y, d.weights, d.columns, p.claim_ids[train])
        in_sample = np.asarray(model.predict(d.X), dtype=np.float64)
        fit = PtUFit(lag=lag, model=model, columns=d.columns, n_train=len(train),
                     response_total=float(d.y.sum()), prediction_total=float(in_sample.sum()))
        if len(pred):
            ult[pred] = fit.predict(build_design(p, pred, lag, spec).X)
        steps.append(StepCohort(lag, train, pred, fit))
    return RbnsPrediction(portfolio=p, ultimates=ult, rbns_factors=None,
                          rbns_reserves_by_period=rbns_reserves(p, ult), steps=tuple(steps))


def apply_fits(portfolio: Portfolio, fits: Sequence[PtUFit], spec: ModelSpec) -> np.ndarray:
    """Per-claim ultimates of ``portfolio`` from already fitted step models.

    Settled periods keep their observed ultimates; RBNS claims of period
    ``I - lag`` are predicted by the step model of that lag.
    """
    p = portfolio
    ult = initial_ultimates(p)
    by_lag = {f.lag: f for f in fits}
    for lag in range(p.J):
        _, pred = step_rows(p, lag)
        if len(pred):
            ult[pred] = by_lag[lag].predict(build_design(p, pred, lag, spec).X)
    return ult


def coefficients_frame(prediction: RbnsPrediction) -> pd.DataFrame:
    """Fitted coefficients per step: ``step, column, estimate, std_error``."""
    records = []
    for s in prediction.steps:
        fit = s.fit
        if fit is None or fit.coefficients is None:
            continue
        se = fit.std_errors or {}
        for col, est in fit.coefficients.items():
            records.append({"step": s.lag, "column": col, "estimate": est, "std_error": se.get(col, np.nan)})
    return pd.DataFrame(records, columns=["step", "column", "estimate", "std_error"])


# -- evaluation ----------------------------------------------------------------

def ind_rmse(prediction: RbnsPrediction | Mapping[tuple[int, str], float], truth: Portfolio) -> dict[int, float]:
    """Per accident period RMSE of per-claim ultimates against the ground truth.

    ``truth`` must carry the lower triangle; settled periods score 0 and
    periods without claims are omitted.
    """
    if not truth.has_lower_triangle:
        raise SchemaError("Ind.RMSE needs a portfolio with ground truth")
    if isinstance(prediction, RbnsPrediction):
        ids = prediction.portfolio.claim_ids
        acc = prediction.portfolio.accident_period
        ult = prediction.ultimates
    else:
        keys = list(prediction)
        acc = np.array([k[0] for k in keys], dtype=np.int64)
        ids = np.array([k[1] for k in keys], dtype=str)
        ult = np.array([prediction[k] for k in keys], dtype=np.float64)
    true_ult = truth.ultimate()[truth.index_of(ids)]
    sq = (ult - true_ult) ** 2
    out = {}
    for i in np.unique(acc):
        m = acc == i
        out[int(i)] = float(np.sqrt(sq[m].mean()))
    return out
