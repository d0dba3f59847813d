"""Chain-ladder factors, projection-to-ultimate factors and Mack's MSEP.

All functions read only the observed upper triangle of the input, so a full
square can be passed without leaking the lower triangle.  Accident periods
are 1-based in every returned mapping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .claims import Triangle
from .errors import CensoredCellError, DegenerateTriangleError, InsufficientDataError


@dataclass(frozen=True)
class ClFactors:
    """Development factors ``f``, PtU factors ``F`` and Mack variances ``sigma2``.

    All three are indexed ``j = 0..J-1``.  ``sigma2`` is NaN where it cannot be
    estimated (fewer than two development pairs and nothing to extrapolate from).
    """

    f: np.ndarray
    F: np.ndarray
    sigma2: np.ndarray

    @property
    def J(self) -> int:
        return len(self.f)


def _upper(triangle: Triangle) -> np.ndarray:
    v = np.array(triangle.values, dtype=np.float64)
    v[~triangle.observed_mask] = np.nan
    return v


def ptu_from_factors(f: np.ndarray) -> np.ndarray:
    """``F_j = prod_{l >= j} f_l``."""
    f = np.asarray(f, dtype=np.float64)
    return np.cumprod(f[::-1])[::-1].copy()


def _sigma2(C: np.ndarray, f: np.ndarray) -> np.ndarray:
    I, J1 = C.shape
    J = J1 - 1
    s2 = np.full(J, np.nan)
    for j in range(J):
        n = I - j - 1  # development pairs available
        if n < 2:
            continue
        cur, nxt = C[:n, j], C[:n, j + 1]
        if np.any(cur <= 0):
            if np.any((cur == 0) & (nxt != 0)) or np.any(cur < 0):
                raise DegenerateTriangleError(j, f"individual ratio undefined at j={j} (zero or negative C_ij)")
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(cur > 0, (nxt - f[j] * cur) ** 2 / np.where(cur > 0, cur, 1.0), 0.0)
        s2[j] = terms.sum() / (n - 1)
    # Mack's extrapolation for the last factor when only one pair exists.
    if J >= 1 and np.isnan(s2[J - 1]):
        if J >= 3 and np.isfinite(s2[J - 2]) and np.isfinite(s2[J - 3]):
            a, b = s2[J - 2], s2[J - 3]
            ratio = a * a / b if b > 0 else np.inf
            s2[J - 1] = min(ratio, b, a)
        elif J >= 2 and np.isfinite(s2[J - 2]):
            s2[J - 1] = s2[J - 2]
    return s2


def fit_cl_factors(triangle: Triangle) -> ClFactors:
    """Volume-weighted CL factors from the upper triangle.

    ``f_j = sum_{i <= I-(j+1)} C_{i,j+1} / sum_{i <= I-(j+1)} C_{i,j}``.
    """
    C = _upper(triangle)
    I, J = triangle.I, triangle.J
    f = np.empty(J)
    for j in range(J):
        n = I - (j + 1)
        den = C[:n, j].sum()
        if not den > 0:
            raise DegenerateTriangleError(j)
        f[j] = C[:n, j + 1].sum() / den
    return ClFactors(f=f, F=ptu_from_factors(f), sigma2=_sigma2(C, f))


def _rollforward_array(triangle: Triangle, f: np.ndarray) -> np.ndarray:
    C = _upper(triangle)
    I, J = triangle.I, triangle.J
    ult = np.empty(I)
    for r in range(I):
        i = r + 1
        k = min(J, I - i)
        ult[r] = C[r, k] * np.prod(f[k:])
    return ult


def predict_rollforward(triangle: Triangle, factors: ClFactors) -> dict[int, float]:
    """Classic period-by-period CL ultimates ``C_{i,I-i} prod_{j >= I-i} f_j``."""
    if factors.J != triangle.J:
        raise ValueError(f"factors have J={factors.J}, triangle has J={triangle.J}")
    ult = _rollforward_array(triangle, factors.f)
    return {r + 1: float(u) for r, u in enumerate(ult)}


def oneshot_ultimates(triangle: Triangle) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`predict_oneshot`: ``(ultimates[I], F[J])``."""
    C = _upper(triangle)
    I, J = triangle.I, triangle.J
    ult = np.full(I, np.nan)
    ult[: I - J] = C[: I - J, J]
    F = np.empty(J)
    for j in range(J, 0, -1):
        n = I - j
        den = C[:n, j - 1].sum()
        if not den > 0:
            raise DegenerateTriangleError(j - 1)
        F[j - 1] = ult[:n].sum() / den
        r = I - (j - 1) - 1
        ult[r] = C[r, j - 1] * F[j - 1]
    return ult, F


def predict_oneshot(triangle: Triangle) -> tuple[dict[int, float], np.ndarray]:
    """Recursive one-shot CL prediction with directly estimated PtU factors.

    Returns the ultimates keyed by accident period and the PtU factors
    ``F_0..F_{J-1}``.
    """
    ult, F = oneshot_ultimates(triangle)
    return {r + 1: float(u) for r, u in enumerate(ult)}, F


@dataclass(frozen=True)
class MackResult:
    """Mack CL reserves and conditional MSEP components (rooted)."""

    ultimates: dict[int, float]
    latest: dict[int, float]
    reserves_by_period: dict[int, float]
    process_sd_by_period: dict[int, float]
    estimation_sd_by_period: dict[int, float]
    rmsep_by_period: dict[int, float]
    total_reserve: float
    process_sd: float
    estimation_sd: float
    rmsep: float
    factors: ClFactors = field(repr=False)

    def to_rows(self) -> list[dict]:
        """Report rows: one per accident period plus a ``total`` row."""
        rows = []
        for i in sorted(self.ultimates):
            rows.append({
                "i": i,
                "latest": self.latest[i],
                "ultimate": self.ultimates[i],
                "reserve": self.reserves_by_period[i],
                "process_sd": self.process_sd_by_period[i],
                "estimation_sd": self.estimation_sd_by_period[i],
                "rmsep": self.rmsep_by_period[i],
            })
        rows.append({
            "i": "total",
            "latest": sum(self.latest.values()),
            "ultimate": sum(self.ultimates.values()),
            "reserve": self.total_reserve,
            "process_sd": self.process_sd,
            "estimation_sd": self.estimation_sd,
            "rmsep": self.rmsep,
        })
        return rows


def mack_msep(triangle: Triangle, factors: ClFactors | None = None) -> MackResult:
    """Mack (1993) distribution-free MSEP of the CL reserves.

    The total includes the cross-covariance terms between accident periods,
    which are estimation error only; hence ``rmsep**2 == process_sd**2 +
    estimation_sd**2`` both per period and in total.
    """
    if factors is None:
        factors = fit_cl_factors(triangle)
    I, J = triangle.I, triangle.J
    f, s2 = factors.f, factors.sigma2
    if np.any(np.isnan(s2)):
        raise InsufficientDataError(
            f"cannot estimate Mack variance parameters with I={I}, J={J}; need at least two development pairs")
    C = _upper(triangle)
    S = np.array([C[: I - j - 1, j].sum() for j in range(J)])
    w = s2 / f**2

    latest = triangle.latest()
    proj = np.array(C)
    for r in range(I):
        k0 = min(J, I - (r + 1))
        for k in range(k0, J):
            proj[r, k + 1] = proj[r, k] * f[k]
    ult = proj[:, J]

    proc2 = np.zeros(I)
    est2 = np.zeros(I)
    for r in range(I):
        a = I - (r + 1)
        if a >= J:
            continue
        ks = np.arange(a, J)
        proc2[r] = ult[r] ** 2 * np.sum(w[ks] / proj[r, ks])
        est2[r] = ult[r] ** 2 * np.sum(w[ks] / S[ks])

    cross = 0.0
    for r in range(I):
        a = I - (r + 1)
        if a >= J:
            continue
        younger = ult[r + 1:].sum()
        cross += ult[r] * younger * np.sum(2.0 * w[a:J] / S[a:J])

    total_proc2 = proc2.sum()
    total_est2 = est2.sum() + cross
    periods = range(1, I + 1)
    return MackResult(
        ultimates={i: float(ult[i - 1]) for i in periods},
        latest={i: float(latest[i - 1]) for i in periods},
        reserves_by_period={i: float(ult[i - 1] - latest[i - 1]) for i in periods},
        process_sd_by_period={i: float(np.sqrt(proc2[i - 1])) for i in periods},
        estimation_sd_by_period={i: float(np.sqrt(est2[i - 1])) for i in periods},
        rmsep_by_period={i: float(np.sqrt(proc2[i - 1] + est2[i - 1])) for i in periods},
        total_reserve=float((ult - latest).sum()),
        process_sd=float(np.sqrt(total_proc2)),
        estimation_sd=float(np.sqrt(total_est2)),
        rmsep=float(np.sqrt(total_proc2 + total_est2)),
        factors=factors,
    )


def true_ultimates(truth: Triangle) -> dict[int, float]:
    """``C_{i,J}`` per accident period from a full square."""
    if not truth.is_full:
        raise CensoredCellError("true ultimates need the full square")
    return {r + 1: float(v) for r, v in enumerate(truth.values[:, truth.J])}


def forecast_error(ultimates_hat: Mapping[int, float], ultimates_true: Mapping[int, float] | None) -> float:
    """Total forecast error ``sum_i (hat C_{i,J} - C_{i,J})`` over the predicted periods."""
    if ultimates_true is None:
        raise CensoredCellError("forecast error needs ground-truth ultimates")
    missing = [i for i in ultimates_hat if i not in ultimates_true]
    if missing:
        raise CensoredCellError(f"no ground truth for accident period(s) {missing}")
    return float(sum(ultimates_hat[i] - ultimates_true[i] for i in ultimates_hat))
