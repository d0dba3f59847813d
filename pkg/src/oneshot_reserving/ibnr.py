"""IBNR from the triangle of predicted RBNS ultimates by reporting lag, and
combined RBNS + IBNR reserve reports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .chain_ladder import oneshot_ultimates
from .claims import Portfolio, Triangle
from .rbns import RbnsPrediction, observed_view


@dataclass(frozen=True)
class STriangle:
    """Incremental-by-lag totals of predicted RBNS ultimates.

    ``S[i-1, j]`` is the predicted ultimate of period-``i`` claims reported
    at lag exactly ``j``; ``N`` counts those claims.  Cells with ``i + j > I``
    are NaN.
    """

    S: np.ndarray
    N: np.ndarray

    @property
    def I(self) -> int:
        return self.S.shape[0]

    @property
    def J(self) -> int:
        return self.S.shape[1] - 1

    def row_sums(self) -> dict[int, float]:
        return {r + 1: float(np.nansum(self.S[r])) for r in range(self.I)}

    def cumulative(self) -> Triangle:
        return Triangle(np.cumsum(np.nan_to_num(self.S), axis=1))

    @property
    def negative_cells(self) -> np.ndarray:
        return np.argwhere(self.S < 0) + [1, 0]

    def to_frame(self) -> pd.DataFrame:
        records = []
        for r in range(self.I):
            for j in range(self.J + 1):
                if np.isfinite(self.S[r, j]):
                    records.append({"i": r + 1, "lag": j, "S": float(self.S[r, j]), "N": int(self.N[r, j])})
        return pd.DataFrame(records, columns=["i", "lag", "S", "N"])


def build_s_triangle(portfolio: Portfolio, per_claim_ultimates) -> STriangle:
    """Group predicted RBNS ultimates by accident period and reporting lag.

    ``per_claim_ultimates`` is an :class:`RbnsPrediction` or an array aligned
    with the rows of the observed view of ``portfolio``.
    """
    if isinstance(per_claim_ultimates, RbnsPrediction):
        p = per_claim_ultimates.portfolio
        ult = per_claim_ultimates.ultimates
    else:
        p = observed_view(portfolio)
        ult = np.asarray(per_claim_ultimates, dtype=np.float64)
        if ult.shape != (len(p),):
            raise ValueError(f"need one ultimate per reported claim ({len(p)}), got shape {ult.shape}")
    I, J = p.I, p.J
    cell = (p.accident_period - 1) * (J + 1) + p.reporting_delay
    S = np.bincount(cell, weights=ult, minlength=I * (J + 1)).reshape(I, J + 1)
    N = np.bincount(cell, minlength=I * (J + 1)).reshape(I, J + 1)
    future = np.arange(1, I + 1)[:, None] + np.arange(J + 1)[None, :] > I
    S[future] = np.nan
    return STriangle(S=S, N=N)


def s_triangle_ultimates(st: STriangle) -> tuple[np.ndarray, np.ndarray]:
    """CL one-shot on the cumulated S-triangle: ``(ultimates[I], F[J])``."""
    return oneshot_ultimates(st.cumulative())


def predict_ibnr_from_s(st: STriangle) -> dict[int, float]:
    """IBNR per period: S-triangle CL ultimate minus the observed row total."""
    ult, _ = s_triangle_ultimates(st)
    observed = st.row_sums()
    return {i: 0.0 if i <= st.I - st.J else float(ult[i - 1] - observed[i]) for i in range(1, st.I + 1)}


def ibnr_from_factors(st: STriangle, F: np.ndarray) -> dict[int, float]:
    """IBNR of a (fixed) S-triangle with given PtU factors."""
    cum = st.cumulative()
    latest = cum.latest()
    out = {}
    for r in range(st.I):
        i = r + 1
        k = st.I - i
        out[i] = 0.0 if k >= st.J else float(latest[r] * (F[k] - 1.0))
    return out


# -- truth ----------------------------------------------------------------------

def true_splits(truth: Portfolio) -> dict[str, dict[int, float]]:
    """Ground-truth OLL per period and its RBNS / late-reported parts."""
    if not truth.has_lower_triangle:
        raise ValueError("true splits need a portfolio with ground truth")
    p = truth
    reported = p.is_reported()
    ult = p.ultimate()
    latest = np.where(reported, p.latest(), 0.0)
    idx = p.accident_period - 1

    def by_period(w):
        s = np.bincount(idx, weights=w, minlength=p.I)
        return {r + 1: float(v) for r, v in enumerate(s)}

    return {
        "oll": by_period(ult - latest),
        "rbns_oll": by_period(np.where(reported, ult - latest, 0.0)),
        "ibnr_ultimate": by_period(np.where(reported, 0.0, ult)),
    }


# -- report ------------------------------------------------------------------------

@dataclass(frozen=True)
class ReserveReport:
    """Per-period and total reserve rows; truth-based columns only when supplied."""

    rows: list = field(repr=False)
    has_truth: bool
    columns: tuple[str, ...]

    @property
    def total(self) -> dict:
        return self.rows[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.columns))

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    def to_json(self) -> dict:
        return {"has_truth": self.has_truth, "columns": list(self.columns), "rows": self.rows}


def assemble_report(portfolio: Portfolio, rbns_pred: RbnsPrediction, ibnr: Mapping[int, float],
                    truth: Portfolio | None = None, rmsep: float | None = None) -> ReserveReport:
    """Combine RBNS and IBNR reserves per accident period.

    With ``truth`` the true OLL, its RBNS/IBNR parts and ``error`` (estimate
    minus truth) are added; ``pct_rmsep = |error| / rmsep`` for the total
    when a Mack RMSEP is given.
    """
    p = observed_view(portfolio)
    if (p.I, p.J) != (rbns_pred.I, rbns_pred.J) or set(ibnr) != set(range(1, p.I + 1)):
        raise ValueError("RBNS prediction, IBNR reserves and portfolio have different geometry")
    rbns = rbns_pred.rbns_reserves_by_period
    splits = None
    if truth is not None:
        if (truth.I, truth.J) != (p.I, p.J):
            raise ValueError("ground truth has a different geometry")
        splits = true_splits(truth)

    cols = ["i", "rbns_reserve", "ibnr_reserve", "combined"]
    if splits is not None:
        cols += ["true_oll", "true_rbns_oll", "true_ibnr", "error"]
        if rmsep is not None:
            cols.append("pct_rmsep")
    rows = []
    for i in range(1, p.I + 1):
        row = {"i": i, "rbns_reserve": rbns[i], "ibnr_reserve": float(ibnr[i]), "combined": rbns[i] + float(ibnr[i])}
        if splits is not None:
            row.update(true_oll=splits["oll"][i], true_rbns_oll=splits["rbns_oll"][i],
                       true_ibnr=splits["ibnr_ultimate"][i], error=row["combined"] - splits["oll"][i])
        rows.append(row)
    total = {"i": "total"}
    for c in ("rbns_reserve", "ibnr_reserve", "true_oll", "true_rbns_oll", "true_ibnr"):
        if c in cols:
            total[c] = float(sum(r[c] for r in rows))
    total["combined"] = total["rbns_reserve"] + total["ibnr_reserve"]
    if splits is not None:
        total["error"] = total["combined"] - total["true_oll"]
    if "pct_rmsep" in cols:
        for r in rows:
            r["pct_rmsep"] = None
        total["pct_rmsep"] = abs(total["error"]) / rmsep if rmsep > 0 else None
    rows.append(total)
    return ReserveReport(rows=rows, has_truth=splits is not None, columns=tuple(cols))


def write_report_json(report: ReserveReport, path, extra: Mapping | None = None) -> None:
    data = report.to_json()
    if extra:
        data.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
