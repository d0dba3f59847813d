"""Individual claim histories, censoring and aggregation to triangles.

A :class:`Portfolio` stores all claims column-wise as numpy arrays of shape
``(N, J + 1)``.  Accident periods are 1-based (``1..I``), development
indices 0-based (``0..J``).  Cells before reporting (``j < T``) hold the
mask value 0.  When the portfolio carries no ground truth, cells beyond the
evaluation date (``i + j > I``) hold NaN and every guarded read of them
raises :class:`~oneshot_reserving.errors.CensoredCellError`.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import CensoredCellError, SchemaError

logger = logging.getLogger(__name__)

MASK_VALUE = 0.0

REQUIRED_COLUMNS = ("claim_id", "accident_period", "reporting_delay", "dev_period", "paid_cum")
OPTIONAL_COLUMNS = ("status_open", "incurred")


class MaskWarning(UserWarning):
    """Non-zero values were found in masked (pre-reporting) cells."""


@dataclass(frozen=True)
class ClaimHistory:
    """One claim's masked development path."""

    claim_id: str
    accident_period: int
    reporting_delay: int
    paid_cum: tuple[float, ...]
    status_open: tuple[int, ...] | None = None
    incurred: tuple[float, ...] | None = None
    static_covariates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.accident_period < 1:
            raise ValueError(f"accident_period must be >= 1, got {self.accident_period}")
        if self.reporting_delay < 0:
            raise ValueError(f"reporting_delay must be >= 0, got {self.reporting_delay}")
        n = len(self.paid_cum)
        for name in ("status_open", "incurred"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != n:
                raise ValueError(f"{name} has length {len(seq)}, expected {n}")
        if any(v != MASK_VALUE for v in self.paid_cum[: self.reporting_delay]):
            raise ValueError(f"claim {self.claim_id}: paid_cum not masked before reporting")

    @property
    def J(self) -> int:
        return len(self.paid_cum) - 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Portfolio:
    """Collection of individual claim histories observed at evaluation date ``I``.

    Parameters
    ----------
    claim_ids, accident_period, reporting_delay : array-like, shape (N,)
    paid_cum : array-like, shape (N, J + 1)
    status_open, incurred : array-like, shape (N, J + 1), optional
    statics : mapping of name to array-like of shape (N,), optional
    I : int, optional
        Number of accident periods; defaults to the largest accident period.
    has_lower_triangle : bool, optional
        Whether cells with ``i + j > I`` are known.  Inferred from the
        absence of NaNs when omitted.  When false those cells are set to NaN.

    Claims are stored in lexicographic ``claim_id`` order (stable for
    duplicate ids, which arise in bootstrap resamples).  Masks are enforced
    on construction; the number of overwritten non-zero cells is kept in
    :attr:`mask_fixes`.
    """

    def __init__(
        self,
        claim_ids,
        accident_period,
        reporting_delay,
        paid_cum,
        status_open=None,
        incurred=None,
        statics: Mapping[str, Iterable[float]] | None = None,
        *,
        I: int | None = None,
        has_lower_triangle: bool | None = None,
    ):
        ids = np.asarray(claim_ids, dtype=str)
        acc = np.asarray(accident_period, dtype=np.int64)
        delay = np.asarray(reporting_delay, dtype=np.int64)
        paid = np.array(paid_cum, dtype=np.float64, ndmin=2)
        if ids.ndim != 1 or len(ids) == 0:
            raise SchemaError("portfolio needs at least one claim")
        n = len(ids)
        if paid.shape[0] != n or acc.shape != (n,) or delay.shape != (n,):
            raise SchemaError("claim arrays have inconsistent lengths")
        J = paid.shape[1] - 1
        if I is None:
            I = int(acc.max())
        if np.any(acc < 1) or np.any(acc > I):
            raise SchemaError(f"accident periods must lie in 1..{I}")
        if np.any(delay < 0):
            raise SchemaError("reporting delays must be >= 0")
        if not J < I:
            raise SchemaError(f"need J < I, got J={J}, I={I}")

        def _matrix(x, name, dtype=np.float64):
            if x is None:
                return None
            a = np.array(x, dtype=dtype, ndmin=2)
            if a.shape != paid.shape:
                raise SchemaError(f"{name} has shape {a.shape}, expected {paid.shape}")
            return a

        status = _matrix(status_open, "status_open")
        inc = _matrix(incurred, "incurred")
        stat = {}
        for name, values in (statics or {}).items():
            v = np.asarray(values, dtype=np.float64)
            if v.shape != (n,):
                raise SchemaError(f"static covariate {name!r} has shape {v.shape}, expected ({n},)")
            stat[name] = v.copy()

        future = acc[:, None] + np.arange(J + 1)[None, :] > I
        if has_lower_triangle is None:
            has_lower_triangle = bool(np.isfinite(paid[future]).all()) and future.any()
        if has_lower_triangle:
            for name, a in (("paid_cum", paid), ("status_open", status), ("incurred", inc)):
                if a is not None and not np.isfinite(a).all():
                    raise SchemaError(f"{name} contains non-finite values but ground truth was declared")
        else:
            observed = ~future
            for name, a in (("paid_cum", paid), ("status_open", status), ("incurred", inc)):
                if a is not None and not np.isfinite(a[observed]).all():
                    raise SchemaError(f"{name} contains non-finite values in the observed triangle")

        pre_report = np.arange(J + 1)[None, :] < delay[:, None]
        fixes = 0
        for a in (paid, status, inc):
            if a is None:
                continue
            hit = pre_report & (a != MASK_VALUE) & np.isfinite(a)
            fixes += int(hit.sum())
            a[pre_report] = MASK_VALUE
            if not has_lower_triangle:
                a[future] = np.nan
        if fixes:
            warnings.warn(f"{fixes} masked cells (j < reporting delay) overwritten with {MASK_VALUE}", MaskWarning, stacklevel=2)

        order = np.argsort(ids, kind="stable")
        self._init_arrays(
            ids[order], acc[order], delay[order], paid[order],
            None if status is None else status[order],
            None if inc is None else inc[order],
            {k: v[order] for k, v in stat.items()},
            I, bool(has_lower_triangle), fixes,
        )

    def _init_arrays(self, ids, acc, delay, paid, status, inc, statics, I, has_lower, fixes):
        self._ids = _frozen(ids)
        self._acc = _frozen(acc)
        self._delay = _frozen(delay)
        self._paid = _frozen(paid)
        self._status = None if status is None else _frozen(status)
        self._incurred = None if inc is None else _frozen(inc)
        self._statics = {k: _frozen(v) for k, v in statics.items()}
        self._I = int(I)
        self._has_lower = has_lower
        self.mask_fixes = fixes

    @classmethod
    def _from_sorted(cls, ids, acc, delay, paid, status, inc, statics, I, has_lower) -> "Portfolio":
        obj = cls.__new__(cls)
        obj._init_arrays(ids, acc, delay, paid, status, inc, statics, I, has_lower, 0)
        return obj

    @classmethod
    def from_histories(cls, histories: Sequence[ClaimHistory], *, I: int | None = None,
                       has_lower_triangle: bool | None = None) -> "Portfolio":
        if not histories:
            raise SchemaError("portfolio needs at least one claim")
        lengths = {len(h.paid_cum) for h in histories}
        if len(lengths) != 1:
            raise SchemaError(f"inconsistent J across claims: lengths {sorted(lengths)}")
        has_status = [h.status_open is not None for h in histories]
        has_inc = [h.incurred is not None for h in histories]
        if len(set(has_status)) > 1 or len(set(has_inc)) > 1:
            raise SchemaError("status_open/incurred must be present for all claims or none")
        names = list(histories[0].static_covariates)
        return cls(
            [h.claim_id for h in histories],
            [h.accident_period for h in histories],
            [h.reporting_delay for h in histories],
            [h.paid_cum for h in histories],
            [h.status_open for h in histories] if has_status[0] else None,
            [h.incurred for h in histories] if has_inc[0] else None,
            {k: [h.static_covariates[k] for h in histories] for k in names},
            I=I,
            has_lower_triangle=has_lower_triangle,
        )

    # -- geometry ---------------------------------------------------------
    @property
    def I(self) -> int:
        return self._I

    @property
    def J(self) -> int:
        return self._paid.shape[1] - 1

    @property
    def evaluation_date(self) -> int:
        return self._I

    @property
    def has_lower_triangle(self) -> bool:
        return self._has_lower

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def n_claims(self) -> int:
        return len(self._ids)

    # -- raw arrays (read-only views) -------------------------------------
    @property
    def claim_ids(self) -> np.ndarray:
        return self._ids

    @property
    def accident_period(self) -> np.ndarray:
        return self._acc

    @property
    def reporting_delay(self) -> np.ndarray:
        return self._delay

    @property
    def paid_cum(self) -> np.ndarray:
        return self._paid

    @property
    def status_open(self) -> np.ndarray | None:
        return self._status

    @property
    def incurred(self) -> np.ndarray | None:
        return self._incurred

    @property
    def statics(self) -> Mapping[str, np.ndarray]:
        return dict(self._statics)

    @property
    def has_status(self) -> bool:
        return self._status is not None

    @property
    def has_incurred(self) -> bool:
        return self._incurred is not None

    def claims_per_period(self) -> np.ndarray:
        """``N_i`` for ``i = 1..I`` (index ``i - 1``)."""
        return np.bincount(self._acc - 1, minlength=self._I)

    def is_reported(self) -> np.ndarray:
        """RBNS indicator at the evaluation date, ``i + T <= I``."""
        return self._acc + self._delay <= self._I

    def latest_index(self) -> np.ndarray:
        """Latest observed development index ``min(J, I - i)`` per claim."""
        return np.minimum(self.J, self._I - self._acc)

    # -- guarded access ---------------------------------------------------
    def _array(self, name: str) -> np.ndarray:
        arrays = {"paid_cum": self._paid, "status_open": self._status, "incurred": self._incurred}
        if name not in arrays:
            raise KeyError(name)
        a = arrays[name]
        if a is None:
            raise SchemaError(f"portfolio has no {name!r} data")
        return a

    def column(self, name: str, j: int, rows: np.ndarray | None = None) -> np.ndarray:
        """Values of ``name`` at development index ``j`` for the selected rows.

        Raises :class:`CensoredCellError` if any selected cell lies beyond the
        evaluation date and the portfolio has no ground truth.
        """
        if not 0 <= j <= self.J:
            raise IndexError(f"development index {j} outside 0..{self.J}")
        a = self._array(name)
        acc = self._acc if rows is None else self._acc[rows]
        if not self._has_lower and np.any(acc + j > self._I):
            raise CensoredCellError(f"{name} at j={j} lies beyond evaluation date I={self._I}")
        return a[:, j] if rows is None else a[rows, j]

    def cell(self, name: str, k: int, j: int) -> float:
        """Single cell of claim at row ``k``."""
        return float(self.column(name, j, np.array([k]))[0])

    def latest(self, name: str = "paid_cum") -> np.ndarray:
        """Per-claim value at the latest observed development index."""
        a = self._array(name)
        return a[np.arange(len(self)), self.latest_index()]

    def ultimate(self) -> np.ndarray:
        """True per-claim ultimates ``C_{i,J|nu}``; needs ground truth."""
        return self.column("paid_cum", self.J)

    # -- views ------------------------------------------------------------
    def take(self, rows: np.ndarray) -> "Portfolio":
        """Sub-portfolio of the given row indices (kept in the given order).

        Passing sorted row indices preserves the canonical claim ordering.
        """
        rows = np.asarray(rows, dtype=np.int64)
        if len(rows) == 0:
            raise SchemaError("portfolio needs at least one claim")
        return Portfolio._from_sorted(
            self._ids[rows], self._acc[rows], self._delay[rows], self._paid[rows],
            None if self._status is None else self._status[rows],
            None if self._incurred is None else self._incurred[rows],
            {k: v[rows] for k, v in self._statics.items()},
            self._I, self._has_lower,
        )

    def history(self, k: int) -> ClaimHistory:
        return ClaimHistory(
            claim_id=str(self._ids[k]),
            accident_period=int(self._acc[k]),
            reporting_delay=int(self._delay[k]),
            paid_cum=tuple(float(x) for x in self._paid[k]),
            status_open=None if self._status is None else tuple(
                (int(x) if np.isfinite(x) else x) for x in self._status[k]),
            incurred=None if self._incurred is None else tuple(float(x) for x in self._incurred[k]),
            static_covariates={n: float(v[k]) for n, v in self._statics.items()},
        )

    @property
    def claims(self) -> list[ClaimHistory]:
        return [self.history(k) for k in range(len(self))]

    def index_of(self, claim_ids: Iterable[str]) -> np.ndarray:
        """Row indices of the given (unique) claim ids."""
        lookup = {cid: k for k, cid in enumerate(self._ids)}
        try:
            return np.array([lookup[c] for c in claim_ids], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"claim {exc.args[0]!r} not in portfolio") from None

    def equals(self, other: "Portfolio") -> bool:
        """Bit-exact equality of all data (NaN cells compare equal)."""
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b, equal_nan=True)

        return (
            self._I == other._I and self._has_lower == other._has_lower
            and np.array_equal(self._ids, other._ids)
            and np.array_equal(self._acc, other._acc)
            and np.array_equal(self._delay, other._delay)
            and same(self._paid, other._paid)
            and same(self._status, other._status)
            and same(self._incurred, other._incurred)
            and self._statics.keys() == other._statics.keys()
            and all(same(v, other._statics[k]) for k, v in self._statics.items())
        )

    def __repr__(self) -> str:
        return (f"Portfolio(N={len(self)}, I={self.I}, J={self.J}, "
                f"has_lower_triangle={self._has_lower})")


def censor(portfolio: Portfolio, evaluation_date: int | None = None) -> Portfolio:
    """Upper-triangle view of ``portfolio`` at its evaluation date.

    Claims not yet reported (``i + T > I``) are dropped and all cells with
    ``i + j > I`` become unreadable.  The input portfolio keeps the ground
    truth.  Idempotent.
    """
    if evaluation_date is not None and evaluation_date != portfolio.I:
        raise ValueError(f"evaluation date must equal I={portfolio.I}, got {evaluation_date}")
    rows = np.flatnonzero(portfolio.is_reported())
    view = portfolio.take(rows)
    future = view.accident_period[:, None] + np.arange(view.J + 1)[None, :] > view.I

    def _cut(a):
        if a is None:
            return None
        a = a.copy()
        a[future] = np.nan
        return _frozen(a)

    view._paid = _cut(view._paid)
    view._status = _cut(view._status)
    view._incurred = _cut(view._incurred)
    view._has_lower = False
    return view


# -- triangles -------------------------------------------------------------

@dataclass(frozen=True)
class Triangle:
    """Aggregated cumulative amounts, rows ``i = 1..I``, columns ``j = 0..J``.

    ``values`` has NaN outside the observed upper triangle unless
    ``is_full`` is true.
    """

    values: np.ndarray
    is_full: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, ndmin=2)
        I, J1 = v.shape
        if not J1 - 1 < I:
            raise SchemaError(f"need J < I, got J={J1 - 1}, I={I}")
        obs = self.observed_mask
        if not np.isfinite(v[obs]).all():
            raise SchemaError("observed triangle cells must be finite")
        if self.is_full:
            if not np.isfinite(v).all():
                raise SchemaError("full square must be finite")
        else:
            v[~obs] = np.nan
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], J: int | None = None) -> "Triangle":
        """Build from ragged rows; row ``i`` must hold at least the observed cells."""
        I = len(rows)
        if J is None:
            J = max(len(r) for r in rows) - 1
        v = np.full((I, J + 1), np.nan)
        for k, r in enumerate(rows):
            n = min(len(r), J + 1)
            v[k, :n] = [np.nan if x is None else x for x in r[:n]]
        full = bool(np.isfinite(v).all())
        return cls(v, is_full=full)

    @property
    def I(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1] - 1

    @property
    def observed_mask(self) -> np.ndarray:
        v = np.asarray(self.values)
        I, J1 = v.shape
        i = np.arange(1, I + 1)[:, None]
        j = np.arange(J1)[None, :]
        return i + j <= I

    def cell(self, i: int, j: int) -> float:
        """``C_{i,j}`` with 1-based accident period ``i``."""
        if not (1 <= i <= self.I and 0 <= j <= self.J):
            raise IndexError(f"cell ({i}, {j}) outside triangle")
        if not self.is_full and i + j > self.I:
            raise CensoredCellError(f"cell ({i}, {j}) lies beyond evaluation date I={self.I}")
        return float(self.values[i - 1, j])

    def latest_index(self) -> np.ndarray:
        return np.minimum(self.J, self.I - np.arange(1, self.I + 1))

    def latest(self) -> np.ndarray:
        """Latest diagonal ``C_{i, min(J, I-i)}`` for ``i = 1..I``."""
        return self.values[np.arange(self.I), self.latest_index()]

    def upper(self) -> "Triangle":
        """Observed part only."""
        return Triangle(self.values, is_full=False) if self.is_full else self

    def scaled(self, factor: float) -> "Triangle":
        return Triangle(np.asarray(self.values) * factor, is_full=self.is_full)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Triangle):
            return NotImplemented
        return self.is_full == other.is_full and np.array_equal(self.values, other.values, equal_nan=True)

    __hash__ = None


def aggregate(portfolio: Portfolio, upto: int | str | None = None) -> Triangle:
    """Aggregate individual cumulative payments to ``C_{i,j}``.

    ``upto=None`` uses everything available (the full square when the
    portfolio carries ground truth), ``"observed"`` forces an upper
    triangle, ``"full"`` requires the full square, and an integer ``k``
    truncates to development indices ``0..k``.
    """
    p = portfolio
    if len(p) == 0:
        raise SchemaError("cannot aggregate an empty portfolio")
    full = p.has_lower_triangle
    ncols = p.J + 1
    if upto == "full":
        if not full:
            raise CensoredCellError("full square requested but the portfolio has no ground truth")
    elif upto == "observed":
        full = False
    elif upto is not None:
        k = int(upto)
        if not 0 <= k <= p.J:
            raise IndexError(f"upto={k} outside 0..{p.J}")
        ncols = k + 1
    paid = np.nan_to_num(p.paid_cum[:, :ncols], nan=0.0)
    values = np.empty((p.I, ncols))
    for j in range(ncols):
        values[:, j] = np.bincount(p.accident_period - 1, weights=paid[:, j], minlength=p.I)
    if ncols - 1 >= p.I:
        raise SchemaError("truncated triangle needs J < I")
    return Triangle(values, is_full=full)


def cohort_mask(portfolio: Portfolio, i: int, j: int) -> np.ndarray:
    """Boolean mask of claims of accident period ``i`` with ``T <= j``."""
    if not 1 <= i <= portfolio.I:
        raise IndexError(f"accident period {i} outside 1..{portfolio.I}")
    if not 0 <= j <= portfolio.J:
        raise IndexError(f"development index {j} outside 0..{portfolio.J}")
    return (portfolio.accident_period == i) & (portfolio.reporting_delay <= j)


def rbns_cohort(portfolio: Portfolio, i: int, j: int) -> list[ClaimHistory]:
    """Claims of accident period ``i`` reported by development index ``j``, by claim id."""
    rows = np.flatnonzero(cohort_mask(portfolio, i, j))
    return [portfolio.history(k) for k in rows]


# -- CSV I/O ---------------------------------------------------------------

def load_portfolio(path, schema: Mapping[str, str] | None = None, *, I: int | None = None) -> Portfolio:
    """Read the canonical long-format CSV (one row per claim and development index).

    ``schema`` maps canonical column names to the names used in the file.
    Columns other than the canonical ones are static covariates and must be
    constant within a claim.  Rows beyond the evaluation date are kept as
    ground truth.  Missing rows are only allowed before reporting.
    """
    schema = dict(schema or {})
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot parse {path}: {exc}") from exc
    df = df.rename(columns={v: k for k, v in schema.items()})
    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    if len(df) == 0:
        raise SchemaError("no data rows")

    def numeric(col, integer=False):
        # numpy's string conversion parses with correct rounding (bit-exact round trip)
        try:
            v = df[col].to_numpy(dtype=str).astype(np.float64)
        except ValueError as exc:
            raise SchemaError(f"non-numeric value in column {col!r}: {exc}") from exc
        if integer:
            if not np.all(np.isfinite(v)) or np.any(v != np.round(v)):
                raise SchemaError(f"column {col!r} must hold integers")
            return v.astype(np.int64)
        if not np.all(np.isfinite(v)):
            raise SchemaError(f"non-finite value in column {col!r}")
        return v

    ids_raw = df["claim_id"].to_numpy(dtype=str)
    acc_rows = numeric("accident_period", integer=True)
    delay_rows = numeric("reporting_delay", integer=True)
    dev = numeric("dev_period", integer=True)
    if np.any(dev < 0):
        raise SchemaError("dev_period must be >= 0")
    paid_rows = numeric("paid_cum")
    optional = {c: numeric(c) for c in OPTIONAL_COLUMNS if c in df.columns}
    static_cols = [c for c in df.columns if c not in REQUIRED_COLUMNS and c not in OPTIONAL_COLUMNS]
    static_rows = {c: numeric(c) for c in static_cols}

    keys = pd.MultiIndex.from_arrays([ids_raw, dev])
    if keys.has_duplicates:
        dup = keys[keys.duplicated()][0]
        raise SchemaError(f"duplicate (claim_id, dev_period) row: {dup}")

    codes, uniques = pd.factorize(ids_raw)
    n = len(uniques)
    first = np.full(n, -1)
    first[codes[::-1]] = np.arange(len(codes))[::-1]

    def per_claim(values, name):
        v = values[first]
        if np.any(values != v[codes]):
            raise SchemaError(f"{name} is not constant within a claim")
        return v

    acc = per_claim(acc_rows, "accident_period")
    delay = per_claim(delay_rows, "reporting_delay")
    statics = {c: per_claim(v, c) for c, v in static_rows.items()}

    J = int(dev.max())
    if I is None:
        I = int(acc.max())
    has_lower = bool(np.any(acc_rows + dev > I))
    last = np.full(n, -1)
    np.maximum.at(last, codes, dev)
    expected_last = np.full(n, J) if has_lower else np.minimum(J, I - acc)
    bad = np.flatnonzero(last != expected_last)
    if bad.size:
        k = bad[0]
        raise SchemaError(
            f"inconsistent J across claims: claim {uniques[k]!r} ends at dev_period {last[k]}, "
            f"expected {expected_last[k]}")
    counts = np.bincount(codes, minlength=n)
    first_row = np.minimum(delay, expected_last)
    needed = expected_last - first_row + 1
    present = counts - np.bincount(codes, weights=(dev < delay[codes]), minlength=n).astype(int)
    bad = np.flatnonzero(present < needed)
    if bad.size:
        raise SchemaError(f"claim {uniques[bad[0]]!r} has missing development rows after reporting")

    shape = (n, J + 1)
    paid = np.full(shape, np.nan)
    paid[np.arange(J + 1)[None, :] < delay[:, None]] = MASK_VALUE
    paid[codes, dev] = paid_rows
    extras = {}
    for c, v in optional.items():
        a = np.full(shape, np.nan)
        a[np.arange(J + 1)[None, :] < delay[:, None]] = MASK_VALUE
        a[codes, dev] = v
        extras[c] = a
    if not has_lower:
        future = acc[:, None] + np.arange(J + 1)[None, :] > I
        for a in (paid, *extras.values()):
            a[future] = np.nan

    return Portfolio(
        uniques.astype(str), acc, delay, paid,
        extras.get("status_open"), extras.get("incurred"), statics,
        I=I, has_lower_triangle=has_lower,
    )


def portfolio_frame(portfolio: Portfolio) -> pd.DataFrame:
    """Canonical long-format frame: all rows up to the latest known index."""
    p = portfolio
    last = np.full(len(p), p.J) if p.has_lower_triangle else p.latest_index()
    reps = last + 1
    rows = np.repeat(np.arange(len(p)), reps)
    dev = np.concatenate([np.arange(r) for r in reps])
    data = {
        "claim_id": p.claim_ids[rows],
        "accident_period": p.accident_period[rows],
        "reporting_delay": p.reporting_delay[rows],
        "dev_period": dev,
        "paid_cum": p.paid_cum[rows, dev],
    }
    if p.has_status:
        data["status_open"] = p.status_open[rows, dev].astype(np.int64)
    if p.has_incurred:
        data["incurred"] = p.incurred[rows, dev]
    for name, v in p.statics.items():
        data[name] = _compact(v)[rows]
    return pd.DataFrame(data)


def _compact(v: np.ndarray) -> np.ndarray:
    """Integers are written without a decimal point."""
    if np.all(v == np.round(v)) and np.all(np.abs(v) < 2**53):
        return v.astype(np.int64)
    return v


def write_portfolio(portfolio: Portfolio, path) -> None:
    """Write the canonical long CSV; floats use shortest round-trip repr."""
    portfolio_frame(portfolio).to_csv(path, index=False, lineterminator="\n")
