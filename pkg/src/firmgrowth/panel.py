"""Unit-level sales panels: ingestion, aggregation and parameter estimation.

A panel is a set of ``(market_id, firm_id, product_id, period, sales)``
records.  Products are the units; firms and markets are two ways of
grouping them.  Growth is measured between consecutive periods and only
for entities present in both.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .core import KDistribution, LognormalParams, SeedLike, make_rng
from .errors import ConfigurationError, DataError, DomainError, FormatError, IngestionError, InsufficientDataError
from .observations import ObservationTable

CSV_HEADER = ("market_id", "firm_id", "product_id", "period", "sales")
LEVELS = ("market", "firm", "product")


class PanelRecord(NamedTuple):
    market_id: str
    firm_id: str
    product_id: str
    period: int
    sales: float


def _codes(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels, inv = np.unique(values, return_inverse=True)
    return labels, inv.astype(np.int64)


@dataclass(frozen=True, eq=False)
class Panel:
    """Immutable column store of panel records.

    Identifier columns are kept as strings together with integer codes
    (``*_code``) indexing the sorted unique labels.
    """

    market_id: np.ndarray
    firm_id: np.ndarray
    product_id: np.ndarray
    period: np.ndarray
    sales: np.ndarray

    def __post_init__(self):
        cols = {
            "market_id": np.asarray(self.market_id, dtype=str),
            "firm_id": np.asarray(self.firm_id, dtype=str),
            "product_id": np.asarray(self.product_id, dtype=str),
            "period": np.asarray(self.period, dtype=np.int64),
            "sales": np.asarray(self.sales, dtype=float),
        }
        n = len(cols["sales"])
        if any(len(c) != n for c in cols.values()):
            raise DataError("panel columns must have equal length")
        if n and not np.all(cols["sales"] > 0):
            raise DataError("sales must be positive")
        for k, v in cols.items():
            object.__setattr__(self, k, v)
        for name in ("market_id", "firm_id", "product_id"):
            labels, codes = _codes(cols[name]) if n else (np.empty(0, str), np.empty(0, np.int64))
            object.__setattr__(self, name[:-3] + "_labels", labels)
            object.__setattr__(self, name[:-3] + "_code", codes)
        if n:
            pairs = np.stack([self.product_code, cols["period"]], axis=1)
            if len(np.unique(pairs, axis=0)) != n:
                raise DataError("duplicate (product_id, period) records")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[PanelRecord | Sequence]) -> "Panel":
        rows = [tuple(r) for r in records]
        if not rows:
            return cls(np.empty(0, str), np.empty(0, str), np.empty(0, str), np.empty(0, np.int64), np.empty(0))
        m, f, p, t, s = zip(*rows)
        return cls(np.array(m, dtype=str), np.array(f, dtype=str), np.array(p, dtype=str), np.array(t), np.array(s, float))

    def replace_ids(self, market_id=None, firm_id=None) -> "Panel":
        return Panel(
            self.market_id if market_id is None else market_id,
            self.firm_id if firm_id is None else firm_id,
            self.product_id,
            self.period,
            self.sales,
        )

    # -- access -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.sales)

    def records(self) -> list[PanelRecord]:
        return [
            PanelRecord(str(m), str(f), str(p), int(t), float(s))
            for m, f, p, t, s in zip(self.market_id, self.firm_id, self.product_id, self.period, self.sales)
        ]

    @property
    def periods(self) -> np.ndarray:
        return np.unique(self.period)

    def entity_codes(self, level: str) -> tuple[np.ndarray, np.ndarray]:
        """``(labels, code per record)`` for an aggregation level."""
        if level not in LEVELS:
            raise ConfigurationError(f"unknown level {level!r}; expected one of {LEVELS}")
        if level == "market" and len(self) and np.any(self.market_id == ""):
            raise DataError("market_id is blank for some records; market level unavailable")
        return getattr(self, level + "_labels"), getattr(self, level + "_code")

    def snapshot(self, period: int, level: str = "firm") -> list[np.ndarray]:
        """Unit sizes of every entity present in ``period``."""
        _, codes = self.entity_codes(level)
        m = self.period == period
        c, s = codes[m], self.sales[m]
        o = np.argsort(c, kind="stable")
        c, s = c[o], s[o]
        cut = np.flatnonzero(np.diff(c)) + 1
        return np.split(s, cut) if len(s) else []

    def unit_growth_matrices(self, level: str = "firm") -> list[np.ndarray]:
        """Per entity, a ``(units, periods - 1)`` array of unit log growth rates.

        A unit belongs to the entity it is listed under in its first period.
        Missing periods are NaN.
        """
        _, codes = self.entity_codes(level)
        pers = self.periods
        if len(pers) < 2:
            raise InsufficientDataError("need at least two periods")
        col = np.searchsorted(pers, self.period)
        n_prod = len(self.product_labels)
        M = np.full((n_prod, len(pers)), np.nan)
        M[self.product_code, col] = self.sales
        G = np.log(M[:, 1:] / M[:, :-1])
        order = np.lexsort((self.period, self.product_code))
        first = np.ones(len(order), dtype=bool)
        first[1:] = self.product_code[order][1:] != self.product_code[order][:-1]
        owner = np.empty(n_prod, dtype=np.int64)
        owner[self.product_code[order][first]] = codes[order][first]
        o = np.argsort(owner, kind="stable")
        cut = np.flatnonzero(np.diff(owner[o])) + 1
        return [G[idx] for idx in np.split(o, cut)]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _open_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data, newline="")


def ingest_panel(source, format: str = "csv") -> Panel:
    """Read and validate a panel from a path, bytes, or a binary/text stream.

    The header must be exactly ``market_id,firm_id,product_id,period,sales``.
    Every invalid row is reported with its line number in one
    :class:`IngestionError`.
    """
    if format != "csv":
        raise ConfigurationError(f"unsupported panel format {format!r}")
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("missing header row") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise FormatError(f"header must be {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")
        rows, problems, seen = [], [], {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                problems.append((lineno, f"expected 5 fields, got {len(row)}"))
                continue
            market, firm, product, period, sales = (x.strip() for x in row)
            if not firm or not product:
                problems.append((lineno, "firm_id and product_id must be nonblank"))
                continue
            try:
                t = int(period)
            except ValueError:
                problems.append((lineno, f"period {period!r} is not an integer"))
                continue
            try:
                s = float(sales)
            except ValueError:
                problems.append((lineno, f"sales {sales!r} is not a number"))
                continue
            if not (math.isfinite(s) and s > 0):
                problems.append((lineno, f"sales must be positive, got {sales}"))
                continue
            if (product, t) in seen:
                problems.append((lineno, f"duplicate product {product!r} in period {t} (first at row {seen[product, t]})"))
                continue
            seen[product, t] = lineno
            rows.append((market, firm, product, t, s))
    finally:
        if fh is not source:
            fh.close()
    if problems:
        raise IngestionError(f"{len(problems)} invalid row(s)", problems)
    return Panel.from_records(rows)


def write_panel_csv(panel: Panel, destination) -> None:
    """Write a panel in the ingestion format (floats in shortest round-trip form)."""
    close = False
    if isinstance(destination, (str, os.PathLike)):
        destination = open(destination, "w", encoding="utf-8", newline="")
        close = True
    try:
        w = csv.writer(destination, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in panel.records():
            w.writerow([r.market_id, r.firm_id, r.product_id, r.period, repr(r.sales)])
    finally:
        if close:
            destination.close()


# ---------------------------------------------------------------------------
# Observations and estimates
# ---------------------------------------------------------------------------


def group_growth(codes_t: np.ndarray, sales_t: np.ndarray, codes_t1: np.ndarray, sales_t1: np.ndarray) -> ObservationTable:
    """Entity-level observations from unit sales in two consecutive periods.

    Entities missing from either period are skipped.
    """
    if len(codes_t) == 0 or len(codes_t1) == 0:
        return ObservationTable.empty()
    n = int(max(codes_t.max(), codes_t1.max())) + 1
    S0 = np.bincount(codes_t, weights=sales_t, minlength=n)
    S1 = np.bincount(codes_t1, weights=sales_t1, minlength=n)
    K = np.bincount(codes_t, minlength=n)
    K1 = np.bincount(codes_t1, minlength=n)
    big = np.zeros(n)
    np.maximum.at(big, codes_t, sales_t)
    ok = (K > 0) & (K1 > 0)
    return ObservationTable(S0[ok], np.log(S1[ok] / S0[ok]), K[ok], big[ok])


def _pairs(panel: Panel, period_pair) -> list[tuple[int, int]]:
    pers = panel.periods
    if period_pair is not None:
        t, t1 = (int(x) for x in period_pair)
        if t not in pers or t1 not in pers:
            raise DataError(f"period pair {t}->{t1} not present in panel")
        return [(t, t1)]
    if len(pers) < 2:
        raise InsufficientDataError("need at least two periods for growth observations")
    return [(int(a), int(b)) for a, b in zip(pers[:-1], pers[1:])]


def compute_observations(panel: Panel, level: str = "firm", period_pair=None) -> ObservationTable:
    """Growth observations at an aggregation level.

    ``period_pair=(t, t1)`` selects one transition; by default all
    consecutive period pairs are pooled.
    """
    _, codes = panel.entity_codes(level)
    tables = []
    for t, t1 in _pairs(panel, period_pair):
        a = panel.period == t
        b = panel.period == t1
        tables.append(group_growth(codes[a], panel.sales[a], codes[b], panel.sales[b]))
    return ObservationTable.concat(tables)


def estimate_lognormal_params(values) -> LognormalParams:
    """Mean and unbiased variance of ``ln(values)``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise InsufficientDataError("need at least two values")
    if not np.all(v > 0):
        raise DomainError("values must be positive")
    lv = np.log(v)
    return LognormalParams(float(lv.mean()), float(lv.var(ddof=1)))


def unit_growth_factors(panel: Panel) -> np.ndarray:
    """Period-on-period sales ratios of every product present in consecutive periods."""
    pers = panel.periods
    out = []
    for t, t1 in zip(pers[:-1], pers[1:]):
        a = panel.period == t
        b = panel.period == t1
        pa, sa = panel.product_code[a], panel.sales[a]
        pb, sb = panel.product_code[b], panel.sales[b]
        common, ia, ib = np.intersect1d(pa, pb, return_indices=True)
        out.append(sb[ib] / sa[ia])
    return np.concatenate(out) if out else np.empty(0)


def empirical_k(panel: Panel, level: str = "firm") -> KDistribution:
    """Table of unit counts per entity, pooled over periods."""
    _, codes = panel.entity_codes(level)
    ks = []
    for t in panel.periods:
        c = codes[panel.period == t]
        cnt = np.bincount(c)
        ks.append(cnt[cnt > 0])
    if not ks:
        raise InsufficientDataError("empty panel")
    return KDistribution.empirical(np.concatenate(ks))


# ---------------------------------------------------------------------------
# Synthetic panels
# ---------------------------------------------------------------------------


def simulate_panel(
    kdist: KDistribution,
    xi: LognormalParams,
    eta: LognormalParams,
    n_firms: int,
    periods: int = 10,
    n_markets: int = 0,
    seed: SeedLike = None,
    stream: int = 0,
    first_period: int = 2000,
) -> Panel:
    """Panel generated by the model itself.

    Each firm gets ``K ~ kdist`` products with lognormal initial sales that
    then follow independent Gibrat paths for ``periods`` periods.  Products
    are spread over ``n_markets`` markets with Zipf shares (blank market ids when
    ``n_markets`` is 0).
    """
    if periods < 1:
        raise ConfigurationError("periods must be >= 1")
    rng = make_rng(seed, stream)
    ks = kdist.sample(n_firms, rng)
    n_units = int(ks.sum())
    firm_of = np.repeat(np.arange(n_firms), ks)
    log_s = xi.m + xi.sd * rng.standard_normal(n_units)
    steps = eta.m + eta.sd * rng.standard_normal((periods - 1, n_units))
    paths = np.vstack([log_s, log_s + np.cumsum(steps, axis=0)]) if periods > 1 else log_s[None, :]
    # Zipf market shares so that market sizes span several decades
    shares = 1.0 / np.arange(1, n_markets + 1) if n_markets else None
    market = (
        np.char.add("M", rng.choice(n_markets, n_units, p=shares / shares.sum()).astype(str))
        if n_markets
        else np.full(n_units, "", dtype=str)
    )
    firm = np.char.add("F", firm_of.astype(str))
    product = np.char.add("P", np.arange(n_units).astype(str))
    return Panel(
        np.tile(market, periods),
        np.tile(firm, periods),
        np.tile(product, periods),
        np.repeat(np.arange(first_period, first_period + periods), n_units),
        np.exp(paths).ravel(),
    )
