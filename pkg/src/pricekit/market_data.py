"""Option-chain ingestion and quote normalization.

Chains are read from CSV files with header ``kind,strike,maturity_days,price``
(kind C or P). Put quotes can be converted to synthetic calls through
put-call parity so that calibration works on a homogeneous call set.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import DuplicateQuote, EmptyChain, KindMismatch, MalformedRow


class OptionKind(Enum):
    CALL = "C"
    PUT = "P"


@dataclass(frozen=True)
class MarketContext:
    """Spot, risk-free rate and day-count base shared by a quote set."""

    spot: float
    risk_free_rate: float
    trading_days_per_year: int = 250

    def __post_init__(self):
        if not (self.spot > 0):
            raise ValueError(f"spot must be positive, got {self.spot}")
        if self.trading_days_per_year <= 0:
            raise ValueError("trading_days_per_year must be positive")
        if not math.isfinite(self.risk_free_rate):
            raise ValueError("risk_free_rate must be finite")


@dataclass(frozen=True)
class OptionQuote:
    """One observed option price.

    ``parity_floored`` marks synthetic calls whose parity-implied price was
    negative (stale put quote) and got floored at zero.
    """

    kind: OptionKind
    strike: float
    maturity_days: int
    price: float
    parity_floored: bool = False

    def __post_init__(self):
        if not (self.strike > 0):
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.maturity_days <= 0:
            raise ValueError("maturity_days must be positive")
        if self.price < 0:
            raise ValueError(f"price must be nonnegative, got {self.price}")

    @property
    def key(self) -> tuple:
        return (self.kind.value, self.strike, self.maturity_days)


@dataclass(frozen=True)
class QuoteSet:
    """An option chain tied to a single market context."""

    context: MarketContext
    quotes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "quotes", tuple(self.quotes))
        seen = set()
        for q in self.quotes:
            if q.key in seen:
                raise DuplicateQuote(q.key)
            seen.add(q.key)

    def __len__(self) -> int:
        return len(self.quotes)

    def __iter__(self):
        return iter(self.quotes)

    def maturities(self) -> list:
        return sorted({q.maturity_days for q in self.quotes})

    def filter_maturity(self, maturity_days: Iterable[int]) -> "QuoteSet":
        keep = set(maturity_days)
        return QuoteSet(self.context, tuple(q for q in self.quotes if q.maturity_days in keep))

    def calls_only(self) -> "QuoteSet":
        """Convert every put to a synthetic call via parity."""
        out = []
        for q in self.quotes:
            out.append(q if q.kind is OptionKind.CALL else put_to_synthetic_call(q, self.context))
        return QuoteSet(self.context, tuple(out))


def year_fraction(maturity_days: int, context: MarketContext) -> float:
    if maturity_days < 0:
        raise ValueError("maturity_days must be nonnegative")
    return maturity_days / context.trading_days_per_year


def put_to_synthetic_call(quote: OptionQuote, context: MarketContext) -> OptionQuote:
    """Synthetic call at the same (K, T): C = P + S0 - K*exp(-r*T).

    A negative parity-implied price is floored at zero and flagged.
    """
    if quote.kind is not OptionKind.PUT:
        raise KindMismatch(f"expected a put, got {quote.kind}")
    t = year_fraction(quote.maturity_days, context)
    price = quote.price + context.spot - quote.strike * math.exp(-context.risk_free_rate * t)
    floored = price < 0
    return OptionQuote(
        kind=OptionKind.CALL,
        strike=quote.strike,
        maturity_days=quote.maturity_days,
        price=max(price, 0.0),
        parity_floored=floored,
    )


CHAIN_HEADER = ["kind", "strike", "maturity_days", "price"]


def load_option_chain(path, context: MarketContext) -> QuoteSet:
    """Read an option chain CSV, preserving file order.

    Raises MalformedRow / DuplicateQuote / EmptyChain per the file contract.
    """
    path = Path(path)
    quotes = []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CHAIN_HEADER:
            raise MalformedRow(1, f"expected header {','.join(CHAIN_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise MalformedRow(line_no, f"expected 4 fields, got {len(row)}")
            try:
                kind = OptionKind(row[0].strip().upper())
                quote = OptionQuote(
                    kind=kind,
                    strike=float(row[1]),
                    maturity_days=int(row[2]),
                    price=float(row[3]),
                )
            except (ValueError, KeyError) as exc:
                raise MalformedRow(line_no, str(exc)) from exc
            if quote.key in seen:
                raise DuplicateQuote(quote.key)
            seen.add(quote.key)
            quotes.append(quote)
    if not quotes:
        raise EmptyChain(f"no valid rows in {path}")
    return QuoteSet(context, tuple(quotes))


def dump_option_chain(quote_set: QuoteSet, path) -> None:
    """Write a chain back out in the same CSV schema (load/dump roundtrips)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHAIN_HEADER)
        for q in quote_set:
            writer.writerow([q.kind.value, repr(q.strike), q.maturity_days, repr(q.price)])
