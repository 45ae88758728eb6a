import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from tailcouple.errors import (
    EmptyInput,
    MalformedInput,
    NegativeValue,
    NonFiniteValue,
    ProbabilityOutOfRange,
    RankOutOfRange,
    TooFewObservations,
)

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 4


@dataclass(frozen=True, eq=False)
class Sample:
    """Sorted, non-negative loss observations. `values` is a read-only array."""

    values: np.ndarray
    source: str = "memory"

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return self.source == other.source and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.source, self.values.tobytes()))


def build_sample(raw: Iterable[float], source: str = "memory") -> Sample:
    """
    Validate raw losses and return them as a Sample sorted non-decreasingly.
    Ties are kept; the stable sort makes rebuilding from `values` idempotent.
    """
    arr = np.array(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput()

    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NonFiniteValue(int(bad[0]))
    negative = np.flatnonzero(arr < 0)
    if negative.size:
        raise NegativeValue(int(negative[0]))
    if arr.size < MIN_OBSERVATIONS:
        raise TooFewObservations(
            f"need at least {MIN_OBSERVATIONS} observations, got {arr.size}"
        )

    values = np.sort(arr, kind="stable")
    values.flags.writeable = False
    return Sample(values=values, source=source)


def order_statistic(s: Sample, j: int) -> float:
    """X_{j:n}, the j-th smallest value (1-based)."""
    if not 1 <= j <= s.n:
        raise RankOutOfRange(f"rank {j} outside [1, {s.n}]")
    return float(s.values[j - 1])


def empirical_quantile(s: Sample, u: float) -> float:
    """Left-continuous empirical quantile X_{⌈nu⌉:n}."""
    if not 0.0 < u < 1.0:
        raise ProbabilityOutOfRange(f"probability {u} outside (0, 1)")
    j = math.ceil(s.n * u)
    # n*u can overshoot an integer by one ulp when u was computed as j/n
    if j > 1 and (j - 1) / s.n >= u:
        j -= 1
    return order_statistic(s, min(max(j, 1), s.n))


def read_csv(path: Union[str, Path]) -> Sample:
    """
    Read one loss per line. A single non-numeric first line is treated as a
    header, blank lines are skipped, and any later unparsable line raises
    MalformedInput naming its 1-based line number.
    """
    path = Path(path)
    values = []
    seen_content = False
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                if not seen_content:
                    logger.info("Treating line %d of %s as a header: %r", line_no, path, text)
                else:
                    raise MalformedInput(line_no, text) from None
            seen_content = True
    return build_sample(values, source=str(path))


def write_csv(s: Sample, path: Union[str, Path], header: str = "loss") -> None:
    """Write the sample with round-trip exact float formatting."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{header}\n")
        for v in s.values:
            fh.write(f"{float(v)!r}\n")
