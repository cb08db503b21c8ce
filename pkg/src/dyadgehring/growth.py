"""Growth tables: is a characteristic bounded or blowing up along a sequence?

A finite space never produces an infinite characteristic, so unboundedness is
read off a table of values indexed by depth (or tooth).  The classifier has
two tests:

* ``last / first >= diverging_ratio``: clear blow-up.
* a ratio test on the increments of ``value**power``: when every increment is
  positive and the last increment is at least the first, the increments are
  not summable and the sequence is flagged diverging even if it is still
  short of ``diverging_ratio``.  Slowly divergent sequences (logarithmic
  growth near a critical exponent) never reach a fixed ratio at desk depth,
  so this is what separates them from convergent ones.

Everything else with ``last / first < flat_ratio`` is flat; the remainder is
inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["GrowthTable", "classify_growth", "FLAT_RATIO", "DIVERGING_RATIO"]

FLAT_RATIO = 1.5
DIVERGING_RATIO = 10.0


@dataclass
class GrowthTable:
    index: list
    values: list
    label: str
    ratio: float
    increment_ratio: float | None = None
    power: float = 1.0
    extras: dict = field(default_factory=dict)

    @property
    def diverging(self) -> bool:
        return self.label == "diverging"

    @property
    def flat(self) -> bool:
        return self.label == "flat"

    def rows(self):
        return list(zip(self.index, self.values))

    def as_dict(self):
        return {"index": list(self.index), "values": [float(v) for v in self.values],
                "label": self.label, "ratio": self.ratio,
                "increment_ratio": self.increment_ratio, "power": self.power, **self.extras}


def _increment_ratio(values, power):
    """Geometric-mean ratio of successive increments of ``values**power``.

    ``None`` when some increment is not clearly positive.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3 or not np.all(np.isfinite(v)):
        return None
    if np.any(v <= 0):
        return None
    logs = power * np.log(v)
    top = logs.max()
    scaled = np.exp(logs - top)
    inc = np.diff(scaled)
    if np.any(inc <= 1e-9 * scaled[1:]):
        return None
    return float(math.exp((math.log(inc[-1]) - math.log(inc[0])) / (inc.size - 1)))


def classify_growth(values, index=None, power=1.0, flat_ratio=FLAT_RATIO,
                    diverging_ratio=DIVERGING_RATIO) -> GrowthTable:
    values = [float(v) for v in values]
    index = list(range(len(values))) if index is None else list(index)
    if len(values) != len(index):
        raise ValueError("index and values differ in length")
    if not values:
        raise ValueError("empty growth table")
    first, last = values[0], values[-1]
    if math.isinf(last) and not math.isinf(first):
        ratio = math.inf
    elif first > 0:
        ratio = last / first
    else:
        ratio = math.inf if last > 0 else 1.0
    inc = _increment_ratio(values, power)
    if ratio >= diverging_ratio:
        label = "diverging"
    elif inc is not None and inc >= 1.0:
        label = "diverging"
    elif ratio < flat_ratio:
        label = "flat"
    else:
        label = "inconclusive"
    return GrowthTable(index, values, label, float(ratio), inc, float(power))
