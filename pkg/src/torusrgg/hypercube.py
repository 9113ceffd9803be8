"""Connection functions on the Boolean cube {+-1}^d.

A cube element g is encoded as an integer bitmask whose bit i is set when
``g_i = -1``. Group subtraction (coordinatewise product) is then xor and
``sum_i g_i = d - 2 * popcount(mask)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ValidationError

MAX_TABLE_D = 24


@dataclass(frozen=True)
class SigmaSpec:
    """Connection function sigma : {+-1}^d -> [0, 1].

    kind is one of ``"threshold"`` (``1[sum g_i >= tau]``), ``"dictator"``
    (``1[g_coord = +1]``), ``"constant"`` or ``"table"`` (explicit values
    indexed by bitmask, length ``2^d``).
    """

    kind: str
    tau: int = 0
    coord: int = 0
    value: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("threshold", "dictator", "constant", "table"):
            raise ValidationError(f"unknown sigma kind {self.kind!r}")
        if self.kind == "constant" and not (0.0 <= self.value <= 1.0):
            raise ValidationError("constant sigma must lie in [0, 1]")
        if self.kind == "table":
            if self.table is None:
                raise ValidationError("table sigma needs values")
            arr = np.asarray(self.table, dtype=float)
            if arr.size & (arr.size - 1) or arr.size < 2:
                raise ValidationError("table length must be a power of two >= 2")
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValidationError("table values must lie in [0, 1]")

    @classmethod
    def threshold_for_density(cls, d: int, p: float) -> "SigmaSpec":
        """Threshold spec whose density is the smallest achievable value >= p."""
        best = None
        for tau in range(-d, d + 2):
            if _threshold_density(d, tau) >= p:
                best = tau
        if best is None:  # pragma: no cover - tau=-d always has density 1
            raise ValidationError("no threshold reaches the requested density")
        return cls("threshold", tau=best)

    def table_dim(self) -> int | None:
        if self.kind != "table":
            return None
        return int(len(self.table)).bit_length() - 1

    def values(self, masks: np.ndarray, d: int) -> np.ndarray:
        """sigma evaluated at bitmask-encoded cube elements."""
        masks = np.asarray(masks, dtype=np.uint64)
        if self.kind == "threshold":
            s = d - 2 * np.bitwise_count(masks).astype(np.int64)
            return (s >= self.tau).astype(float)
        if self.kind == "dictator":
            if not (0 <= self.coord < d):
                raise ValidationError("dictator coordinate out of range")
            return (((masks >> np.uint64(self.coord)) & np.uint64(1)) == 0).astype(float)
        if self.kind == "constant":
            return np.full(masks.shape, float(self.value))
        if self.table_dim() != d:
            raise ValidationError(f"table has dimension {self.table_dim()}, model has d={d}")
        return np.asarray(self.table, dtype=float)[masks.astype(np.int64)]

    def is_boolean(self) -> bool:
        if self.kind == "constant":
            return self.value in (0.0, 1.0)
        if self.kind == "table":
            arr = np.asarray(self.table, dtype=float)
            return bool(np.all((arr == 0) | (arr == 1)))
        return True

    def density(self, d: int) -> float:
        """Exact E[sigma(g)] under uniform g."""
        if self.kind == "threshold":
            return _threshold_density(d, self.tau)
        if self.kind == "dictator":
            return 0.5
        if self.kind == "constant":
            return float(self.value)
        return float(np.mean(self.values(np.arange(2**d, dtype=np.uint64), d)))

    def describe(self) -> str:
        if self.kind == "threshold":
            return f"threshold:{self.tau}"
        if self.kind == "dictator":
            return f"dictator:{self.coord}"
        if self.kind == "constant":
            return f"constant:{self.value}"
        return f"table:d={self.table_dim()}"


def _threshold_density(d: int, tau: int) -> float:
    # sum g_i = d - 2k with k ~ Bin(d, 1/2) minus-ones
    return sum(comb(d, k) for k in range(d + 1) if d - 2 * k >= tau) / 2**d


def parse_sigma(text: str) -> SigmaSpec:
    """Parse ``threshold:T``, ``dictator[:i]``, ``constant:v``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "threshold":
            return SigmaSpec("threshold", tau=int(arg))
        if kind == "dictator":
            return SigmaSpec("dictator", coord=int(arg) if arg else 0)
        if kind == "constant":
            return SigmaSpec("constant", value=float(arg) if arg else 1.0)
    except ValueError as exc:
        raise ValidationError(f"bad sigma argument in {text!r}") from exc
    raise ValidationError(f"unknown sigma spec {text!r}")
