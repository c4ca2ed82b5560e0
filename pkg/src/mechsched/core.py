"""Domain types and metrics for makespan scheduling on unrelated machines.

Machines are rows and jobs are columns of the processing-time matrix.
Indices are 0-based throughout the Python API. An allocation is a tuple
``assign`` where ``assign[j]`` is the machine that receives job ``j``.
"""
from __future__ import annotations

import json
import math
import warnings
from fractions import Fraction
from typing import Sequence, Tuple, Union

import numpy as np

INF = math.inf

Allocation = Tuple[int, ...]
Extended = Union[Fraction, float]  # exact rational, or math.inf


class MechSchedError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(MechSchedError, ValueError):
    """Dimensions of two objects do not agree."""


class InfeasibleError(MechSchedError):
    """A job cannot be placed on any machine at finite cost."""


class ZeroOptWarning(UserWarning):
    """Approximation ratio requested against a zero optimum."""


def _as_matrix(p) -> np.ndarray:
    arr = np.array(p, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"processing times must be a non-empty 2-D matrix, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("NaN processing time")
    if np.isneginf(arr).any() or (arr < 0).any():
        raise ValueError("processing times must be >= 0 or +inf")
    arr.setflags(write=False)
    return arr


class Instance:
    """An ``n x m`` matrix of processing times, ``p[i, j]`` for machine i and job j.

    The matrix is stored read-only; instances are immutable and hashable.
    """

    __slots__ = ("p",)

    def __init__(self, p):
        arr = _as_matrix(p)
        if not np.isfinite(arr).any(axis=0).all():
            bad = int(np.flatnonzero(~np.isfinite(arr).any(axis=0))[0])
            raise InfeasibleError(f"job {bad} has no machine with finite processing time")
        object.__setattr__(self, "p", arr)
        self._validate()

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _validate(self) -> None:
        pass

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def m(self) -> int:
        return self.p.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.p.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.p, other.p))

    def __hash__(self) -> int:
        return hash((self.shape, self.p.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.p.tolist()!r})"

    def with_row(self, i: int, row) -> "Instance":
        """Copy of this instance with row ``i`` replaced (a unilateral report change)."""
        q = self.p.copy()
        q[i] = row
        return type(self)(q)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "p": [[_encode_number(v) for v in row] for row in self.p.tolist()],
        }

    @classmethod
    def from_dict(cls, d: dict):
        try:
            n, m, rows = int(d["n"]), int(d["m"]), d["p"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed instance record: {exc}") from None
        p = [[_decode_number(v) for v in row] for row in rows]
        if len(p) != n or any(len(row) != m for row in p):
            raise ShapeError(f"declared shape {n}x{m} does not match matrix")
        return cls(p)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


class Prediction(Instance):
    """Predicted processing times. Entries must be strictly positive or +inf."""

    def _validate(self) -> None:
        if (self.p == 0).any():
            raise ValueError("predicted processing times must be strictly positive")


def _encode_number(v: float):
    return "inf" if v == INF else v


def _decode_number(v) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "+inf", "infinity"):
            return INF
        raise ValueError(f"unrecognised number {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"unrecognised number {v!r}")
    return float(v)


def encode_vector(values) -> list:
    return [_encode_number(float(v)) for v in values]


# -- exact arithmetic -------------------------------------------------------
# Scaled processing times are compared exactly: a tie such as
# (p_hat[a]/p_hat[b]) * p_hat[b] == p_hat[a] must hold even when the float
# quotient would round. Floats convert to Fraction without loss.

def exact(v: float) -> Extended:
    return INF if v == INF else Fraction(v)


def exact_ratio(a: float, b: float) -> Extended:
    """a / b with x/0 = inf (x > 0), inf/inf = 1, inf/finite = inf, finite/inf = 0."""
    if a == INF:
        return Fraction(1) if b == INF else INF
    if b == INF:
        return Fraction(0)
    if b == 0:
        if a == 0:
            raise ValueError("0/0 ratio is undefined")
        return INF
    return Fraction(a) / Fraction(b)


def exact_product(r: Extended, p: float) -> Extended:
    """r * p where a zero job costs nothing under any finite scalar."""
    if p == 0 and r != INF:
        return Fraction(0)
    if r == INF or p == INF:
        if r == 0 or p == 0:
            raise ValueError("inf * 0 is undefined for scaled times")
        return INF
    return r * Fraction(p)


def to_float(v: Extended) -> float:
    return INF if v == INF else float(v)


# -- allocations ------------------------------------------------------------

def check_allocation(inst: Instance, alloc: Sequence[int]) -> Allocation:
    alloc = tuple(int(i) for i in alloc)
    if len(alloc) != inst.m:
        raise ShapeError(f"allocation covers {len(alloc)} jobs, instance has {inst.m}")
    for j, i in enumerate(alloc):
        if not 0 <= i < inst.n:
            raise ShapeError(f"job {j} assigned to machine {i}, valid range is 0..{inst.n - 1}")
    return alloc


def jobs_on(alloc: Allocation, i: int) -> frozenset:
    return frozenset(j for j, k in enumerate(alloc) if k == i)


def load_profile(inst: Instance, alloc: Sequence[int]) -> np.ndarray:
    """Per-machine loads; sums are correctly rounded so they do not depend on job order."""
    alloc = check_allocation(inst, alloc)
    per_machine = [[] for _ in range(inst.n)]
    for j, i in enumerate(alloc):
        per_machine[i].append(inst.p[i, j])
    return np.array([INF if INF in xs else math.fsum(xs) for xs in per_machine])


def makespan(inst: Instance, alloc: Sequence[int]) -> float:
    return float(load_profile(inst, alloc).max())


def exact_load(inst: Instance, alloc: Allocation, i: int) -> Extended:
    total = Fraction(0)
    for j, k in enumerate(alloc):
        if k == i:
            if inst.p[i, j] == INF:
                return INF
            total += Fraction(inst.p[i, j])
    return total


def exact_makespan(inst: Instance, alloc: Allocation) -> Extended:
    return max(exact_load(inst, alloc, i) for i in range(inst.n))


def prediction_error(inst: Instance, pred: Instance, exact_value: bool = False):
    """Largest multiplicative gap between actual and predicted entries.

    Conventions: x/0 = inf for x > 0 and inf/inf = 1. With ``exact_value``
    the result is a :class:`~fractions.Fraction` (or ``math.inf``).
    """
    if inst.shape != pred.shape:
        raise ShapeError(f"shape mismatch {inst.shape} vs {pred.shape}")
    worst: Extended = Fraction(1)
    for a, b in zip(inst.p.ravel().tolist(), pred.p.ravel().tolist()):
        if a == b:
            continue  # includes inf/inf and identical finite entries
        gap = max(exact_ratio(a, b), exact_ratio(b, a))
        if gap > worst:
            worst = gap
            if worst == INF:
                break
    return worst if exact_value else to_float(worst)


def approximation_ratio(inst: Instance, alloc: Sequence[int], opt: float) -> float:
    ms = makespan(inst, alloc)
    if opt == 0:
        if ms == 0:
            return 1.0
        warnings.warn("optimum is zero but makespan is not; ratio is infinite", ZeroOptWarning)
        return INF
    if ms == INF:
        return 1.0 if opt == INF else INF
    return ms / opt
