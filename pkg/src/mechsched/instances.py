"""Instance and prediction generators.

Random families take a seed or a ``numpy.random.Generator``. The named
constructions reproduce the two extremal instances used in the analysis of
the mechanisms: the 2x2 impossibility pair and the quadratic-robustness
family with ``2n - 2`` jobs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .core import INF, Instance, Prediction

Seed = Union[int, np.random.Generator, None]
FAMILIES = ("uniform", "correlated", "figure1", "figure2", "perturbed")


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int = 2
    m: int = 2
    lo: float = 1.0
    hi: float = 10.0
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if self.family == "figure1" and (self.n, self.m) != (2, 2):
            raise ValueError("figure1 is a 2x2 construction")
        if self.family == "figure2" and (self.n < 2 or self.m != 2 * self.n - 2):
            raise ValueError(f"figure2 needs n >= 2 and m = 2n - 2 (= {2 * self.n - 2})")


def generate(setup: GeneratorSpec) -> Tuple[Instance, Prediction]:
    """Build ``(instance, prediction)`` for any family.

    For the random families the prediction is exact (``uniform``,
    ``correlated``) or a perturbation of the instance at error ``eta``
    (``perturbed``).
    """
    params = setup.params
    if setup.family == "figure1":
        pred, inst = gen_figure1(params.get("K", 100.0), params.get("eps", 0.01))
        return inst, pred
    if setup.family == "figure2":
        pred, inst = gen_figure2(setup.n, params.get("eps", 0.01))
        return inst, pred
    rng = _rng(setup.seed)
    if setup.family == "correlated":
        inst = gen_correlated(setup.n, setup.m, setup.lo, setup.hi, rng, params.get("noise", 0.2))
    else:
        inst = gen_uniform(setup.n, setup.m, setup.lo, setup.hi, rng)
    if setup.family == "perturbed":
        return inst, gen_perturbed(inst, params.get("eta", 1.0), rng)
    return inst, Prediction(inst.p)


def gen_uniform(n: int, m: int, lo: float = 1.0, hi: float = 10.0, seed: Seed = None) -> Instance:
    if not (0 < lo <= hi < INF):
        raise ValueError(f"need 0 < lo <= hi < inf, got lo={lo}, hi={hi}")
    if lo == hi:
        return Instance(np.full((n, m), float(lo)))
    return Instance(_rng(seed).uniform(lo, hi, size=(n, m)))


def gen_correlated(n: int, m: int, lo: float = 1.0, hi: float = 10.0, seed: Seed = None,
                   noise: float = 0.2) -> Instance:
    """Job size times machine slowness, with multiplicative noise; values stay in [lo, hi]."""
    if not (0 < lo <= hi < INF):
        raise ValueError(f"need 0 < lo <= hi < inf, got lo={lo}, hi={hi}")
    rng = _rng(seed)
    span = math.sqrt(hi / lo)
    size = rng.uniform(1.0, span, size=m)
    slow = rng.uniform(1.0, span, size=n)
    jitter = np.exp(rng.uniform(-noise, noise, size=(n, m)))
    return Instance(np.clip(lo * np.outer(slow, size) * jitter, lo, hi))


def gen_figure1(K: float = 100.0, eps: float = 0.01) -> Tuple[Prediction, Instance]:
    """The 2x2 pair on which any 1-consistent monotone rule has makespan >= K."""
    if not K > 1 + eps or not eps > 0:
        raise ValueError("need eps > 0 and K > 1 + eps")
    pred = Prediction([[K, 1.0], [INF, K]])
    inst = Instance([[0.0, 1.0 + eps], [INF, K]])
    return pred, inst


def gen_figure2(n: int, eps: float = 0.01) -> Tuple[Prediction, Instance]:
    """The family with ``2n - 2`` jobs where capped scaling loses a factor ~ n(n-1).

    Small job ``i < n-1`` is predicted at 1 on machine ``i`` and at ``n`` on the
    last machine; big job ``n-1+i`` is predicted at ``n(n-1)`` on machine ``i``.
    In the actual instance small jobs take ``1 + eps`` on their own machine and
    big jobs are free on every machine except the last.
    """
    if n < 2:
        raise ValueError("figure2 needs n >= 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    m = 2 * n - 2
    pred = np.full((n, m), INF)
    inst = np.full((n, m), INF)
    for i in range(n - 1):
        pred[i, i] = 1.0
        pred[i, n - 1 + i] = n * (n - 1)
        pred[n - 1, i] = n
        inst[i, i] = 1.0 + eps
        inst[i, n - 1:] = 0.0
        inst[n - 1, i] = n
    return Prediction(pred), Instance(inst)


def gen_perturbed(base: Instance, target_eta: float, seed: Seed = None) -> Prediction:
    """Prediction whose error against ``base`` is exactly ``target_eta``.

    Each finite entry is multiplied by a factor drawn log-uniformly from
    ``[1/eta, eta]``; one entry is pushed to the extreme factor. Infinite
    entries are copied.
    """
    if not target_eta >= 1:
        raise ValueError(f"target_eta must be >= 1, got {target_eta}")
    p = base.p
    if (p == 0).any():
        raise ValueError("cannot perturb a base with zero entries into a valid prediction")
    finite = np.isfinite(p)
    if target_eta == 1:
        return Prediction(p)
    rng = _rng(seed)
    spread = math.log(target_eta)
    factors = np.exp(rng.uniform(-spread, spread, size=p.shape))
    pred = np.where(finite, p * factors, p)
    # keep every ratio within target_eta after rounding
    pred = np.where(finite, np.clip(pred, p / target_eta, p * target_eta), p)
    cells = np.flatnonzero(finite.ravel())
    k = cells[rng.integers(len(cells))]
    i, j = np.unravel_index(k, p.shape)
    pred[i, j] = p[i, j] * target_eta if rng.random() < 0.5 else p[i, j] / target_eta
    return Prediction(pred)
