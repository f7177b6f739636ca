"""Correlation statistics: Spearman, Pearson, and a Kendall tau adapted to
gold partial orders.

The partial-order tau compares a metric's ordering against subset
containment: tau = 1 - 2 * discongruent / pairs, where a metric tie on a
comparable pair counts as half discongruent.  Pairs inside one chain are
dependent, so significance comes from a seeded sign-flip permutation test
rather than the total-order normal approximation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _scipy_stats

EXACT_PERMUTATION_MAX_N = 10
DEFAULT_PERMUTATIONS = 10_000
_TIE_EPS = 1e-12


class ConstantInputError(ValueError):
    """Correlation is undefined when one input has zero variance."""


@dataclass(frozen=True)
class CorrelationReport:
    coefficient: float
    kind: str  # "spearman" | "pearson" | "kendall"
    n: int
    p_value: float
    method: str

    def __post_init__(self):
        if not -1.0 - 1e-9 <= self.coefficient <= 1.0 + 1e-9:
            raise ValueError("coefficient outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")

    def as_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "kind": self.kind,
            "n": self.n,
            "p_value": self.p_value,
            "method": self.method,
        }


def _check_paired(xs: Sequence[float], ys: Sequence[float], minimum: int) -> None:
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < minimum:
        raise ValueError(f"need at least {minimum} points, got {len(xs)}")
    if len(set(xs)) <= 1 or len(set(ys)) <= 1:
        raise ConstantInputError("correlation undefined for constant input")


def _pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = math.fsum((x - mx) ** 2 for x in xs)
    vy = math.fsum((y - my) ** 2 for y in ys)
    r = cov / math.sqrt(vx * vy)
    return min(1.0, max(-1.0, r))


def _t_test_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = abs(r) * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * _scipy_stats.t.sf(t, df=n - 2))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> CorrelationReport:
    """Product-moment correlation; p-value from the t distribution (n-2 df)."""
    _check_paired(xs, ys, minimum=3)
    r = _pearson_r(xs, ys)
    return CorrelationReport(r, "pearson", len(xs), _t_test_p(r, len(xs)), "t-approx")


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    return _scipy_stats.rankdata(values, method="average")


def spearman(xs: Sequence[float], ys: Sequence[float]) -> CorrelationReport:
    """Rank correlation with mean ranks for ties.

    The p-value is computed by exact permutation over all n! orderings for
    n <= 10 and by the t approximation above that.
    """
    _check_paired(xs, ys, minimum=3)
    n = len(xs)
    xr = _average_ranks(xs)
    yr = _average_ranks(ys)
    rho = _pearson_r(xr.tolist(), yr.tolist())
    if n <= EXACT_PERMUTATION_MAX_N:
        p = _exact_spearman_p(xr, yr, rho)
        method = "permutation-exact"
    else:
        p = _t_test_p(rho, n)
        method = "t-approx"
    return CorrelationReport(rho, "spearman", n, p, method)


def _exact_spearman_p(xr: np.ndarray, yr: np.ndarray, rho_obs: float) -> float:
    n = len(xr)
    xc = xr - xr.mean()
    yc = yr - yr.mean()
    scale = math.sqrt(float(xc @ xc) * float(yc @ yc))
    threshold = abs(rho_obs) * scale - _TIE_EPS
    hits = 0
    total = math.factorial(n)
    batch: list[tuple[int, ...]] = []

    def flush(batch_perms: list[tuple[int, ...]]) -> int:
        if not batch_perms:
            return 0
        arranged = yc[np.array(batch_perms)]
        stats = np.abs(arranged @ xc)
        return int((stats >= threshold).sum())

    for perm in itertools.permutations(range(n)):
        batch.append(perm)
        if len(batch) == 100_000:
            hits += flush(batch)
            batch = []
    hits += flush(batch)
    return hits / total


def kendall_tau_partial(
    pairs: Sequence[tuple[float, float]],
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> CorrelationReport:
    """Tau over comparable pairs: each pair is (metric on lower, metric on higher).

    A pair is discongruent when the metric scores the gold-higher correction
    strictly below the gold-lower one; ties count 0.5.  Significance is a
    sign-flip permutation test: under the null each non-tied pair flips
    direction with probability one half.
    """
    if not pairs:
        raise ValueError("no comparable pairs")
    n = len(pairs)
    ties = sum(1 for lower, higher in pairs if lower == higher)
    wrong = sum(1 for lower, higher in pairs if higher < lower)
    d_obs = wrong + 0.5 * ties
    tau_obs = 1.0 - 2.0 * d_obs / n

    n_free = n - ties
    gen = np.random.Generator(np.random.PCG64(seed))
    flipped = gen.binomial(n_free, 0.5, size=n_permutations) if n_free else np.zeros(n_permutations)
    tau_perm = 1.0 - 2.0 * (flipped + 0.5 * ties) / n
    hits = int((np.abs(tau_perm) >= abs(tau_obs) - _TIE_EPS).sum())
    p = (1 + hits) / (n_permutations + 1)
    return CorrelationReport(tau_obs, "kendall", n, p, f"signflip-{n_permutations}")


def rank_systems(scores: Sequence[float]) -> list[float]:
    """Descending ranking with shared mean ranks for ties (rank 1 = best)."""
    return _average_ranks([-s for s in scores]).tolist()
