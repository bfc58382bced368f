"""Steady-state wealth distributions by relative-entropy minimization.

Given thresholds ``k`` every agent of type ``t`` holds between 0 and
``k_t`` dollars.  The long-run fraction of agents of type ``t`` holding
``i`` dollars concentrates on the distribution ``d*`` that minimizes
relative entropy to the geometric base distribution ``q`` subject to the
type marginals ``f_t`` and mean wealth ``m``.  ``d*`` tilts ``q`` by
``lambda**i`` with the scalar ``lambda`` fixed by the mean constraint.

All products ``lambda**i * omega_t**i`` are evaluated in log space so that
large thresholds do not overflow.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import CapacityError, NumericalError, SpecError
from .model import GameSpec, check_thresholds

LAMBDA_TOL = 1e-10


@dataclass(frozen=True)
class MoneyDistribution:
    """Mass on each ``(type, dollars)`` pair, one array per type.

    ``values[t][i]`` is the fraction of all agents that have type ``t`` and
    ``i`` dollars, for ``i = 0..k_t``.  ``excess[t]`` holds mass of type
    ``t`` above ``k_t`` (only non-zero for empirical distributions observed
    before every agent has spent down to its threshold).
    """

    values: tuple[np.ndarray, ...]
    excess: tuple[float, ...] | None = None

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        for v in vals:
            if v.ndim != 1 or v.size == 0:
                raise SpecError("each type needs a non-empty 1-d array of levels")
        object.__setattr__(self, "values", vals)
        if self.excess is None:
            object.__setattr__(self, "excess", tuple(0.0 for _ in vals))

    @property
    def thresholds(self) -> tuple[int, ...]:
        return tuple(v.size - 1 for v in self.values)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.values)

    def marginals(self) -> np.ndarray:
        return np.array([v.sum() for v in self.values])

    def mean(self) -> float:
        return float(sum(np.dot(np.arange(v.size), v) for v in self.values))

    def rows(self):
        for t, v in enumerate(self.values):
            for i, x in enumerate(v):
                yield t, i, float(x)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["type_index", "dollars", "fraction"])
        for t, i, x in self.rows():
            w.writerow([t, i, repr(x)])
        return buf.getvalue()

    @classmethod
    def from_flat(cls, flat: np.ndarray, k: Sequence[int]) -> "MoneyDistribution":
        flat = np.asarray(flat, dtype=float)
        edges = np.cumsum([kt + 1 for kt in k])
        if edges[-1] != flat.size:
            raise SpecError("flat vector does not match the threshold layout")
        return cls(tuple(np.split(flat, edges[:-1])))

    def in_simplex(self, spec: GameSpec, atol: float = 1e-12) -> bool:
        """Whether the type marginals equal ``f`` and all entries are non-negative."""
        return bool(np.all(self.flat() >= 0) and np.allclose(self.marginals(), spec.f, rtol=0, atol=atol))


@dataclass(frozen=True)
class LambdaSolution:
    lam: float
    achieved_mean: float
    iterations: int
    bracket: tuple[float, float]


def _log_tilt(spec: GameSpec, k: Sequence[int], log_lam: float) -> list[np.ndarray]:
    """Per-type log weights ``i*log(lambda*omega_t)`` (unnormalized)."""
    out = []
    for t, kt in enumerate(k):
        out.append(np.arange(kt + 1) * (log_lam + math.log(spec.types[t].omega)))
    return out


def base_distribution(spec: GameSpec, k: Sequence[int]) -> MoneyDistribution:
    """Geometric base distribution ``q(t, i) ∝ omega_t**i`` over all pairs.

    The result sums to one over every ``(t, i)``; its type marginals are in
    general not ``f``.
    """
    k = check_thresholds(spec, k, strict=False)
    logs = _log_tilt(spec, k, 0.0)
    log_z = logsumexp(np.concatenate(logs))
    return MoneyDistribution(tuple(np.exp(lw - log_z) for lw in logs))


def _type_means(spec: GameSpec, k: Sequence[int], log_lam: float) -> np.ndarray:
    means = []
    for lw in _log_tilt(spec, k, log_lam):
        p = np.exp(lw - logsumexp(lw))
        means.append(np.dot(np.arange(lw.size), p))
    return np.array(means)


def mean_money(spec: GameSpec, k: Sequence[int], lam: float) -> float:
    """Mean wealth ``g(lambda)`` of the tilted distribution; increasing in lambda."""
    if not lam > 0:
        raise SpecError(f"lambda must be positive, got {lam}")
    k = check_thresholds(spec, k, strict=False)
    return float(np.dot(spec.f, _type_means(spec, k, math.log(lam))))


def solve_lambda(spec: GameSpec, k: Sequence[int], tol: float = LAMBDA_TOL, max_iter: int = 2000) -> LambdaSolution:
    """Find the unique ``lambda`` with ``g(lambda) = m``.

    The bracket grows geometrically from ``lambda = 1`` until it straddles
    ``m``; bisection then proceeds on ``log lambda``.
    """
    k = check_thresholds(spec, k, strict=True)
    m = float(spec.m)
    f = spec.f

    def g(log_lam):
        return float(np.dot(f, _type_means(spec, k, log_lam)))

    lo = hi = 0.0
    g0 = g(0.0)
    iterations = 1
    if abs(g0 - m) <= tol:
        return LambdaSolution(1.0, g0, iterations, (1.0, 1.0))
    step = math.log(2.0)
    if g0 < m:
        while g(hi) < m:
            lo, hi = hi, hi + step
            step *= 2
            iterations += 1
            if hi > 700:
                raise NumericalError("could not bracket lambda from above")
    else:
        while g(lo) > m:
            hi, lo = lo, lo - step
            step *= 2
            iterations += 1
            if lo < -700:
                raise NumericalError("could not bracket lambda from below")
    bracket = (math.exp(lo), math.exp(hi))
    mid = 0.5 * (lo + hi)
    gm = g(mid)
    while abs(gm - m) > tol:
        if gm < m:
            lo = mid
        else:
            hi = mid
        new_mid = 0.5 * (lo + hi)
        iterations += 1
        if new_mid == mid or iterations > max_iter:
            raise NumericalError(f"lambda bisection stalled at |g - m| = {abs(gm - m):.3e}")
        mid = new_mid
        gm = g(mid)
    return LambdaSolution(math.exp(mid), gm, iterations, bracket)


def tilted_distribution(spec: GameSpec, k: Sequence[int], lam: float) -> MoneyDistribution:
    """``d(t, i) = f_t lambda**i q(t, i) / sum_j lambda**j q(t, j)``."""
    logs = _log_tilt(spec, k, math.log(lam))
    return MoneyDistribution(tuple(ft * np.exp(lw - logsumexp(lw)) for ft, lw in zip(spec.f, logs)))


def min_relent_distribution(spec: GameSpec, k: Sequence[int], solution: LambdaSolution | None = None) -> MoneyDistribution:
    """The distribution ``d*`` in the simplex closest to ``q`` in relative entropy."""
    k = check_thresholds(spec, k, strict=True)
    if solution is None:
        solution = solve_lambda(spec, k)
    return tilted_distribution(spec, k, solution.lam)


def relative_entropy(d: MoneyDistribution, q: MoneyDistribution) -> float:
    """``sum d log(d/q)`` over entries with ``q > 0``; infinite if ``d`` charges a null of ``q``."""
    if d.thresholds != q.thresholds:
        raise SpecError(f"index sets differ: {d.thresholds} vs {q.thresholds}")
    dv, qv = d.flat(), q.flat()
    if np.any((qv == 0) & (dv > 0)):
        return math.inf
    mask = qv > 0
    return float(np.sum(xlogy(dv[mask], dv[mask]) - xlogy(dv[mask], qv[mask])))


def entropy(p: np.ndarray) -> float:
    """Shannon entropy ``-sum p log p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    return float(-np.sum(xlogy(p, p)))


def potential_v(d: MoneyDistribution, spec: GameSpec, k: Sequence[int], log_z: float | None = None) -> float:
    """Per-agent log-probability exponent of observing the distribution ``d``.

    ``V(d) = H(d) - H(f) - log Z + sum_{t,i} i d(t,i) log omega_t`` with
    ``H`` the Shannon entropy.  ``log_z`` is the per-agent log partition
    function; by default its large-population limit is used, which makes
    ``V(d*) = 0`` and ``V(d) = H(d*||q) - H(d||q)`` on the simplex.
    """
    k = check_thresholds(spec, k, strict=False)
    if d.thresholds != k:
        raise SpecError("distribution does not match thresholds")
    log_omega = np.log(spec.omega)

    def raw(x: MoneyDistribution) -> float:
        drift = sum(np.dot(np.arange(v.size), v) * lw for v, lw in zip(x.values, log_omega))
        return entropy(x.flat()) - entropy(spec.f) + drift

    if log_z is None:
        log_z = raw(min_relent_distribution(spec, k))
    return raw(d) - log_z


def distances(d: MoneyDistribution, target: MoneyDistribution) -> tuple[float, float]:
    """Euclidean distance and its square between two distributions on the same levels."""
    if d.thresholds != target.thresholds:
        raise SpecError("index sets differ")
    sq = float(np.sum((d.flat() - target.flat()) ** 2))
    return math.sqrt(sq), sq


def nearest_realizable(d: MoneyDistribution, spec: GameSpec) -> MoneyDistribution:
    """Round ``d`` to a distribution realizable by exactly ``h*n`` agents.

    Entries are rounded to the nearest ``1/(h n)`` (ties down).  Each type's
    marginal is then restored by moving single units on the entries with the
    largest rounding residuals, and the mean is restored by shifting single
    agents between adjacent levels, always taking the move that best
    reduces the deviation from ``d``.  Every entry of the result is a
    multiple of ``1/(h n)``, marginals are exactly ``f_t`` and the mean is
    exactly ``m``.
    """
    counts = realizable_counts(d, spec)
    N = spec.num_agents
    return MoneyDistribution(tuple(c / N for c in counts))


def realizable_counts(d: MoneyDistribution, spec: GameSpec) -> list[np.ndarray]:
    """Integer agent counts per ``(type, level)`` behind :func:`nearest_realizable`."""
    k = d.thresholds
    if len(k) != spec.num_types:
        raise SpecError("distribution has the wrong number of types")
    N = spec.num_agents
    targets = [int(f * spec.h) * spec.n for f in spec.fractions]
    money = spec.total_money
    if money > sum(kt * c for kt, c in zip(k, targets)):
        raise CapacityError("money supply exceeds what the thresholds can hold")

    x = [np.asarray(v, dtype=float) * N for v in d.values]
    counts = []
    for xt in x:
        fl = np.floor(xt)
        frac = xt - fl
        c = fl + (frac > 0.5 + 1e-9)
        # values within fp noise of an integer are integers
        near = np.abs(xt - np.rint(xt)) <= 1e-9 * max(1.0, N)
        c = np.where(near, np.rint(xt), c)
        counts.append(np.maximum(c, 0).astype(np.int64))

    for t, (c, xt) in enumerate(zip(counts, x)):
        diff = targets[t] - int(c.sum())
        while diff != 0:
            resid = xt - c
            if diff > 0:
                i = int(np.argmax(resid))
                c[i] += 1
                diff -= 1
            else:
                resid = np.where(c > 0, resid, np.inf)
                i = int(np.argmin(resid))
                c[i] -= 1
                diff += 1

    def total(cs):
        return sum(int(np.dot(np.arange(c.size), c)) for c in cs)

    gap = money - total(counts)
    while gap != 0:
        up = gap > 0
        best, best_score = None, -np.inf
        for t, (c, xt) in enumerate(zip(counts, x)):
            over = c - xt
            for i in range(c.size - 1):
                src, dst = (i, i + 1) if up else (i + 1, i)
                if c[src] == 0:
                    continue
                score = over[src] - over[dst]
                if score > best_score + 1e-12:
                    best, best_score = (t, src, dst), score
        if best is None:
            raise NumericalError("mean repair found no admissible move")
        t, src, dst = best
        counts[t][src] -= 1
        counts[t][dst] += 1
        gap += -1 if up else 1
    return counts


def realizable_l1_bound(spec: GameSpec, k: Sequence[int]) -> float:
    """Rounding error bound ``(sum_t (k_t+1)) (2c + 2) / (h n)``, ``c = max_t max(k_t - m, m)``."""
    m = float(spec.m)
    c = max(max(kt - m, m) for kt in k)
    return sum(kt + 1 for kt in k) * (2 * c + 2) / spec.num_agents
