"""Round-by-round simulation of a scrip economy under threshold strategies.

Each round: nature picks a requester ``i`` with probability
``rho_{tau(i)}/(h n)``; every other agent can serve with probability
``beta``; a capable agent ``j`` volunteers iff ``x_j < k_{tau(j)}`` and the
requester holds at least one dollar; one volunteer is chosen with
probability proportional to ``chi`` and a dollar moves from requester to
volunteer.  With no volunteers the state is unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import SpecError
from ..model import GameSpec, check_thresholds
from ..wealth_entropy import MoneyDistribution, min_relent_distribution
from .sampling import AliasTable, UniformStream

# Exact recomputation of the running squared distance, against fp drift.
_RESYNC_EVERY = 8192


@dataclass(frozen=True)
class RoundOutcome:
    requester: int
    capable: int
    volunteers: int
    winner: int | None
    paid: bool


class _Book:
    """Per-threshold bookkeeping: eligible volunteers and level counts."""

    def __init__(self, state: "WealthState", k: tuple[int, ...]):
        spec = state.spec
        self.k = k
        self.N = spec.num_agents
        T = spec.num_types
        x = state._x
        types = state._types
        self.members = [np.flatnonzero(state.types == t).tolist() for t in range(T)]
        self.type_count = [len(mb) for mb in self.members]
        self.beta = [tp.beta for tp in spec.types]
        self.chi = [tp.chi for tp in spec.types]
        self.requests = AliasTable([tp.rho * len(mb) for tp, mb in zip(spec.types, self.members)])
        self.elig: list[list[int]] = [[] for _ in range(T)]
        self.pos = [-1] * self.N
        self.counts = [[0] * (kt + 1) for kt in k]
        self.excess = [0] * T
        for a in range(self.N):
            t, xa = types[a], x[a]
            if xa < k[t]:
                self.pos[a] = len(self.elig[t])
                self.elig[t].append(a)
            if xa <= k[t]:
                self.counts[t][xa] += 1
            else:
                self.excess[t] += 1
        self.target: list[list[float]] | None = None
        self.sq = 0.0

    # eligibility set with O(1) insert/remove ------------------------------
    def _add(self, t: int, a: int):
        self.pos[a] = len(self.elig[t])
        self.elig[t].append(a)

    def _remove(self, t: int, a: int):
        lst = self.elig[t]
        p = self.pos[a]
        last = lst.pop()
        if last != a:
            lst[p] = last
            self.pos[last] = p
        self.pos[a] = -1

    def set_target(self, target: MoneyDistribution | None):
        if target is None:
            self.target = None
            return
        if target.thresholds != self.k:
            raise SpecError("target distribution does not match thresholds")
        self.target = [list(map(float, v)) for v in target.values]
        self.resync()

    def resync(self):
        if self.target is None:
            return
        N = self.N
        self.sq = sum((c / N - d) ** 2 for cs, ds in zip(self.counts, self.target) for c, d in zip(cs, ds))

    def _level_change(self, t: int, old: int, new: int):
        kt = self.k[t]
        inv = 1.0 / self.N
        tgt = self.target
        if old <= kt:
            c = self.counts[t][old]
            if tgt is not None:
                diff = c * inv - tgt[t][old]
                self.sq += inv * inv - 2.0 * diff * inv
            self.counts[t][old] = c - 1
        else:
            self.excess[t] -= 1
        if new <= kt:
            c = self.counts[t][new]
            if tgt is not None:
                diff = c * inv - tgt[t][new]
                self.sq += inv * inv + 2.0 * diff * inv
            self.counts[t][new] = c + 1
        else:
            self.excess[t] += 1

    def distribution(self) -> MoneyDistribution:
        N = self.N
        return MoneyDistribution(
            tuple(np.array(c, dtype=float) / N for c in self.counts),
            excess=tuple(e / N for e in self.excess),
        )

    def eligible_total(self) -> int:
        return sum(len(e) for e in self.elig)


class WealthState:
    """Integer holdings of every agent; total is conserved.

    :func:`step` mutates the state in place.  Bookkeeping for the last
    threshold vector used is cached on the state.
    """

    def __init__(self, spec: GameSpec, holdings: Sequence[int]):
        h = np.asarray(holdings)
        if h.shape != (spec.num_agents,):
            raise SpecError(f"expected {spec.num_agents} holdings, got shape {h.shape}")
        if not np.issubdtype(h.dtype, np.integer) or np.any(h < 0):
            raise SpecError("holdings must be non-negative integers")
        if int(h.sum()) != spec.total_money:
            raise SpecError(f"holdings sum to {int(h.sum())}, expected m*h*n = {spec.total_money}")
        self.spec = spec
        self._x: list[int] = [int(v) for v in h]
        self.types = spec.agent_types()
        self._types: list[int] = self.types.tolist()
        self._book: _Book | None = None
        self.rounds = 0

    @property
    def holdings(self) -> np.ndarray:
        return np.array(self._x, dtype=np.int64)

    @property
    def total(self) -> int:
        return sum(self._x)

    def copy(self) -> "WealthState":
        c = WealthState(self.spec, self.holdings)
        c.rounds = self.rounds
        return c

    def book(self, k: Sequence[int]) -> _Book:
        k = tuple(int(v) for v in k)
        if self._book is None or self._book.k != k:
            check_thresholds(self.spec, k, strict=False)
            self._book = _Book(self, k)
        return self._book


def initial_state(spec: GameSpec, rng: np.random.Generator) -> WealthState:
    """Hand each of the ``m h n`` dollars to an agent chosen uniformly at random."""
    owners = rng.integers(0, spec.num_agents, size=spec.total_money)
    return WealthState(spec, np.bincount(owners, minlength=spec.num_agents))


def state_from_counts(spec: GameSpec, counts: Sequence[Sequence[int]], rng: np.random.Generator | None = None) -> WealthState:
    """Build a state with ``counts[t][i]`` agents of type ``t`` holding ``i`` dollars.

    Without ``rng`` the levels are assigned to agents of each type in
    increasing agent order; with ``rng`` the assignment is shuffled.
    """
    types = spec.agent_types()
    x = np.zeros(spec.num_agents, dtype=np.int64)
    for t, ct in enumerate(counts):
        agents = np.flatnonzero(types == t)
        ct = np.asarray(ct, dtype=np.int64)
        if ct.sum() != agents.size or np.any(ct < 0):
            raise SpecError(f"type {t}: counts must be non-negative and sum to {agents.size}")
        levels = np.repeat(np.arange(ct.size), ct)
        if rng is not None:
            levels = rng.permutation(levels)
        x[agents] = levels
    return WealthState(spec, x)


def step(state: WealthState, k: Sequence[int], rng: np.random.Generator, uniforms: UniformStream | None = None) -> tuple[WealthState, RoundOutcome]:
    """Play one round in place and report what happened."""
    book = state.book(k)
    if uniforms is None:
        uniforms = UniformStream(rng, block=8)
    return state, _play_round(state, book, rng, uniforms)


def _play_round(state: WealthState, book: _Book, rng: np.random.Generator, uniforms: UniformStream) -> RoundOutcome:
    x = state._x
    types = state._types
    k = book.k
    T = len(k)

    tr = book.requests.sample(uniforms())
    mem = book.members[tr]
    i = mem[min(int(uniforms() * len(mem)), len(mem) - 1)]
    xi = x[i]
    can_pay = xi >= 1
    i_elig = xi < k[tr]

    capable = 0
    vols = [0] * T
    total_w = 0.0
    for t in range(T):
        e = len(book.elig[t])
        if t == tr and i_elig:
            e -= 1
        other = book.type_count[t] - e - (1 if t == tr else 0)
        b = book.beta[t]
        if b >= 1.0:
            ce, ci = e, other
        else:
            ce = int(rng.binomial(e, b)) if e else 0
            ci = int(rng.binomial(other, b)) if other else 0
        capable += ce + ci
        if can_pay and ce:
            vols[t] = ce
            total_w += book.chi[t] * ce
    nvol = sum(vols)
    state.rounds += 1
    if nvol == 0:
        return RoundOutcome(i, capable, 0, None, False)

    # A uniform member of a uniform random subset of the eligible agents of
    # type t is a uniform eligible agent, so pick the type by chi-weighted
    # volunteer mass and then an agent uniformly.
    u = uniforms() * total_w
    tw = T - 1
    acc = 0.0
    for t in range(T):
        acc += book.chi[t] * vols[t]
        if u < acc:
            tw = t
            break
    while vols[tw] == 0:
        tw -= 1
    pool = book.elig[tw]
    while True:
        j = pool[min(int(uniforms() * len(pool)), len(pool) - 1)]
        if j != i:
            break

    # transfer one dollar i -> j
    xj = x[j]
    tj = types[j]
    x[i] = xi - 1
    x[j] = xj + 1
    book._level_change(tr, xi, xi - 1)
    book._level_change(tj, xj, xj + 1)
    if not i_elig and xi - 1 < k[tr]:
        book._add(tr, i)
    if xj + 1 >= k[tj]:
        book._remove(tj, j)
    return RoundOutcome(i, capable, nvol, j, True)


def empirical_distribution(state: WealthState, k: Sequence[int] | None = None) -> MoneyDistribution:
    """Fraction of all agents at each ``(type, level)``; mass above ``k_t`` goes to ``excess``."""
    spec = state.spec
    if k is None:
        x = state.holdings
        k = tuple(int(x[state.types == t].max()) for t in range(spec.num_types))
    return state.book(k).distribution()


@dataclass
class SimulationResult:
    rounds: int
    observations: int
    max_l2: float
    mean_l2: float
    max_l2_squared: float
    mean_l2_squared: float
    first_within: int | None
    within: float | None
    metric: str
    final: MoneyDistribution
    final_excess: float
    trace: np.ndarray | None = field(default=None, repr=False)

    TRACE_COLUMNS = ("round", "distance_L2", "distance_L2_squared", "volunteers", "frozen_flag")

    def trace_csv_rows(self):
        if self.trace is None:
            return
        for r, l2, sq, v, fr in self.trace:
            yield int(r), repr(float(l2)), repr(float(sq)), int(v), int(fr)


def simulate(
    spec: GameSpec,
    k: Sequence[int],
    rounds: int,
    rng: np.random.Generator,
    observe_every: int = 1,
    state: WealthState | None = None,
    target: MoneyDistribution | None = None,
    within: float | None = None,
    metric: str = "l2",
    keep_trace: bool = True,
    stop_when_within: bool = False,
) -> tuple[WealthState, SimulationResult]:
    """Run ``rounds`` rounds, observing the distance to ``d*`` every ``observe_every``.

    Observations happen at round 0 and after every ``observe_every``-th
    round.  Distances are taken over levels ``0..k_t`` only; agents still
    above their threshold are reported as excess mass.  ``within`` records
    the first observed round at which ``metric`` ("l2" or "l2_squared")
    drops to or below it.
    """
    if rounds < 0:
        raise SpecError("rounds must be non-negative")
    if observe_every < 1:
        raise SpecError("observe_every must be >= 1")
    if metric not in ("l2", "l2_squared"):
        raise SpecError(f"unknown metric {metric!r}")
    k = check_thresholds(spec, k, strict=True)
    if state is None:
        state = initial_state(spec, rng)
    if target is None:
        target = min_relent_distribution(spec, k)
    book = state.book(k)
    book.set_target(target)
    uniforms = UniformStream(rng)

    trace = [] if keep_trace else None
    stats = {"n": 0, "max_l2": 0.0, "sum_l2": 0.0, "max_sq": 0.0, "sum_sq": 0.0, "first": None}

    def observe(r: int, vols: int) -> bool:
        sq = max(book.sq, 0.0)
        l2 = math.sqrt(sq)
        stats["n"] += 1
        stats["sum_l2"] += l2
        stats["sum_sq"] += sq
        if l2 > stats["max_l2"]:
            stats["max_l2"] = l2
        if sq > stats["max_sq"]:
            stats["max_sq"] = sq
        if trace is not None:
            trace.append((r, l2, sq, vols, book.eligible_total() == 0))
        if within is not None and stats["first"] is None:
            if (l2 if metric == "l2" else sq) <= within:
                stats["first"] = r
                return True
        return False

    done = observe(0, 0) and stop_when_within
    r = 0
    while r < rounds and not done:
        out = _play_round(state, book, rng, uniforms)
        r += 1
        if r % _RESYNC_EVERY == 0:
            book.resync()
        if r % observe_every == 0:
            done = observe(r, out.volunteers) and stop_when_within

    n_obs = stats["n"]
    result = SimulationResult(
        rounds=r,
        observations=n_obs,
        max_l2=stats["max_l2"],
        mean_l2=stats["sum_l2"] / n_obs,
        max_l2_squared=stats["max_sq"],
        mean_l2_squared=stats["sum_sq"] / n_obs,
        first_within=stats["first"],
        within=within,
        metric=metric,
        final=book.distribution(),
        final_excess=float(sum(book.excess)) / book.N,
        trace=np.array(trace, dtype=float) if trace is not None else None,
    )
    return state, result
