"""Exact transition matrix and stationary distribution for small economies.

The closed form ``pi(x) ∝ prod_i omega_{tau(i)}**x_i`` is compared against
the stationary vector of the explicitly built chain.  The winner
probability of a volunteer ``j`` given requester ``i`` is
``beta_j E[chi_j / (chi_j + S)]`` where ``S`` is the chi-mass of the other
capable eligible agents; ``S`` is a sum of per-type binomials and the
expectation is evaluated exactly.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components
from scipy.stats import binom

from ..errors import ReducibleChainError, SpecError, StateSpaceOverflow
from ..model import GameSpec, check_thresholds

log = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 200_000
AGREEMENT_TOL = 1e-8


@dataclass
class ExactStationary:
    states: np.ndarray
    pi_closed_form: np.ndarray
    pi_solved: np.ndarray
    transition: sp.csr_matrix = field(repr=False)
    max_abs_diff: float
    detailed_balance_residual: float
    agrees: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n_agents = self.states.shape[1]
        w.writerow(["state_id", *[f"x{i}" for i in range(n_agents)], "pi_closed_form", "pi_solved"])
        for sid, (row, a, b) in enumerate(zip(self.states, self.pi_closed_form, self.pi_solved)):
            w.writerow([sid, *map(int, row), repr(float(a)), repr(float(b))])
        return buf.getvalue()


def enumerate_states(spec: GameSpec, k: Sequence[int], max_states: int = DEFAULT_MAX_STATES) -> np.ndarray:
    """All holdings vectors with ``x_i <= k_{tau(i)}`` and total ``m h n``, lexicographic."""
    caps = [k[t] for t in spec.agent_types()]
    total = spec.total_money
    N = len(caps)
    # suffix capacity for pruning
    suffix = [0] * (N + 1)
    for i in range(N - 1, -1, -1):
        suffix[i] = suffix[i + 1] + caps[i]
    out: list[tuple[int, ...]] = []
    cur = [0] * N

    def rec(i: int, left: int):
        if i == N - 1:
            if left <= caps[i]:
                cur[i] = left
                out.append(tuple(cur))
                if len(out) > max_states:
                    raise StateSpaceOverflow(f"more than {max_states} states")
            return
        lo = max(0, left - suffix[i + 1])
        for v in range(lo, min(caps[i], left) + 1):
            cur[i] = v
            rec(i + 1, left - v)

    rec(0, total)
    return np.array(out, dtype=np.int64).reshape(-1, N)


def transition_matrix(spec: GameSpec, k: Sequence[int], states: np.ndarray) -> sp.csr_matrix:
    """Row-stochastic one-round transition matrix over ``states``."""
    types = spec.agent_types().tolist()
    T = spec.num_types
    beta = [tp.beta for tp in spec.types]
    chi = [tp.chi for tp in spec.types]
    rho = [tp.rho for tp in spec.types]
    N = spec.num_agents
    index = {tuple(s): r for r, s in enumerate(states.tolist())}

    @lru_cache(maxsize=None)
    def win_prob(counts: tuple[int, ...], tj: int) -> float:
        # E[chi_j / (chi_j + S)], S = sum_t chi_t Bin(counts_t, beta_t)
        supports = [range(c + 1) for c in counts]
        pmfs = [binom.pmf(np.arange(c + 1), c, beta[t]) for t, c in enumerate(counts)]
        acc = 0.0
        for combo in itertools.product(*supports):
            p = 1.0
            s = 0.0
            for t, b in enumerate(combo):
                p *= pmfs[t][b]
                s += chi[t] * b
            acc += p * chi[tj] / (chi[tj] + s)
        return beta[tj] * acc

    rows, cols, vals = [], [], []
    for r, x in enumerate(states.tolist()):
        out_mass = 0.0
        eligible = [a for a in range(N) if x[a] < k[types[a]]]
        for i in range(N):
            if x[i] < 1:
                continue
            p_req = rho[types[i]] / N
            others = [a for a in eligible if a != i]
            base = [0] * T
            for a in others:
                base[types[a]] += 1
            for j in others:
                tj = types[j]
                c = list(base)
                c[tj] -= 1
                p = p_req * win_prob(tuple(c), tj)
                y = list(x)
                y[i] -= 1
                y[j] += 1
                rows.append(r)
                cols.append(index[tuple(y)])
                vals.append(p)
                out_mass += p
        rows.append(r)
        cols.append(r)
        vals.append(1.0 - out_mass)
    n = len(states)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def closed_form_stationary(spec: GameSpec, states: np.ndarray) -> np.ndarray:
    """``pi(x) = w_x / Z`` with ``w_x = prod_i omega_{tau(i)}**x_i``."""
    log_omega = np.log(spec.omega)[spec.agent_types()]
    logw = states @ log_omega
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def solve_stationary(P: sp.csr_matrix) -> np.ndarray:
    """Stationary row vector of an irreducible stochastic matrix (direct sparse solve)."""
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = (P.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = spla.spsolve(A.tocsc(), b)
    return np.asarray(pi).ravel()


def check_ergodic(P: sp.csr_matrix) -> None:
    """Raise :class:`ReducibleChainError` unless ``P`` is irreducible and aperiodic."""
    n_comp, _ = connected_components(P, directed=True, connection="strong")
    if n_comp != 1:
        raise ReducibleChainError(f"chain has {n_comp} strongly connected components")
    if P.diagonal().max() > 0:
        return  # a self-loop in an irreducible chain forces period 1
    G = nx.from_scipy_sparse_array(P, create_using=nx.DiGraph)
    if not nx.is_aperiodic(G):
        raise ReducibleChainError("chain is periodic")


def detailed_balance_residual(pi: np.ndarray, P: sp.csr_matrix) -> float:
    """``max |pi_x P_xy - pi_y P_yx|`` over all pairs."""
    F = sp.diags(pi) @ P
    D = (F - F.T).tocoo()
    return float(np.abs(D.data).max()) if D.nnz else 0.0


def exact_stationary(spec: GameSpec, k: Sequence[int], max_states: int = DEFAULT_MAX_STATES, tol: float = AGREEMENT_TOL) -> ExactStationary:
    """Closed-form and solved stationary distributions of the exact chain.

    Requires at least three agents and ``m < sum_t f_t k_t``.  Disagreement
    above ``tol`` is flagged via ``agrees`` (and logged), not raised.
    """
    k = check_thresholds(spec, k, strict=True)
    if spec.num_agents < 3:
        raise SpecError("the exact chain needs at least three agents")
    states = enumerate_states(spec, k, max_states)
    P = transition_matrix(spec, k, states)
    check_ergodic(P)
    pi_cf = closed_form_stationary(spec, states)
    pi_solved = solve_stationary(P)
    diff = float(np.max(np.abs(pi_cf - pi_solved)))
    res = detailed_balance_residual(pi_cf, P)
    agrees = diff <= tol
    if not agrees:
        log.warning("closed-form stationary distribution off by %.3e (L-inf)", diff)
    return ExactStationary(states, pi_cf, pi_solved, P, diff, res, agrees)


def state_count(spec: GameSpec, k: Sequence[int]) -> int:
    """Number of states, by generating-function convolution (no enumeration)."""
    poly = np.zeros(spec.total_money + 1, dtype=object)
    poly[0] = 1
    for t in spec.agent_types():
        nxt = np.zeros_like(poly)
        for v in range(k[t] + 1):
            nxt[v:] += poly[: poly.size - v]
        poly = nxt
    return int(poly[spec.total_money])
