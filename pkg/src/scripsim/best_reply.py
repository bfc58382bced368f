"""Single-agent best replies to a threshold profile.

When everyone else plays thresholds ``k`` and the wealth distribution sits
at ``d*``, one agent's wealth is a birth-death walk: it earns a dollar with
probability ``p_u`` per round when willing to serve and spends one with
probability ``p_d`` when it has money.  Volunteering at wealth ``kappa - 1``
pays off iff ``alpha <= gamma E[z**J(kappa)]``, where ``J(kappa)`` is the
time an agent starting at ``kappa`` and never volunteering at ``kappa``
takes to go broke and ``z`` is the per-round discount.  The best reply is
the largest such ``kappa``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, SpecError
from .model import GameSpec, check_thresholds, per_round_discount
from .wealth_entropy import LambdaSolution, min_relent_distribution, solve_lambda

PU_IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class ChoiceProbabilities:
    p_u: float
    p_d: float
    volunteer_mass: tuple[float, ...]
    lam: float
    p_u_identity: float


def choice_probabilities(spec: GameSpec, k: Sequence[int], t: int, solution: LambdaSolution | None = None) -> ChoiceProbabilities:
    """Earning and spending probabilities for an agent of type ``t``.

    ``p_u`` is the chance that some other agent with money requests times
    the chance that this agent wins among the expected volunteers
    ``beta_t' (f_t' - d*(t', k_t')) n``; the agent's own effect on those
    counts is ignored.  It is cross-checked against the closed form
    ``p_d lambda omega_t``.
    """
    k = check_thresholds(spec, k, strict=True)
    if solution is None:
        solution = solve_lambda(spec, k)
    d = min_relent_distribution(spec, k, solution)
    f = spec.f
    n = spec.n
    tp = spec.types[t]
    requesting = sum(spec.types[s].rho * (f[s] - d.values[s][0]) for s in range(spec.num_types))
    upsilon = tuple(float(spec.types[s].beta * (f[s] - d.values[s][-1]) * n) for s in range(spec.num_types))
    weight = sum(spec.types[s].chi * upsilon[s] for s in range(spec.num_types))
    if weight <= 0:
        raise SpecError("no volunteers: every type has threshold 0")
    p_u = float(requesting * tp.chi * tp.beta / weight)
    p_d = tp.rho / n
    identity = p_d * solution.lam * tp.omega
    if abs(p_u - identity) > PU_IDENTITY_TOL:
        raise NumericalError(f"p_u cross-check failed: {p_u!r} vs p_d*lambda*omega = {identity!r}")
    if p_u + p_d > 1:
        raise SpecError(f"p_u + p_d = {p_u + p_d:.4f} > 1: too few replicas (n = {n}) for the single-agent model")
    return ChoiceProbabilities(p_u, p_d, upsilon, solution.lam, identity)


def ruin_factors(max_kappa: int, p_u: float, p_d: float, z: float) -> np.ndarray:
    """``E[z**J(kappa)]`` for ``kappa = 1..max_kappa`` in one O(max_kappa) sweep.

    ``phi_0 = 1``; below the top ``phi_i = z (p_u phi_{i+1} + p_d phi_{i-1}
    + (1 - p_u - p_d) phi_i)``; at the top ``kappa`` there is no up-move.
    Forward elimination writes ``phi_i = a_i phi_{i+1} + b_i``; the
    coefficients do not depend on ``kappa``, so each ``phi_kappa`` follows
    from closing the recursion with the top row.
    """
    if not 0 < z < 1:
        raise SpecError(f"discount z must be in (0, 1), got {z}")
    if p_u < 0 or p_d <= 0 or p_u + p_d > 1:
        raise SpecError(f"need p_u >= 0, p_d > 0, p_u + p_d <= 1; got {p_u}, {p_d}")
    if max_kappa < 1:
        raise SpecError("kappa must be >= 1")
    diag = 1.0 - z * (1.0 - p_u - p_d)
    top_diag = 1.0 - z * (1.0 - p_d)
    zu, zd = z * p_u, z * p_d
    out = np.empty(max_kappa)
    a, b = 0.0, 1.0
    for kappa in range(1, max_kappa + 1):
        out[kappa - 1] = zd * b / (top_diag - zd * a)
        piv = diag - zd * a
        a, b = zu / piv, zd * b / piv
    return out


def discounted_ruin_factor(kappa: int, p_u: float, p_d: float, z: float) -> float:
    """``E[z**J]`` for an agent starting with ``kappa`` dollars playing threshold ``kappa``."""
    return float(ruin_factors(kappa, p_u, p_d, z)[-1])


@dataclass(frozen=True)
class BestReplyReport:
    type: int
    kappa: int
    lhs_alpha: float
    rhs_at_kappa: float
    rhs_at_kappa_plus_1: float
    z: float
    p_u: float
    p_d: float
    lam: float
    capped: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def best_reply_threshold(spec: GameSpec, k: Sequence[int], t: int, cap: int | None = None, probs: ChoiceProbabilities | None = None) -> BestReplyReport:
    """Largest ``kappa <= cap`` with ``alpha_t <= gamma_t E[z**J(kappa)]`` (0 if none).

    The scan runs upward from ``kappa = 1`` and asserts that the ruin factor
    keeps decreasing; reaching ``cap`` with the inequality still holding
    sets ``capped``.
    """
    if cap is None:
        cap = spec.default_cap()
    if probs is None:
        probs = choice_probabilities(spec, k, t)
    tp = spec.types[t]
    z = per_round_discount(tp.delta, spec.n)
    phi = ruin_factors(cap + 1, probs.p_u, probs.p_d, z)
    ok = tp.alpha <= phi * tp.gamma
    failing = np.flatnonzero(~ok)
    kappa = int(failing[0]) if failing.size else cap + 1
    capped = kappa > cap
    kappa = min(kappa, cap)
    # only the scanned prefix needs to be monotone
    upto = min(kappa + 1, cap + 1)
    if upto > 1 and np.any(np.diff(phi[:upto]) >= 0):
        raise NumericalError("ruin factor is not strictly decreasing in kappa")
    rhs_k = tp.gamma if kappa == 0 else float(phi[kappa - 1] * tp.gamma)
    return BestReplyReport(
        type=t,
        kappa=kappa,
        lhs_alpha=tp.alpha,
        rhs_at_kappa=rhs_k,
        rhs_at_kappa_plus_1=float(phi[kappa] * tp.gamma),
        z=z,
        p_u=probs.p_u,
        p_d=probs.p_d,
        lam=probs.lam,
        capped=capped,
    )


@dataclass
class PolicyResult:
    actions: np.ndarray
    values: np.ndarray
    threshold: int
    iterations: int
    q_gap: np.ndarray

    @property
    def is_threshold(self) -> bool:
        a = self.actions
        return bool(np.all(a[: self.threshold] == 1) and np.all(a[self.threshold :] == 0))


def value_iteration_policy(
    spec: GameSpec,
    k: Sequence[int],
    t: int,
    state_cap: int | None = None,
    tol: float = 1e-12,
    max_iter: int = 2_000_000,
    probs: ChoiceProbabilities | None = None,
) -> PolicyResult:
    """Optimal stationary policy of the single-agent MDP by value iteration.

    States are wealth levels ``0..state_cap``; action 1 volunteers (earning
    with probability ``p_u`` at cost ``alpha``), and with money a request is
    satisfied with probability ``p_d`` for ``gamma``.  Volunteering is not
    available at ``state_cap``.  Each sweep solves out the self-transition
    of every (state, action) pair, which leaves the fixed point unchanged
    but contracts at a rate independent of ``n``.

    Raises :class:`NumericalError` unless the optimal policy has threshold
    form and the value function is concave.
    """
    if probs is None:
        probs = choice_probabilities(spec, k, t)
    tp = spec.types[t]
    z = per_round_discount(tp.delta, spec.n)
    return solve_wealth_mdp(tp.alpha, tp.gamma, probs.p_u, probs.p_d, z,
                            state_cap if state_cap is not None else spec.total_money, tol, max_iter)


def solve_wealth_mdp(alpha: float, gamma: float, p_u: float, p_d: float, z: float, cap: int,
                     tol: float = 1e-12, max_iter: int = 2_000_000) -> PolicyResult:
    """Value iteration on the birth-death wealth MDP with explicit parameters."""
    if cap < 1:
        raise SpecError("state cap must be >= 1")
    s = np.arange(cap + 1)
    has_money = s > 0
    pd = np.where(has_money, p_d, 0.0)
    pu = np.where(s < cap, p_u, 0.0)
    r0 = np.where(has_money, gamma * p_d, 0.0)
    r1 = r0 - alpha * pu
    stay0 = 1.0 - pd
    stay1 = 1.0 - pd - pu
    den0 = 1.0 - z * stay0
    den1 = 1.0 - z * stay1
    u = np.zeros(cap + 1)
    for it in range(1, max_iter + 1):
        down = np.concatenate(([0.0], u[:-1]))
        up = np.concatenate((u[1:], [0.0]))
        v0 = (r0 + z * pd * down) / den0
        v1 = (r1 + z * (pd * down + pu * up)) / den1
        new = np.maximum(v0, v1)
        delta = np.max(np.abs(new - u))
        u = new
        if delta <= tol:
            break
    else:
        raise NumericalError(f"value iteration did not reach {tol} in {max_iter} sweeps")
    # undiscounted-by-elimination Q gap: Q(s,1) - Q(s,0) = p_u (z (u(s+1) - u(s)) - alpha)
    up = np.concatenate((u[1:], [u[-1]]))
    gap = pu * (z * (up - u) - alpha)
    actions = ((gap >= 0) & (pu > 0)).astype(int)
    threshold = int(np.argmin(actions)) if actions.min() == 0 else cap + 1
    res = PolicyResult(actions, u, threshold, it, gap)
    if not res.is_threshold:
        raise NumericalError("optimal policy is not of threshold form")
    second = u[2:] + u[:-2] - 2 * u[1:-1]
    scale = max(1.0, float(np.max(np.abs(u))))
    if second.size and np.max(second) > 1e-9 * scale:
        raise NumericalError(f"value function not concave (max second difference {np.max(second):.3e})")
    return res
