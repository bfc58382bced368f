"""Greatest threshold equilibrium by best-reply dynamics.

Best replies are monotone in the profile, so iterating ``k <- BR(k)`` from
the largest representable profile descends to the greatest fixed point.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

from .best_reply import BestReplyReport, best_reply_threshold, choice_probabilities
from .errors import NumericalError, SpecError
from .model import GameSpec, below_capacity
from .wealth_entropy import solve_lambda


def best_reply_vector(spec: GameSpec, k: Sequence[int], cap: int | None = None) -> tuple[tuple[int, ...], list[BestReplyReport] | None]:
    """Per-type best replies to ``k``.

    A profile at or above capacity (``m >= sum_t f_t k_t``) freezes the
    economy: nobody can spend, so every best reply is 0 and no reports are
    returned.
    """
    if cap is None:
        cap = spec.default_cap()
    k = tuple(int(v) for v in k)
    if len(k) != spec.num_types or any(v < 0 for v in k):
        raise SpecError(f"need {spec.num_types} non-negative thresholds, got {k}")
    if not below_capacity(spec, k):
        return (0,) * spec.num_types, None
    sol = solve_lambda(spec, k)
    reports = [
        best_reply_threshold(spec, k, t, cap, probs=choice_probabilities(spec, k, t, sol))
        for t in range(spec.num_types)
    ]
    return tuple(r.kappa for r in reports), reports


@dataclass
class EquilibriumResult:
    thresholds: tuple[int, ...]
    classification: str  # "trivial" | "nontrivial" | "capped"
    trace: list[tuple[int, ...]]
    reports: list[BestReplyReport] | None
    cap: int
    cap_doublings: int = 0
    frozen_at: int | None = field(default=None)

    @property
    def is_trivial(self) -> bool:
        return self.classification == "trivial"

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "classification": self.classification,
            "cap": self.cap,
            "cap_doublings": self.cap_doublings,
            "frozen_at_step": self.frozen_at,
            "steps": len(self.trace) - 1,
            "reports": None if self.reports is None else [r.to_dict() for r in self.reports],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", *[f"k_{t}" for t in range(len(self.thresholds))]])
        for i, k in enumerate(self.trace):
            w.writerow([i, *k])
        return buf.getvalue()


def _descend(spec: GameSpec, cap: int):
    k = (cap,) * spec.num_types
    trace = [k]
    max_steps = cap * spec.num_types + 2
    first = True
    for _ in range(max_steps):
        nxt, reports = best_reply_vector(spec, k, cap)
        if first and reports is not None and any(r.capped for r in reports):
            return None
        first = False
        if any(a > b for a, b in zip(nxt, k)):
            raise NumericalError(f"best-reply dynamics increased: {k} -> {nxt}")
        if reports is None:
            # profile at capacity: the economy freezes
            frozen = len(trace) - 1
            if nxt != k:
                trace.append(nxt)
            return nxt, trace, None, frozen
        if nxt == k:
            return k, trace, reports, None
        trace.append(nxt)
        k = nxt
    raise NumericalError("best-reply dynamics did not terminate within the lattice bound")


def greatest_equilibrium(spec: GameSpec, cap: int | None = None, max_doublings: int = 6) -> EquilibriumResult:
    """Greatest fixed point of the best-reply map, starting from ``(cap, ..., cap)``.

    If the first best reply still wants to volunteer at ``cap`` the cap is
    doubled and the run repeated; after ``max_doublings`` the result is
    classified ``capped``.
    """
    if cap is None:
        cap = spec.default_cap()
    doublings = 0
    while True:
        out = _descend(spec, cap)
        if out is not None:
            break
        if doublings >= max_doublings:
            k = (cap,) * spec.num_types
            _, reports = best_reply_vector(spec, k, cap)
            return EquilibriumResult(k, "capped", [k], reports, cap, doublings)
        cap *= 2
        doublings += 1
    k, trace, reports, frozen = out
    if reports is None or all(v == 0 for v in k):
        cls = "trivial"
        k = (0,) * spec.num_types
    else:
        cls = "nontrivial"
        check, _ = best_reply_vector(spec, k, cap)
        if check != k:
            raise NumericalError(f"post-hoc fixed-point check failed: BR({k}) = {check}")
    return EquilibriumResult(k, cls, trace, reports, cap, doublings, frozen)


def is_fixed_point(spec: GameSpec, k: Sequence[int], cap: int | None = None) -> bool:
    return best_reply_vector(spec, k, cap)[0] == tuple(k)
