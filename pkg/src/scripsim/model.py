"""Agent types and economy specifications.

An economy is the tuple ``(types, fractions, h, m, n)``: ``h`` base agents
split across types by ``fractions``, replicated ``n`` times, holding on
average ``m`` dollars each.  Agent ``j`` has the type of base agent
``j mod h``; base agents are laid out in contiguous type blocks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Integral, Rational
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError, SpecError

RHO_TOL = 1e-12


def as_fraction(value: Any, name: str, allow_float: bool = True) -> Fraction:
    """Coerce ``value`` to an exact ``Fraction``.

    Accepts ints, ``Fraction``, strings such as ``"1/3"``, mappings
    ``{"num": 1, "den": 3}`` and (optionally) floats, which are read through
    their shortest decimal repr so that ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, bool):
        raise SpecError(f"{name}: booleans are not numbers")
    if isinstance(value, Mapping):
        try:
            num, den = value["num"], value["den"]
        except KeyError as exc:
            raise SpecError(f"{name}: rational needs 'num' and 'den' keys") from exc
        if not isinstance(num, Integral) or not isinstance(den, Integral) or den == 0:
            raise SpecError(f"{name}: num/den must be integers with den != 0")
        return Fraction(int(num), int(den))
    if isinstance(value, (Integral, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as exc:
            raise SpecError(f"{name}: cannot parse {value!r} as a rational") from exc
    if isinstance(value, float):
        if not allow_float:
            raise SpecError(
                f"{name}: floating value {value!r} rejected; give it as an integer, "
                "'p/q' string or {num, den}"
            )
        if not math.isfinite(value):
            raise SpecError(f"{name}: must be finite")
        return Fraction(repr(value))
    raise SpecError(f"{name}: unsupported value {value!r}")


@dataclass(frozen=True)
class AgentType:
    """Parameters of one agent class.

    alpha is the cost of serving a request, beta the probability of being
    able to serve, gamma the value of a satisfied request, delta the
    discount factor, rho the relative request rate and chi the relative
    weight when competing with other volunteers.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    rho: float = 1.0
    chi: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "rho", "chi"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise SpecError(f"AgentType.{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not self.alpha > 0:
            raise SpecError(f"AgentType.alpha must be > 0, got {self.alpha}")
        if not self.gamma > self.alpha:
            raise SpecError(f"AgentType.gamma must exceed alpha, got gamma={self.gamma} alpha={self.alpha}")
        # beta = 1 is allowed: the reference simulations use it.
        if not 0 < self.beta <= 1:
            raise SpecError(f"AgentType.beta must be in (0, 1], got {self.beta}")
        if not 0 < self.delta < 1:
            raise SpecError(f"AgentType.delta must be in (0, 1), got {self.delta}")
        if not self.rho > 0:
            raise SpecError(f"AgentType.rho must be > 0, got {self.rho}")
        if not self.chi > 0:
            raise SpecError(f"AgentType.chi must be > 0, got {self.chi}")

    @property
    def omega(self) -> float:
        return self.beta * self.chi / self.rho

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha", "beta", "gamma", "delta", "rho", "chi")}


@dataclass(frozen=True)
class GameSpec:
    """A validated economy.  Build it with :func:`build_game_spec`."""

    types: tuple[AgentType, ...]
    fractions: tuple[Fraction, ...]
    h: int
    m: Fraction
    n: int
    rho_scale: float = 1.0
    _layout: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.types) == 0:
            raise SpecError("at least one agent type is required")
        if len(self.types) != len(self.fractions):
            raise SpecError("types and fractions must have the same length")
        if not isinstance(self.h, Integral) or self.h < 1:
            raise SpecError(f"h must be a positive integer, got {self.h!r}")
        if not isinstance(self.n, Integral) or self.n < 1:
            raise SpecError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.m, Fraction) or self.m <= 0:
            raise SpecError(f"m must be a positive rational, got {self.m!r}")
        for t, f in enumerate(self.fractions):
            if not 0 < f <= 1:
                raise SpecError(f"fraction f_{t} = {f} not in (0, 1]")
            if (f * self.h).denominator != 1:
                raise SpecError(f"f_{t}*h = {f * self.h} is not an integer")
        if sum(self.fractions) != 1:
            raise SpecError(f"fractions sum to {sum(self.fractions)}, not 1")
        if (self.m * self.h).denominator != 1:
            raise SpecError(f"m*h = {self.m * self.h} is not an integer")
        rate = sum(t.rho * float(f) for t, f in zip(self.types, self.fractions))
        if abs(rate - 1.0) > RHO_TOL:
            raise SpecError(f"request rates not normalized: sum rho_t f_t = {rate}")
        base = np.repeat(np.arange(len(self.types)), [int(f * self.h) for f in self.fractions])
        object.__setattr__(self, "_layout", base)

    # sizes -----------------------------------------------------------------
    @property
    def num_types(self) -> int:
        return len(self.types)

    @property
    def num_agents(self) -> int:
        return self.h * self.n

    @property
    def total_money(self) -> int:
        return int(self.m * self.h) * self.n

    @property
    def type_counts(self) -> tuple[int, ...]:
        """Number of agents of each type across all replicas."""
        return tuple(int(f * self.h) * self.n for f in self.fractions)

    @property
    def f(self) -> np.ndarray:
        return np.array([float(x) for x in self.fractions])

    @property
    def omega(self) -> np.ndarray:
        return np.array([t.omega for t in self.types])

    def agent_types(self) -> np.ndarray:
        """Type index of every agent, replica layout."""
        return np.tile(self._layout, self.n)

    def type_of(self, agent: int) -> int:
        return int(self._layout[agent % self.h])

    def per_round_discount(self, t: int) -> float:
        return per_round_discount(self.types[t].delta, self.n)

    def default_cap(self) -> int:
        """Stand-in for an infinite threshold: no agent can hold more than m*h*n."""
        return max(self.total_money, 10 * math.ceil(self.m))

    # variants --------------------------------------------------------------
    def with_n(self, n: int) -> "GameSpec":
        return replace(self, n=n)

    def with_m(self, m) -> "GameSpec":
        return replace(self, m=as_fraction(m, "m", allow_float=False))

    def with_types(self, types: Sequence[AgentType]) -> "GameSpec":
        return build_game_spec(types, self.fractions, self.h, self.m, self.n)

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "types": [t.to_dict() for t in self.types],
            "fractions": [{"num": f.numerator, "den": f.denominator} for f in self.fractions],
            "h": self.h,
            "m": {"num": self.m.numerator, "den": self.m.denominator},
            "n": self.n,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> "GameSpec":
        try:
            raw_types, fractions = data["types"], data["fractions"]
            h, m, n = data["h"], data["m"], data["n"]
        except KeyError as exc:
            raise SpecError(f"game spec is missing key {exc}") from exc
        return build_game_spec(raw_types, fractions, h, m, n)

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def build_game_spec(types: Iterable, fractions: Sequence, h, m, n) -> GameSpec:
    """Validate raw inputs and return a :class:`GameSpec`.

    ``types`` may hold :class:`AgentType` objects or mappings with the keys
    ``alpha, beta, gamma, delta`` and optional ``rho, chi`` (default 1).
    Request rates are rescaled so that ``sum_t rho_t f_t = 1``; the factor
    applied is stored as ``rho_scale``.  ``m`` must be exact (int,
    ``Fraction``, ``"p/q"`` or ``{num, den}``).
    """
    parsed = []
    for i, raw in enumerate(types):
        if isinstance(raw, AgentType):
            parsed.append(raw)
        elif isinstance(raw, Mapping):
            unknown = set(raw) - {"alpha", "beta", "gamma", "delta", "rho", "chi"}
            if unknown:
                raise SpecError(f"type {i}: unknown keys {sorted(unknown)}")
            try:
                parsed.append(AgentType(**raw))
            except TypeError as exc:
                raise SpecError(f"type {i}: {exc}") from exc
        else:
            raise SpecError(f"type {i}: expected AgentType or mapping, got {type(raw).__name__}")
    fractions = tuple(as_fraction(f, f"fractions[{i}]") for i, f in enumerate(fractions))
    if len(parsed) != len(fractions):
        raise SpecError(f"{len(parsed)} types but {len(fractions)} fractions")
    for name, v in (("h", h), ("n", n)):
        if isinstance(v, bool) or not isinstance(v, Integral):
            raise SpecError(f"{name} must be an integer, got {v!r}")
    m = as_fraction(m, "m", allow_float=False)

    rate = sum(t.rho * float(f) for t, f in zip(parsed, fractions))
    scale = 1.0 / rate if rate > 0 else float("nan")
    if parsed and abs(rate - 1.0) > RHO_TOL:
        parsed = [replace(t, rho=t.rho * scale) for t in parsed]
    else:
        scale = 1.0
    return GameSpec(tuple(parsed), fractions, int(h), m, int(n), rho_scale=scale)


def per_round_discount(delta: float, n: int) -> float:
    """Discount per round with ``n`` replicas: ``1 - (1 - delta)/n``.

    This is the rate that keeps the value of an always-satisfied requester
    independent of ``n`` and reduces to ``delta`` at ``n = 1``.
    """
    if not 0 < delta < 1:
        raise SpecError(f"delta must be in (0, 1), got {delta}")
    if isinstance(n, bool) or not isinstance(n, Integral) or n < 1:
        raise SpecError(f"n must be a positive integer, got {n!r}")
    return 1.0 - (1.0 - delta) / n


def check_thresholds(spec: GameSpec, k: Sequence[int], strict: bool = True) -> tuple[int, ...]:
    """Validate a per-type threshold vector.

    With ``strict`` the money supply must be below capacity,
    ``m < sum_t f_t k_t``; otherwise :class:`CapacityError` is raised.
    """
    k = tuple(k)
    if len(k) != spec.num_types:
        raise SpecError(f"threshold vector has {len(k)} entries for {spec.num_types} types")
    for t, kt in enumerate(k):
        if isinstance(kt, bool) or not isinstance(kt, Integral) or kt < 0:
            raise SpecError(f"threshold k_{t} must be a non-negative integer, got {kt!r}")
    k = tuple(int(x) for x in k)
    if strict and not below_capacity(spec, k):
        raise CapacityError(
            f"money supply at or above capacity: m = {spec.m} >= sum_t f_t k_t = "
            f"{sum(f * kt for f, kt in zip(spec.fractions, k))}"
        )
    return k


def below_capacity(spec: GameSpec, k: Sequence[int]) -> bool:
    return spec.m < sum(f * kt for f, kt in zip(spec.fractions, k))
