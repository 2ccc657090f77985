"""Wedge-comb profiles, the implicit comb graph, and profile classification.

A wedge comb is the graph whose vertices are the integer points
``(x, y)`` with ``|y| <= floor(f(x))`` for a nonnegative height profile
``f``; edges run vertically inside each tooth and horizontally along the
spine ``y = 0``.  The comb is never materialized: profiles answer height
queries and the neighbor relation is computed on demand.

Tooth heights are ``floor(f(x))``.  Profiles are immutable after
construction and safe to share across worker threads; the per-column
height cache is filled with deterministic values, so concurrent fills are
benign.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import stats as _sps

from .errors import DomainError, ResourceBudgetError
from .rng import mix64_array, _U_GOLDEN


class Vertex(NamedTuple):
    """A comb vertex: spine coordinate ``x`` and height ``y``."""

    x: int
    y: int


def parity(v: Vertex) -> int:
    """Bipartition class ``(x + y) mod 2``; flips on every edge."""
    return (v.x + v.y) & 1


class Verdict(str, Enum):
    """Analytic classification labels for a profile family."""

    INFINITE_COLLISION = "InfiniteCollision_Thm1_1"
    FINITE_COLLISION = "FiniteCollision_Thm4_1"
    TRIPLE_COLLISION = "TripleCollision_Thm3_1"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Classification:
    """Verdict for a profile, with a human-readable witness.

    ``triple_collision`` marks profiles whose truncation volume grows
    linearly, which additionally puts three-walk simultaneous collisions
    in reach; it can be true alongside an infinite-collision verdict.
    """

    verdict: Verdict
    witness: str
    triple_collision: bool = False


class Profile:
    """Base class for tooth-height profiles.

    Subclasses implement :meth:`values` (the raw real-valued ``f``) and
    inherit integer heights ``floor(f)``.  All profile objects are
    immutable value objects with a JSON round trip.
    """

    family = ""

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Raw profile values ``f(x)`` as float64, vectorized."""
        raise NotImplementedError

    def heights(self, xs: np.ndarray) -> np.ndarray:
        """Integer tooth heights ``floor(f(x))``, vectorized."""
        vals = self.values(np.asarray(xs, dtype=np.int64))
        return np.floor(vals).astype(np.int64)

    def params(self) -> dict:
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        d: dict = {"family": self.family, "params": self.params()}
        seed = getattr(self, "profile_seed", None)
        if seed is not None:
            d["profile_seed"] = seed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params()})"

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and other.to_json_dict() == self.to_json_dict()

    def __hash__(self) -> int:
        return hash(self.to_json())


@dataclass(frozen=True, eq=False, repr=False)
class Constant(Profile):
    """Every tooth has the same height: ``f(x) = a`` with ``a >= 0``."""

    a: float = 0.0
    family = "constant"

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise DomainError(f"constant profile needs a >= 0, got {self.a}")

    def values(self, xs: np.ndarray) -> np.ndarray:
        return np.full(np.shape(xs), float(self.a))

    def params(self) -> dict:
        return {"a": self.a}


@dataclass(frozen=True, eq=False, repr=False)
class Power(Profile):
    """Polynomial teeth ``f(x) = |x| ** alpha`` with ``alpha > 0``."""

    alpha: float
    family = "power"

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"power profile needs alpha > 0, got {self.alpha}")

    def values(self, xs: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(xs, dtype=np.float64)) ** self.alpha

    def params(self) -> dict:
        return {"alpha": self.alpha}


@dataclass(frozen=True, eq=False, repr=False)
class LinLog(Profile):
    """Teeth ``f(x) = |x| * log(|x| or 1) ** beta`` with ``beta >= 0``."""

    beta: float
    family = "linlog"

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise DomainError(f"linlog profile needs beta >= 0, got {self.beta}")

    def values(self, xs: np.ndarray) -> np.ndarray:
        ax = np.abs(np.asarray(xs, dtype=np.float64))
        return ax * np.log(np.maximum(ax, 1.0)) ** self.beta

    def params(self) -> dict:
        return {"beta": self.beta}


@dataclass(frozen=True, eq=False, repr=False)
class NLogN(Profile):
    """Teeth ``f(x) = |x| * log(|x| or 1)``."""

    family = "nlogn"

    def values(self, xs: np.ndarray) -> np.ndarray:
        ax = np.abs(np.asarray(xs, dtype=np.float64))
        return ax * np.log(np.maximum(ax, 1.0))

    def params(self) -> dict:
        return {}


@dataclass(frozen=True, eq=False, repr=False)
class Table(Profile):
    """Explicitly listed heights on a finite set of columns, 0 elsewhere."""

    entries: tuple[tuple[int, float], ...]
    family = "table"

    def __post_init__(self):
        seen = set()
        for x, fx in self.entries:
            if x in seen:
                raise DomainError(f"table profile lists column {x} twice")
            seen.add(x)
            if not (fx >= 0 and math.isfinite(fx)):
                raise DomainError(f"table profile needs f >= 0, got f({x}) = {fx}")
        keys = np.array(sorted(seen), dtype=np.int64) if seen else np.empty(0, np.int64)
        vals = dict(self.entries)
        object.__setattr__(self, "_keys", keys)
        object.__setattr__(self, "_vals", np.array([vals[int(k)] for k in keys], dtype=np.float64))

    def values(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        out = np.zeros(xs.shape, dtype=np.float64)
        if len(self._keys):
            pos = np.searchsorted(self._keys, xs)
            pos = np.clip(pos, 0, len(self._keys) - 1)
            hit = self._keys[pos] == xs
            out[hit] = self._vals[pos[hit]]
        return out

    def params(self) -> dict:
        return {"entries": [[int(x), float(fx)] for x, fx in self.entries]}


_IID_DISTRIBUTIONS = ("geometric", "poisson", "empirical")


@dataclass(frozen=True, eq=False, repr=False)
class IidSample(Profile):
    """Tooth heights sampled i.i.d. per column from a finite-mean law.

    The height at column ``x`` is a pure function of
    ``(distribution, profile_seed, x)``: a stateless 64-bit mix of the
    column index, xored with the seed, is inverted through the
    distribution's CDF.  The profile is therefore lazily evaluable over
    unbounded ``x`` with no stored samples, and two instances with equal
    parameters agree everywhere.

    Supported laws (all with finite mean):

    - ``geometric``: support {0, 1, 2, ...}, success probability ``p``;
    - ``poisson``: rate ``lam``;
    - ``empirical``: heights {0, ..., len(weights) - 1} with the given
      nonnegative weights.
    """

    distribution: str
    profile_seed: int = 0
    p: float | None = None
    lam: float | None = None
    weights: tuple[float, ...] | None = None
    family = "iid"

    def __post_init__(self):
        if self.distribution not in _IID_DISTRIBUTIONS:
            raise DomainError(f"unknown iid distribution {self.distribution!r}")
        if not 0 <= self.profile_seed <= 0xFFFFFFFFFFFFFFFF:
            raise DomainError("profile_seed must fit in 64 bits")
        if self.distribution == "geometric":
            if self.p is None or not (0 < self.p <= 1):
                raise DomainError(f"geometric law needs p in (0, 1], got {self.p}")
        elif self.distribution == "poisson":
            if self.lam is None or not (self.lam >= 0 and math.isfinite(self.lam)):
                raise DomainError(f"poisson law needs lam >= 0, got {self.lam}")
        else:
            w = self.weights
            if not w or any(wi < 0 or not math.isfinite(wi) for wi in w) or sum(w) <= 0:
                raise DomainError("empirical law needs nonnegative weights with positive sum")
            cum = np.cumsum(np.asarray(w, dtype=np.float64))
            object.__setattr__(self, "_cum", cum / cum[-1])

    def _uniforms(self, xs: np.ndarray) -> np.ndarray:
        """Deterministic per-column uniforms in [0, 1)."""
        xu = np.asarray(xs, dtype=np.int64).astype(np.uint64)
        z = mix64_array(mix64_array(xu * _U_GOLDEN) ^ np.uint64(self.profile_seed))
        return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def heights(self, xs: np.ndarray) -> np.ndarray:
        u = self._uniforms(xs)
        if self.distribution == "geometric":
            if self.p == 1.0:
                return np.zeros(u.shape, dtype=np.int64)
            with np.errstate(divide="ignore"):
                k = np.floor(np.log1p(-u) / math.log1p(-self.p))
            return k.astype(np.int64)
        if self.distribution == "poisson":
            k = _sps.poisson.ppf(u, self.lam)
            return np.where(u == 0.0, 0, k).astype(np.int64)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)

    def values(self, xs: np.ndarray) -> np.ndarray:
        return self.heights(xs).astype(np.float64)

    def params(self) -> dict:
        d: dict = {"distribution": self.distribution}
        if self.p is not None:
            d["p"] = self.p
        if self.lam is not None:
            d["lam"] = self.lam
        if self.weights is not None:
            d["weights"] = list(self.weights)
        return d


_FAMILIES = {c.family: c for c in (Constant, Power, LinLog, NLogN, Table, IidSample)}


def tooth_height(profile: Profile, x: int) -> int:
    """Integer tooth height ``floor(f(x))`` at column ``x``."""
    cache = getattr(profile, "_height_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(profile, "_height_cache", cache)
    h = cache.get(x)
    if h is None:
        h = int(profile.heights(np.array([x], dtype=np.int64))[0])
        cache[x] = h
    return h


def is_vertex(profile: Profile, v: Vertex) -> bool:
    return abs(v.y) <= tooth_height(profile, v.x)


def neighbors(profile: Profile, v: Vertex) -> set[Vertex]:
    """Adjacent vertices of ``v`` in the comb.

    Spine vertices join their two horizontal neighbors plus, when the
    tooth is nonempty, the two vertical ones; tooth tips have degree 1.
    """
    x, y = v
    h = tooth_height(profile, x)
    if abs(y) > h:
        raise DomainError(f"({x}, {y}) is not a comb vertex: tooth height is {h}")
    out: set[Vertex] = set()
    if y == 0:
        out.add(Vertex(x - 1, 0))
        out.add(Vertex(x + 1, 0))
    if y - 1 >= -h:
        out.add(Vertex(x, y - 1))
    if y + 1 <= h:
        out.add(Vertex(x, y + 1))
    return out


def degree(profile: Profile, v: Vertex) -> int:
    return len(neighbors(profile, v))


def breve_f(profile: Profile, n: int) -> float:
    """Symmetric running maximum ``1 or max(f(i) for |i| <= n)``."""
    if n < 0:
        raise DomainError("breve_f needs n >= 0")
    xs = np.arange(-n, n + 1, dtype=np.int64)
    return float(max(1.0, float(np.max(profile.values(xs)))))


def reciprocal_partial_sum(profile: Profile, N: int) -> float:
    """Partial sum of reciprocals of the running maximum, up to ``N``.

    The divergence of the full series is the infinite-collision
    criterion; this diagnostic sum is for exploration only and is never
    used to classify (a finite sum cannot certify divergence).
    """
    if N < 1:
        raise DomainError("reciprocal_partial_sum needs N >= 1")
    total = 0.0
    running = float(profile.values(np.array([0], dtype=np.int64))[0])
    block = 1 << 20
    for lo in range(1, N + 1, block):
        hi = min(N, lo + block - 1)
        xs = np.arange(lo, hi + 1, dtype=np.int64)
        fv = np.maximum(profile.values(xs), profile.values(-xs))
        np.maximum.accumulate(fv, out=fv)
        if running > fv[0]:
            np.maximum(fv, running, out=fv)
        running = float(fv[-1])
        total += float(np.sum(1.0 / np.maximum(fv, 1.0)))
    return total


def classify_profile(profile: Profile) -> Classification:
    """Symbolic classification of a profile family.

    The verdict is a pure function of the family and its parameters; no
    numerical series testing is involved.  Verdict labels are the stable
    vocabulary used by the CLI.
    """
    if isinstance(profile, Constant):
        return Classification(
            Verdict.INFINITE_COLLISION,
            "bounded heights: the running maximum is constant, so the reciprocal "
            "series diverges; truncation volume grows linearly, so three walks "
            "also collide together.",
            triple_collision=True,
        )
    if isinstance(profile, Table):
        return Classification(
            Verdict.INFINITE_COLLISION,
            "finitely supported heights: bounded running maximum (divergent "
            "reciprocal series) and linear truncation volume.",
            triple_collision=True,
        )
    if isinstance(profile, Power):
        if profile.alpha <= 1:
            return Classification(
                Verdict.INFINITE_COLLISION,
                f"running maximum n**{profile.alpha} with exponent <= 1: the "
                "reciprocal series diverges.",
            )
        return Classification(
            Verdict.UNKNOWN,
            f"growth n**{profile.alpha} outpaces every sufficient condition "
            "implemented here; related work points to finitely many collisions "
            "for exponents above 1, but no verdict is asserted.",
        )
    if isinstance(profile, NLogN):
        return Classification(
            Verdict.INFINITE_COLLISION,
            "heights of order n*log(n) keep the reciprocal series divergent.",
        )
    if isinstance(profile, LinLog):
        if profile.beta <= 1:
            return Classification(
                Verdict.INFINITE_COLLISION,
                f"heights n*log(n)**{profile.beta} with exponent <= 1: the "
                "reciprocal series diverges.",
            )
        if profile.beta > 2:
            return Classification(
                Verdict.FINITE_COLLISION,
                f"heights n*log(n)**{profile.beta} with exponent > 2: the total "
                "collision count is almost surely finite.",
            )
        return Classification(
            Verdict.UNKNOWN,
            f"heights n*log(n)**{profile.beta} with exponent in (1, 2]: "
            "conjectured to have finitely many collisions, but unresolved.",
        )
    if isinstance(profile, IidSample):
        return Classification(
            Verdict.TRIPLE_COLLISION,
            "i.i.d. heights with finite mean: truncation volume grows linearly "
            "for almost every sampled profile, so three walks collide together "
            "(and in particular any two collide infinitely often).",
            triple_collision=True,
        )
    raise DomainError(f"cannot classify profile family {profile.family!r}")


def enumerate_truncation(
    profile: Profile, n: int, cap: int = 10_000_000
) -> tuple[list[Vertex], int]:
    """All comb vertices with ``|x| <= n`` plus their exact count.

    The count ``sum(2 * floor(f(i)) + 1)`` is computed first and checked
    against ``cap`` before any vertex is materialized.
    """
    if n < 1:
        raise DomainError("enumerate_truncation needs n >= 1")
    xs = np.arange(-n, n + 1, dtype=np.int64)
    hs = profile.heights(xs)
    count = int(np.sum(2 * hs + 1))
    if count > cap:
        raise ResourceBudgetError(f"truncation holds {count} vertices, above cap {cap}")
    verts = [Vertex(int(x), int(y)) for x, h in zip(xs, hs) for y in range(-int(h), int(h) + 1)]
    return verts, count


def profile_from_json_dict(d: dict) -> Profile:
    """Inverse of :meth:`Profile.to_json_dict`, with strict validation."""
    if not isinstance(d, dict):
        raise DomainError("profile JSON must be an object")
    unknown = set(d) - {"family", "params", "profile_seed"}
    if unknown:
        raise DomainError(f"unknown profile fields: {sorted(unknown)}")
    family = d.get("family")
    if family not in _FAMILIES:
        raise DomainError(f"unknown profile family {family!r}")
    params = dict(d.get("params", {}))
    if family == "table":
        entries = params.pop("entries", [])
        if params:
            raise DomainError(f"unknown table params: {sorted(params)}")
        return Table(tuple((int(x), float(fx)) for x, fx in entries))
    if family == "iid":
        params["profile_seed"] = int(d.get("profile_seed", 0))
        if "weights" in params:
            params["weights"] = tuple(float(w) for w in params["weights"])
        try:
            return IidSample(**params)
        except TypeError as exc:
            raise DomainError(f"bad iid params: {exc}") from None
    if "profile_seed" in d:
        raise DomainError("profile_seed is only meaningful for iid profiles")
    try:
        return _FAMILIES[family](**params)
    except TypeError as exc:
        raise DomainError(f"bad {family} params: {exc}") from None


def profile_from_json(text: str) -> Profile:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"malformed profile JSON: {exc}") from None
    return profile_from_json_dict(d)
