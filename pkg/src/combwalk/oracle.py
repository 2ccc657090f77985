"""Exact linear-algebra oracles on finite truncations.

Chains are stored with exact ``Fraction`` transition masses (every comb
move has probability 1/degree), from which a float sparse matrix is
materialized on demand.  Float solves run in double precision with one
step of iterative refinement; a rational mode performs the same solves in
exact arithmetic and is the arbiter in disputes.  Dense rational
elimination is cubic, so it is budgeted to small state spaces; rational
kernel iteration scales with the step count instead and has no such cap.

Absorption bookkeeping: killing at a truncation boundary simply drops
mass (rows become substochastic toward labeled absorbing sets), so a
killed kernel sums to the survival probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .comb import LinLog, Profile, Vertex, neighbors, tooth_height
from .errors import DomainError, ResourceBudgetError, SingularChainError
from .walk import ordered_moves

#: dense rational elimination is O(n^3) with growing denominators; above
#: this state count, ask for the float path instead.
RATIONAL_DENSE_BUDGET = 400

_ONE = Fraction(1)


@dataclass
class FiniteChain:
    """An explicit finite Markov chain restricted to its transient states.

    ``rows[i]`` lists ``(j, p)`` transitions between transient states and
    ``absorb_rows[i]`` the one-step mass into each labeled absorbing set;
    together they sum to exactly 1 per row.  ``degrees`` carries the
    full-graph vertex degrees when the chain is a killed graph walk, for
    reversibility checks.
    """

    states: list[Hashable]
    rows: list[list[tuple[int, Fraction]]]
    absorb_rows: list[dict[str, Fraction]]
    degrees: np.ndarray | None = None

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.states)}
        self._Q = None

    def __len__(self) -> int:
        return len(self.states)

    def validate(self) -> None:
        """Exact row-stochasticity over transitions plus absorption."""
        for i, row in enumerate(self.rows):
            total = sum(p for _, p in row) + sum(self.absorb_rows[i].values())
            if total != _ONE:
                raise DomainError(f"row {self.states[i]} sums to {total}, not 1")

    @property
    def Q(self) -> sp.csr_matrix:
        """Float transient-to-transient transition block."""
        if self._Q is None:
            n = len(self.states)
            data, ii, jj = [], [], []
            for i, row in enumerate(self.rows):
                for j, p in row:
                    ii.append(i)
                    jj.append(j)
                    data.append(float(p))
            self._Q = sp.csr_matrix((data, (ii, jj)), shape=(n, n))
        return self._Q

    def absorb_vector(self, label: str) -> np.ndarray:
        """One-step absorption probabilities into ``label``."""
        out = np.zeros(len(self.states))
        for i, masses in enumerate(self.absorb_rows):
            if label in masses:
                out[i] = float(masses[label])
        return out

    def absorb_labels(self) -> set[str]:
        out: set[str] = set()
        for masses in self.absorb_rows:
            out.update(masses)
        return out

    @classmethod
    def build(
        cls,
        transient: Sequence[Hashable],
        moves: Callable[[Hashable], list[tuple[Hashable, Fraction]]],
        classify: Callable[[Hashable], str | None],
        degrees: Callable[[Hashable], int] | None = None,
    ) -> "FiniteChain":
        """Assemble a chain from a move generator and an absorption rule.

        ``classify(dest)`` returns an absorbing label or ``None`` for a
        transient destination (which must belong to ``transient``).
        """
        states = list(transient)
        index = {s: i for i, s in enumerate(states)}
        rows: list[list[tuple[int, Fraction]]] = []
        absorb: list[dict[str, Fraction]] = []
        for s in states:
            row: dict[int, Fraction] = {}
            masses: dict[str, Fraction] = {}
            for dest, p in moves(s):
                label = classify(dest)
                if label is None:
                    j = index.get(dest)
                    if j is None:
                        raise DomainError(f"move {s} -> {dest} leaves the state set")
                    row[j] = row.get(j, Fraction(0)) + p
                else:
                    masses[label] = masses.get(label, Fraction(0)) + p
            rows.append(sorted(row.items()))
            absorb.append(masses)
        deg = None
        if degrees is not None:
            deg = np.array([degrees(s) for s in states], dtype=np.int64)
        chain = cls(states, rows, absorb, degrees=deg)
        chain.validate()
        return chain


# ---------------------------------------------------------------------------
# solvers


def _float_system(chain: FiniteChain, transpose: bool = False):
    n = len(chain)
    A = (sp.identity(n, format="csr") - (chain.Q.T if transpose else chain.Q)).tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularChainError(f"fundamental matrix solve failed: {exc}") from None
    return A, lu


def _refined_solve(A, lu, b: np.ndarray) -> np.ndarray:
    x = lu.solve(b)
    x += lu.solve(b - A @ x)
    if not np.all(np.isfinite(x)):
        raise SingularChainError("absorption unreachable from some state")
    return x


def _dense_rational(chain: FiniteChain, transpose: bool) -> list[list[Fraction]]:
    n = len(chain)
    if n > RATIONAL_DENSE_BUDGET:
        raise ResourceBudgetError(
            f"rational solve over {n} states exceeds the dense budget {RATIONAL_DENSE_BUDGET}"
        )
    A = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        A[i][i] = Fraction(1)
    for i, row in enumerate(chain.rows):
        for j, p in row:
            if transpose:
                A[j][i] -= p
            else:
                A[i][j] -= p
    return A


def _rational_solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination without pivoting.

    The systems solved here are ``I - Q`` for substochastic ``Q``:
    strictly diagonally dominant M-matrices after elimination, so the
    diagonal never vanishes unless absorption is unreachable.
    """
    n = len(A)
    A = [row[:] for row in A]
    b = list(b)
    for k in range(n):
        piv = A[k][k]
        if piv == 0:
            raise SingularChainError("rational elimination hit a zero pivot")
        for i in range(k + 1, n):
            factor = A[i][k]
            if factor == 0:
                continue
            factor /= piv
            rowk = A[k]
            rowi = A[i]
            for j in range(k + 1, n):
                if rowk[j]:
                    rowi[j] -= factor * rowk[j]
            rowi[k] = Fraction(0)
            b[i] -= factor * b[k]
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = b[i]
        rowi = A[i]
        for j in range(i + 1, n):
            if rowi[j]:
                acc -= rowi[j] * x[j]
        x[i] = acc / A[i][i]
    return x


# ---------------------------------------------------------------------------
# generic chain operations


def killed_kernel(
    chain: FiniteChain,
    start: Hashable,
    t: int,
    rational: bool = False,
    op_budget: int = 500_000_000,
):
    """Distribution at time ``t`` with killing at the absorbing sets.

    Returns a map state -> probability; the masses sum to the survival
    probability.  Work is ``t`` sparse vector products and is rejected
    above ``op_budget`` elementary operations.
    """
    if t < 0:
        raise DomainError("killed_kernel needs t >= 0")
    i0 = chain.index[start]
    nnz = sum(len(r) for r in chain.rows)
    if t * max(nnz, 1) > op_budget:
        raise ResourceBudgetError(f"kernel iteration needs {t * nnz} ops, above budget")
    if rational:
        v: dict[int, Fraction] = {i0: _ONE}
        for _ in range(t):
            nxt: dict[int, Fraction] = {}
            for i, mass in v.items():
                for j, p in chain.rows[i]:
                    nxt[j] = nxt.get(j, Fraction(0)) + mass * p
            v = nxt
        return {chain.states[i]: mass for i, mass in v.items() if mass}
    vec = kernel_vector(chain, start, t)
    return {s: float(vec[i]) for i, s in enumerate(chain.states) if vec[i]}


def kernel_vector(chain: FiniteChain, start: Hashable, t: int) -> np.ndarray:
    """Float killed kernel as a vector aligned with ``chain.states``."""
    QT = chain.Q.T.tocsr()
    vec = np.zeros(len(chain))
    vec[chain.index[start]] = 1.0
    for _ in range(t):
        vec = QT @ vec
    return vec


def green_function(chain: FiniteChain, start: Hashable, rational: bool = False):
    """Expected visit counts before absorption (fundamental-matrix row)."""
    i0 = chain.index[start]
    if rational:
        A = _dense_rational(chain, transpose=True)
        b = [Fraction(0)] * len(chain)
        b[i0] = _ONE
        g = _rational_solve(A, b)
        return {s: g[i] for i, s in enumerate(chain.states)}
    g = green_row(chain, start)
    return {s: float(g[i]) for i, s in enumerate(chain.states)}


def green_row(chain: FiniteChain, start: Hashable) -> np.ndarray:
    A, lu = _float_system(chain, transpose=True)
    b = np.zeros(len(chain))
    b[chain.index[start]] = 1.0
    return _refined_solve(A, lu, b)


def hit_probability(
    chain: FiniteChain, start: Hashable, label: str, rational: bool = False
):
    """Probability of absorption into ``label`` (rather than elsewhere)."""
    i0 = chain.index[start]
    if rational:
        A = _dense_rational(chain, transpose=False)
        b = [masses.get(label, Fraction(0)) for masses in chain.absorb_rows]
        return _rational_solve(A, b)[i0]
    A, lu = _float_system(chain)
    return float(_refined_solve(A, lu, chain.absorb_vector(label))[i0])


def expected_absorption_time(chain: FiniteChain, start: Hashable) -> float:
    """Expected steps to absorption: the Green row summed over all states."""
    return float(np.sum(green_row(chain, start)))


# ---------------------------------------------------------------------------
# chain builders


def interval_chain(b: int) -> FiniteChain:
    """SRW on ``{0..b}`` absorbed at both ends (labels ``zero`` / ``goal``)."""
    if b < 1:
        raise DomainError("interval_chain needs b >= 1")
    half = Fraction(1, 2)

    def moves(i):
        return [(i - 1, half), (i + 1, half)]

    def classify(i):
        if i <= 0:
            return "zero"
        if i >= b:
            return "goal"
        return None

    return FiniteChain.build(list(range(1, b)), moves, classify)


def comb_chain(profile: Profile, radius: int) -> FiniteChain:
    """Comb walk on ``|x| <= radius``, killed on exiting (label ``exit``)."""
    if radius < 1:
        raise DomainError("comb_chain needs radius >= 1")
    states: list[Vertex] = []
    for x in range(-radius, radius + 1):
        h = tooth_height(profile, x)
        states.extend(Vertex(x, y) for y in range(-h, h + 1))

    def moves(v):
        nbrs = ordered_moves(profile, v)
        p = Fraction(1, len(nbrs))
        return [(w, p) for w in nbrs]

    def classify(v):
        return "exit" if abs(v.x) > radius else None

    return FiniteChain.build(
        states, moves, classify, degrees=lambda v: len(neighbors(profile, v))
    )


def tooth_column_chain(h: int) -> FiniteChain:
    """Height process during one spine sojourn at a column of height ``h``.

    States are the heights ``-h..h``; a horizontal move off the column
    absorbs (label ``moved``).  The Green row from 0 summed over states is
    the exact expected sojourn duration, equal to ``2h + 1``.
    """
    if h < 0:
        raise DomainError("tooth height must be >= 0")

    def moves(y):
        if y == 0:
            if h == 0:
                return [("moved", _ONE)]
            q = Fraction(1, 4)
            return [("moved", Fraction(1, 2)), (1, q), (-1, q)]
        if abs(y) == h:
            return [(y - int(math.copysign(1, y)), _ONE)]
        half = Fraction(1, 2)
        return [(y - 1, half), (y + 1, half)]

    def classify(s):
        return "moved" if s == "moved" else None

    return FiniteChain.build(list(range(-h, h + 1)), moves, classify)


def _tooth_marginal(a: int, h: int) -> list[tuple[int | str, Fraction]]:
    """One-step law of a walker's height inside the nonnegative tooth.

    ``"out"`` collects the moves that end the walker's contribution to
    in-tooth collisions: horizontal or downward moves off the base.
    """
    if a == 0:
        if h == 0:
            return [("out", _ONE)]
        return [(1, Fraction(1, 4)), ("out", Fraction(3, 4))]
    if a == h:
        return [(h - 1, _ONE)]
    half = Fraction(1, 2)
    return [(a - 1, half), (a + 1, half)]


def tooth_product_chain(h: int, v: int) -> FiniteChain:
    """Two independent in-tooth height walks with base-return absorption.

    The start is ``(0, v)``; at all later times a coordinate at height 0
    (a base return) absorbs into ``fail``.  Expected visits to the
    diagonal at heights >= 1, plus the time-0 diagonal term when
    ``v == 0``, give the exact in-tooth collision count.
    """
    if not 0 <= v <= h:
        raise DomainError("need 0 <= v <= h")
    start = (0, v)
    states: list[tuple[int, int]] = [start]
    states.extend((a, b) for a in range(1, h + 1) for b in range(1, h + 1))

    def moves(s):
        a, b = s
        out = []
        for da, pa in _tooth_marginal(a, h):
            for db, pb in _tooth_marginal(b, h):
                out.append(((da, db), pa * pb))
        return out

    def classify(s):
        a, b = s
        if a == "out" or b == "out" or a == 0 or b == 0:
            return "fail"
        return None

    return FiniteChain.build(states, moves, classify)


# ---------------------------------------------------------------------------
# named oracle quantities


def absorption_probability(a: int, b: int, rational: bool = False):
    """Probability that an SRW on ``{0..b}`` hits ``b`` before 0 from ``a``.

    Solved through the absorbing-chain machinery; the rational mode
    recovers the gambler's-ruin identity ``a/b`` exactly.
    """
    if b < 1 or not 0 <= a <= b:
        raise DomainError("need 0 <= a <= b and b >= 1")
    if a == 0:
        return Fraction(0) if rational else 0.0
    if a == b:
        return Fraction(1) if rational else 1.0
    return hit_probability(interval_chain(b), a, "goal", rational=rational)


def expected_tooth_collisions(
    h: int, v: int, rational: bool = False, state_budget: int = 300_000
):
    """Exact expected in-tooth collision count from heights ``(0, v)``.

    Counts simultaneous visits to the same tooth vertex strictly before
    either walker stands at the base at a positive time.  For even
    ``v >= 2`` this equals the unrestricted expected collision count of
    the comb pair over the same window, because a walker outside the
    positive tooth cannot collide with one confined inside it.  The
    result never exceeds 2.
    """
    if v % 2:
        raise DomainError("v must be even")
    if not 0 <= v <= h:
        raise DomainError("need 0 <= v <= h")
    if (h + 1) ** 2 > state_budget:
        raise ResourceBudgetError(f"product chain needs {(h+1)**2} states, above budget")
    if h == 0:
        return Fraction(1) if rational else 1.0
    chain = tooth_product_chain(h, v)
    g = green_function(chain, (0, v), rational=rational)
    total = sum(g.get((y, y), 0) for y in range(1, h + 1))
    if v == 0:
        total += _ONE if rational else 1.0
    return total


def _psi0_chain(profile: Profile, u: int, v: int, radius: int, state_budget: int):
    """Reachable product chain for the first post-meeting collision event."""
    start = (Vertex(u, 0), Vertex(u, v))

    def classify(s):
        p, q = s
        if p == q and abs(p.y) + abs(q.y) >= v:
            return "success"
        if p.y == 0 or q.y == 0:
            return "fail"
        if abs(p.x) >= radius or abs(q.x) >= radius:
            return "boundary"
        return None

    moves_cache: dict[Vertex, list[Vertex]] = {}

    def vertex_moves(w: Vertex) -> list[Vertex]:
        m = moves_cache.get(w)
        if m is None:
            m = ordered_moves(profile, w)
            moves_cache[w] = m
        return m

    # discover the transient states reachable from the start
    seen = {start}
    frontier = [start]
    order = [start]
    while frontier:
        nxt = []
        for s in frontier:
            ma, mb = vertex_moves(s[0]), vertex_moves(s[1])
            for pa in ma:
                for pb in mb:
                    dest = (pa, pb)
                    if dest in seen or classify(dest) is not None:
                        continue
                    seen.add(dest)
                    nxt.append(dest)
                    order.append(dest)
                    if len(order) > state_budget:
                        raise ResourceBudgetError(
                            f"product chain grew past {state_budget} states"
                        )
        frontier = nxt

    def moves(s):
        ma, mb = vertex_moves(s[0]), vertex_moves(s[1])
        p = Fraction(1, len(ma) * len(mb))
        return [((pa, pb), p) for pa in ma for pb in mb]

    return FiniteChain.build(order, moves, classify)


def psi0_probability_bracket(
    profile: Profile, u: int, v: int, radius: int, state_budget: int = 2_000_000
) -> tuple[float, float]:
    """Two-sided exact bracket for the first post-meeting collision event.

    The event: starting at ``(u, 0)`` and ``(u, v)``, the walkers meet at
    a vertex of combined height at least ``v`` strictly before either
    height returns to 0.  Computed on the comb truncated at
    ``|x| <= radius``; paths touching the truncation boundary count as
    failures for the lower bound and as successes for the upper bound, so
    the true infinite-comb probability lies inside the bracket.  (For
    these start states the walkers provably cannot reach the boundary
    before the window closes, so the bracket is tight.)
    """
    if v % 2:
        raise DomainError("v must be even")
    if not 0 <= v <= tooth_height(profile, u):
        raise DomainError(f"v={v} exceeds the tooth height at column {u}")
    if abs(u) >= radius:
        raise DomainError("need |u| < radius")
    if v == 0:
        return (1.0, 1.0)
    chain = _psi0_chain(profile, u, v, radius, state_budget)
    start = (Vertex(u, 0), Vertex(u, v))
    A, lu = _float_system(chain)
    p_succ = _refined_solve(A, lu, chain.absorb_vector("success"))
    i0 = chain.index[start]
    lower = float(p_succ[i0])
    if "boundary" in chain.absorb_labels():
        p_bnd = _refined_solve(A, lu, chain.absorb_vector("boundary"))
        upper = lower + float(p_bnd[i0])
    else:
        upper = lower
    return (lower, min(upper, 1.0))


@dataclass(frozen=True)
class KernelDecayReport:
    """Killed-kernel maximum against the cubic-time decay scale."""

    n: int
    beta: float
    t: int
    max_q: float
    scale: float
    ratio: float


def kernel_decay_check(
    beta: float, n: int, op_budget: int = 500_000_000
) -> KernelDecayReport:
    """Killed-kernel maximum over the inner truncation at the cubic time.

    On the profile ``|x| * log(|x|)**beta``, runs the kernel for
    ``t = floor(n**3 * log(n)**beta)`` steps on the comb truncated at
    ``|x| <= 2n`` and reports the maximum over columns ``|x| <= n``
    against the reference scale ``1 / (n**2 * log(n)**beta)``; the ratio
    is the implied constant.
    """
    if n < 1:
        raise DomainError("need n >= 1")
    logb = math.log(n) ** beta
    t = math.floor(n**3 * logb)
    if t < 1:
        raise DomainError(f"decay time n^3*log(n)^beta = {t} must be >= 1")
    profile = LinLog(beta)
    chain = comb_chain(profile, 2 * n)
    nnz = sum(len(r) for r in chain.rows)
    if t * nnz > op_budget:
        raise ResourceBudgetError(f"kernel iteration needs {t * nnz} ops, above budget")
    vec = kernel_vector(chain, Vertex(0, 0), t)
    cols = np.array([s.x for s in chain.states], dtype=np.int64)
    max_q = float(np.max(vec[np.abs(cols) <= n]))
    scale = 1.0 / (n**2 * logb)
    return KernelDecayReport(n, beta, t, max_q, scale, max_q / scale)
