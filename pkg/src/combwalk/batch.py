"""Compiled replica kernels: the high-throughput Monte Carlo core.

Each kernel runs every replica independently in a tight jit-compiled
loop (numba, ``nogil``, disk-cached), with per-replica early exit the
moment the outcome is decided.  The stepping arithmetic mirrors
:mod:`combwalk.walk` draw for draw: one splitmix64 output per walker per
step, move index ``((z >> 11) * degree) >> 53``, neighbor order
left/right/down/up, walker ``k`` of a replica seeded ``s`` drawing from
the stream ``derive_seed(s, k)``.  A batched replica therefore replays
the scalar engine exactly, which the test suite pins down.

Tooth heights are served from a precomputed per-column table covering
every column reachable within the kernel's resolve radius or horizon.

Kernels return ``(values, censored)`` arrays indexed by replica.  For
event probabilities whose definition includes the horizon cutoff
(collision/triple-collision before exit), the horizon is part of the
estimand and nothing is censored; open-ended windows (first base return,
post-meeting windows, sigma races) censor replicas the horizon cut short.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .comb import Profile, Vertex, tooth_height
from .errors import DomainError, ResourceBudgetError
from .rng import GOLDEN, derive_child_array

_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_U_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U53 = np.uint64(53)

_TABLE_BUDGET = 50_000_000

_JIT = dict(cache=True, nogil=True)


def _height_table(profile: Profile, radius: int) -> tuple[np.ndarray, int]:
    """Tooth heights for every column in ``[-radius, radius]``."""
    if radius > _TABLE_BUDGET:
        raise ResourceBudgetError(f"height table of radius {radius} is above budget")
    xs = np.arange(-radius, radius + 1, dtype=np.int64)
    return profile.heights(xs), radius


def _walker_seeds(seeds: np.ndarray, k: int) -> np.ndarray:
    return derive_child_array(np.asarray(seeds, dtype=np.uint64), k)


def _check_start(profile: Profile, s: Vertex) -> Vertex:
    if abs(s.y) > tooth_height(profile, s.x):
        raise DomainError(f"start {s} is not a comb vertex")
    return s


@njit(**_JIT)
def _mix64(z):
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    return z ^ (z >> _U31)


@njit(**_JIT)
def _step_one(x, y, state, htab, off):
    """One walker step; returns the new (x, y, rng state)."""
    state = state + _U_GOLDEN
    z = _mix64(state)
    h = htab[x + off]
    if y == 0:
        deg = 4 if h > 0 else 2
        idx = np.int64(((z >> _U11) * np.uint64(deg)) >> _U53)
        if idx == 0:
            x -= 1
        elif idx == 1:
            x += 1
        elif idx == 2:
            y -= 1
        else:
            y += 1
    else:
        ay = -y if y < 0 else y
        if ay == h:
            y += 1 if y < 0 else -1
        else:
            idx = np.int64(((z >> _U11) * np.uint64(2)) >> _U53)
            y += 2 * idx - 1
    return x, y, state


@njit(**_JIT)
def _k_gambler(v, horizon, seeds, values, censored):
    goal = 2 * v
    for i in range(seeds.shape[0]):
        st = seeds[i]
        pos = 1
        censored[i] = True
        for _ in range(horizon):
            st = st + _U_GOLDEN
            z = _mix64(st)
            idx = np.int64(((z >> _U11) * np.uint64(2)) >> _U53)
            pos += 2 * idx - 1
            if pos <= 0 or pos >= goal:
                values[i] = 1.0 if pos >= goal else 0.0
                censored[i] = False
                break


def gambler_ruin_batch(v: int, horizon: int, seeds: np.ndarray):
    """Hit ``2v`` before 0, starting from 1, for a +-1 walk on ``{0..2v}``."""
    if v < 1:
        raise DomainError("gambler ruin needs v >= 1")
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    _k_gambler(v, horizon, _walker_seeds(seeds, 0), values, censored)
    return values, censored


@njit(**_JIT)
def _k_local_time(steps, seeds, values):
    for i in range(seeds.shape[0]):
        st = seeds[i]
        pos = 0
        count = 1
        for _ in range(steps):
            st = st + _U_GOLDEN
            z = _mix64(st)
            idx = np.int64(((z >> _U11) * np.uint64(2)) >> _U53)
            pos += 2 * idx - 1
            if pos == 0:
                count += 1
        values[i] = count


def local_time_zero_batch(steps: int, seeds: np.ndarray):
    """Visits to 0 of a simple random walk on the integers, up to ``steps``."""
    values = np.zeros(len(seeds))
    _k_local_time(steps, _walker_seeds(seeds, 0), values)
    return values, np.zeros(len(seeds), dtype=np.bool_)


@njit(**_JIT)
def _k_psi_zero(u, v, horizon, htab, off, sa0, sb0, values, censored):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = u, 0
        xb, yb = u, v
        censored[i] = True
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            if xa == xb and ya == yb and abs(ya) + abs(yb) >= v:
                values[i] = 1.0
                censored[i] = False
                break
            if ya == 0 or yb == 0:
                censored[i] = False
                break


def psi_zero_batch(profile: Profile, u: int, v: int, horizon: int, seeds: np.ndarray):
    """Post-meeting collision event from ``(u, 0)`` and ``(u, v)``.

    Success: the walkers share a vertex of combined height at least ``v``
    strictly before either height returns to 0.  Censored when the window
    outlives the horizon.
    """
    if v % 2:
        raise DomainError("v must be even")
    if not 0 <= v <= tooth_height(profile, u):
        raise DomainError(f"v={v} exceeds the tooth height at column {u}")
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    if v == 0:
        return np.ones(len(seeds)), censored
    htab, off = _height_table(profile, abs(u) + 2)
    _k_psi_zero(
        u, v, horizon, htab, off, _walker_seeds(seeds, 0), _walker_seeds(seeds, 1),
        values, censored,
    )
    return values, censored


@njit(**_JIT)
def _k_tooth_h(u, v, horizon, htab, off, sa0, sb0, values, censored):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = u, 0
        xb, yb = u, v
        count = 1.0 if v == 0 else 0.0
        censored[i] = True
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            if (xa == u and ya == 0) or (xb == u and yb == 0):
                censored[i] = False
                break
            if xa == xb and ya == yb:
                count += 1.0
        values[i] = count


def tooth_h_batch(profile: Profile, u: int, v: int, horizon: int, seeds: np.ndarray):
    """Collision count strictly before either walker's base visit at ``(u, 0)``.

    Mean estimator; the count includes a collision at time 0 (so ``v = 0``
    starts at 1).  Censored when neither base visit happens in time.
    """
    if v % 2:
        raise DomainError("v must be even")
    if not 0 <= v <= tooth_height(profile, u):
        raise DomainError(f"v={v} exceeds the tooth height at column {u}")
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    htab, off = _height_table(profile, abs(u) + horizon + 2)
    _k_tooth_h(
        u, v, horizon, htab, off, _walker_seeds(seeds, 0), _walker_seeds(seeds, 1),
        values, censored,
    )
    return values, censored


@njit(**_JIT)
def _k_collision_before_exit(
    ax, ay, bx, by, radius, horizon, htab, off, sa0, sb0, values
):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = ax, ay
        xb, yb = bx, by
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            if abs(xa) >= radius or abs(xb) >= radius:
                break
            if xa == xb and ya == yb:
                values[i] = 1.0
                break


def collision_before_exit_batch(
    profile: Profile,
    start_a: Vertex,
    start_b: Vertex,
    radius: int,
    horizon: int,
    seeds: np.ndarray,
):
    """Collision strictly before either walker exits ``|x| <= radius - 1``,
    within the horizon.

    The horizon cutoff is part of the estimand (a finite-horizon proxy for
    the collide-before-exit probability), so no replica is censored.
    """
    if radius < 1:
        raise DomainError("exit radius must be >= 1")
    if max(abs(start_a.x), abs(start_b.x)) >= radius:
        raise DomainError("starts must lie inside the exit radius")
    _check_start(profile, start_a)
    _check_start(profile, start_b)
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    if start_a == start_b:
        return np.ones(len(seeds)), censored
    htab, off = _height_table(profile, radius + 2)
    _k_collision_before_exit(
        start_a.x, start_a.y, start_b.x, start_b.y, radius, horizon, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), values,
    )
    return values, censored


@njit(**_JIT)
def _k_sigma_race(ax, ay, bx, by, N, radius, horizon, htab, off, sa0, sb0, values, censored):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = ax, ay
        xb, yb = bx, by
        count = 0
        censored[i] = True
        for _ in range(horizon):
            pa, pb = xa, xb
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            if xa == xb and (xa != pa or xb != pb):
                count += 1
            if abs(xa) >= radius or abs(xb) >= radius:
                values[i] = 1.0
                censored[i] = False
                break
            if count >= N:
                censored[i] = False
                break


def sigma_race_batch(
    profile: Profile,
    start_a: Vertex,
    start_b: Vertex,
    N: int,
    radius: int,
    horizon: int,
    seeds: np.ndarray,
):
    """Does the N-th spine meeting lose the race against the joint exit?

    Value 1 when either walker exits ``|x| <= radius - 1`` before the
    N-th meeting time (ties included); censored when the horizon decides
    neither.
    """
    if N < 1 or radius < 1:
        raise DomainError("need N >= 1 and radius >= 1")
    _check_start(profile, start_a)
    _check_start(profile, start_b)
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    htab, off = _height_table(profile, radius + 2)
    _k_sigma_race(
        start_a.x, start_a.y, start_b.x, start_b.y, N, radius, horizon, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), values, censored,
    )
    return values, censored


@njit(**_JIT)
def _k_triple_before_exit(
    ax, ay, bx, by, cx, cy, radius, horizon, time_zero, htab, off, sa0, sb0, sc0, values
):
    for i in range(sa0.shape[0]):
        sa, sb, sc = sa0[i], sb0[i], sc0[i]
        xa, ya = ax, ay
        xb, yb = bx, by
        xc, yc = cx, cy
        if time_zero and xa == xb and xb == xc and ya == yb and yb == yc:
            values[i] = 1.0
            continue
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            xc, yc, sc = _step_one(xc, yc, sc, htab, off)
            if abs(xa) >= radius or abs(xb) >= radius or abs(xc) >= radius:
                break
            if xa == xb and ya == yb and xa == xc and ya == yc:
                values[i] = 1.0
                break


def triple_before_exit_batch(
    profile: Profile,
    starts: tuple[Vertex, Vertex, Vertex],
    radius: int,
    horizon: int,
    seeds: np.ndarray,
    count_time_zero: bool = True,
):
    """Simultaneous three-walker collision before the joint exit, within
    the horizon (finite-horizon proxy; no censoring)."""
    if radius < 1:
        raise DomainError("exit radius must be >= 1")
    if any(abs(s.x) >= radius for s in starts):
        raise DomainError("starts must lie inside the exit radius")
    for s in starts:
        _check_start(profile, s)
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    htab, off = _height_table(profile, radius + 2)
    a, b, c = starts
    _k_triple_before_exit(
        a.x, a.y, b.x, b.y, c.x, c.y, radius, horizon, count_time_zero, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), _walker_seeds(seeds, 2),
        values,
    )
    return values, censored


@njit(**_JIT)
def _k_pair_count(ax, ay, bx, by, horizon, htab, off, sa0, sb0, values):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = ax, ay
        xb, yb = bx, by
        count = 1 if (xa == xb and ya == yb) else 0
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            if xa == xb and ya == yb:
                count += 1
        values[i] = count


@njit(**_JIT)
def _k_triple_count(ax, ay, horizon, htab, off, sa0, sb0, sc0, values):
    for i in range(sa0.shape[0]):
        sa, sb, sc = sa0[i], sb0[i], sc0[i]
        xa, ya = ax, ay
        xb, yb = ax, ay
        xc, yc = ax, ay
        count = 1
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            xc, yc, sc = _step_one(xc, yc, sc, htab, off)
            if xa == xb and ya == yb and xa == xc and ya == yc:
                count += 1
        values[i] = count


def collision_count_batch(
    profile: Profile,
    start_a: Vertex,
    start_b: Vertex,
    horizon: int,
    seeds: np.ndarray,
):
    """Total collision count of a pair over the horizon (time 0 included)."""
    _check_start(profile, start_a)
    _check_start(profile, start_b)
    values = np.zeros(len(seeds))
    htab, off = _height_table(
        profile, horizon + max(abs(start_a.x), abs(start_b.x)) + 2
    )
    _k_pair_count(
        start_a.x, start_a.y, start_b.x, start_b.y, horizon, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), values,
    )
    return values, np.zeros(len(seeds), dtype=np.bool_)


def triple_collision_count_batch(
    profile: Profile, start: Vertex, horizon: int, seeds: np.ndarray
):
    """Total simultaneous-triple collision count from a common start."""
    _check_start(profile, start)
    values = np.zeros(len(seeds))
    htab, off = _height_table(profile, horizon + abs(start.x) + 2)
    _k_triple_count(
        start.x, start.y, horizon, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), _walker_seeds(seeds, 2),
        values,
    )
    return values, np.zeros(len(seeds), dtype=np.bool_)


@njit(**_JIT)
def _k_z_kh(k, h, horizon, htab, off, sa0, sb0, values):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = 0, 0
        xb, yb = 0, 0
        count = 0
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            if xa == k and xa == xb and ya == yb and 0 <= ya <= h:
                count += 1
        values[i] = count


def z_kh_batch(profile: Profile, k: int, h: int, horizon: int, seeds: np.ndarray):
    """Collision count in the tooth segment ``(k, 0..h)`` over the horizon.

    Both walkers start at the origin; the horizon is part of the estimand.
    """
    if h < 0 or h > tooth_height(profile, k):
        raise DomainError(f"h={h} exceeds the tooth height at column {k}")
    values = np.zeros(len(seeds))
    htab, off = _height_table(profile, horizon + 2)
    _k_z_kh(k, h, horizon, htab, off, _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), values)
    return values, np.zeros(len(seeds), dtype=np.bool_)


@njit(**_JIT)
def _k_upsilon(sx, sy, radii, m_max, horizon, htab, off, sa0, sb0, flags, final_cur):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa, ya = sx, sy
        xb, yb = sx, sy
        cur = 0
        for _ in range(horizon):
            xa, ya, sa = _step_one(xa, ya, sa, htab, off)
            xb, yb, sb = _step_one(xb, yb, sb, htab, off)
            level = radii[cur]
            if abs(xa) >= level or abs(xb) >= level:
                cur += 1
                if cur > m_max:
                    break
            if cur >= 1 and xa == xb and ya == yb:
                flags[i, cur - 1] = True
        final_cur[i] = cur


def upsilon_windows_batch(
    profile: Profile,
    d: int,
    m_max: int,
    horizon: int,
    seeds: np.ndarray,
    start: Vertex = Vertex(0, 0),
):
    """Collision flags per exit-radius window for a pair from ``start``.

    Returns ``(flags, resolved)`` boolean arrays of shape
    ``(replicas, m_max)``: window ``m`` spans the joint exits at radii
    ``d**m`` and ``d**(m+1)``; unresolved windows were cut by the horizon
    without a collision.
    """
    if d < 2 or m_max < 1:
        raise DomainError("need d >= 2 and m_max >= 1")
    _check_start(profile, start)
    top = d ** (m_max + 1)
    htab, off = _height_table(profile, top + 2)
    r = len(seeds)
    radii = np.array([d**m for m in range(1, m_max + 2)], dtype=np.int64)
    flags = np.zeros((r, m_max), dtype=np.bool_)
    final_cur = np.zeros(r, dtype=np.int64)
    _k_upsilon(
        start.x, start.y, radii, m_max, horizon, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), flags, final_cur,
    )
    window_index = np.arange(1, m_max + 1)
    resolved = (window_index[None, :] < final_cur[:, None]) | flags
    return flags, resolved


@njit(**_JIT)
def _k_exit_time(sx, sy, radius, horizon, htab, off, st0, values, censored):
    for i in range(st0.shape[0]):
        st = st0[i]
        x, y = sx, sy
        censored[i] = True
        for n in range(1, horizon + 1):
            x, y, st = _step_one(x, y, st, htab, off)
            if abs(x) >= radius:
                values[i] = n
                censored[i] = False
                break


def exit_time_batch(
    profile: Profile, start: Vertex, radius: int, horizon: int, seeds: np.ndarray
):
    """First time a single walker leaves ``|x| <= radius - 1``."""
    if radius < 1:
        raise DomainError("exit radius must be >= 1")
    _check_start(profile, start)
    values = np.zeros(len(seeds))
    censored = np.zeros(len(seeds), dtype=np.bool_)
    if abs(start.x) >= radius:
        return values, censored
    htab, off = _height_table(profile, radius + 2)
    _k_exit_time(
        start.x, start.y, radius, horizon, htab, off, _walker_seeds(seeds, 0),
        values, censored,
    )
    return values, censored


@njit(**_JIT)
def _k_pair_paths(ax, ay, bx, by, horizon, htab, off, sa0, sb0, xa, ya, xb, yb):
    for i in range(sa0.shape[0]):
        sa, sb = sa0[i], sb0[i]
        xa[i, 0], ya[i, 0] = ax, ay
        xb[i, 0], yb[i, 0] = bx, by
        pxa, pya = ax, ay
        pxb, pyb = bx, by
        for n in range(1, horizon + 1):
            pxa, pya, sa = _step_one(pxa, pya, sa, htab, off)
            pxb, pyb, sb = _step_one(pxb, pyb, sb, htab, off)
            xa[i, n], ya[i, n] = pxa, pya
            xb[i, n], yb[i, n] = pxb, pyb


def pair_paths_batch(
    profile: Profile,
    start_a: Vertex,
    start_b: Vertex,
    horizon: int,
    seeds: np.ndarray,
):
    """Full position history of a batch of pairs (testing helper)."""
    _check_start(profile, start_a)
    _check_start(profile, start_b)
    r = len(seeds)
    htab, off = _height_table(
        profile, horizon + max(abs(start_a.x), abs(start_b.x)) + 2
    )
    out = [np.empty((r, horizon + 1), dtype=np.int64) for _ in range(4)]
    _k_pair_paths(
        start_a.x, start_a.y, start_b.x, start_b.y, horizon, htab, off,
        _walker_seeds(seeds, 0), _walker_seeds(seeds, 1), *out,
    )
    return tuple(out)
