"""Synchronized pair and triple runs and their collision functionals.

Two or three walkers advance one step per tick from a shared clock;
independence comes from disjoint derived rng streams (walker ``k`` of a
replica seeded ``s`` uses stream ``derive_seed(s, k)``).

Conventions frozen here:

- a collision at time 0 is counted; analyses wanting post-start
  collisions filter ``n >= 1`` explicitly;
- the post-meeting event window ends strictly before the first time
  either height returns to 0, so a collision at the window boundary does
  not count;
- tooth-segment counts ``Z_{k,h}`` include the spine vertex ``y = 0``,
  and the middle-band count uses floored thirds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .comb import Profile, Vertex, tooth_height
from .errors import DomainError
from .rng import RngStream, derive_seed
from .walk import Trajectory, ordered_moves


def _walk_arrays(
    profile: Profile,
    starts: Sequence[Vertex],
    horizon: int,
    seeds: Sequence[int],
    exit_radius: int | None,
) -> tuple[list[np.ndarray], list[np.ndarray], int | None]:
    """Step all walkers synchronously; truncate when any reaches the exit radius."""
    if horizon < 0:
        raise DomainError("horizon must be >= 0")
    rngs = [RngStream(s) for s in seeds]
    cur = list(starts)
    for v in cur:
        if abs(v.y) > tooth_height(profile, v.x):
            raise DomainError(f"start {v} is not a comb vertex")
    xs = [[v.x] for v in cur]
    ys = [[v.y] for v in cur]

    def exited() -> bool:
        return exit_radius is not None and any(abs(v.x) >= exit_radius for v in cur)

    theta = 0 if exited() else None
    n = 0
    while theta is None and n < horizon:
        n += 1
        for k, rng in enumerate(rngs):
            moves = ordered_moves(profile, cur[k])
            cur[k] = moves[rng.draw_index(len(moves))]
            xs[k].append(cur[k].x)
            ys[k].append(cur[k].y)
        if exited():
            theta = n
    return (
        [np.array(a, dtype=np.int64) for a in xs],
        [np.array(a, dtype=np.int64) for a in ys],
        theta,
    )


@dataclass
class PairRun:
    """Two independent synchronized trajectories plus derived collision data.

    ``collisions`` lists the times ``n`` with ``X_n = X'_n``.  ``sigma``
    starts with the conventional 0 entry; later entries are the times at
    which the spine coordinates agree right after a horizontal move by at
    least one walker.  ``z_seq`` is the interlaced spine difference
    (even slots compare same-time coordinates, odd slots compare the first
    walker one tick ahead) and ``z_jump_times`` its jump times, again with
    a leading 0.
    """

    traj_a: Trajectory
    traj_b: Trajectory
    collisions: np.ndarray
    sigma: np.ndarray
    z_seq: np.ndarray
    z_jump_times: np.ndarray
    parity_mismatch: bool
    exit_radius: int | None = None
    theta_pair: int | None = None
    censored: bool = False

    @property
    def profile(self) -> Profile:
        return self.traj_a.profile

    @property
    def horizon(self) -> int:
        return self.traj_a.horizon

    @property
    def z_jump_values(self) -> np.ndarray:
        return self.z_seq[self.z_jump_times]

    def zero_local_time(self, M: int) -> int:
        """Zeros of the jump chain among indices ``0..M``."""
        vals = self.z_jump_values
        if M >= len(vals):
            raise DomainError(f"only {len(vals)} jump times within horizon")
        return int(np.count_nonzero(vals[: M + 1] == 0))

    @classmethod
    def from_trajectories(cls, traj_a: Trajectory, traj_b: Trajectory, **kw) -> "PairRun":
        return _assemble_pair(traj_a, traj_b, **kw)


def _assemble_pair(
    traj_a: Trajectory,
    traj_b: Trajectory,
    exit_radius: int | None = None,
    theta_pair: int | None = None,
) -> PairRun:
    n = min(len(traj_a.xs), len(traj_b.xs))
    ua, va = traj_a.xs[:n], traj_a.ys[:n]
    ub, vb = traj_b.xs[:n], traj_b.ys[:n]

    collisions = np.flatnonzero((ua == ub) & (va == vb)).astype(np.int64)

    meet = ua[1:] == ub[1:]
    moved = (ua[1:] != ua[:-1]) | (ub[1:] != ub[:-1])
    sigma = np.concatenate(
        [np.zeros(1, np.int64), (np.flatnonzero(meet & moved) + 1).astype(np.int64)]
    )

    z = np.empty(2 * n - 1, dtype=np.int64)
    z[0::2] = ua - ub
    z[1::2] = ua[1:] - ub[:-1]
    jumps = np.concatenate(
        [np.zeros(1, np.int64), (np.flatnonzero(z[1:] != z[:-1]) + 1).astype(np.int64)]
    )

    mismatch = bool((ua[0] + va[0] + ub[0] + vb[0]) & 1)
    censored = exit_radius is not None and theta_pair is None
    return PairRun(
        traj_a,
        traj_b,
        collisions,
        sigma,
        z,
        jumps,
        parity_mismatch=mismatch,
        exit_radius=exit_radius,
        theta_pair=theta_pair,
        censored=censored,
    )


def run_pair(
    profile: Profile,
    start_a: Vertex,
    start_b: Vertex,
    horizon: int,
    master_seed: int,
    exit_radius: int | None = None,
) -> PairRun:
    """Run two independent walkers for ``horizon`` synchronized steps.

    A parity mismatch between the starts is flagged, not rejected: the
    collision count is then provably zero.  With ``exit_radius`` set, the
    run stops at the first time either walker leaves ``|x| <= radius - 1``.
    """
    start_a, start_b = Vertex(*start_a), Vertex(*start_b)
    seeds = [derive_seed(master_seed, 0), derive_seed(master_seed, 1)]
    xs, ys, theta = _walk_arrays(profile, [start_a, start_b], horizon, seeds, exit_radius)
    ta = Trajectory(profile, xs[0], ys[0])
    tb = Trajectory(profile, xs[1], ys[1])
    return _assemble_pair(ta, tb, exit_radius=exit_radius, theta_pair=theta)


@dataclass
class TripleRun:
    """Three independent synchronized trajectories.

    ``theta`` is the first time any walker leaves ``|x| <= exit_radius - 1``
    (``None`` when censored by the horizon or not requested).
    """

    traj_a: Trajectory
    traj_b: Trajectory
    traj_c: Trajectory
    triple_collisions: np.ndarray
    exit_radius: int | None = None
    theta: int | None = None
    censored: bool = False

    @property
    def profile(self) -> Profile:
        return self.traj_a.profile

    def pair_collisions(self, i: int, j: int) -> np.ndarray:
        trajs = (self.traj_a, self.traj_b, self.traj_c)
        a, b = trajs[i], trajs[j]
        n = min(len(a.xs), len(b.xs))
        eq = (a.xs[:n] == b.xs[:n]) & (a.ys[:n] == b.ys[:n])
        return np.flatnonzero(eq).astype(np.int64)


def run_triple(
    profile: Profile,
    starts: Sequence[Vertex],
    horizon: int,
    d: int,
    N: int,
    master_seed: int,
    stop_at_theta: bool = False,
) -> TripleRun:
    """Run three independent walkers, recording the joint exit at radius ``d*N``."""
    if len(starts) != 3:
        raise DomainError("run_triple needs exactly three starts")
    if d < 2 or N < 1:
        raise DomainError("run_triple needs d >= 2 and N >= 1")
    starts = [Vertex(*s) for s in starts]
    radius = d * N
    seeds = [derive_seed(master_seed, k) for k in range(3)]
    xs, ys, theta = _walk_arrays(
        profile, starts, horizon, seeds, radius if stop_at_theta else None
    )
    trajs = [Trajectory(profile, xs[k], ys[k]) for k in range(3)]
    n = min(len(t.xs) for t in trajs)
    eq = (
        (trajs[0].xs[:n] == trajs[1].xs[:n])
        & (trajs[0].ys[:n] == trajs[1].ys[:n])
        & (trajs[0].xs[:n] == trajs[2].xs[:n])
        & (trajs[0].ys[:n] == trajs[2].ys[:n])
    )
    triple = np.flatnonzero(eq).astype(np.int64)
    if theta is None:
        hit = np.flatnonzero(
            np.maximum.reduce([np.abs(t.xs[:n]) for t in trajs]) >= radius
        )
        theta = int(hit[0]) if len(hit) else None
    return TripleRun(
        *trajs,
        triple_collisions=triple,
        exit_radius=radius,
        theta=theta,
        censored=theta is None,
    )


def sigma_times(pair: PairRun, m_max: int) -> np.ndarray:
    """The times ``sigma_1 .. sigma_m_max`` (fewer if the horizon censors)."""
    if m_max < 0:
        raise DomainError("m_max must be >= 0")
    return pair.sigma[1 : m_max + 1]


def psi_event(pair: PairRun, m: int) -> bool | None:
    """Did the walkers collide at combined height at least the level at
    ``sigma_m``, before either height returned to 0?

    Returns ``None`` when the window end lies beyond the horizon and no
    qualifying collision was observed (censored).
    """
    if not 0 <= m < len(pair.sigma):
        raise DomainError(f"sigma_{m} is beyond the horizon")
    s = int(pair.sigma[m])
    va, vb = pair.traj_a.ys, pair.traj_b.ys
    level = abs(int(va[s])) + abs(int(vb[s]))

    zero = np.flatnonzero((va[s + 1 :] == 0) | (vb[s + 1 :] == 0))
    end = s + 1 + int(zero[0]) if len(zero) else None

    coll = pair.collisions
    lo = np.searchsorted(coll, s, side="left")
    hi = np.searchsorted(coll, len(va) if end is None else end, side="left")
    window = coll[lo:hi]
    heights = np.abs(va[window]) + np.abs(vb[window])
    if np.any(heights >= level):
        return True
    return False if end is not None else None


def tooth_collision_count(pair: PairRun, u: int) -> tuple[int, bool]:
    """Collisions strictly before either walker's first visit to ``(u, 0)``
    at a positive time.

    Returns ``(count, censored)``; the count includes a collision at time
    0.  Censored means neither base visit occurred within the horizon, so
    the window is incomplete.
    """
    xa, ya = pair.traj_a.xs, pair.traj_a.ys
    xb, yb = pair.traj_b.xs, pair.traj_b.ys
    base_a = np.flatnonzero((xa[1:] == u) & (ya[1:] == 0))
    base_b = np.flatnonzero((xb[1:] == u) & (yb[1:] == 0))
    cuts = [int(b[0]) + 1 for b in (base_a, base_b) if len(b)]
    if cuts:
        end = min(cuts)
        censored = False
    else:
        end = len(xa)
        censored = True
    count = int(np.searchsorted(pair.collisions, end, side="left"))
    return count, censored


def z_kh_count(pair: PairRun, k: int, h: int) -> tuple[int, int]:
    """Collision counts in the tooth segment of column ``k``.

    Returns ``(Z_kh, Z_tilde)``: collisions at ``(k, y)`` with
    ``0 <= y <= h``, and collisions in the floored middle third band
    ``(h//3, 2h//3]``.
    """
    if h < 0 or h > tooth_height(pair.profile, k):
        raise DomainError(f"h={h} exceeds the tooth height at column {k}")
    xa, ya = pair.traj_a.xs, pair.traj_a.ys
    t = pair.collisions
    at_col = (xa[t] == k) & (ya[t] >= 0)
    z_kh = int(np.count_nonzero(at_col & (ya[t] <= h)))
    z_hi = int(np.count_nonzero(at_col & (ya[t] <= (2 * h) // 3)))
    z_lo = int(np.count_nonzero(at_col & (ya[t] <= h // 3)))
    return z_kh, z_hi - z_lo


def _first_exit(xs: np.ndarray, radius: int) -> int | None:
    run_max = np.maximum.accumulate(np.abs(xs))
    t = np.searchsorted(run_max, radius, side="left")
    return int(t) if t < len(run_max) else None


def upsilon_windows(run: PairRun | TripleRun, d: int, m_max: int) -> list[bool | None]:
    """Collision flags for the exit-time windows at radii ``d, d**2, ...``.

    Window ``m`` spans from the first time any walker leaves
    ``|x| <= d**m - 1`` until the corresponding exit at radius
    ``d**(m+1)``.  The flag is ``True`` when a (pairwise or triple)
    collision fell in the window, ``False`` when the window completed
    without one, and ``None`` when the horizon censored it.
    """
    if d < 2:
        raise DomainError("upsilon windows need d >= 2")
    if m_max < 1:
        raise DomainError("m_max must be >= 1")
    if isinstance(run, TripleRun):
        walkers = (run.traj_a.xs, run.traj_b.xs, run.traj_c.xs)
        coll = run.triple_collisions
    else:
        walkers = (run.traj_a.xs, run.traj_b.xs)
        coll = run.collisions
    n = min(len(w) for w in walkers)
    walkers = [w[:n] for w in walkers]

    exits: list[int | None] = []
    for m in range(1, m_max + 2):
        ts = [_first_exit(w, d**m) for w in walkers]
        fired = [t for t in ts if t is not None]
        exits.append(min(fired) if fired else None)

    flags: list[bool | None] = []
    for m in range(1, m_max + 1):
        lo, hi = exits[m - 1], exits[m]
        if lo is None:
            flags.append(None)
            continue
        i = np.searchsorted(coll, lo, side="left")
        j = np.searchsorted(coll, n if hi is None else hi, side="left")
        if j > i:
            flags.append(True)
        elif hi is not None:
            flags.append(False)
        else:
            flags.append(None)
    return flags


def dump_collision_events_csv(run: PairRun | TripleRun, out: IO[str]) -> None:
    """Write collision events as CSV rows ``n,x,y,kind``.

    A pair run lists its pairwise collisions; a triple run lists each
    pair's collisions plus the simultaneous three-walker events.
    """
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "x", "y", "kind"])
    if isinstance(run, TripleRun):
        trajs = (run.traj_a, run.traj_b, run.traj_c)
        triple = set(int(n) for n in run.triple_collisions)
        rows: dict[int, tuple[int, int, str]] = {}
        for i, j in ((0, 1), (0, 2), (1, 2)):
            for n in run.pair_collisions(i, j):
                n = int(n)
                if n not in rows:
                    kind = "triple" if n in triple else "pair"
                    rows[n] = (int(trajs[i].xs[n]), int(trajs[i].ys[n]), kind)
        for n in sorted(rows):
            x, y, kind = rows[n]
            w.writerow([n, x, y, kind])
    else:
        xs, ys = run.traj_a.xs, run.traj_a.ys
        for n in run.collisions:
            w.writerow([int(n), int(xs[n]), int(ys[n]), "pair"])


def inclusion_violations(
    pair: PairRun, discount_start_zero: bool = True
) -> list[tuple[int, int]]:
    """Indices ``(M, N)`` violating the meeting-count inclusion.

    The inclusion: whenever the interlaced-difference jump chain has at
    least ``N`` zeros among its first ``M + 1`` values, the N-th spine
    meeting happened by time ``tau_M``.  A zero at jump index 0 (the
    walkers start in the same column) corresponds to the conventional
    ``sigma_0 = 0`` rather than a fresh meeting, so it is discounted by
    default; with distinct start columns both conventions coincide.

    Requires matched start parity; on a parity-mismatched pair the
    odd-indexed jump zeros need not produce meetings at all.
    """
    taus = pair.z_jump_times
    zeros = pair.z_jump_values == 0
    xi = np.cumsum(zeros)
    if discount_start_zero and zeros[0]:
        xi = xi - 1
    sigma = pair.sigma
    out = []
    for M in np.flatnonzero(xi >= 1):
        n = int(xi[M])
        if n >= len(sigma) or sigma[n] > taus[M]:
            out.append((int(M), n))
    return out


@dataclass(frozen=True)
class CollisionSummary:
    """Aggregated collision counts for one pair run."""

    total: int
    window_counts: list[int | None]
    tooth_counts: dict[tuple[int, int], int]


def collision_summary(
    pair: PairRun, d: int, m_max: int, teeth: Sequence[tuple[int, int]] = ()
) -> CollisionSummary:
    """Total, per-window, and per-tooth collision counts.

    Window counts use the same exit-time windows as
    :func:`upsilon_windows`; an unfinished window reports ``None``.
    """
    if d < 2:
        raise DomainError("collision windows need d >= 2")
    walkers = (pair.traj_a.xs, pair.traj_b.xs)
    n = min(len(w) for w in walkers)
    exits = []
    for m in range(1, m_max + 2):
        ts = [_first_exit(w[:n], d**m) for w in walkers]
        fired = [t for t in ts if t is not None]
        exits.append(min(fired) if fired else None)
    counts: list[int | None] = []
    for m in range(1, m_max + 1):
        lo, hi = exits[m - 1], exits[m]
        if lo is None or hi is None:
            counts.append(None)
            continue
        i = np.searchsorted(pair.collisions, lo, side="left")
        j = np.searchsorted(pair.collisions, hi, side="left")
        counts.append(int(j - i))
    return CollisionSummary(
        total=len(pair.collisions),
        window_counts=counts,
        tooth_counts={(k, h): z_kh_count(pair, k, h)[0] for k, h in teeth},
    )
