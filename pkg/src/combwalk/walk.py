"""Single-trajectory simulation and per-path functionals.

The stepping convention, shared verbatim with the batched kernels in
:mod:`combwalk.batch`, is:

- candidate moves are ordered ``[left, right, down, up]`` and filtered by
  validity (horizontal moves only on the spine, vertical moves only
  within the tooth), giving degree 4 on a toothed spine vertex, 2 on a
  bare spine vertex or tooth interior, and 1 at a tip;
- each step consumes exactly one 64-bit draw, mapped to a move index by
  ``((z >> 11) * degree) >> 53``.

Identical ``(profile, start, horizon, stops, seed)`` therefore replay to
identical trajectories on any platform and any implementation path.

All simulations carry a mandatory horizon: the comb is infinite and some
stopping times are heavy-tailed, so a requested early-exit condition that
never fires leaves the trajectory marked censored rather than running
unbounded.  Spine coordinates live in 64-bit signed integers; horizons at
desk scale (at most around 1e9 steps) cannot overflow them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .comb import Profile, Vertex, tooth_height
from .errors import DomainError
from .rng import RngStream


@dataclass(frozen=True)
class StopSpec:
    """What to record and when to stop a simulation.

    ``theta_radii`` requests exit times from the truncations ``|x| <= r-1``
    and ``tau_targets`` requests vertex hitting times (both counted from
    time 0, so a start outside/at the target fires at 0).  ``early_exit``
    optionally truncates the walk at one such stopping time: either
    ``("theta", r)`` or ``("tau", Vertex(x, y))``.
    """

    theta_radii: tuple[int, ...] = ()
    tau_targets: tuple[Vertex, ...] = ()
    early_exit: tuple | None = None

    def __post_init__(self):
        if any(r < 1 for r in self.theta_radii):
            raise DomainError("theta radii must be >= 1")
        if self.early_exit is not None:
            kind = self.early_exit[0]
            if kind not in ("theta", "tau"):
                raise DomainError(f"unknown early-exit kind {kind!r}")


@dataclass
class StopRecord:
    """Stopping times observed along one trajectory.

    ``move_times`` lists the horizontal-move times ``T_0 = 0 < T_1 < ...``;
    entries of ``theta`` / ``tau`` are ``None`` when the event did not
    fire within the simulated horizon.
    """

    move_times: np.ndarray
    theta: dict[int, int | None] = field(default_factory=dict)
    tau: dict[Vertex, int | None] = field(default_factory=dict)


@dataclass
class Trajectory:
    """A finite synchronized path of one walker.

    ``xs``/``ys`` hold the spine coordinates and heights of the positions
    ``X_0 .. X_H``; ``censored`` is set when a requested early-exit
    condition never fired before the horizon.
    """

    profile: Profile
    xs: np.ndarray
    ys: np.ndarray
    censored: bool = False

    @property
    def start(self) -> Vertex:
        return Vertex(int(self.xs[0]), int(self.ys[0]))

    @property
    def horizon(self) -> int:
        """Number of steps actually simulated."""
        return len(self.xs) - 1

    def vertex(self, n: int) -> Vertex:
        return Vertex(int(self.xs[n]), int(self.ys[n]))

    def positions(self) -> Iterable[Vertex]:
        return (Vertex(int(x), int(y)) for x, y in zip(self.xs, self.ys))


def ordered_moves(profile: Profile, v: Vertex) -> list[Vertex]:
    """Neighbor list in the canonical stepping order (see module doc)."""
    x, y = v
    h = tooth_height(profile, x)
    if abs(y) > h:
        raise DomainError(f"({x}, {y}) is not a comb vertex: tooth height is {h}")
    out = []
    if y == 0:
        out.append(Vertex(x - 1, 0))
        out.append(Vertex(x + 1, 0))
    if y - 1 >= -h:
        out.append(Vertex(x, y - 1))
    if y + 1 <= h:
        out.append(Vertex(x, y + 1))
    return out


def step(profile: Profile, v: Vertex, rng: RngStream) -> Vertex:
    """One uniform move to a neighbor, consuming exactly one draw."""
    moves = ordered_moves(profile, v)
    return moves[rng.draw_index(len(moves))]


def simulate(
    profile: Profile,
    start: Vertex,
    horizon: int,
    stops: StopSpec = StopSpec(),
    rng: RngStream | None = None,
    seed: int | None = None,
) -> tuple[Trajectory, StopRecord]:
    """Simulate up to ``horizon`` steps from ``start``.

    The trajectory is truncated at the earliest requested early-exit
    stopping time if one fires; all requested stopping times are recorded
    independently of each other.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    if rng is None:
        rng = RngStream(0 if seed is None else seed)
    if not isinstance(start, Vertex):
        start = Vertex(*start)
    if abs(start.y) > tooth_height(profile, start.x):
        raise DomainError(f"start {start} is not a comb vertex")

    theta: dict[int, int | None] = {r: None for r in stops.theta_radii}
    tau: dict[Vertex, int | None] = {Vertex(*t): None for t in stops.tau_targets}
    early = stops.early_exit
    if early is not None and early[0] == "theta" and early[1] not in theta:
        theta[early[1]] = None
    if early is not None and early[0] == "tau" and Vertex(*early[1]) not in tau:
        tau[Vertex(*early[1])] = None

    xs = [start.x]
    ys = [start.y]
    move_times = [0]

    def observe(n: int, v: Vertex) -> bool:
        for r, t in theta.items():
            if t is None and abs(v.x) >= r:
                theta[r] = n
        if tau.get(v, 0) is None:
            tau[v] = n
        if early is None:
            return False
        if early[0] == "theta":
            return theta[early[1]] is not None
        return tau[Vertex(*early[1])] is not None

    fired = observe(0, start)
    v = start
    n = 0
    while not fired and n < horizon:
        n += 1
        w = step(profile, v, rng)
        xs.append(w.x)
        ys.append(w.y)
        if w.x != v.x:
            move_times.append(n)
        v = w
        fired = observe(n, v)

    censored = early is not None and not fired
    traj = Trajectory(
        profile,
        np.array(xs, dtype=np.int64),
        np.array(ys, dtype=np.int64),
        censored=censored,
    )
    rec = StopRecord(np.array(move_times, dtype=np.int64), theta, tau)
    return traj, rec


def embedded_walk(traj: Trajectory, rec: StopRecord) -> np.ndarray:
    """Spine coordinate sampled at the horizontal-move times.

    The result is a simple random walk on the integers: consecutive
    entries differ by exactly 1.
    """
    return traj.xs[rec.move_times]


def local_time(seq: Sequence[int] | np.ndarray, x: int, n: int) -> int:
    """Number of indices ``k <= n`` with ``seq[k] == x``."""
    seq = np.asarray(seq)
    if not 0 <= n < len(seq):
        raise DomainError(f"index {n} out of range for sequence of length {len(seq)}")
    return int(np.count_nonzero(seq[: n + 1] == x))


def excursion_durations(traj: Trajectory, rec: StopRecord, x: int) -> np.ndarray:
    """Sojourn lengths at spine column ``x``, one per embedded visit.

    The k-th visit of the embedded walk to ``x`` occupies wall-clock time
    ``[T_j, T_{j+1})``; its duration is ``T_{j+1} - T_j``.  A final visit
    still in progress when the trajectory ends has no duration yet and is
    omitted, so summing all durations over all columns never exceeds the
    horizon (with equality when the trajectory ends on a horizontal move).
    """
    times = rec.move_times
    w = traj.xs[times]
    hits = np.flatnonzero(w[:-1] == x)
    return (times[hits + 1] - times[hits]).astype(np.int64)


def dump_trajectory_csv(traj: Trajectory, out: IO[str]) -> None:
    """Write the trajectory as CSV rows ``n,x,y`` (testing/debug format)."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "x", "y"])
    for n, (x, y) in enumerate(zip(traj.xs, traj.ys)):
        w.writerow([n, int(x), int(y)])
