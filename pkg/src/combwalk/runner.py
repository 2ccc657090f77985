"""Deterministic Monte Carlo orchestration: configs, estimators, sweeps.

Replica ``i`` of a run draws its seed by pure arithmetic from the master
seed and the config fingerprint, and aggregation is a fold over the
replica index order.  The result is therefore bit-identical for a fixed
config at any worker count and under any execution schedule; the
``COMBWALK_THREADS`` environment variable (or the ``threads`` argument)
only changes how replica chunks are scheduled.

Censoring policy: replicas whose outcome the horizon left undecided are
counted and excluded from the point estimate, never extrapolated.  The
collide-before-exit estimators define their event *including* the horizon
cutoff (a finite-horizon proxy), so they never censor.  Probabilities get
Wilson intervals (well behaved near 0), means get normal intervals, and
quantiles get distribution-free order-statistic intervals.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import IO, Callable, Sequence

import numpy as np

from . import batch
from .comb import Profile, Vertex, profile_from_json_dict, tooth_height
from .errors import ConfigError, EstimationError
from .rng import MASK64, derive_seed, derive_seed_array

CSV_HEADER = "estimator,params,point,stderr,ci_lo,ci_hi,replicas,censored,master_seed,fingerprint"

_CHUNK = 16384

#: documented default horizon for experiment configs that omit tuning
DEFAULT_HORIZON = 1_000_000


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class EstimatorSpec:
    """A named estimator kind plus its flat parameter map."""

    kind: str
    params: tuple[tuple[str, object], ...]

    @classmethod
    def make(cls, kind: str, params: dict) -> "EstimatorSpec":
        return cls(kind, tuple(sorted(params.items())))

    def as_dict(self) -> dict:
        return dict(self.params)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, **self.as_dict()}


@dataclass(frozen=True)
class ExperimentConfig:
    """One reproducible estimation run."""

    profile: Profile
    estimator: EstimatorSpec
    replicas: int
    horizon: int
    master_seed: int
    ci_level: float = 0.95

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "profile": self.profile.to_json_dict(),
            "estimator": self.estimator.to_json_dict(),
            "replicas": self.replicas,
            "horizon": self.horizon,
            "master_seed": self.master_seed,
            "ci_level": self.ci_level,
        }

    def fingerprint(self) -> str:
        """Stable 64-bit hex digest of the full config."""
        digest = hashlib.sha256(canonical_json(self.to_json_dict()).encode())
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo result with full seed provenance."""

    estimator: str
    params: dict
    point: float
    stderr: float
    ci_lo: float
    ci_hi: float
    replicas_used: int
    censored: int
    master_seed: int
    fingerprint: str

    def to_json_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "params": self.params,
            "point": self.point,
            "stderr": self.stderr,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "replicas": self.replicas_used,
            "censored": self.censored,
            "master_seed": self.master_seed,
            "fingerprint": self.fingerprint,
        }

    def to_csv_row(self) -> str:
        params = canonical_json(self.params).replace('"', '""')
        return (
            f'{self.estimator},"{params}",{self.point!r},{self.stderr!r},'
            f"{self.ci_lo!r},{self.ci_hi!r},{self.replicas_used},{self.censored},"
            f"{self.master_seed},{self.fingerprint}"
        )


@dataclass(frozen=True)
class SweepFailure:
    """Error marker for one invalid sweep point."""

    estimator: str
    params: dict
    message: str

    def to_json_dict(self) -> dict:
        return {"estimator": self.estimator, "params": self.params, "error": self.message}

    def to_csv_row(self) -> str:
        params = canonical_json(self.params).replace('"', '""')
        note = self.message.replace('"', "'").replace(",", ";").replace("\n", " ")
        return f'{self.estimator},"{params}",,,,,0,0,,"error: {note}"'


# ---------------------------------------------------------------------------
# interval helpers


def wilson_interval(successes: int, n: int, ci_level: float) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    z = NormalDist().inv_cdf(0.5 + ci_level / 2)
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    margin = (z / denom) * ((p * (1 - p) / n + z * z / (4 * n * n)) ** 0.5)
    return (max(0.0, center - margin), min(1.0, center + margin))


def _prob_stats(values: np.ndarray, ci_level: float):
    n = len(values)
    successes = int(values.sum())
    p = successes / n
    stderr = (p * (1 - p) / n) ** 0.5
    lo, hi = wilson_interval(successes, n, ci_level)
    return p, stderr, lo, hi


def _mean_stats(values: np.ndarray, ci_level: float):
    n = len(values)
    mean = float(np.sum(values) / n)
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
    stderr = sd / n**0.5
    z = NormalDist().inv_cdf(0.5 + ci_level / 2)
    return mean, stderr, mean - z * stderr, mean + z * stderr


def _quantile_stats(values: np.ndarray, q: float, ci_level: float):
    n = len(values)
    srt = np.sort(values)
    point = float(np.quantile(srt, q))
    z = NormalDist().inv_cdf(0.5 + ci_level / 2)
    spread = z * (n * q * (1 - q)) ** 0.5
    lo_idx = max(0, int(np.floor(n * q - spread)))
    hi_idx = min(n - 1, int(np.ceil(n * q + spread)))
    lo, hi = float(srt[lo_idx]), float(srt[hi_idx])
    return point, (hi - lo) / (2 * z) if n > 1 else 0.0, lo, hi


# ---------------------------------------------------------------------------
# estimator registry


@dataclass(frozen=True)
class _Kind:
    validate: Callable[[dict, ExperimentConfig], dict]
    run: Callable[[ExperimentConfig, dict, np.ndarray], tuple[np.ndarray, np.ndarray]]
    stat: str


def _need(params: dict, key: str, typ, cond=lambda v: True, what: str = ""):
    if key not in params:
        raise ConfigError(f"estimator needs parameter {key!r}")
    v = params[key]
    if typ is int and isinstance(v, bool):
        raise ConfigError(f"parameter {key!r} must be an integer")
    if typ is int and isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, typ) or not cond(v):
        raise ConfigError(f"parameter {key!r}={v!r} is invalid{': ' + what if what else ''}")
    return v


def _no_extra(params: dict, allowed: set[str]):
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown estimator parameters: {sorted(extra)}")


def _spread_pair_starts(N: int) -> tuple[Vertex, Vertex]:
    """Antipodal spine starts ``(-N//2, 0)`` and ``(N//2, 0)``.

    Symmetric starts have even combined parity for every ``N``, and the
    separation scales with the truncation so the exit race stays
    nondegenerate as ``N`` grows.
    """
    return Vertex(-(N // 2), 0), Vertex(N // 2, 0)


def _v_gambler(params, config):
    _no_extra(params, {"v"})
    return {"v": _need(params, "v", int, lambda v: v >= 1, "v >= 1")}


def _r_gambler(config, p, seeds):
    return batch.gambler_ruin_batch(p["v"], config.horizon, seeds)


def _v_psi_zero(params, config):
    _no_extra(params, {"u", "v", "L"})
    u = _need(params, "u", int)
    v = _need(params, "v", int, lambda v: v >= 0 and v % 2 == 0, "even v >= 0")
    if v > tooth_height(config.profile, u):
        raise ConfigError(f"v={v} exceeds the tooth height at column {u}")
    out = {"u": u, "v": v}
    if "L" in params:
        out["L"] = _need(params, "L", int, lambda L: L > abs(u), "L > |u|")
    return out


def _r_psi_zero(config, p, seeds):
    return batch.psi_zero_batch(config.profile, p["u"], p["v"], config.horizon, seeds)


def _v_tooth_h(params, config):
    _no_extra(params, {"u", "v", "h"})
    u = _need(params, "u", int)
    v = _need(params, "v", int, lambda v: v >= 0 and v % 2 == 0, "even v >= 0")
    h = _need(params, "h", int, lambda h: h >= 0, "h >= 0")
    actual = tooth_height(config.profile, u)
    if actual != h:
        raise ConfigError(f"profile has tooth height {actual} at column {u}, not {h}")
    if v > h:
        raise ConfigError(f"v={v} exceeds h={h}")
    return {"u": u, "v": v, "h": h}


def _r_tooth_h(config, p, seeds):
    return batch.tooth_h_batch(config.profile, p["u"], p["v"], config.horizon, seeds)


def _v_race(params, config):
    _no_extra(params, {"N", "d"})
    return {
        "N": _need(params, "N", int, lambda n: n >= 2, "N >= 2"),
        "d": _need(params, "d", int, lambda d: d >= 2, "d >= 2"),
    }


def _r_collision_before_exit(config, p, seeds):
    a, b = _spread_pair_starts(p["N"])
    return batch.collision_before_exit_batch(
        config.profile, a, b, p["d"] * p["N"], config.horizon, seeds
    )


def _r_sigma_race(config, p, seeds):
    a, b = _spread_pair_starts(p["N"])
    return batch.sigma_race_batch(
        config.profile, a, b, p["N"], p["d"] * p["N"], config.horizon, seeds
    )


def _r_triple_before_exit(config, p, seeds):
    s = 2 * (p["N"] // 4)
    starts = (Vertex(-s, 0), Vertex(0, 0), Vertex(s, 0))
    return batch.triple_before_exit_batch(
        config.profile, starts, p["d"] * p["N"], config.horizon, seeds
    )


def _v_zkh(params, config):
    _no_extra(params, {"k", "h"})
    k = _need(params, "k", int)
    h = _need(params, "h", int, lambda h: h >= 0, "h >= 0")
    if h > tooth_height(config.profile, k):
        raise ConfigError(f"h={h} exceeds the tooth height at column {k}")
    return {"k": k, "h": h}


def _r_zkh(config, p, seeds):
    return batch.z_kh_batch(config.profile, p["k"], p["h"], config.horizon, seeds)


def _v_local_time(params, config):
    _no_extra(params, {"N", "q"})
    N = _need(params, "N", int, lambda n: n >= 1, "N >= 1")
    out = {"N": N}
    if "q" in params:
        out["q"] = _need(params, "q", float, lambda q: 0 < q < 1, "0 < q < 1")
    if config.horizon < N * N:
        raise ConfigError(f"horizon {config.horizon} is below the walk length N^2 = {N*N}")
    return out


def _r_local_time(config, p, seeds):
    return batch.local_time_zero_batch(p["N"] * p["N"], seeds)


def _v_upsilon(params, config):
    _no_extra(params, {"d", "m_max"})
    return {
        "d": _need(params, "d", int, lambda d: d >= 2, "d >= 2"),
        "m_max": _need(params, "m_max", int, lambda m: m >= 1, "m_max >= 1"),
    }


def _r_upsilon(config, p, seeds):
    """Per-replica fraction of collision windows among the resolved ones."""
    flags, resolved = batch.upsilon_windows_batch(
        config.profile, p["d"], p["m_max"], config.horizon, seeds
    )
    n_resolved = resolved.sum(axis=1)
    censored = n_resolved == 0
    with np.errstate(invalid="ignore"):
        frac = (flags & resolved).sum(axis=1) / n_resolved
    frac[censored] = 0.0
    return frac, censored


ESTIMATORS: dict[str, _Kind] = {
    "GamblerRuin": _Kind(_v_gambler, _r_gambler, "prob"),
    "PsiZero": _Kind(_v_psi_zero, _r_psi_zero, "prob"),
    "ToothH": _Kind(_v_tooth_h, _r_tooth_h, "mean"),
    "CollisionBeforeExit": _Kind(_v_race, _r_collision_before_exit, "prob"),
    "SigmaRace": _Kind(_v_race, _r_sigma_race, "prob"),
    "TripleBeforeExit": _Kind(_v_race, _r_triple_before_exit, "prob"),
    "ZkhMean": _Kind(_v_zkh, _r_zkh, "mean"),
    "LocalTimeQuantile": _Kind(_v_local_time, _r_local_time, "quantile"),
    "UpsilonWindows": _Kind(_v_upsilon, _r_upsilon, "mean"),
}


# ---------------------------------------------------------------------------
# config validation


def validate_config(data: dict) -> ExperimentConfig:
    """Validate a schema-1 config dict, rejecting unknown fields."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {"schema", "profile", "estimator", "replicas", "horizon", "master_seed", "ci_level"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    if data.get("schema") != 1:
        raise ConfigError("config must declare \"schema\": 1")
    for key in ("profile", "estimator", "replicas", "horizon", "master_seed"):
        if key not in data:
            raise ConfigError(f"config needs field {key!r}")
    try:
        profile = profile_from_json_dict(data["profile"])
    except Exception as exc:
        raise ConfigError(f"bad profile: {exc}") from None
    est = data["estimator"]
    if not isinstance(est, dict) or "kind" not in est:
        raise ConfigError("estimator must be an object with a \"kind\" field")
    kind = est["kind"]
    if kind not in ESTIMATORS:
        raise ConfigError(f"unknown estimator kind {kind!r}")
    replicas = data["replicas"]
    if not isinstance(replicas, int) or isinstance(replicas, bool) or replicas < 1:
        raise ConfigError(f"replicas must be a positive integer, got {replicas!r}")
    horizon = data["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise ConfigError(f"horizon must be a positive integer, got {horizon!r}")
    seed = data["master_seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MASK64:
        raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {seed!r}")
    ci = data.get("ci_level", 0.95)
    if not isinstance(ci, (int, float)) or not 0 < ci < 1:
        raise ConfigError(f"ci_level must lie in (0, 1), got {ci!r}")
    config = ExperimentConfig(
        profile=profile,
        estimator=EstimatorSpec.make(kind, {k: v for k, v in est.items() if k != "kind"}),
        replicas=replicas,
        horizon=horizon,
        master_seed=seed,
        ci_level=float(ci),
    )
    # runs the kind-specific parameter validation for its side effects
    ESTIMATORS[kind].validate(config.estimator.as_dict(), config)
    return config


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from None
    return validate_config(data)


def resolve_threads(explicit: int | None = None) -> int:
    """Worker count: explicit argument, else COMBWALK_THREADS, else 1."""
    if explicit is not None:
        if explicit < 1:
            raise ConfigError("thread count must be >= 1")
        return explicit
    env = os.environ.get("COMBWALK_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"COMBWALK_THREADS={env!r} is not an integer") from None
    if n < 1:
        raise ConfigError("COMBWALK_THREADS must be >= 1")
    return n


# ---------------------------------------------------------------------------
# execution


def replica_seeds(config: ExperimentConfig, lo: int, hi: int) -> np.ndarray:
    """Seeds for replicas ``lo..hi-1``, namespaced by the config fingerprint.

    Namespacing means distinct grid points draw from unrelated streams, so
    adding points to a sweep never perturbs existing results.
    """
    ns = derive_seed(config.master_seed, int(config.fingerprint(), 16) & MASK64)
    return derive_seed_array(ns, np.arange(lo, hi, dtype=np.uint64))


def run_estimator(config: ExperimentConfig, threads: int | None = None) -> Estimate:
    """Run all replicas of the configured estimator and aggregate.

    Bit-identical output for a fixed config at any thread count: replica
    outcomes land in index order before the aggregation fold.
    """
    kind = ESTIMATORS.get(config.estimator.kind)
    if kind is None:
        raise ConfigError(f"unknown estimator kind {config.estimator.kind!r}")
    params = kind.validate(config.estimator.as_dict(), config)
    nthreads = resolve_threads(threads)
    r = config.replicas

    chunks = [(lo, min(lo + _CHUNK, r)) for lo in range(0, r, _CHUNK)]

    def run_chunk(span):
        lo, hi = span
        seeds = replica_seeds(config, lo, hi)
        return lo, kind.run(config, params, seeds)

    values = np.empty(r)
    censored = np.empty(r, dtype=bool)
    if nthreads == 1 or len(chunks) == 1:
        results = map(run_chunk, chunks)
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(run_chunk, chunks))
    for lo, (vals, cens) in results:
        values[lo : lo + len(vals)] = vals
        censored[lo : lo + len(vals)] = cens

    n_censored = int(censored.sum())
    kept = values[~censored]
    if len(kept) == 0:
        raise EstimationError(
            f"all {r} replicas censored at horizon {config.horizon}; "
            "raise the horizon or change the stopping conditions"
        )
    if kind.stat == "prob":
        point, stderr, lo_ci, hi_ci = _prob_stats(kept, config.ci_level)
    elif kind.stat == "mean":
        point, stderr, lo_ci, hi_ci = _mean_stats(kept, config.ci_level)
    else:
        point, stderr, lo_ci, hi_ci = _quantile_stats(
            kept, params.get("q", 0.5), config.ci_level
        )
    return Estimate(
        estimator=config.estimator.kind,
        params=config.estimator.as_dict(),
        point=float(point),
        stderr=float(stderr),
        ci_lo=float(lo_ci),
        ci_hi=float(hi_ci),
        replicas_used=r,
        censored=n_censored,
        master_seed=config.master_seed,
        fingerprint=config.fingerprint(),
    )


def sweep(
    config: ExperimentConfig,
    grid: Sequence[dict],
    threads: int | None = None,
) -> list[Estimate | SweepFailure]:
    """One estimate per grid point, sharing the template's master seed.

    Each grid entry overrides estimator parameters of the template.  An
    invalid point yields an error-marker row; the others proceed.
    """
    if not grid:
        raise ConfigError("sweep grid must be nonempty")
    out: list[Estimate | SweepFailure] = []
    for overrides in grid:
        if not isinstance(overrides, dict):
            out.append(
                SweepFailure(config.estimator.kind, {}, f"grid entry {overrides!r} is not an object")
            )
            continue
        params = {**config.estimator.as_dict(), **overrides}
        point_config = ExperimentConfig(
            profile=config.profile,
            estimator=EstimatorSpec.make(config.estimator.kind, params),
            replicas=config.replicas,
            horizon=config.horizon,
            master_seed=config.master_seed,
            ci_level=config.ci_level,
        )
        try:
            out.append(run_estimator(point_config, threads=threads))
        except (ConfigError, EstimationError) as exc:
            out.append(SweepFailure(config.estimator.kind, params, str(exc)))
    return out


def write_csv(rows: Sequence[Estimate | SweepFailure], out: IO[str]) -> None:
    out.write(CSV_HEADER + "\n")
    for row in rows:
        out.write(row.to_csv_row() + "\n")


def write_json(rows: Sequence[Estimate | SweepFailure], out: IO[str]) -> None:
    payload = [row.to_json_dict() for row in rows]
    out.write(json.dumps(payload if len(payload) != 1 else payload[0], indent=2, sort_keys=True))
    out.write("\n")
