"""Command-line front door.

Verbs: ``classify``, ``simulate``, ``exact``, ``estimate``, ``sweep``,
``acceptance``.  All file outputs are deterministic functions of the
config (including row order); worker count (``--threads`` or
``COMBWALK_THREADS``) never changes results.

Exit codes: 0 success, 2 usage/config error, 3 statistical failure
(all replicas censored, or a failed acceptance criterion).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import acceptance as acc
from . import oracle, runner
from .comb import (
    Constant,
    IidSample,
    LinLog,
    NLogN,
    Power,
    Profile,
    Table,
    Vertex,
    classify_profile,
    profile_from_json,
    reciprocal_partial_sum,
)
from .errors import CombwalkError, ConfigError, EstimationError
from .walk import StopSpec, dump_trajectory_csv, simulate


def _add_profile_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("profile (either --profile FILE or --family plus params)")
    g.add_argument("--profile", metavar="FILE", help="profile JSON file")
    g.add_argument(
        "--family", choices=["constant", "power", "linlog", "nlogn", "table", "iid"]
    )
    g.add_argument("--a", type=float, help="constant height")
    g.add_argument("--alpha", type=float, help="power exponent")
    g.add_argument("--beta", type=float, help="log exponent")
    g.add_argument("--entries", help="table entries as x:f,x:f,...")
    g.add_argument("--dist", choices=["geometric", "poisson", "empirical"])
    g.add_argument("--p", type=float, help="geometric success probability")
    g.add_argument("--lam", type=float, help="poisson rate")
    g.add_argument("--weights", help="empirical weights as w0,w1,...")
    g.add_argument("--profile-seed", type=int, default=0)


def _profile_from_args(args) -> Profile:
    if args.profile:
        try:
            with open(args.profile, "r", encoding="utf-8") as fh:
                return profile_from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read profile: {exc}") from None
    if not args.family:
        raise ConfigError("give either --profile FILE or --family")
    if args.family == "constant":
        return Constant(args.a if args.a is not None else 0.0)
    if args.family == "power":
        if args.alpha is None:
            raise ConfigError("power profile needs --alpha")
        return Power(args.alpha)
    if args.family == "linlog":
        if args.beta is None:
            raise ConfigError("linlog profile needs --beta")
        return LinLog(args.beta)
    if args.family == "nlogn":
        return NLogN()
    if args.family == "table":
        if not args.entries:
            raise ConfigError("table profile needs --entries x:f,...")
        entries = []
        for item in args.entries.split(","):
            x, _, fx = item.partition(":")
            entries.append((int(x), float(fx)))
        return Table(tuple(entries))
    if not args.dist:
        raise ConfigError("iid profile needs --dist")
    weights = None
    if args.weights:
        weights = tuple(float(w) for w in args.weights.split(","))
    return IidSample(
        args.dist, profile_seed=args.profile_seed, p=args.p, lam=args.lam, weights=weights
    )


def _parse_vertex(text: str) -> Vertex:
    try:
        x, y = text.split(",")
        return Vertex(int(x), int(y))
    except ValueError:
        raise ConfigError(f"expected a vertex as X,Y, got {text!r}") from None


def _write_or_print(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verbs


def _cmd_classify(args) -> int:
    profile = _profile_from_args(args)
    cls = classify_profile(profile)
    diag = {N: reciprocal_partial_sum(profile, N) for N in (10**3, 10**6)}
    if args.json:
        payload = {
            "profile": profile.to_json_dict(),
            "verdict": cls.verdict.value,
            "witness": cls.witness,
            "triple_collision": cls.triple_collision,
            "reciprocal_partial_sums": {str(k): v for k, v in diag.items()},
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    print(f"profile: {profile.to_json()}")
    print(f"verdict: {cls.verdict.value}")
    print(f"witness: {cls.witness}")
    print(f"triple_collision: {cls.triple_collision}")
    for N, s in diag.items():
        print(f"sum(1/breve_f, n<=1e{len(str(N))-1}) = {s!r}")
    return 0


def _cmd_simulate(args) -> int:
    profile = _profile_from_args(args)
    early = None
    if args.early:
        kind, _, val = args.early.partition(":")
        if kind == "theta":
            early = ("theta", int(val))
        elif kind == "tau":
            early = ("tau", _parse_vertex(val))
        else:
            raise ConfigError(f"--early must be theta:R or tau:X,Y, got {args.early!r}")
    stops = StopSpec(
        theta_radii=tuple(args.theta or ()),
        tau_targets=tuple(_parse_vertex(t) for t in (args.tau or ())),
        early_exit=early,
    )
    traj, rec = simulate(
        profile, _parse_vertex(args.start), args.horizon, stops, seed=args.seed
    )
    if args.dump:
        with open(args.dump, "w", encoding="utf-8", newline="") as fh:
            dump_trajectory_csv(traj, fh)
    print(f"steps: {traj.horizon}")
    print(f"final: {traj.vertex(traj.horizon)}")
    print(f"censored: {traj.censored}")
    print(f"horizontal moves: {len(rec.move_times) - 1}")
    for r, t in sorted(rec.theta.items()):
        print(f"theta[{r}] = {t if t is not None else 'not reached'}")
    for v, t in rec.tau.items():
        print(f"tau[{v.x},{v.y}] = {t if t is not None else 'not reached'}")
    return 0


def _oracle_payload(quantity: str, params: dict, value, mode: str) -> dict:
    if isinstance(value, tuple):
        value = {"lower": value[0], "upper": value[1]}
    elif isinstance(value, Fraction):
        value = {"numerator": value.numerator, "denominator": value.denominator}
    return {"quantity": quantity, "params": params, "value": value, "mode": mode}


def _emit_oracle(payload: dict, fmt: str, out_path: str | None) -> int:
    if fmt == "json":
        _write_or_print(json.dumps(payload, indent=2, sort_keys=True) + "\n", out_path)
        return 0
    value = payload["value"]
    lower = upper = plain = ""
    if isinstance(value, dict) and "lower" in value:
        lower, upper = repr(value["lower"]), repr(value["upper"])
    elif isinstance(value, dict):
        plain = f"{value['numerator']}/{value['denominator']}"
    else:
        plain = repr(value)
    params = runner.canonical_json(payload["params"]).replace('"', '""')
    text = (
        "quantity,params,value,lower,upper,mode\n"
        f'{payload["quantity"]},"{params}",{plain},{lower},{upper},{payload["mode"]}\n'
    )
    _write_or_print(text, out_path)
    return 0


def _cmd_exact(args) -> int:
    mode = "rational" if getattr(args, "rational", False) else "float"
    if args.quantity == "absorption":
        value = oracle.absorption_probability(args.a, args.b, rational=args.rational)
        params = {"a": args.a, "b": args.b}
    elif args.quantity == "tooth-collisions":
        value = oracle.expected_tooth_collisions(args.height, args.v, rational=args.rational)
        params = {"h": args.height, "v": args.v}
    elif args.quantity == "psi0-bracket":
        profile = _profile_from_args(args)
        value = oracle.psi0_probability_bracket(profile, args.u, args.v, args.radius)
        params = {"profile": profile.to_json_dict(), "u": args.u, "v": args.v, "L": args.radius}
        mode = "float"
    else:  # kernel-decay
        report = oracle.kernel_decay_check(args.beta, args.n)
        value = report.ratio
        params = {"beta": args.beta, "n": args.n, "t": report.t, "max_q": report.max_q}
        mode = "float"
    if isinstance(value, Fraction) and not args.rational:
        value = float(value)
    return _emit_oracle(
        _oracle_payload(args.quantity, params, value, mode), args.format, args.out
    )


def _effective_config(args) -> runner.ExperimentConfig:
    config = runner.load_config(args.config)
    if args.seed is not None:
        config = runner.ExperimentConfig(
            profile=config.profile,
            estimator=config.estimator,
            replicas=config.replicas,
            horizon=config.horizon,
            master_seed=args.seed,
            ci_level=config.ci_level,
        )
    return config


def _serialize_rows(rows, fmt: str) -> str:
    import io

    buf = io.StringIO()
    if fmt == "csv":
        runner.write_csv(rows, buf)
    else:
        runner.write_json(rows, buf)
    return buf.getvalue()


def _cmd_estimate(args) -> int:
    config = _effective_config(args)
    est = runner.run_estimator(config, threads=args.threads)
    _write_or_print(_serialize_rows([est], args.format), args.out)
    print(f"fingerprint={est.fingerprint}")
    return 0


def _cmd_sweep(args) -> int:
    config = _effective_config(args)
    try:
        grid = json.loads(args.grid)
    except json.JSONDecodeError:
        try:
            with open(args.grid, "r", encoding="utf-8") as fh:
                grid = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read grid: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed grid JSON: {exc}") from None
    if not isinstance(grid, list):
        raise ConfigError("grid must be a JSON list of parameter objects")
    rows = runner.sweep(config, grid, threads=args.threads)
    _write_or_print(_serialize_rows(rows, args.format), args.out)
    print(f"fingerprint={config.fingerprint()}")
    return 0


def _cmd_acceptance(args) -> int:
    results = acc.run_suite(args.suite, threads=args.threads)
    for res in results:
        print(acc.format_result(res))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 3 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combwalk",
        description="Random-walk collision experiments on wedge combs",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("classify", help="classify a profile analytically")
    _add_profile_args(p)
    p.add_argument("--json", action="store_true", help="emit a JSON report")
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("simulate", help="simulate one trajectory")
    _add_profile_args(p)
    p.add_argument("--start", required=True, help="start vertex X,Y")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=int, action="append", metavar="R", help="record exit time at radius R")
    p.add_argument("--tau", action="append", metavar="X,Y", help="record hitting time of a vertex")
    p.add_argument("--early", metavar="theta:R|tau:X,Y", help="truncate at this stopping time")
    p.add_argument("--dump", metavar="FILE", help="write the trajectory as CSV n,x,y")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("exact", help="exact finite-chain oracle computations")
    ex = p.add_subparsers(dest="quantity", required=True)

    q = ex.add_parser("absorption", help="P(hit b before 0) for an SRW on {0..b}")
    q.add_argument("--a", type=int, required=True)
    q.add_argument("--b", type=int, required=True)
    q.add_argument("--rational", action="store_true")

    q = ex.add_parser("tooth-collisions", help="expected in-tooth collision count")
    q.add_argument("--height", type=int, required=True)
    q.add_argument("--v", type=int, required=True)
    q.add_argument("--rational", action="store_true")

    q = ex.add_parser("psi0-bracket", help="post-meeting collision probability bracket")
    _add_profile_args(q)
    q.add_argument("--u", type=int, required=True)
    q.add_argument("--v", type=int, required=True)
    q.add_argument("--radius", type=int, required=True)

    q = ex.add_parser("kernel-decay", help="killed-kernel maximum at the cubic time")
    q.add_argument("--beta", type=float, required=True)
    q.add_argument("--n", type=int, required=True)

    for q in ex.choices.values():
        q.add_argument("--format", choices=["csv", "json"], default="json")
        q.add_argument("--out", metavar="FILE")
    p.set_defaults(fn=_cmd_exact)

    p = sub.add_parser("estimate", help="run one Monte Carlo estimator")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("sweep", help="run an estimator over a parameter grid")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--grid", required=True, metavar="FILE|JSON", help="list of parameter overrides")
    p.add_argument("--out", metavar="FILE")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    p.add_argument("suite", choices=["fast", "full"])
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=_cmd_acceptance)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CombwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
