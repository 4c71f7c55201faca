"""Command-line front end.

Every run that is given ``--out DIR`` writes its outputs there together with
``manifest.json``; ``stakesim replay DIR/manifest.json`` re-executes it.

Exit codes: 0 success, 1 usage, 2 config validation, 3 internal invariant
violation.
"""
from __future__ import annotations

import argparse
import bisect
import gzip
import hashlib
import io
import json
import logging
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from . import __version__, analytics, config
from .attacks import run_attack, synthetic_chain
from .core import InvariantViolation, ParamsError, Rng
from .modifier import ModifierNotReady, ModifierOracle, trace_csv
from .netsim import Simulation, fork_rate_curve

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3
MANIFEST_NAME = "manifest.json"
_STREAM_TRACE = 6

log = logging.getLogger("stakesim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: str | None
    config_sha256: str | None
    seed: int | None
    preset: str | None
    overrides: dict[str, Any]
    out: str
    jobs: int
    version: str = __version__
    outputs: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        return cls(**json.loads(text))


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _override(text: str) -> tuple[str, Any]:
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _common(seed_required: bool) -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=_seed, required=seed_required, help="u64 seed")
    p.add_argument("--out", help="output directory (a manifest is written there)")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    p.add_argument("--preset", choices=["neucoin", "peercoin"], help="base chain parameters")
    p.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                   metavar="KEY=VALUE", help="override one chain parameter")
    return p


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stakesim", description="Proof-of-stake consensus simulator.")
    parser.add_argument("--version", action="version", version=f"stakesim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    loose, seeded = _common(False), _common(True)

    an = sub.add_parser("analytic", help="closed-form probability tables and series")
    asub = an.add_subparsers(dest="table", required=True, parser_class=_Parser)

    t1 = asub.add_parser("table1", parents=[loose], help="double-spend success table")
    t1.add_argument("--p", type=float, action="append", help="attacker share (repeatable)")
    t1.add_argument("--n", type=int, action="append", help="confirmations (repeatable)")

    gt = asub.add_parser("grind-threshold", parents=[loose],
                         help="stake share at which grinding reaches the success target")
    gt.add_argument("--tmod", type=float, help="modifier interval in minutes")
    gt.add_argument("--tau", type=float, help="block time in seconds")
    gt.add_argument("--hash-rate", type=float, default=analytics.BITCOIN_HASH_RATE)
    gt.add_argument("--n-stakes", type=float, default=analytics.DEFAULT_N_STAKES)
    gt.add_argument("--target", type=float, default=0.5, help="success probability")
    gt.add_argument("--geq", action="store_true", help="count ties with the honest expectation")

    cu = asub.add_parser("catchup", parents=[loose], help="history-revision bounds")
    cu.add_argument("--p", type=_floats, default=[0.1, 0.2, 0.3, 0.4])
    cu.add_argument("--lag", type=_ints, default=[0, 20, 40, 60, 120, 240])
    cu.add_argument("--owns-coins", action="store_true")
    cu.add_argument("--tau", type=float)

    pm = asub.add_parser("pmf", parents=[loose], help="attacker blocks per modifier interval")
    pm.add_argument("--p", type=float, required=True)
    pm.add_argument("--tmod", type=float, help="modifier interval in minutes")
    pm.add_argument("--tau", type=float)

    gc = asub.add_parser("grind-curve", parents=[loose], help="grinding success against p")
    gc.add_argument("--p", type=_floats, default=[x / 100 for x in range(5, 51, 5)])
    gc.add_argument("--hash-rate", type=_floats, default=[analytics.SINGLE_ASIC_HASH_RATE,
                                                          analytics.BITCOIN_HASH_RATE])
    gc.add_argument("--tmod", type=float)
    gc.add_argument("--tau", type=float)
    gc.add_argument("--n-stakes", type=float, default=analytics.DEFAULT_N_STAKES)

    sim = sub.add_parser("simulate", parents=[seeded], help="network simulation")
    sim.set_defaults(needs_config=True)
    att = sub.add_parser("attack", parents=[seeded], help="attack scenario")
    att.set_defaults(needs_config=True)
    mt = sub.add_parser("modifier-trace", parents=[seeded],
                        help="stake modifiers over a synthetic chain")
    mt.add_argument("--intervals", type=_positive, help="number of modifier intervals")

    rp = sub.add_parser("replay", help="re-run from a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="write here instead of the recorded directory")
    rp.add_argument("--check", action="store_true",
                    help="fail unless every output matches the recorded digest")

    sch = sub.add_parser("schema", help="print a config schema")
    sch.add_argument("kind", choices=sorted(config.SCHEMAS))
    return parser


# -- helpers --------------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _gzip(text: str) -> bytes:
    buf = io.BytesIO()
    with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as gz:
        gz.write(text.encode())
    return buf.getvalue()


def _overrides(args) -> dict[str, Any]:
    return dict(args.overrides)


def _doc(args) -> dict[str, Any]:
    if args.config is None:
        if getattr(args, "needs_config", False):
            raise UsageError(f"stakesim {args.command}: --config is required")
        return {}
    return config.load(args.config)


def _params(args, doc: dict[str, Any]):
    return config.resolve_params(doc, args.preset, _overrides(args))


def _strip_out(argv: Sequence[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def _emit(args, argv: Sequence[str], files: dict[str, str | bytes], summary: str) -> None:
    """Write files plus manifest to --out, or print the primary file to stdout."""
    if args.out is None:
        primary = next(iter(files.values()))
        sys.stdout.write(primary if isinstance(primary, str) else summary + "\n")
        return
    os.makedirs(args.out, exist_ok=True)
    digests = {}
    for name, body in files.items():
        data = body.encode() if isinstance(body, str) else body
        with open(os.path.join(args.out, name), "wb") as fp:
            fp.write(data)
        digests[name] = _sha256(data)
    cfg_digest = None
    if args.config is not None:
        with open(args.config, "rb") as fp:
            cfg_digest = _sha256(fp.read())
    command = args.command if args.command != "analytic" else f"analytic {args.table}"
    manifest = RunManifest(command=command, argv=_strip_out(argv), config=args.config,
                           config_sha256=cfg_digest, seed=args.seed, preset=args.preset,
                           overrides=_overrides(args), out=args.out, jobs=args.jobs,
                           outputs=digests)
    with open(os.path.join(args.out, MANIFEST_NAME), "w", encoding="utf-8") as fp:
        fp.write(manifest.to_json())
    print(summary)


# -- commands -------------------------------------------------------------------

def cmd_analytic(args, argv) -> None:
    doc = _doc(args)
    params = _params(args, doc)
    tau = args.tau if getattr(args, "tau", None) is not None else float(params.block_time_target)
    tmod = (args.tmod * 60 if getattr(args, "tmod", None) is not None
            else float(params.modifier_interval))
    if args.table == "table1":
        ps = args.p or list(analytics.TABLE1_P)
        ns = args.n or list(analytics.TABLE1_N)
        if any(not 0 < p < 1 for p in ps) or any(n < 0 for n in ns):
            raise UsageError("table1: --p must lie in (0, 1) and --n must be >= 0")
        text = analytics.table1_csv(analytics.table1(ps, ns), ns)
        _emit(args, argv, {"table1.csv": text}, f"wrote table1.csv ({len(ps)}x{len(ns)})")
    elif args.table == "grind-threshold":
        if not 0 < args.target < 1:
            raise UsageError("grind-threshold: --target must lie in (0, 1)")
        res = analytics.grinding_threshold(args.hash_rate, tmod, tau, args.n_stakes,
                                           args.target, strict=not args.geq)
        body = {"p_star": res.p_star, "bracket": list(res.bracket), "boundary": res.boundary,
                "t_modifier": tmod, "tau": tau, "hash_rate": args.hash_rate,
                "n_stakes": args.n_stakes, "success_target": args.target,
                "strict": not args.geq}
        line = (f"p* = {res.p_star:.4f}" if res.p_star is not None
                else f"no crossing ({res.boundary})")
        if args.out is None:
            print(line)
            return
        _emit(args, argv, {"grind_threshold.json": json.dumps(body, sort_keys=True, indent=1)
                           + "\n"}, line)
    elif args.table == "catchup":
        rows = analytics.catchup_series(args.p, args.lag, args.owns_coins, tau)
        text = analytics.series_csv(["p", "lag"], rows)
        _emit(args, argv, {"catchup.csv": text}, f"wrote catchup.csv ({len(rows)} rows)")
    elif args.table == "pmf":
        if not 0 < args.p < 1:
            raise UsageError("pmf: --p must lie in (0, 1)")
        rows = analytics.pmf_series(args.p, tmod, tau)
        text = analytics.series_csv(["k"], rows)
        _emit(args, argv, {"pmf.csv": text}, f"wrote pmf.csv ({len(rows)} rows)")
    else:
        if any(not 0 < p < 1 for p in args.p):
            raise UsageError("grind-curve: --p must lie in (0, 1)")
        rows = analytics.grinding_curve(args.p, args.hash_rate, tmod, tau, args.n_stakes)
        text = analytics.series_csv(["hash_rate", "p"], rows)
        _emit(args, argv, {"grind_curve.csv": text}, f"wrote grind_curve.csv ({len(rows)} rows)")


def cmd_simulate(args, argv) -> None:
    doc = _doc(args)
    cfg = config.sim_config(doc, args.seed, args.preset, _overrides(args))
    if "curve" in doc:
        curve = doc["curve"]
        points = fork_rate_curve(cfg, curve["block_times"], curve["measured_blocks"],
                                 jobs=args.jobs, scale=curve.get("scale", True))
        lines = ["block_time,fork_rate,orphans,total_blocks"]
        results = []
        for tau, rate, res in points:
            lines.append(f"{tau},{rate!r},{res.orphan_count},{res.total_blocks}")
            results.append({"block_time": tau, "result": res.to_dict()})
        files = {"curve.csv": "\n".join(lines) + "\n",
                 "curve.json": json.dumps(results, sort_keys=True, indent=1) + "\n"}
        _emit(args, argv, files, "; ".join(f"tau={t}s fork_rate={r:.4f}"
                                           for t, r, _ in points))
        return
    sim = Simulation(cfg)
    result = sim.run()
    for node in sim.nodes:
        node.state.audit()
    buf = io.StringIO()
    sim.observer().state.dump_jsonl(buf)
    files: dict[str, str | bytes] = {"result.json": result.to_json() + "\n",
                                     "chain.jsonl": buf.getvalue()}
    if result.trace is not None:
        files["trace.jsonl.gz"] = _gzip("".join(json.dumps(list(e)) + "\n"
                                                for e in result.trace))
    _emit(args, argv, files, f"height={result.final_height} blocks={result.total_blocks} "
                             f"fork_rate={result.fork_rate:.4f}")


def cmd_attack(args, argv) -> None:
    doc = _doc(args)
    spec = config.attack_spec(doc, args.seed)
    params = _params(args, doc)
    outcome = run_attack(spec, params)
    if outcome.successes > outcome.trials:
        raise InvariantViolation("more successes than trials")
    analytic = ("" if outcome.analytic is None
                else f" analytic=1e{outcome.analytic.log10_value:.3f}")
    _emit(args, argv, {"outcome.json": outcome.to_json() + "\n"},
          f"{spec.kind}: {outcome.successes}/{outcome.trials} = {outcome.probability:.6g} "
          f"ci99=[{outcome.ci_low:.6g}, {outcome.ci_high:.6g}]{analytic}")


def cmd_modifier_trace(args, argv) -> None:
    doc = _doc(args)
    if doc:
        config.validate(doc, config.TRACE_SCHEMA)
    params = _params(args, doc)
    n = args.intervals or doc.get("intervals", 16)
    mi, sel = params.modifier_interval, params.selection_interval
    first = -(-sel // mi) * mi
    end = first + (n + 1) * mi
    chain = synthetic_chain(Rng(args.seed, _STREAM_TRACE), 0, end, params.block_time_target)
    store = {b.hash: b for b in chain}
    oracle = ModifierOracle(params, store.get, 0)
    times = [b.timestamp for b in chain]
    schedules = []
    for i in range(n):
        start = first + i * mi
        anchor = chain[bisect.bisect_left(times, start) - 1]
        try:
            schedules.append(oracle.schedule_at(anchor, start, now=start))
        except ModifierNotReady as exc:
            raise InvariantViolation(str(exc)) from None
    for s in schedules:
        if s.value and len(set(s.source_blocks)) != len(s.source_blocks):
            raise InvariantViolation("modifier source blocks are not distinct")
    _emit(args, argv, {"modifiers.csv": trace_csv(schedules)},
          f"wrote modifiers.csv ({n} intervals, {len(chain)} blocks)")


def cmd_replay(args) -> int:
    try:
        with open(args.manifest, encoding="utf-8") as fp:
            manifest = RunManifest.from_json(fp.read())
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise ParamsError(f"cannot read manifest {args.manifest}: {exc}") from None
    if manifest.config is not None:
        with open(manifest.config, "rb") as fp:
            if _sha256(fp.read()) != manifest.config_sha256:
                raise ParamsError(f"config {manifest.config} changed since the recorded run")
    out = args.out or manifest.out
    code = main(list(manifest.argv) + ["--out", out])
    if code != EXIT_OK or not args.check:
        return code
    for name, digest in sorted(manifest.outputs.items()):
        with open(os.path.join(out, name), "rb") as fp:
            if _sha256(fp.read()) != digest:
                raise InvariantViolation(f"{name} differs from the recorded run")
    print(f"replay matches {len(manifest.outputs)} recorded output(s)")
    return EXIT_OK


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "attack": cmd_attack,
    "modifier-trace": cmd_modifier_trace,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "schema":
            print(json.dumps(config.SCHEMAS[args.kind], sort_keys=True, indent=1))
            return EXIT_OK
        if args.command == "replay":
            return cmd_replay(args)
        COMMANDS[args.command](args, argv)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParamsError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception:
        traceback.print_exc()
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
