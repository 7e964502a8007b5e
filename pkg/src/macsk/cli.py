"""``macsk``: JSON-in / JSON-out command line front end.

Every command emits a versioned report. Without ``--output`` the report goes
to standard output; with it, the report is written to that file and a short
human summary is printed instead. Failures emit ``{"error": {"kind", ...}}``
with a distinct exit code per kind (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
import time
from importlib import resources
from typing import Any, Sequence

from . import __version__
from .info import BudgetExceeded, MacChannel, adder_mac

REPORT_VERSION = 1

EXIT_CODES = {
    "ok": 0,
    "internal": 1,
    "schema": 2,
    "file-not-found": 3,
    "budget-exceeded": 4,
    "invalid-argument": 5,
    "verification-failed": 6,
    "usage": 64,
}

BUNDLED = ("adder", "xor", "noisy_adder")


class CliError(Exception):
    def __init__(self, kind: str, message: str, detail: Any = None):
        super().__init__(message)
        self.kind = kind
        self.detail = detail


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


# ----------------------------------------------------------------------------
# inputs


def resolve_path(path: str) -> str:
    """A file path, or the name of a bundled data file (``adder``, ``xor``, ...)."""
    if os.path.exists(path):
        return path
    stem = path[:-5] if path.endswith(".json") else path
    if os.sep not in stem:
        ref = resources.files("macsk") / "data" / f"{stem}.json"
        if ref.is_file():
            return str(ref)
    raise FileNotFoundError(path)


def _channel(path: str) -> MacChannel:
    from .schema import load_channel

    return load_channel(resolve_path(path))


def _is_adder_shape(ch: MacChannel) -> bool:
    return ch.w.shape == (2, 2, 3)


def _feedback_code(ch: MacChannel, k: int, slack: float):
    """The two-phase code for adder-shaped channels, uncoded time sharing for binary ones."""
    from .fbcode import adder_feedback_code, timeshare_code

    if _is_adder_shape(ch):
        return adder_feedback_code(k, slack), "adder-two-phase"
    if ch.w.shape == (2, 2, 2):
        return timeshare_code(), "timeshare"
    raise CliError("invalid-argument", f"no built-in feedback code for channel shape {ch.w.shape}")


# ----------------------------------------------------------------------------
# commands; each returns (params, results, summary lines)


def cmd_rstar(a):
    from .rates import compute_rstar

    ch = _channel(a.channel)
    res = compute_rstar(ch, grid=a.grid, refine=a.refine).report()
    res["exact"] = False
    return ({"channel": a.channel, "grid": a.grid, "refine": a.refine},
            {**res, "error_prob": None, "ci": [res["rate"] - res["uncertainty"], res["rate"]]},
            [f"R* = {res['rate']:.6f} (uncertainty {res['uncertainty']:.2e})"])


def cmd_fbcode_rate(a):
    from .fbcode import ADDER_ASYMPTOTIC_RATE, adder_code_rate, adder_feedback_code, adder_rate_threshold

    code = adder_feedback_code(a.k, a.slack)
    rate = adder_code_rate(a.k, a.slack)
    k0 = adder_rate_threshold(a.slack, 0.75)
    res = {"rate": rate, "uncertainty": 0.0, "error_prob": None, "ci": None, "exact": True,
           "asymptotic_rate": ADDER_ASYMPTOTIC_RATE, "k0_above_0.75": k0,
           "phase1_uses": a.k, "phase2_uses": code.phase2, "budget_bits": code.budget, "uses": code.n,
           "overflow_probability": code.overflow_probability()}
    return ({"k": a.k, "slack": a.slack}, res,
            [f"per-user rate {rate:.6f} (asymptote {ADDER_ASYMPTOTIC_RATE:.6f}); rate > 0.75 for k >= {k0}"])


def cmd_simulate_code(a):
    from .fbcode import simulate_code

    ch = _channel(a.channel)
    code, name = _feedback_code(ch, a.k, a.slack)
    sim = simulate_code(ch, code, a.trials, a.seed, threads=a.threads)
    ci = sim["ci"]
    res = {"rate": code.rate_per_user, "uncertainty": 0.0, "error_prob": sim["error_prob"],
           "ci": ci, "errors": sim["errors"], "trials": sim["trials"], "code": name, "exact": False}
    return ({"channel": a.channel, "k": a.k, "slack": a.slack, "trials": a.trials, "seed": a.seed}, res,
            [f"{name} code, rate {code.rate_per_user:.4f}: error {sim['error_prob']:.2e} "
             f"(95% CI [{ci[0]:.2e}, {ci[1]:.2e}], {a.trials} trials)"])


def cmd_bound(a):
    from .converse import best_bound_lp, one_shot_bound
    from .schema import load_law, parse_partition

    law = load_law(resolve_path(a.law))
    m = law.nvars - 2
    if m < 2:
        raise CliError("schema", "bound law needs Y_1..Y_m (m >= 2) followed by K and F")
    lam = parse_partition(a.partition, m)
    if lam is None:
        lam, _ = best_bound_lp(law, list(range(m)))
    if not 0 < a.eps < 1:
        raise CliError("invalid-argument", "--eps must lie in (0, 1)")
    r = one_shot_bound(law, lam, a.eps, ys=list(range(m)), key=m, transcript=m + 1)
    weights = {",".join(map(str, sorted(b))): w for b, w in lam.support().items()}
    res = {"bound_bits": r.bound_bits, "key_bits": r.key_bits, "holds": r.key_bits <= r.bound_bits + 1e-6,
           **r.terms(), "corollary_bits": r.corollary_bits, "lambda": weights, "exact": True}
    return ({"law": a.law, "partition": a.partition, "eps": a.eps, "m": m}, res,
            [f"log|K| = {r.key_bits:.4f} <= bound {r.bound_bits:.6f}: {res['holds']}"])


def cmd_check_interactive(a):
    from .converse import (GenieTranscript, all_partitions, check_factorization,
                           check_interactive_inequality, is_product_law, partition_to_fractional)
    from .schema import load_law, load_protocol, parse_partition

    proto = load_protocol(resolve_path(a.proto))
    if not hasattr(proto, "transcript_law"):
        raise CliError("schema", "check-interactive needs an interactive or genie protocol")
    law = load_law(resolve_path(a.law))
    if a.partition:
        lams = [(a.partition, parse_partition(a.partition, proto.m))]
        if lams[0][1] is None:
            raise CliError("invalid-argument", "--partition lp is not meaningful here")
    else:
        lams = [("|".join(",".join(map(str, sorted(b))) for b in p.blocks), partition_to_fractional(p))
                for p in all_partitions(proto.m)]
    checks = []
    for name, lam in lams:
        r = check_interactive_inequality(proto, law, lam)
        checks.append({"partition": name, **r})
    res = {"interactive": not isinstance(proto, GenieTranscript),
           "holds": all(c["holds"] for c in checks), "checks": checks, "exact": True}
    if is_product_law(law):
        res["factorization_gap"] = check_factorization(proto, law)
    lines = [f"{c['partition']}: H(F) = {c['lhs']:.6f} vs {c['rhs']:.6f} -> "
             f"{'holds' if c['holds'] else 'VIOLATED'}" for c in checks]
    if "factorization_gap" in res:
        lines.append(f"factorization gap {res['factorization_gap']:.3e}")
    return {"proto": a.proto, "law": a.law, "partition": a.partition}, res, lines


def cmd_sk_se(a):
    from .protocols import source_emulation_sk

    ch = _channel(a.channel)
    trials = None if a.exact else a.trials
    if trials is None and not a.exact:
        raise CliError("usage", "sk-se needs --trials or --exact")
    run = source_emulation_sk(ch, a.n, a.rate, seed=a.seed, trials=trials)
    res = run.report()
    return ({"channel": a.channel, "n": a.n, "rate": a.rate, "trials": trials, "seed": a.seed}, res,
            [_sk_line(res)])


def cmd_sk_feedback(a):
    from .feedback import FeedbackParams, feedback_sk_scheme

    ch = _channel(a.channel)
    code, name = _feedback_code(ch, a.k, a.slack)
    params = FeedbackParams(blocks=a.blocks, delta_sw=a.dsw, delta_pa=a.dpa, seed=a.seed, runs=a.runs,
                            threads=a.threads)
    exact = True if a.exact else (False if a.estimate else None)
    res = feedback_sk_scheme(ch, code, params, exact=exact)
    res["code"] = name
    return ({"channel": a.channel, "k": a.k, "slack": a.slack, "blocks": a.blocks, "dsw": a.dsw,
             "dpa": a.dpa, "runs": a.runs, "seed": a.seed}, res, [_sk_line(res)])


def cmd_sk_run(a):
    from .protocols import enumerate_protocol, key_metrics, run_trials, with_map_estimators
    from .schema import load_protocol, needs_map_estimators

    p = load_protocol(resolve_path(a.proto))
    if hasattr(p, "transcript_law"):
        raise CliError("schema", "sk-run needs a protocol of kind 'ct'")
    ch = _channel(a.channel)
    if needs_map_estimators(p):
        p, _ = with_map_estimators(p, ch)
    if a.exact:
        m = key_metrics(enumerate_protocol(p, ch))
    else:
        m = key_metrics(run_trials(p, ch, a.trials, a.seed))
    res = {"key_rate": math.log2(p.key_size) / p.n, "agreement": m["agreement_prob"], "s_in": m["s_in"],
           "s_in_mode": m["mode"], "weak_rate": m["weak_rate"],
           "comm_rate": sum(math.log2(msg.alphabet) for r in p.rounds for msg in r) / p.n,
           "stage_errors": {"key_disagreement": 1 - m["agreement_prob"]}}
    if "samples" in m:
        res["samples"] = m["samples"]
        res["agreement_ci"] = m["agreement_ci"]
    return ({"proto": a.proto, "channel": a.channel, "exact": a.exact,
             "trials": None if a.exact else a.trials, "seed": a.seed}, res, [_sk_line(res)])


def cmd_verify_suite(a):
    from .verify import verify_suite

    lines = []
    start = time.perf_counter()

    def progress(b):
        lines.append(f"{'PASS' if b.passed else 'FAIL'} {b.name}: {b.cases} cases"
                     + ("" if b.passed else f", {len(b.failures)} failures"))

    res = verify_suite(a.level, a.seed, inject_xor=a.inject_xor, progress=progress)
    lines.append(f"{'PASS' if res['passed'] else 'FAIL'} verify-suite {a.level} "
                 f"({time.perf_counter() - start:.1f} s)")
    if not res["passed"]:
        raise CliError("verification-failed", "one or more properties failed",
                       {"results": res, "summary": lines})
    return {"level": a.level, "seed": a.seed, "inject_xor": a.inject_xor}, res, lines


def _sk_line(res: dict) -> str:
    return (f"key rate {res['key_rate']:.4f}, agreement {res['agreement']:.4f}, "
            f"s_in {res['s_in']:.3e} ({res['s_in_mode']})")


COMMANDS = {
    "rstar": cmd_rstar,
    "fbcode-rate": cmd_fbcode_rate,
    "simulate-code": cmd_simulate_code,
    "bound": cmd_bound,
    "check-interactive": cmd_check_interactive,
    "sk-se": cmd_sk_se,
    "sk-feedback": cmd_sk_feedback,
    "sk-run": cmd_sk_run,
    "verify-suite": cmd_verify_suite,
}
STOCHASTIC = {"simulate-code", "sk-feedback"}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output", help="write the JSON report here and print a summary")
    common.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    common.add_argument("--timestamp", action="store_true",
                        help="record the wall-clock time in the provenance block")
    p = _Parser(prog="macsk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("rstar", parents=[common], help="no-feedback symmetric rate R*")
    s.add_argument("--channel", required=True)
    s.add_argument("--grid", type=int, default=33)
    s.add_argument("--refine", type=int, default=40)

    s = sub.add_parser("fbcode-rate", parents=[common], help="analytic rate of the adder feedback code")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--slack", type=float, default=2.0)

    s = sub.add_parser("simulate-code", parents=[common], help="Monte Carlo feedback-code error")
    s.add_argument("--channel", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--slack", type=float, default=2.0)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)

    s = sub.add_parser("bound", parents=[common], help="one-shot converse bound")
    s.add_argument("--law", required=True, help="law of (Y_1..Y_m, K, F)")
    s.add_argument("--partition", default="lp", help="'lp', '0,1|2', or '0,1=0.5;1,2=0.5;0,2=0.5'")
    s.add_argument("--eps", type=float, required=True)

    s = sub.add_parser("check-interactive", parents=[common], help="Lemma 1 / Lemma 4 checks")
    s.add_argument("--proto", required=True)
    s.add_argument("--law", required=True)
    s.add_argument("--partition", help="default: every set partition")

    s = sub.add_parser("sk-se", parents=[common], help="source-emulation SK scheme")
    s.add_argument("--channel", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--rate", type=float, default=0.5)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--trials", type=int)
    g.add_argument("--exact", action="store_true")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sk-feedback", parents=[common], help="section VI feedback SK pipeline")
    s.add_argument("--channel", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--slack", type=float, default=1.0)
    s.add_argument("--blocks", type=int, required=True)
    s.add_argument("--dsw", type=float, default=0.05)
    s.add_argument("--dpa", type=float, default=0.05)
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--seed", type=int, required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="force exact (K, F) security")
    g.add_argument("--estimate", action="store_true", help="force the leftover-hash estimate")

    s = sub.add_parser("sk-run", parents=[common], help="run a protocol file")
    s.add_argument("--proto", required=True)
    s.add_argument("--channel", default="adder")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--exact", action="store_true")
    g.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("verify-suite", parents=[common], help="property batteries")
    s.add_argument("level", choices=("quick", "full"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject-xor", action="store_true",
                   help="mutation test: feed the XOR genie to the Lemma 1 checker")

    s = sub.add_parser("run", parents=[common], help="run a JSON RunConfig")
    s.add_argument("config")
    return p


# ----------------------------------------------------------------------------
# config files


def config_argv(path: str) -> list[str]:
    """Translate ``{"command", "params", "seed", "output", "threads"}`` into argv."""
    from .schema import SchemaError, read_json

    cfg = read_json(path)
    if not isinstance(cfg, dict) or "command" not in cfg:
        raise SchemaError(f"{path}: config needs a 'command' field")
    cmd = cfg["command"]
    if cmd not in COMMANDS:
        raise SchemaError(f"{path}: unknown command {cmd!r}")
    if cmd in STOCHASTIC and "seed" not in cfg:
        raise SchemaError(f"{path}: stochastic command {cmd!r} needs a 'seed'")
    params = dict(cfg.get("params", {}))
    if not isinstance(params, dict):
        raise SchemaError(f"{path}: params must be an object")
    argv = [cmd]
    if cmd == "verify-suite":
        argv.append(str(params.pop("level", "quick")))
    base = os.path.dirname(os.path.abspath(path))
    for key, val in params.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
            continue
        if key in ("channel", "law", "proto") and not os.path.isabs(str(val)):
            cand = os.path.join(base, str(val))
            val = cand if os.path.exists(cand) else val
        argv += [flag, str(val)]
    if "seed" in cfg:
        argv += ["--seed", str(cfg["seed"])]
    for key in ("output", "threads"):
        if key in cfg:
            argv += [f"--{key}", str(cfg[key])]
    return argv


# ----------------------------------------------------------------------------
# entry point


def _provenance(args) -> dict:
    stamp = (datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
             if getattr(args, "timestamp", False) else None)
    return {"version": __version__, "git_describe": "unknown", "seed": getattr(args, "seed", None),
            "timestamp": stamp, "backend": _backend()}


def _backend() -> str:
    from . import gf2

    return gf2.BACKEND


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=False) + "\n"


def _json_default(o):
    import numpy as np

    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(obj):
    """Replace non-finite floats by strings so reports stay strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _emit(report: dict, output: str | None, summary: list[str], out) -> None:
    text = dumps(_clean(report))
    if output:
        with open(output, "w") as fh:
            fh.write(text)
        for line in summary:
            print(line, file=out)
    else:
        out.write(text)


def run(argv: Sequence[str], out=None) -> int:
    """Parse, dispatch and emit; returns the exit code."""
    out = sys.stdout if out is None else out
    from .schema import SchemaError

    args = None
    try:
        parser = build_parser()
        args = parser.parse_args(list(argv))
        if args.command == "run":
            outer = args
            args = parser.parse_args(config_argv(args.config))
            # flags given on the command line override the config file
            if outer.output:
                args.output = outer.output
            if outer.threads != 1:
                args.threads = outer.threads
            args.timestamp = args.timestamp or outer.timestamp
        if args.threads < 1:
            raise CliError("invalid-argument", "--threads must be positive")
        params, results, summary = COMMANDS[args.command](args)
        report = {"report_version": REPORT_VERSION, "command": args.command, "params": params,
                  "results": results, "provenance": _provenance(args), "status": "ok"}
        _emit(report, args.output, summary, out)
        return 0
    except CliError as exc:
        err = exc
    except SchemaError as exc:
        err = CliError("schema", str(exc))
    except FileNotFoundError as exc:
        err = CliError("file-not-found", f"no such file: {exc.filename or exc}")
    except BudgetExceeded as exc:
        err = CliError("budget-exceeded", str(exc))
    except ValueError as exc:
        err = CliError("invalid-argument", str(exc))
    report = {"report_version": REPORT_VERSION, "status": "error",
              "command": getattr(args, "command", None),
              "error": {"kind": err.kind, "code": EXIT_CODES[err.kind], "message": str(err)}}
    if err.detail is not None:
        report["error"]["detail"] = err.detail
    output = getattr(args, "output", None)
    summary = err.detail.get("summary", []) if isinstance(err.detail, dict) else []
    _emit(report, output, summary + [f"error ({err.kind}): {err}"], out)
    return EXIT_CODES[err.kind]


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
