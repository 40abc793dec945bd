"""Command-line front door: serve, simulate, best-response, verify-lemma,
audit, plan.

Exit codes: 0 on success, 1 when a verification report fails, 2 on usage
errors (argparse's own convention for bad arguments is also 2).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .cake import Valuation
from .profiles import PROCEDURES, lab_profile


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load_profile(spec: str):
    """A procedure id (lab tables) or a JSON file with weights rows."""
    if spec in PROCEDURES:
        return spec, lab_profile(spec)
    if not os.path.exists(spec):
        raise FileNotFoundError(
            f"{spec!r} is neither a procedure id {PROCEDURES} nor a file")
    with open(spec, encoding="utf8") as fh:
        data = json.load(fh)
    profile = tuple(Valuation(row) for row in data["weights"])
    return data["procedure"], profile


def _load_valuation(args) -> Valuation:
    if args.weights_file:
        with open(args.weights_file, encoding="utf8") as fh:
            return Valuation(json.load(fh))
    return lab_profile(args.procedure)[0]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_serve(args) -> int:
    from .server import serve

    serve(port=args.port, trace_dir=args.trace_dir,
          enforce_time_default=not args.no_time_limit, host=args.host)
    return 0


def _cmd_simulate(args) -> int:
    from .experiment import BatchConfig, simulate_batch, write_traces

    procedures = tuple(args.procedures.split(",")) if args.procedures else None
    policies = tuple(args.policy) if args.policy else ("best_response",)
    kwargs = {"alpha": args.alpha, "policies": policies,
              "repetitions": args.repetitions, "seed": args.seed}
    if procedures:
        kwargs["procedures"] = procedures
    traces, report = simulate_batch(BatchConfig(**kwargs))
    if args.traces_out:
        write_traces(args.traces_out, traces)
        print(f"wrote {len(traces)} trace lines to {args.traces_out}")
    csv = report.to_csv()
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf8") as fh:
            fh.write(csv)
        print(f"wrote metrics to {args.csv_out}")
    else:
        print(csv, end="")
    return 0


def _cmd_best_response(args) -> int:
    from .strategy import best_response

    procedure, profile = _load_profile(args.profile)
    found = best_response(procedure, profile, role=args.role)
    print(f"procedure    {found.procedure}")
    print(f"role         {args.role}")
    print(f"actions      {list(found.actions)}")
    print(f"truthful     {found.truthful_payoff}")
    print(f"payoff       {found.payoff}")
    print(f"gain         {found.gain}")
    print(f"epsilon gap  {found.gain / found.total:.5f}")
    print(f"envious      {found.envious_at_optimum}")
    return 0


def _cmd_verify_lemma(args) -> int:
    from .strategy import verify_lemma

    report = verify_lemma(args.number)
    if args.number == 3:
        header = f"{'procedure':<10}{'truthful':>10}{'best':>8}{'gap':>10}{'bound':>10}  verdict"
        print(header)
        for row in report["rows"]:
            verdict = "pass" if row["ok"] else "FAIL"
            print(f"{row['procedure']:<10}{row['truthful']:>10}{row['best']:>8}"
                  f"{row['gap']:>10.5f}{row['threshold']:>10.5f}  {verdict}")
    else:
        print(f"truthful payoff      {report['truthful']}")
        print(f"best payoff          {report['best']}"
              f" at {list(report['best_actions'])}")
        print(f"envious optimum      {report['best_envious']}"
              f" at {list(report['envious_actions'])}"
              f" (envy flag: {report['envy_at_optimum']})")
        print(f"scaled (120 total)   truthful {report['scaled_truthful']:g},"
              f" best {report['scaled_best']:g},"
              f" envious optimum {report['scaled_envious']:g}")
    print("result: " + ("PASS" if report["ok"] else "FAIL"))
    return 0 if report["ok"] else 1


def _trace_files(paths):
    out = []
    for path in paths:
        if os.path.isdir(path):
            out.extend(sorted(
                os.path.join(path, name) for name in os.listdir(path)
                if name.endswith(".jsonl")))
        else:
            out.append(path)
    return out


def _cmd_audit(args) -> int:
    from .experiment import metrics, read_traces

    files = _trace_files(args.paths)
    if not files:
        return _fail_usage("no trace files found")
    traces = []
    for path in files:
        if not os.path.exists(path):
            return _fail_usage(f"no such trace file: {path}")
        traces.extend(read_traces(path))
    if not traces:
        return _fail_usage("trace files contain no rounds")
    tolerances = tuple(args.tolerance) if args.tolerance else (0, 5, 10)
    report = metrics(traces, envy_tolerances=tolerances)
    csv = report.to_csv()
    if args.csv_out:
        with open(args.csv_out, "w", encoding="utf8") as fh:
            fh.write(csv)
        print(f"wrote metrics to {args.csv_out}")
    else:
        print(csv, end="")
    return 0


def _cmd_plan(args) -> int:
    from .learning import plan, KnowledgeState

    valuation = _load_valuation(args)
    state = KnowledgeState(args.low, args.high)
    cut, value = plan(valuation, args.rounds, state)
    approx = float(Fraction(value))
    print(f"bracket      ({state.s}, {state.t}]")
    print(f"rounds       {args.rounds}")
    print(f"cut          {cut}")
    print(f"value        {value} (= {approx:.3f})")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairslice",
        description="Discrete cake-cutting procedures: play, probe, audit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--trace-dir", default="sessions")
    p.add_argument("--no-time-limit", action="store_true",
                   help="disable the per-procedure time budget")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("simulate", help="run a batch of simulated subjects")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="fraction of the population playing truthfully")
    p.add_argument("--policy", action="append",
                   default=None, choices=["best_response", "envious_best_response"],
                   help="deviation policy kinds (repeatable)")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--procedures", default=None,
                   help="comma-separated subset, e.g. 2acc,3sc")
    p.add_argument("--traces-out", default=None)
    p.add_argument("--csv-out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("best-response",
                       help="exhaustive best response for one seat")
    p.add_argument("--profile", required=True,
                   help="procedure id (lab tables) or JSON profile file")
    p.add_argument("--role", type=int, default=0)
    p.set_defaults(func=_cmd_best_response)

    p = sub.add_parser("verify-lemma", help="numeric manipulation reports")
    p.add_argument("number", type=int, choices=[3, 4])
    p.set_defaults(func=_cmd_verify_lemma)

    p = sub.add_parser("audit", help="recompute metrics from trace files")
    p.add_argument("paths", nargs="+",
                   help="JSONL trace files or directories of them")
    p.add_argument("--tolerance", type=int, action="append", default=None,
                   help="envy tolerance in points (repeatable; default 0 5 10)")
    p.add_argument("--csv-out", default=None)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("plan", help="experimentation plan for a cut bracket")
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--low", type=int, default=0)
    p.add_argument("--high", type=int, default=600)
    p.add_argument("--procedure", default="2acc",
                   help="lab procedure whose subject valuation to plan for")
    p.add_argument("--weights-file", default=None,
                   help="JSON file with 600 pixel weights (overrides --procedure)")
    p.set_defaults(func=_cmd_plan)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError) as err:
        return _fail_usage(str(err))


if __name__ == "__main__":
    raise SystemExit(main())
