"""Command-line client for the service handlers.

Subcommands: check, synth, gradcheck, scale (plus serve). By default the
handlers run in-process; `--server URL` sends the same request/response
models over HTTP to a running service. Exit codes: 0 ok/satisfied,
1 unsatisfied/failed check, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

from .parsing import ParseError
from .persist import TrajectoryFileError
from .scenario import ScenarioError, load_config
from .service import (
    CheckRequest,
    CheckResponse,
    GradcheckRequest,
    GradcheckResponse,
    Overrides,
    ScaleRequest,
    ScaleResponse,
    SynthRequest,
    SynthResponse,
    run_check,
    run_gradcheck,
    run_scale,
    run_synth,
)
from .synthesis import SynthesisError

_USER_ERRORS = (ScenarioError, ParseError, SynthesisError, TrajectoryFileError)


def _dispatch(args, endpoint: str, request, response_model, handler):
    if args.server:
        url = args.server.rstrip("/") + endpoint
        http_request = urllib.request.Request(
            url,
            data=request.model_dump_json().encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(http_request) as reply:
                return response_model.model_validate_json(reply.read())
        except urllib.error.HTTPError as err:
            body = err.read().decode("utf-8", "replace")
            try:
                detail = json.loads(body).get("detail", body)
            except json.JSONDecodeError:
                detail = body
            raise ScenarioError(f"server rejected the request: {detail}") from err
    return handler(request)


def _overrides(args) -> Overrides | None:
    fields = {}
    for key in ("seed", "alpha", "beta", "generations", "metric"):
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    if getattr(args, "pop", None) is not None:
        fields["population"] = args.pop
    return Overrides(**fields) if fields else None


def _write(directory: Path, name: str, text: str):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / name).write_text(text, encoding="utf-8")


def cmd_check(args) -> int:
    config = load_config(args.scenario)
    trajectory = Path(args.trajectory).read_text(encoding="utf-8")
    request = CheckRequest(scenario=config, trajectory_csv=trajectory, overrides=_overrides(args))
    response = _dispatch(args, "/check", request, CheckResponse, run_check)
    print(f"satisfied: {response.satisfied}")
    print(f"traditional robustness: {response.traditional}")
    print(f"exponential robustness: {response.exponential}")
    print(f"formula horizon: {response.horizon}")
    for part in response.conjuncts:
        print(f"  [{'ok' if part.satisfied else 'VIOLATED'}] {part.formula}")
    return 0 if response.satisfied else 1


def cmd_synth(args) -> int:
    config = load_config(args.scenario)
    request = SynthRequest(scenario=config, overrides=_overrides(args))
    response = _dispatch(args, "/synth", request, SynthResponse, run_synth)
    out = Path(args.out)
    _write(out, "trajectories.csv", response.trajectories_csv)
    _write(out, "controls.csv", response.controls_csv)
    _write(out, "summary.txt", response.summary_text)
    _write(out, "plot.svg", response.plot_svg)
    print(response.summary_text, end="")
    print(f"outputs written to {out}")
    return 0 if response.summary.satisfied else 1


def cmd_gradcheck(args) -> int:
    config = load_config(args.scenario)
    request = GradcheckRequest(scenario=config, overrides=_overrides(args))
    response = _dispatch(args, "/gradcheck", request, GradcheckResponse, run_gradcheck)
    print(f"decision dimension: {response.dimension}")
    print(f"max relative error: {response.max_relative_error:.3e}")
    if response.nonsmooth_events:
        print(
            f"one-sided derivatives used at {response.nonsmooth_events} "
            "non-smooth points (ties or boundary cases)"
        )
    print("PASS" if response.passed else "FAIL")
    return 0 if response.passed else 1


def cmd_scale(args) -> int:
    config = load_config(args.scenario)
    multipliers = [float(v) for v in args.multipliers.split(",") if v.strip()]
    request = ScaleRequest(
        scenario=config,
        multipliers=multipliers,
        repetitions=args.reps,
        overrides=_overrides(args),
    )
    response = _dispatch(args, "/scale", request, ScaleResponse, run_scale)
    print(response.csv, end="")
    if args.out:
        _write(Path(args.out), "scale.csv", response.csv)
        print(f"table written to {Path(args.out) / 'scale.csv'}")
    return 0


def cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError:
        print("serving needs uvicorn: pip install 'catlplus[serve]'", file=sys.stderr)
        return 2
    uvicorn.run("catlplus.service:app", host=args.host, port=args.port)
    return 0


def _add_common(parser: argparse.ArgumentParser, with_budget: bool = True):
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--alpha", type=float, help="override the task sharpness")
    parser.add_argument("--beta", type=float, help="override the conjunction blend")
    parser.add_argument("--metric", choices=["exponential", "traditional"], help="override the robustness metric")
    if with_budget:
        parser.add_argument("--generations", type=int, help="override the CMA-ES generation count")
        parser.add_argument("--pop", type=int, help="override the CMA-ES population size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catlplus",
        description="Two-layer temporal logic monitoring and control synthesis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate a recorded trajectory against a scenario's formula")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("trajectory", help="trajectory CSV (t,agent,x,y[,theta])")
    _add_common(p, with_budget=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synth", help="synthesize controls maximizing robustness")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="compare taped gradients against finite differences")
    p.add_argument("scenario", help="scenario JSON file")
    _add_common(p, with_budget=False)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("scale", help="repeat synthesis at scaled team sizes")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--multipliers", default="1,2,3.5", help="comma-separated group-count multipliers")
    p.add_argument("--reps", type=int, default=3, help="seeded repetitions per size")
    p.add_argument("--out", help="optional output directory for scale.csv")
    _add_common(p)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, urllib.error.URLError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
