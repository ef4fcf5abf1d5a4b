"""Command line entry point: ``graphheat <verify|curvature|heat|pme|exhaust>``.

Exit codes: 0 all checks passed, 1 usage or invalid parameters, 2 bad input
data, 3 numerical failure, 4 a verification monitor failed.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .certify import verify_identities
from .errors import GraphHeatDataError, NumericalFailure, StabilityViolation
from .graph import Domain, WeightedGraph, ball, whole
from .heat import (
    HeatConfig,
    Scheme,
    bernstein_monitor,
    convergence_detect,
    mass_check,
    max_principle_check,
    oscillation_check,
    solve_heat,
)
from .io import read_function, read_graph, write_atomic
from .operators import curvature_k_star
from .pme import (
    MorseFlowConfig,
    aronson_benilan_check,
    energy_chain_check,
    exhaustion_report,
    exhaustion_runs,
    pme_solve,
    positivity_check,
)
from .trajectory import VerificationReport, dumps_json, dumps_reports

log = logging.getLogger("graphheat")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _m_value(text: str) -> float:
    if text.strip().lower() == "inf":
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--m expects a number or 'inf', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphheat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, init=False):
        p.add_argument("--graph", required=True, help="edge list file: '<u> <v> <mu>' per line")
        if init:
            p.add_argument("--init", required=True, help="initial data file: '<vertex> <value>' per line")

    p = sub.add_parser("verify", help="certify the operator identities on random functions")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", help="JSON report path (default: stdout)")

    p = sub.add_parser("curvature", help="optimal CD(m, k) constant k* per vertex")
    common(p)
    p.add_argument("--m", type=_m_value, default=math.inf, help="dimension parameter or 'inf'")
    p.add_argument("--x0", help="only this vertex")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("heat", help="heat flow with maximum-principle and Bernstein monitors")
    common(p, init=True)
    p.add_argument("--domain", default="all", help="'all' or 'ball:X0:R'")
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="implicit")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6, help="oscillation threshold for convergence detection")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out", default="graphheat-out", help="output directory")

    p = sub.add_parser("pme", help="porous-media flow by minimizing movements")
    common(p, init=True)
    p.add_argument("--domain", default="all", help="'all' or 'ball:X0:R'")
    p.add_argument("--h", type=float, default=1e-2)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--lambda", dest="lambdas", type=_csv_floats, default=None,
                   help="comma-separated scaling factors > 1 for the Aronson-Benilan check")
    p.add_argument("--tol", type=float, default=1e-10, help="Euler-Lagrange residual tolerance")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out", default="graphheat-out", help="output directory")

    p = sub.add_parser("exhaust", help="porous-media flow on growing balls")
    common(p, init=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--radii", type=_csv_ints, required=True)
    p.add_argument("--h", type=float, default=1e-2)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10, help="Euler-Lagrange residual tolerance")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out", default="graphheat-out", help="output directory")
    return parser


@dataclass
class RunManifest:
    command: str
    inputs: dict
    params: dict
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunManifest:
        ns = dict(vars(args))
        command = ns.pop("command")
        inputs = {k: ns.pop(k) for k in ("graph", "init") if k in ns}
        out = ns.pop("out", None)
        return cls(command, inputs, ns, {"out": out})

    def check_inputs(self):
        for key, path in self.inputs.items():
            if not Path(path).is_file():
                raise GraphHeatDataError(f"--{key}: no such file {path!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _domain(G: WeightedGraph, choice: str) -> Domain:
    if choice == "all":
        return whole(G)
    if choice.startswith("ball:"):
        body = choice[len("ball:"):]
        x0, sep, radius = body.rpartition(":")
        if sep and x0:
            try:
                return ball(G, x0, int(radius))
            except ValueError:
                pass
    raise UsageError(f"--domain must be 'all' or 'ball:X0:R', got {choice!r}")


def _emit(text: str, path: str | None):
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _write_run(manifest: RunManifest, reports: list[VerificationReport], csv_text: str | None):
    out = Path(manifest.outputs["out"])
    if csv_text is not None:
        write_atomic(out / "trajectory.csv", csv_text)
    payload = {"manifest": manifest.to_dict(), "reports": [r.to_dict() for r in reports]}
    write_atomic(out / "report.json", dumps_json(payload))


def _status(reports) -> int:
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_verify(m: RunManifest) -> int:
    p = m.params
    if p["trials"] < 0:
        raise UsageError("--trials must be nonnegative")
    G = read_graph(m.inputs["graph"])
    reports = verify_identities(G, p["trials"], seed=p["seed"], tol=p["tol"])
    _emit(dumps_reports(reports), m.outputs["out"])
    return _status(reports)


def _format_k(k: float) -> str:
    if math.isinf(k):
        return "inf" if k > 0 else "-inf"
    return format(k + 0.0, ".12g")


def cmd_curvature(m: RunManifest) -> int:
    p = m.params
    G = read_graph(m.inputs["graph"])
    if not (p["m"] > 0):
        raise UsageError("--m must be positive or 'inf'")
    targets = [p["x0"]] if p["x0"] is not None else list(G.vertices)
    lines = ["vertex,k_star"]
    for v in targets:
        lines.append(f"{v},{_format_k(curvature_k_star(G, v, p['m']))}")
    _emit("\n".join(lines) + "\n", m.outputs["out"])
    return EXIT_OK


def cmd_heat(m: RunManifest) -> int:
    p = m.params
    G = read_graph(m.inputs["graph"])
    f0 = read_function(m.inputs["init"])
    dom = _domain(G, p["domain"])
    cfg = HeatConfig(dom, f0.restrict(sorted(dom.closure)), h=p["h"], T=p["T"],
                     scheme=p["scheme"], record_every=p["record_every"])
    traj = solve_heat(G, cfg)
    reports = [max_principle_check(traj), oscillation_check(traj), bernstein_monitor(traj, p["alpha"])]
    if dom.is_closed:
        reports.append(mass_check(traj))
        limit = convergence_detect(traj, p["tol"])
        reports.append(VerificationReport(
            "convergence_detect", True, float("nan") if limit is None else limit, p["tol"],
            details={"converged": limit is not None},
        ))
    _write_run(m, reports, traj.to_csv())
    return _status(reports)


def _sup_bound(traj, tol=1e-8) -> VerificationReport:
    sup0 = float(traj.values[0].max())
    worst = float(traj.values.max() - sup0)
    return VerificationReport("max_principle", worst <= tol, worst, tol, details={"sup_initial": sup0})


def cmd_pme(m: RunManifest) -> int:
    p = m.params
    G = read_graph(m.inputs["graph"])
    u0 = read_function(m.inputs["init"])
    dom = _domain(G, p["domain"])
    cfg = MorseFlowConfig(dom, u0.restrict(sorted(dom.closure)), h=p["h"], T=p["T"],
                          newton_tol=p["tol"], record_every=p["record_every"])
    traj = pme_solve(G, cfg)
    reports = [positivity_check(traj), _sup_bound(traj), energy_chain_check(traj)]
    if p["lambdas"]:
        reports.append(aronson_benilan_check(G, cfg, p["lambdas"], base=traj))
    _write_run(m, reports, traj.to_csv())
    return _status(reports)


def cmd_exhaust(m: RunManifest) -> int:
    p = m.params
    G = read_graph(m.inputs["graph"])
    u0 = read_function(m.inputs["init"])
    runs = exhaustion_runs(G, p["x0"], p["radii"], u0, h=p["h"], T=p["T"], newton_tol=p["tol"],
                           record_every=p["record_every"])
    report = exhaustion_report(G, p["x0"], p["radii"], runs)
    reports = [report] + [energy_chain_check(r) for r in runs]
    _write_run(m, reports, runs[-1].to_csv())
    return _status(reports)


COMMANDS = {
    "verify": cmd_verify,
    "curvature": cmd_curvature,
    "heat": cmd_heat,
    "pme": cmd_pme,
    "exhaust": cmd_exhaust,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = RunManifest.from_args(args)
    try:
        manifest.check_inputs()
        return COMMANDS[manifest.command](manifest)
    except (UsageError, StabilityViolation) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except GraphHeatDataError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DATA
    except NumericalFailure as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
