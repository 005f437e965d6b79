"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 solver non-convergence,
4 structure-check violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import artifacts
from .artifacts import ArtifactError, FullSolution, ReducedSolution, write_csv
from .experiments import SWEEP_COLUMNS, ExperimentSpec, beta_sweep, check_trends, generate_instance, improvements
from .model import ConfigError, StateSpaceTooLarge, SystemConfig
from .sim import ReducedPolicyAdapter, myopic_policy, never_policy, policy_from_table, simulate
from .solver import DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOL, NonConvergence, relative_value_iteration
from .special_case import build_reduced_model, check_psi_structure, decision_grid, extract_psi, solve_reduced
from .structure import policy_slice, verify_structure

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGENCE = 3
EXIT_STRUCTURE = 4


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--damping", type=float, default=DEFAULT_DAMPING)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoisched", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the full MDP by relative value iteration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="artifact path")
    _solver_args(p)

    p = sub.add_parser("reduce", help="solve the reduced MDP of an all-type-II system")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="artifact path")
    p.add_argument("--grid-out", help="CSV of the (delta, C_h, decision) grid")
    _solver_args(p)

    p = sub.add_parser("verify-structure", help="check monotonicity and threshold structure of a solved artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--out", help="write the summary CSV here instead of stdout")
    p.add_argument("--slice-out", help="CSV of a 2-D policy slice")
    p.add_argument("--axis", choices=("aoi", "channel"), default="aoi")
    p.add_argument("--device", type=int, default=0)
    p.add_argument("--aoi", type=_int_list, help="fixed type-I ages, comma separated")
    p.add_argument("--channel", type=_int_list, help="fixed channel indices, comma separated")
    p.add_argument("--slack", type=float, default=1e-9)

    p = sub.add_parser("simulate", help="simulate a policy and print long-run metrics")
    p.add_argument("--artifact", required=True)
    p.add_argument("--policy", choices=("optimal", "myopic", "never"), default="optimal")
    p.add_argument("--slots", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--out", help="write CSV here instead of stdout")

    p = sub.add_parser("sweep", help="optimal vs myopic over a grid of energy weights")
    p.add_argument("--spec", required=True, help="experiment spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _cmd_solve(args) -> int:
    cfg = SystemConfig.load(args.config)
    value, policy, report = relative_value_iteration(cfg, args.tol, args.max_iter, damping=args.damping)
    artifacts.save_full(args.out, FullSolution(cfg, value, policy, report))
    write_csv(sys.stdout, ("kind", "states", "theta", "iterations", "final_span"),
              [("full", len(policy), value.theta, report.iterations, report.final_span)])
    return EXIT_OK


def _cmd_reduce(args) -> int:
    cfg = SystemConfig.load(args.config)
    try:
        model = build_reduced_model(cfg)
    except ValueError as exc:
        raise ConfigError("devices", str(exc)) from None
    value, transmit, report = solve_reduced(model, args.tol, args.max_iter, damping=args.damping)
    artifacts.save_reduced(args.out, ReducedSolution(model, value, transmit, report))
    if args.grid_out:
        write_csv(args.grid_out, ("delta", "C_h", "decision"), decision_grid(model, transmit))
    write_csv(sys.stdout, ("kind", "ch_states", "theta", "iterations", "final_span"),
              [("reduced", len(model.ch_values), value.theta, report.iterations, report.final_span)])
    return EXIT_OK


def _cmd_verify(args) -> int:
    sol = artifacts.load(args.artifact)
    target = args.out or sys.stdout
    if isinstance(sol, ReducedSolution):
        psi = extract_psi(sol.transmit)
        found = check_psi_structure(sol.transmit)
        rows = [("C_h", float(c), "psi", float(p)) for c, p in zip(sol.model.ch_values, psi)]
        rows += [("violation", v.ch_idx, v.kind, v.detail) for v in found]
        write_csv(target, ("record", "key", "field", "value"), rows)
        if args.slice_out:
            write_csv(args.slice_out, ("delta", "C_h", "decision"), decision_grid(sol.model, sol.transmit))
        return EXIT_STRUCTURE if found else EXIT_OK

    report, _, policy = verify_structure(sol.cfg, sol.value, args.slack)
    rows = [("check", name, count) for name, count in report.counts().items()]
    write_csv(target, ("record", "name", "violations"), rows)
    if args.slice_out:
        x_name = f"A_{args.device + 1}" if args.axis == "aoi" else f"h_{args.device + 1}"
        rows = policy_slice(sol.cfg, policy, args.axis, args.device, args.aoi, args.channel)
        write_csv(args.slice_out, (x_name, "delta", "action_class", "scheduled"), rows)
    return EXIT_OK if report.passed else EXIT_STRUCTURE


SIM_COLUMNS = ("policy", "seed", "slots", "beta", "avg_dest_aoi", "avg_weighted_cost", "avg_total_energy",
               "sem_dest_aoi", "sem_weighted_cost", "sem_total_energy")


def _cmd_simulate(args) -> int:
    sol = artifacts.load(args.artifact)
    cfg = sol.cfg if isinstance(sol, FullSolution) else sol.model.cfg
    if args.policy == "optimal":
        if isinstance(sol, FullSolution):
            policy = policy_from_table(cfg, sol.policy)
        else:
            policy = ReducedPolicyAdapter(sol.model, sol.transmit)
    elif args.policy == "myopic":
        policy = myopic_policy(cfg)
    else:
        policy = never_policy(cfg)
    m = simulate(cfg, policy, args.slots, args.seed, burn_in=args.burn_in)
    weights = {d.weight for d in cfg.devices}
    beta = weights.pop() if len(weights) == 1 else ""
    header = SIM_COLUMNS + tuple(f"energy_{n}" for n in range(cfg.n_devices))
    row = (args.policy, m.seed, m.slots_simulated, beta, m.avg_dest_aoi, m.avg_weighted_cost, m.avg_total_energy,
           m.sem_dest_aoi, m.sem_weighted_cost, m.sem_total_energy, *m.avg_energy_per_device)
    write_csv(args.out or sys.stdout, header, [row])
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        spec = ExperimentSpec.load(args.spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(args.spec, str(exc)) from None
    out = Path(args.out)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    for seed in spec.seeds:
        cfg = generate_instance(spec, seed)
        (out / "instances" / f"seed_{seed}.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
    result = beta_sweep(spec, workers=args.workers)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, (r.as_tuple() for r in result.rows))
    summary = []
    for label, exact in (("simulated", False), ("exact", True)):
        trends = check_trends(result, exact=exact)
        summary += [
            (label, "cost_ordering_violations", len(trends.cost_ordering)),
            (label, "aoi_monotone_violations", len(trends.aoi_monotone)),
            (label, "energy_monotone_violations", len(trends.energy_monotone)),
        ]
        if result.rows:
            summary += [(label, k, v) for k, v in improvements(result, exact=exact).items()]
    summary += [("failure", f"seed={f.seed} beta={f.beta!r}", f.message) for f in result.failures]
    write_csv(out / "summary.csv", ("source", "metric", "value"), summary)
    write_csv(sys.stdout, ("source", "metric", "value"), summary)
    return EXIT_NONCONVERGENCE if result.failures else EXIT_OK


COMMANDS = {
    "solve": _cmd_solve,
    "reduce": _cmd_reduce,
    "verify-structure": _cmd_verify,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ArtifactError, StateSpaceTooLarge, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
