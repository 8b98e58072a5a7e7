import argparse
import json
import os
import sys
from modules import analysis, ensemble
from modules.dynamics import SystemKind
from modules.experiment_config import PRESETS, ExperimentConfig, load_config, parse_vector
from modules.objectives import curvature_at_minimizer
from modules.results_writer import ResultsWriter
from utils.exceptions import ConfigError, DivergenceError, ESError, NonQuadraticObjectiveError
from utils.logger import logger

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_INFEASIBLE = 3


class ExperimentRunner:
    def __init__(self, config, writer=None):
        self.config = config
        self.writer = writer or ResultsWriter()
        self.objective = config.build_objective()
        self.params = config.algo_params()

    def curvature(self):
        return curvature_at_minimizer(self.objective)

    def run_feasibility(self, mu=None):
        """One StabilityReport, or one per coordinate for multi-dimensional quadratics."""
        if mu is not None:
            return [analysis.check_feasibility(self.params, float(mu))]
        if self.objective.dim > 1:
            if self.objective.quadratic is None:
                raise NonQuadraticObjectiveError(f"objective {self.objective.name} is not quadratic")
            return analysis.check_feasibility_per_coordinate(self.params, self.objective.quadratic)
        return [analysis.check_feasibility(self.params, self.curvature())]

    def run_sweep(self, rho_max=1.0, tol=1e-6, mu=None):
        mu = self.curvature() if mu is None else float(mu)
        return analysis.feasible_rho_interval(self.params, mu, rho_max=rho_max, tol=tol)

    def _warn_if_infeasible(self):
        try:
            reports = self.run_feasibility()
        except ESError as e:
            logger.info(f"Feasibility check skipped: {e}")
            return
        for i, report in enumerate(reports):
            if not report.feasible:
                logger.warning(
                    f"Parameters do not satisfy the convergence conditions"
                    f"{f' for coordinate {i + 1}' if len(reports) > 1 else ''}: {', '.join(report.failed())}"
                )

    def run_simulation(self, samples=0):
        """Runs the ensemble and writes CSV + sidecar; returns the stats, or None if writing failed."""
        cfg = self.config
        logger.info(f"Simulating preset {cfg.preset} ({cfg.objective}, {cfg.system.value})")
        self._warn_if_infeasible()

        ens = cfg.ensemble_config()
        y0 = ens.resolved_y0(self.objective.dim)
        try:
            stats = ensemble.run(ens, self.params, self.objective)
        except DivergenceError as e:
            self.writer.write_sidecar(cfg.to_dict(y0=y0.tolist(), n_diverged=e.n_diverged), cfg.out)
            raise

        if self.writer.write_frame(stats.to_frame(), cfg.out) is None:
            return None
        if self.writer.write_sidecar(cfg.to_dict(y0=y0.tolist(), n_diverged=stats.n_diverged), cfg.out) is None:
            return None
        if samples:
            paths = ensemble.sample_paths(ens, self.params, self.objective, int(samples))
            if self.writer.write_paths(paths, cfg.out) is None:
                return None
        return stats

    def run_analysis(self, join=None):
        """Theoretical profile and feasibility report; returns (frame, report) or None on I/O failure."""
        cfg = self.config
        obj = self.objective
        if obj.quadratic is None:
            raise NonQuadraticObjectiveError(f"moment analysis needs a quadratic objective, got {obj.name}")
        if obj.dim != 1 or cfg.system is not SystemKind.ADAPTIVE_1D:
            raise ConfigError("moment analysis covers the adaptive one-dimensional system only")
        if not isinstance(cfg.x0, float):
            raise ConfigError("moment analysis needs a deterministic scalar x0")

        mu = self.curvature()
        report = analysis.check_feasibility(self.params, mu)
        if not report.feasible:
            logger.warning(f"Analysis parameters are infeasible: {', '.join(report.failed())}")

        y0 = float(cfg.ensemble_config().resolved_y0(1)[0])
        x_star = float(obj.known_minimizer[0])
        frame = analysis.theoretical_profile(self.params, mu, cfg.x0, y0, x_star, int(cfg.n_steps))

        if join:
            simulated = self.writer.read_frame(join)
            if simulated is None:
                return None
            frame = self.writer.compare_with_theory(simulated, frame)
            violations = int((frame["sigma_gap"] < 0).sum())
            if violations:
                logger.warning(f"Empirical sigma_x exceeds the theoretical bound at {violations} steps")

        stem = os.path.splitext(cfg.out)[0]
        out = f"{stem}_theory.csv"
        if self.writer.write_frame(frame, out) is None:
            return None
        if self.writer.write_sidecar(cfg.to_dict(y0=[y0], report=report.to_dict()), out) is None:
            return None
        return frame, report


def _add_experiment_arguments(parser):
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", help="versioned JSON experiment document")
    source.add_argument("--preset", choices=sorted(PRESETS), help="named figure preset")
    parser.add_argument("--n-traj", type=int)
    parser.add_argument("--n-steps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int, dest="n_threads")
    parser.add_argument("--x0", type=parse_vector)
    parser.add_argument("--x-star", type=parse_vector)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--chi", type=float)
    parser.add_argument("--psi", type=float)
    parser.add_argument("--out")
    parser.add_argument("--full-scale", action="store_true", help="use the full-size ensemble")


OVERRIDE_FIELDS = ("n_traj", "n_steps", "seed", "n_threads", "x0", "x_star", "rho", "beta", "eps", "chi", "psi", "out")


def build_parser():
    parser = argparse.ArgumentParser(prog="es-sim", description="Delayed-dither extremum seeking experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a Monte Carlo ensemble and write per-step statistics")
    _add_experiment_arguments(simulate)
    simulate.add_argument("--samples", type=int, default=0, help="also write the first N trajectory paths")
    simulate.set_defaults(handler=cmd_simulate)

    analyze = sub.add_parser("analyze", help="theoretical mean and 1-sigma bound for a quadratic objective")
    _add_experiment_arguments(analyze)
    analyze.add_argument("--join", help="simulate CSV to compare against")
    analyze.set_defaults(handler=cmd_analyze)

    feasible = sub.add_parser("feasible", help="check the convergence conditions")
    _add_experiment_arguments(feasible)
    feasible.add_argument("--mu", type=float, help="curvature of the objective at its minimizer")
    feasible.set_defaults(handler=cmd_feasible)

    sweep = sub.add_parser("sweep", help="feasible rho interval at fixed beta, chi, psi")
    _add_experiment_arguments(sweep)
    sweep.add_argument("--mu", type=float)
    sweep.add_argument("--rho-max", type=float, default=1.0)
    sweep.add_argument("--tol", type=float, default=1e-6)
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def resolve_config(args):
    if args.config:
        config = load_config(args.config)
    elif args.preset:
        config = ExperimentConfig.from_preset(args.preset)
    else:
        raise ConfigError("one of --config or --preset is required")
    if args.full_scale:
        config = config.full_scale()
    return config.with_overrides(**{name: getattr(args, name) for name in OVERRIDE_FIELDS})


def _flag_config(args):
    """Parameters given on flags only: a custom one-dimensional setup with explicit mu."""
    missing = [f"--{name}" for name in ("rho", "beta", "chi", "psi", "mu") if getattr(args, name) is None]
    if missing:
        raise ConfigError(f"missing required flags: {', '.join(missing)}")
    return ExperimentConfig(
        objective="quad1d", system="adaptive1d", rho=args.rho, beta=args.beta, chi=args.chi, psi=args.psi,
        eps=args.eps if args.eps is not None else 1e-7, x0=0.0, n_steps=1,
    )


def cmd_simulate(args):
    stats = ExperimentRunner(resolve_config(args)).run_simulation(samples=args.samples)
    return EXIT_CONFIG if stats is None else EXIT_OK


def cmd_analyze(args):
    result = ExperimentRunner(resolve_config(args)).run_analysis(join=args.join)
    if result is None:
        return EXIT_CONFIG
    _, report = result
    print(report.to_json())
    return EXIT_OK


def cmd_feasible(args):
    config = resolve_config(args) if (args.config or args.preset) else _flag_config(args)
    reports = ExperimentRunner(config).run_feasibility(mu=args.mu)
    document = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
    print(json.dumps(document, indent=2))
    return EXIT_OK if all(r.feasible for r in reports) else EXIT_INFEASIBLE


def cmd_sweep(args):
    config = resolve_config(args) if (args.config or args.preset) else _flag_config(args)
    interval = ExperimentRunner(config).run_sweep(rho_max=args.rho_max, tol=args.tol, mu=args.mu)
    if interval is None:
        print(json.dumps({"feasible": False, "beta": config.beta}))
        return EXIT_INFEASIBLE
    print(json.dumps({"feasible": True, "rho_low": interval.low, "rho_high": interval.high, "beta": interval.beta}))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        logger.error(f"Simulation failed: {e}")
        return EXIT_DIVERGED
    except ESError as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
