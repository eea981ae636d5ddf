"""levysir: thresholds, simulation and checks for a stochastic delayed SIR model with jumps.

Exit codes: 0 success, 1 usage error, 2 validation/parse error, 3 numerical
failure.  Files land in ``--outdir`` or ``$LEVYSIR_OUTPUT_DIR`` (default
``./levysir-out``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ensemble,
    extinction_verdict,
    persistence_verdict,
    verify_lemma2,
)
from .config import (
    PRESETS,
    RunReport,
    ScenarioConfig,
    json_ready,
    load_config,
    output_dir,
    preset,
    write_trajectory_csv,
)
from .errors import NonFiniteState, ParseError, ValidationError
from .integrator import simulate, simulate_deterministic
from .model import NoiseSpec, threshold_report, validate_hypotheses

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

MODEL_FIELDS = ("A", "mu1", "mu2", "gamma", "beta", "eta")
NOISE_FIELDS = ("sigma1", "sigma2", "sigma4")
JUMP_FIELDS = ("lam1", "lam2", "lam4", "weight")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _print(text: str = "") -> None:
    sys.stdout.write(text + "\n")


def _run_mode(cfg: ScenarioConfig, seed: int | None = None, couple_psi: bool = False):
    sim = cfg.sim if seed is None else dataclasses.replace(cfg.sim, seed=seed)
    if cfg.mode == "deterministic":
        return simulate_deterministic(cfg.initial, cfg.model, sim)
    return simulate(cfg.initial, cfg.model, cfg.noise, sim, couple_psi=couple_psi)


def _with_horizon(cfg: ScenarioConfig, horizon: float | None, dt: float | None = None) -> ScenarioConfig:
    if horizon is None and dt is None:
        return cfg
    sim = dataclasses.replace(cfg.sim, horizon=horizon or cfg.sim.horizon, dt=dt or cfg.sim.dt)
    analysis = cfg.analysis
    if horizon is not None and analysis.window is not None and analysis.window[1] > horizon:
        analysis = dataclasses.replace(analysis, window=None)
    return dataclasses.replace(cfg, sim=sim, analysis=analysis)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_thresholds(args) -> int:
    cfg = load_config(args.config)
    report = threshold_report(cfg.model, cfg.noise)
    hyps = validate_hypotheses(cfg.model, cfg.noise, cfg.analysis.p_max, cfg.analysis.p_step)
    rows = [(k, v) for k, v in report.to_dict().items() if k not in ("regime", "extinction_note")]
    _print(f"scenario {cfg.name} ({cfg.mode})")
    for key, value in rows:
        _print(f"  {key:<24} {'n/a' if value is None else f'{value:.4f}'}")
    _print(f"  {'regime':<24} {report.regime.value}")
    if report.extinction_note:
        _print(f"  note: {report.extinction_note}")
    for h in hyps:
        _print(f"  {h.name}: {'pass' if h.passed else 'FAIL'}  {h.detail}")
    out = Path(args.out) if args.out else output_dir(args.outdir) / f"{cfg.name}_thresholds.json"
    out.write_text(RunReport.build(cfg, report, hyps).to_json())
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _with_horizon(load_config(args.config), args.horizon, args.dt)
    traj = _run_mode(cfg, args.seed, couple_psi=args.psi and cfg.mode != "deterministic")
    out = Path(args.out) if args.out else output_dir(args.outdir) / f"{cfg.name}_{cfg.mode}.csv"
    write_trajectory_csv(traj, out)
    _print(f"wrote {len(traj.times)} rows to {out} (clamped steps: {traj.clamped_steps})")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = _with_horizon(load_config(args.config), args.horizon)
    n = args.seeds or cfg.analysis.n_seeds
    report = threshold_report(cfg.model, cfg.noise)
    summary = ensemble(cfg.model, cfg.noise, cfg.sim, n, cfg.initial,
                       cfg.analysis.epsilon, cfg.analysis.tail_fraction, cfg.window,
                       report.persistence_lower_bound, workers=args.workers)
    out = Path(args.out) if args.out else output_dir(args.outdir) / f"{cfg.name}_ensemble.json"
    hyps = validate_hypotheses(cfg.model, cfg.noise, cfg.analysis.p_max, cfg.analysis.p_step)
    out.write_text(RunReport.build(cfg, report, hyps, {"ensemble": summary.to_dict()}).to_json())
    _print(f"{n} runs: fraction extinct {summary.fraction_extinct:.3f}, "
           f"fraction persistent {summary.fraction_persistent:.3f}, "
           f"median slope {summary.aggregates['slope'].median:.4f}")
    _print(f"wrote {out}")
    return EXIT_OK


def cmd_verify_lemma2(args) -> int:
    cfg = _with_horizon(load_config(args.config), args.horizon)
    n = args.seeds or 20
    verdict = verify_lemma2(cfg.model, cfg.noise, cfg.sim, n,
                            (cfg.analysis.mean_tolerance, cfg.analysis.square_tolerance))
    out = Path(args.out) if args.out else output_dir(args.outdir) / f"{cfg.name}_lemma2.json"
    out.write_text(json.dumps(json_ready(verdict.to_dict()), indent=2) + "\n")
    _print(f"<psi>   = {verdict.mean_estimate:.4f} vs {verdict.mean_theory:.4f} "
           f"(rel. err {verdict.mean_rel_error:.4f}) {'pass' if verdict.mean_pass else 'FAIL'}")
    _print(f"<psi^2> = {verdict.square_estimate:.4f} vs {verdict.square_theory:.4f} "
           f"(rel. err {verdict.square_rel_error:.4f}) {'pass' if verdict.square_pass else 'FAIL'}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    outdir = output_dir(args.outdir)
    modes = ("deterministic", "degenerate", "full") if args.figure in ("fig3", "fig4") else ("full",)
    summary = {}
    for mode in modes:
        cfg = _with_horizon(preset(args.figure, mode), args.horizon)
        traj = _run_mode(cfg)
        path = write_trajectory_csv(traj, outdir / f"{args.figure}_{mode}.csv")
        pers = persistence_verdict(traj, cfg.window)
        entry = {"csv": str(path), "final_state": traj.states[-1].tolist(),
                 "tail_mean_I": pers.tail_mean_I, "tail_mean_S": pers.tail_mean_S,
                 "tail_mean_D": pers.tail_mean_D, "clamped_steps": traj.clamped_steps}
        entry["extinct"] = extinction_verdict(traj, cfg.model, cfg.analysis.epsilon,
                                              cfg.analysis.tail_fraction).extinct
        summary[mode] = entry
        _print(f"{args.figure} {mode:<13} I(T)={traj.I[-1]:.3e}  tail mean I={pers.tail_mean_I:.4f}  -> {path}")
    (outdir / f"{args.figure}_summary.json").write_text(json.dumps(json_ready(summary), indent=2) + "\n")
    return EXIT_OK


def _scan_variant(cfg: ScenarioConfig, name: str, value: float):
    if name in MODEL_FIELDS:
        return dataclasses.replace(cfg.model, **{name: value}), cfg.noise
    if name in NOISE_FIELDS:
        return cfg.model, dataclasses.replace(cfg.noise, **{name: value})
    atoms = tuple(dataclasses.replace(a, **{name: value}) for a in cfg.noise.atoms)
    return cfg.model, NoiseSpec(*cfg.noise.sigmas, atoms=atoms)


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    allowed = MODEL_FIELDS + NOISE_FIELDS + JUMP_FIELDS
    if args.param not in allowed:
        raise UsageError(f"--param must be one of {', '.join(allowed)}")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    out = Path(args.out) if args.out else output_dir(args.outdir) / f"{cfg.name}_scan_{args.param}.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "t_star", "theta", "t_tilde", "regime"])
        for value in np.linspace(args.start, args.stop, args.steps):
            model, noise = _scan_variant(cfg, args.param, float(value))
            rep = threshold_report(model, noise)
            w.writerow([repr(float(value)), repr(rep.t_star),
                        "" if rep.theta is None else repr(rep.theta),
                        repr(rep.t_tilde), rep.regime.value])
    _print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="levysir", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"levysir {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--outdir", help="output directory (overrides $LEVYSIR_OUTPUT_DIR)")
        return p

    p = add("thresholds", cmd_thresholds, "closed-form thresholds and hypothesis checks")
    p.add_argument("config", help="JSON config path or preset name (fig1..fig4)")
    p.add_argument("--out")

    p = add("simulate", cmd_simulate, "single trajectory to CSV")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--psi", action="store_true", help="also integrate the coupled auxiliary process")
    p.add_argument("--out")

    p = add("ensemble", cmd_ensemble, "Monte Carlo ensemble summary to JSON")
    p.add_argument("config")
    p.add_argument("--seeds", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")

    p = add("verify-lemma2", cmd_verify_lemma2, "time averages of the auxiliary process")
    p.add_argument("config")
    p.add_argument("--seeds", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--out")

    p = add("reproduce", cmd_reproduce, "rerun a figure experiment to CSVs")
    p.add_argument("figure", choices=PRESETS)
    p.add_argument("--horizon", type=float)

    p = add("scan", cmd_scan, "threshold table over a parameter range")
    p.add_argument("config")
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ValidationError, ParseError) as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return EXIT_INVALID
    except NonFiniteState as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
