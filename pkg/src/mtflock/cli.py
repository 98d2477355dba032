"""Command-line runner: mtflock <subcommand> --config FILE --out DIR.

Exit codes: 0 success, 1 a requested check failed, 2 malformed config,
3 inadmissible initial data under --strict.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from mtflock.certify import (
    admissible,
    check_flocking_envelope,
    check_kernel_lemmas,
    check_recursions,
    check_stability,
    check_velocity_tail,
    transition_experiment,
    velocity_envelope,
)
from mtflock.config import ExperimentConfig, init_ensemble, load_config
from mtflock.dynamics import Trajectory, simulate
from mtflock.errors import ConfigError, DivergenceError, PreconditionError
from mtflock.reindex import check_lemma, linear_psi, truncate_at_max
from mtflock.state import Ensemble

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INADMISSIBLE = 0, 1, 2, 3

OBSERVABLE_COLUMNS = (
    "step", "t", "dx_frob", "dv_frob", "diam_x", "diam_v", "lambda", "alpha", "envelope_v", "x_bound_M",
)
TRANSITION_COLUMNS = ("h", "sup_v_error", "sup_dx_gap", "n_horizon")
STABILITY_COLUMNS = (
    "step", "X_n", "Y_n", "C1", "C2", "C3", "b1", "b2", "C_nh", "prop42_pass", "lem46_pass", "thm41_pass",
)
REINDEX_COLUMNS = ("case_id", "direct_sum", "monotone_sum", "slack", "pass")
CHECK_COLUMNS = ("check", "passed", "first_violation", "worst_margin")


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def manifest(cfg: ExperimentConfig, ens0: Ensemble, subcommand: str) -> dict[str, Any]:
    kernel = cfg.kernel
    cert = admissible(ens0, kernel, cfg.kappa)
    return {
        "subcommand": subcommand,
        "config": cfg.to_dict(),
        "constants": {
            "L_a": kernel.lipschitz_constant(),
            "phi_lip": kernel.phi_lip(ens0.n),
            "N_phi_lip": kernel.scaled_phi_lip(),
            "M": cert.m_bound,
            "psi_M": cert.psi_at_m,
            "budget": cert.budget,
            "dx0": cert.dx0,
            "dv0": cert.dv0,
            "admissible": cert.admissible,
        },
    }


def write_manifest(out: Path, data: dict[str, Any]) -> None:
    text = json.dumps(_json_safe(data), indent=2, sort_keys=True)
    (out / "manifest.json").write_text(text + "\n", encoding="utf-8")


def observable_rows(traj: Trajectory, cfg: ExperimentConfig) -> list[tuple]:
    cert = admissible(traj.ensemble(0), traj.kernel, cfg.kappa)
    env = velocity_envelope(cert, cfg.h, traj.steps)
    return [
        (r.step, r.step * cfg.h, r.dx_frob, r.dv_frob, r.diam_x, r.diam_v, r.lambda_min, r.alpha_max,
         env[r.step], cert.m_bound)
        for r in traj.observables
    ]


def perturbed(ens: Ensemble, size: float, seed: int) -> Ensemble:
    """Velocities shifted by size * U[-1, 1] noise drawn from an independent stream."""
    rng = np.random.default_rng([seed, 1])
    return Ensemble(ens.positions, ens.velocities + size * rng.uniform(-1.0, 1.0, ens.velocities.shape))


# subcommand bodies return an exit code; they may assume out exists


def _run_simulate(cfg: ExperimentConfig, ens0: Ensemble, out: Path) -> int:
    traj = simulate(ens0, cfg.kernel, cfg.params())
    write_csv(out / "observables.csv", OBSERVABLE_COLUMNS, observable_rows(traj, cfg))
    return EXIT_OK


def _run_certify(cfg: ExperimentConfig, ens0: Ensemble, out: Path) -> int:
    kernel = cfg.kernel
    traj = simulate(ens0, kernel, cfg.params())
    write_csv(out / "observables.csv", OBSERVABLE_COLUMNS, observable_rows(traj, cfg))
    cert = admissible(ens0, kernel, cfg.kappa)
    rows = []
    rec = check_recursions(traj)
    worst = min(float(rec.position_slack.min(initial=np.inf)), float(rec.velocity_slack.min(initial=np.inf)))
    rows.append(("recursions", rec.passed, rec.first_violation, worst))
    lem = check_kernel_lemmas(ens0, kernel)
    rows.append(("kernel_lemmas", lem.passed, None, min(lem.weight_lipschitz, lem.triple_sum)))
    if cert.admissible:
        env = check_flocking_envelope(traj, cert)
        rows.append(("envelope", env.passed, env.first_violation, min(env.worst_velocity_margin, env.worst_position_margin)))
        try:
            tail = check_velocity_tail(traj, cert)
            rows.append(("velocity_tail", tail.passed, tail.first_violation, tail.worst_margin))
        except PreconditionError:
            rows.append(("velocity_tail", "skipped", None, None))
    else:
        rows.append(("envelope", "skipped", None, None))
        rows.append(("velocity_tail", "skipped", None, None))
    write_csv(out / "checks.csv", CHECK_COLUMNS, rows)
    failed = any(row[1] is False for row in rows)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _run_transition(cfg: ExperimentConfig, ens0: Ensemble, out: Path) -> int:
    report = transition_experiment(
        ens0, cfg.kernel, cfg.kappa, cfg.transition_T, cfg.transition_h_list, h_ref=cfg.transition_h_ref
    )
    rows = zip(report.h_values, report.errors, report.dx_gap, report.n_horizon)
    write_csv(out / "transition.csv", TRANSITION_COLUMNS, rows)
    diag = {
        "slope": report.slope,
        "h_ref": report.h_ref,
        "lipschitz_f": report.lipschitz_f,
        "r_star": report.r_star,
        "dx_gap_bound": report.dx_gap_bound,
        "e1_max": report.e1_max,
        "e2_max": report.e2_max,
        "e2_bound": report.e2_bound,
    }
    (out / "transition_diagnostics.json").write_text(
        json.dumps(_json_safe(diag), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return EXIT_OK


def _run_stability(cfg: ExperimentConfig, ens0: Ensemble, out: Path) -> int:
    kernel = cfg.kernel
    ens_b = perturbed(ens0, cfg.stability_perturbation, cfg.seed)
    traj_a = simulate(ens0, kernel, cfg.params())
    traj_b = simulate(ens_b, kernel, cfg.params())
    try:
        rep = check_stability(traj_a, traj_b, cfg.epsilon)
    except PreconditionError as exc:
        print(f"stability: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    rows = [
        (n, rep.x_gap[n], rep.y_gap[n], rep.c1[n], rep.c2[n], rep.c3[n], rep.b1, rep.b2, rep.c_nh[n],
         rep.flags["prop42"][n], rep.flags["lem46"][n], rep.flags["thm41"][n])
        for n in range(len(rep.x_gap))
    ]
    write_csv(out / "stability.csv", STABILITY_COLUMNS, rows)
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def reindex_cases(cfg: ExperimentConfig, ens0: Ensemble) -> list[tuple[str, list[float], float]]:
    """Hand examples, seeded random paths, and the simulated dx series."""
    cases: list[tuple[str, list[float], float]] = [
        ("example_1324", [1.0, 3.0, 2.0, 4.0], 0.1),
        ("example_0213", [0.0, 2.0, 1.0, 3.0], 0.1),
    ]
    rng = np.random.default_rng([cfg.seed, 2])
    made = 0
    while made < cfg.reindex_paths:
        length = int(rng.integers(2, 51))
        path = rng.uniform(0.0, 1.0, length)
        if not path[-1] > path[0]:
            continue
        cases.append((f"random_{made}", path.tolist(), float(rng.uniform(0.0, 1.0))))
        made += 1
    traj = simulate(ens0, cfg.kernel, cfg.params())
    sim_path = truncate_at_max(traj.series("dx_frob"))
    if sim_path is not None:
        cases.append(("simulated_dx", list(sim_path.values), cfg.kernel.scaled_phi_lip()))
    return cases


def _run_reindex(cfg: ExperimentConfig, ens0: Ensemble, out: Path) -> int:
    rows = []
    ok = True
    for case_id, values, slope in reindex_cases(cfg, ens0):
        res = check_lemma(values, linear_psi(slope))
        ok &= res.passed
        rows.append((case_id, res.direct, res.monotone, res.slack, res.passed))
    write_csv(out / "reindex.csv", REINDEX_COLUMNS, rows)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


SWEEP_COLUMNS = ("run", "beta", "seed", "n_particles", "admissible", "envelope_pass", "dv_ratio")


def _sweep_one(job: tuple[ExperimentConfig, str]) -> tuple:
    cfg, subdir = job
    out = Path(subdir)
    out.mkdir(parents=True, exist_ok=True)
    ens0 = init_ensemble(cfg)
    traj = simulate(ens0, cfg.kernel, cfg.params())
    write_csv(out / "observables.csv", OBSERVABLE_COLUMNS, observable_rows(traj, cfg))
    write_manifest(out, manifest(cfg, ens0, "sweep"))
    cert = admissible(ens0, cfg.kernel, cfg.kappa)
    env_pass = check_flocking_envelope(traj, cert).passed if cert.admissible else None
    dv = traj.series("dv_frob")
    ratio = dv[-1] / dv[0] if dv[0] > 0 else 0.0
    return (out.name, cfg.beta, cfg.seed, cfg.n_particles, cert.admissible, env_pass, ratio)


def sweep_configs(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    betas = cfg.sweep_beta or (cfg.beta,)
    seeds = cfg.sweep_seed or (cfg.seed,)
    return [
        cfg.replace(beta=b, seed=s, n_particles=n)
        for b, s, n in itertools.product(betas, seeds, cfg.sweep_n_particles)
    ]


def _run_sweep(cfg: ExperimentConfig, out: Path) -> int:
    jobs = [
        (c, str(out / f"beta={c.beta!r}_seed={c.seed}_n={c.n_particles}")) for c in sweep_configs(cfg)
    ]
    if cfg.sweep_workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep_workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return EXIT_CHECK_FAILED if any(r[5] is False for r in rows) else EXIT_OK


_RUNNERS = {
    "simulate": _run_simulate,
    "certify": _run_certify,
    "transition": _run_transition,
    "stability": _run_stability,
    "reindex-check": _run_reindex,
}
SUBCOMMANDS = (*_RUNNERS, "sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtflock", description="Forward-Euler Motsch-Tadmor flocking experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="key=value experiment file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override init.seed")
        p.add_argument("--strict", action="store_true", help="exit 3 on inadmissible initial data")
    return parser


def run(subcommand: str, cfg: ExperimentConfig, out: Path) -> int:
    if subcommand == "sweep":
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, {"subcommand": "sweep", "config": cfg.to_dict()})
        return _run_sweep(cfg, out)
    ens0 = init_ensemble(cfg)
    if cfg.strict and not admissible(ens0, cfg.kernel, cfg.kappa).admissible:
        print("initial data is inadmissible", file=sys.stderr)
        return EXIT_INADMISSIBLE
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, manifest(cfg, ens0, subcommand))
    return _RUNNERS[subcommand](cfg, ens0, out)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if args.strict:
            cfg = cfg.replace(strict=True)
        if args.subcommand != "sweep":
            init_ensemble(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(args.subcommand, cfg, args.out)
    except DivergenceError as exc:
        print(f"run diverged: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
