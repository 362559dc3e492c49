"""Command-line front end.

Subcommands ``solve``, ``clt``, ``hypothesis``, ``regularity`` each
take ``--config <path>`` and ``--out <dir>``.  Exit codes: 0 on pass,
2 on validation failure, 3 on numerical-threshold failure.  All output
files are written atomically (temp file then rename) and all CSVs use
17-significant-digit decimals, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

import numpy as np

from . import config as config_mod
from .config import ConfigError, ExperimentConfig
from .kernels import Grid
from .laws import build_law, LawBuildError
from .engine import (LawFamily, NarrowGridError, convergence_table,
                     table_to_csv)
from .solver import (CFLError, TerminalProblem, make_grid, solve_forward,
                     evaluate, surface_to_csv)
from .oracle import CharExponent, OracleError, classical_expectation
from .checker import (check_condition_iii, example_41_check,
                      residual_table_to_csv)
from .regularity import (RegularityError, probe, compare_reports,
                         report_to_text)

ORACLE_TOL = 2e-2
LIP_SLACK = 1.05


class ThresholdError(RuntimeError):
    """A numerical check failed beyond its configured tolerance."""


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _solve_grid(cfg: ExperimentConfig, t_max: float) -> Grid:
    return make_grid(cfg.x_min, cfg.x_max, cfg.nx, t_max,
                     cfg.uncertainty_set(), r_cut=cfg.r_cut,
                     z_max=cfg.z_max, safety=cfg.safety)


def run_solve(cfg: ExperimentConfig, out: str) -> list[str]:
    uset = cfg.uncertainty_set()
    summary = []
    for psi in cfg.psi_functions():
        grid = _solve_grid(cfg, cfg.t_max)
        prob = TerminalProblem(psi, psi.lip, psi.sup, cfg.t_max)
        surface = solve_forward(prob, grid, uset)
        tag = f"{psi.name}_" + "_".join(f"{p:g}" for p in psi.params)
        write_atomic(os.path.join(out, f"surface_{tag}.csv"),
                     surface_to_csv(surface))

        overshoot = float(np.max(np.abs(surface.values))) - psi.sup
        mid = slice(grid.nx // 4, 3 * grid.nx // 4)
        lip = float(np.max(np.abs(np.diff(surface.values[:, mid],
                                          axis=1)))) / grid.dx
        line = (f"{tag}: max_principle_residual={max(overshoot, 0.0):.3e} "
                f"lip={lip:.6g} lip_bound={psi.lip * LIP_SLACK:.6g}")
        if overshoot > 1e-9 or lip > psi.lip * LIP_SLACK + 1e-12:
            raise ThresholdError("solve checks failed: " + line)
        if len(uset.pairs) == 1:
            ce = CharExponent(uset.pairs[0], cfg.alpha)
            ref = classical_expectation(psi, ce, cfg.t_max, 0.0)
            gap = abs(evaluate(surface, cfg.t_max, 0.0) - ref)
            line += f" oracle_gap={gap:.3e}"
            if gap > ORACLE_TOL:
                raise ThresholdError(
                    f"solver disagrees with the classical oracle by "
                    f"{gap:.3e} > {ORACLE_TOL}")
        summary.append(line)
    write_atomic(os.path.join(out, "solve_summary.txt"),
                 "\n".join(summary) + "\n")
    return summary


def _law_family(cfg: ExperimentConfig) -> LawFamily:
    uset = cfg.uncertainty_set()
    laws = tuple(build_law(p, cfg.alpha, cfg.b_scale, cfg.z0)
                 for p in uset.pairs)
    return LawFamily(laws, uset)


def run_clt(cfg: ExperimentConfig, out: str) -> list[str]:
    uset = cfg.uncertainty_set()
    family = _law_family(cfg)
    summary = []
    for psi in cfg.psi_functions():
        grid = _solve_grid(cfg, 1.0)
        prob = TerminalProblem(psi, psi.lip, psi.sup, 1.0)
        pide_value = evaluate(solve_forward(prob, grid, uset), 1.0, 0.0)
        rows = convergence_table(psi, family, cfg.n_values,
                                 cfg.dp_grid(), pide_value)
        tag = f"{psi.name}_" + "_".join(f"{p:g}" for p in psi.params)
        write_atomic(os.path.join(out, f"convergence_{tag}.csv"),
                     table_to_csv(rows))
        errs = [r[4] for r in rows]
        if min(errs) > 0.0:
            rate = float(np.polyfit(np.log([r[0] for r in rows]),
                                    np.log(errs), 1)[0])
        else:
            rate = float("-inf")
        summary.append(f"{tag}: pide_value={pide_value:.10g} "
                       f"first_error={errs[0]:.3e} "
                       f"last_error={errs[-1]:.3e} fitted_rate={rate:.4f}")
    write_atomic(os.path.join(out, "clt_summary.txt"),
                 "\n".join(summary) + "\n")
    return summary


def run_hypothesis(cfg: ExperimentConfig, out: str) -> list[str]:
    uset = cfg.uncertainty_set()
    psi = cfg.psi_functions()[0]
    grid = _solve_grid(cfg, 1.0 + cfg.h)
    if cfg.mode == "condition_iii":
        family = _law_family(cfg)
        table = check_condition_iii(family, uset, psi, cfg.h,
                                    cfg.n_values, grid)
    else:
        table = example_41_check(uset, psi, cfg.h, cfg.n_values, grid)
    write_atomic(os.path.join(out, "residuals.csv"),
                 residual_table_to_csv(table))
    summary = [
        f"mode={cfg.mode} fitted_rate={table.fitted_rate:.4f}",
        "n,residual,floor,kept",
    ] + [f"{n},{r:.6e},{f:.2e},{int(k)}"
         for n, r, f, k in zip(table.n_values, table.residuals,
                               table.floor, table.kept)]
    write_atomic(os.path.join(out, "hypothesis_summary.txt"),
                 "\n".join(summary) + "\n")
    return summary


def run_regularity(cfg: ExperimentConfig, out: str) -> list[str]:
    uset = cfg.uncertainty_set()
    psi = cfg.psi_functions()[0]
    singleton = len(uset.pairs) == 1
    horizon = 1.0 + cfg.h

    grid = _solve_grid(cfg, horizon)
    prob = TerminalProblem(psi, psi.lip, psi.sup, horizon)
    report = probe(solve_forward(prob, grid, uset), prob, cfg.h, singleton)

    coarse = make_grid(cfg.x_min, cfg.x_max, (cfg.nx - 1) // 2 + 1,
                       horizon, uset, r_cut=cfg.r_cut, z_max=cfg.z_max,
                       safety=cfg.safety)
    report_c = probe(solve_forward(prob, coarse, uset), prob, cfg.h,
                     singleton)
    compare_reports(report, report_c)

    if report.lip_x > psi.lip * LIP_SLACK:
        raise ThresholdError(
            f"measured Lipschitz constant {report.lip_x:.6g} exceeds "
            f"{LIP_SLACK} x Lip(psi) = {psi.lip * LIP_SLACK:.6g}")
    write_atomic(os.path.join(out, "regularity.txt"),
                 report_to_text(report))
    summary = [f"lip_psi={psi.lip:.6g}", "fine:"] \
        + report_to_text(report).splitlines() \
        + ["coarse:"] + report_to_text(report_c).splitlines()
    write_atomic(os.path.join(out, "regularity_summary.txt"),
                 "\n".join(summary) + "\n")
    return summary


_COMMANDS = {
    "solve": run_solve,
    "clt": run_clt,
    "hypothesis": run_hypothesis,
    "regularity": run_regularity,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlstable",
        description="Deterministic experiments for stable limits under "
                    "sublinear expectation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    try:
        cfg = config_mod.load(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        for line in _COMMANDS[args.command](cfg, args.out):
            print(line)
    except (ConfigError, LawBuildError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (CFLError, NarrowGridError, OracleError, RegularityError,
            ThresholdError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
