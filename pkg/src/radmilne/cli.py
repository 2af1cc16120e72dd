"""Batch driver: read a JSON run configuration, execute the solve /
diagnostics / spectral pipeline, write machine-readable reports.

Subcommands
-----------
run <config> [--out DIR]
    Solve on the B schedule, evaluate every estimate, write report.json,
    profiles.csv and decay.csv into the output directory.
verify <config> [--report DIR]
    Re-run the invariant suite against a previously written report;
    nonzero exit if any check fails or the schema is unknown.
sweep <config> --param NAME --values V1,V2,... [--out DIR]
    Repeat `run` with one config field overridden per value, writing to
    OUT/NAME=VALUE/ subdirectories.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification
failure.  MILNE_THREADS caps the parallelism of the B-schedule solves.
Reports are deterministic: no timestamps, keys sorted, floats at 17
significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, linearized, milne, spectral
from .discretization import BoundaryData, Grid
from .errors import ContractViolationError, IterationFailureError

REPORT_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated run configuration."""

    T_b: float
    psi_b: dict
    B_schedule: list
    nx: int = 401
    nmu: int = 16
    tol: float = 1e-10
    max_iter: int = 5000
    alphas: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    betas: list = field(default_factory=lambda: [0.25, 0.5])
    seed: int = 0
    outdir: str = "out"
    angular_rule: str = "double-gauss"

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
        return cls.from_dict(raw, path)

    @classmethod
    def from_dict(cls, raw, path="<config>"):
        def need(name):
            if name not in raw:
                raise ConfigError(f"{path}: missing required field '{name}'")
            return raw[name]

        T_b = need("T_b")
        if not isinstance(T_b, (int, float)) or T_b < 0:
            raise ConfigError(f"{path}: field 'T_b' must be a nonnegative number")
        psi_b = need("psi_b")
        if isinstance(psi_b, (int, float)):
            psi_b = {"kind": "constant", "value": float(psi_b)}
        if not isinstance(psi_b, dict) or "kind" not in psi_b:
            raise ConfigError(f"{path}: field 'psi_b' must be a number or an "
                              "object with a 'kind'")
        if psi_b["kind"] not in ("constant", "polynomial", "table"):
            raise ConfigError(f"{path}: psi_b.kind must be constant, polynomial "
                              f"or table, got {psi_b['kind']!r}")
        sched = raw.get("B_schedule", [5.0, 10.0, 20.0])
        if not isinstance(sched, list) or len(sched) < 1 or \
                any(not isinstance(b, (int, float)) or b <= 0 for b in sched):
            raise ConfigError(f"{path}: 'B_schedule' must be a list of positive numbers")
        if sorted(sched) != sched:
            raise ConfigError(f"{path}: 'B_schedule' must be increasing")
        cfg = cls(
            T_b=float(T_b),
            psi_b=psi_b,
            B_schedule=[float(b) for b in sched],
            nx=int(raw.get("nx", 401)),
            nmu=int(raw.get("nmu", 16)),
            tol=float(raw.get("tol", 1e-10)),
            max_iter=int(raw.get("max_iter", 5000)),
            alphas=[float(a) for a in raw.get("alphas", [0.25, 0.5, 0.75])],
            betas=[float(b) for b in raw.get("betas", [0.25, 0.5])],
            seed=int(raw.get("seed", 0)),
            outdir=str(raw.get("outdir", "out")),
            angular_rule=str(raw.get("angular_rule", "double-gauss")),
        )
        if cfg.nx < 5:
            raise ConfigError(f"{path}: 'nx' must be at least 5")
        if cfg.nmu < 2 or cfg.nmu % 2:
            raise ConfigError(f"{path}: 'nmu' must be even and >= 2")
        for name, vals in (("alphas", cfg.alphas), ("betas", cfg.betas)):
            if any(not (0.0 < v < 1.0) for v in vals):
                raise ConfigError(f"{path}: '{name}' values must lie in (0, 1)")
        return cfg

    def boundary(self, grid):
        kind = self.psi_b["kind"]
        if kind == "constant":
            return BoundaryData.make(grid, self.T_b, float(self.psi_b["value"]))
        if kind == "polynomial":
            coeffs = [float(c) for c in self.psi_b["coeffs"]]
            vals = np.polynomial.polynomial.polyval(grid.mu_pos, coeffs)
            return BoundaryData.make(grid, self.T_b, vals)
        vals = np.asarray([float(v) for v in self.psi_b["values"]])
        return BoundaryData.make(grid, self.T_b, vals)


def _fmt_float(x):
    if isinstance(x, float):
        if np.isnan(x):
            return "NaN"
        if np.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return f"{x:.17g}"
    return None


def _dump_json(obj, indent=0):
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            items.append(f'{pad}  {json.dumps(str(k))}: {_dump_json(obj[k], indent + 1)}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_dump_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(obj)


def _write_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([f"{v:.17g}" for v in row])


def _threads():
    raw = os.environ.get("MILNE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run(config_path, outdir=None):
    cfg = RunConfig.load(config_path)
    out = outdir or cfg.outdir
    os.makedirs(out, exist_ok=True)
    try:
        return _run_validated(cfg, out)
    except IterationFailureError as exc:
        # leave a flagged partial report behind before surfacing exit 3
        partial = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "partial": True,
            "solver_failure": str(exc),
            "last_residual": exc.residual,
        }
        with open(os.path.join(out, "report.json"), "w") as fh:
            fh.write(_dump_json(partial) + "\n")
        raise


def _run_validated(cfg, out):
    if len(cfg.B_schedule) >= 3:
        ext = milne.extend_to_halfspace(
            lambda grid: cfg.boundary(grid),
            B_schedule=cfg.B_schedule,
            nx=cfg.nx, nmu=cfg.nmu, tol=cfg.tol,
            angular_rule=cfg.angular_rule, threads=_threads(),
            max_iter=cfg.max_iter,
        )
        sol = ext.solution
        ends, diffs, cauchy = (ext.endpoint_values, ext.cauchy_diffs,
                               ext.cauchy_decreasing)
    else:
        # short schedules: solve the largest B directly, no Cauchy record
        grid = Grid.uniform(cfg.B_schedule[-1], nx=cfg.nx, nmu=cfg.nmu,
                            angular_rule=cfg.angular_rule)
        sol = milne.solve_bounded_milne(grid, cfg.boundary(grid), tol=cfg.tol,
                                        max_iter=cfg.max_iter, keep_history=False)
        ends, diffs, cauchy = [sol.T_inf], [], True

    grid = sol.grid
    bd = cfg.boundary(grid)
    T_inf = sol.T_inf
    x = grid.x
    from .discretization import bracket as _bracket
    from .discretization import ddx as _ddx
    from .discretization import moment as _moment

    gap = spectral.boundary_gap(grid, bd)
    cons = diagnostics.conservation_report(sol)
    checks = {}
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {
            "T_b": cfg.T_b, "psi_b": cfg.psi_b, "B_schedule": cfg.B_schedule,
            "nx": cfg.nx, "nmu": cfg.nmu, "tol": cfg.tol, "seed": cfg.seed,
            "alphas": cfg.alphas, "betas": cfg.betas,
            "angular_rule": cfg.angular_rule,
        },
        "gamma": sol.gamma,
        "T_inf": T_inf,
        "boundary_gap": gap,
        "endpoint_sequence": ends,
        "cauchy_diffs": diffs,
        "cauchy_decreasing": bool(cauchy),
        "solver": {
            "iterations": sol.iterations,
            "converged_by": sol.converged_by,
            "final_increment": float(sol.residuals[-1]) if len(sol.residuals) else 0.0,
        },
        "conservation": {
            "flux_residual_max": cons.flux_residual_max,
            "invariant_drift": cons.invariant_drift,
            "sum_invariant_drift": cons.sum_invariant_drift,
        },
    }

    m_table, west, decay_tab, intens = {}, {}, {}, {}
    for a in cfg.alphas:
        key = f"{a:g}"
        m_table[key] = spectral.m_alpha(grid, bd, a)
        lhs, rhs, ok = diagnostics.weighted_estimate_nonlinear(sol, a, bd)
        west[key] = {"lhs": lhs, "rhs": rhs, "pass": ok}
        checks[f"weighted_estimate[{key}]"] = ok
        # 1e-11 absolute allowance: roundoff near the plateau where the
        # envelope is exponentially small
        viol, rate = diagnostics.decay_envelope(sol, a, bd=bd, atol=1e-11)
        decay_tab[key] = {"max_violation": viol, "fitted_rate": rate,
                          "pass": bool(viol <= 0.0)}
        checks[f"decay_envelope[{key}]"] = bool(viol <= 0.0)
        iv = diagnostics.intensity_decay(sol, a, bd=bd)
        intens[key] = iv
        checks[f"intensity_decay[{key}]"] = bool(iv <= 0.0)
    report["M_alpha"] = m_table
    report["weighted_estimate"] = west
    report["decay"] = decay_tab
    report["intensity_decay"] = intens

    cb_table = {}
    for b in cfg.betas:
        for a in cfg.alphas:
            if b < a:
                cb_table[f"alpha={a:g},beta={b:g}"] = spectral.compute_Cb(
                    cfg.T_b, sol.gamma, a, b) if cfg.T_b > 0 else 0.0
    report["C_b"] = cb_table
    report["gap_below_Cb"] = bool(cb_table and gap <= min(cb_table.values()))

    lin_rep = {"delta_B": linearized.delta_constant(grid.B), "N_beta": {},
               "est_wB": {}}
    lin = linearized.solve_linearized_bounded(
        grid, sol.T.values, 1.0, max_iter=min(cfg.max_iter, 120),
        warn_spectral=False)
    lin_rep["contraction_ratio_max"] = (
        float(np.max(lin.contraction_ratios)) if lin.contraction_ratios.size else 0.0)
    lin_rep["converged_by"] = lin.converged_by
    dev = lin.phi - 4.0 * sol.T.values[:, None] ** 3 * lin.g[:, None]
    for b in cfg.betas:
        key = f"{b:g}"
        lin_rep["N_beta"][key] = linearized.n_beta(grid, 1.0, None, b)
        wgt = np.exp(2.0 * b * x)
        lhs = float(np.trapezoid(wgt * _bracket(grid, dev**2), x)
                    + np.sum(grid.w[grid.neg] * (-grid.mu[grid.neg])
                             * lin.phi[0, grid.neg] ** 2) / (1.0 - b))
        rhs = float(np.sum(grid.w_pos * grid.mu_pos) / (1.0 - b))
        ok = bool(lhs <= rhs * 1.01)
        lin_rep["est_wB"][key] = {"lhs": lhs, "rhs": rhs, "pass": ok}
        checks[f"linearized_estimate[{key}]"] = ok
    report["linearized"] = lin_rep

    spec_rep = {}
    for b in cfg.betas:
        rep = spectral.build_report(grid, sol.T.values, b, seed=cfg.seed)
        spec_rep[f"{b:g}"] = {
            "A0": rep.A0, "A0_squared": rep.A0_squared, "A1": rep.A1,
            "rayleigh_max": rep.rayleigh_max, "passes": rep.passes,
            "truncation_estimate": rep.truncation_estimate,
        }
        checks[f"spectral_consistent[{b:g}]"] = rep.passes["hardy_consistent"]
    report["spectral"] = spec_rep

    # verify recomputes the residual from the stored columns, which for
    # clean data reproduces the stored value bit-for-bit; the threshold
    # only needs to absorb the 17-digit round-trip
    flux_threshold = cons.flux_residual_max * (1.0 + 1e-9) + 1e-12
    report["verify_thresholds"] = {"flux_residual": flux_threshold}
    checks["fields_in_bounds"] = bool(
        sol.T.values.min() >= -1e-12
        and sol.T.values.max() <= sol.gamma + 1e-12
        and sol.psi.values.min() >= -1e-12)
    report["checks"] = {k: bool(v) for k, v in sorted(checks.items())}
    report["all_checks_pass"] = bool(all(checks.values()))

    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(_dump_json(report) + "\n")

    psi = sol.psi.values
    _write_csv(os.path.join(out, "profiles.csv"),
               ["x", "T", "dTdx", "bracket_psi", "first_moment"],
               [x, sol.T.values, _ddx(grid, sol.T.values),
                _bracket(grid, psi), _moment(grid, psi, 1)])

    dev_T = np.abs(sol.T.values - T_inf)
    header = ["x", "abs_T_minus_Tinf"]
    cols = [x, dev_T]
    for a in cfg.alphas:
        header.append(f"bound_alpha_{a:g}")
        cols.append(m_table[f"{a:g}"] * np.exp(-a * x))
    _write_csv(os.path.join(out, "decay.csv"), header, cols)
    return report


def verify(config_path, report_dir=None):
    """Re-check invariants against a stored report; returns list of
    violated check names (empty = pass)."""
    cfg = RunConfig.load(config_path)
    out = report_dir or cfg.outdir
    rp = os.path.join(out, "report.json")
    try:
        with open(rp) as fh:
            report = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"report not found: {rp}")
    if report.get("schema_version") != REPORT_SCHEMA_VERSION:
        return [f"unknown report schema_version {report.get('schema_version')!r}"]
    if report.get("partial"):
        return [f"report is partial (solver failure: {report.get('solver_failure')})"]

    failures = []
    for name, ok in report.get("checks", {}).items():
        if not ok:
            failures.append(f"stored check failed: {name}")

    prof = {}
    with open(os.path.join(out, "profiles.csv")) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    arr = np.asarray(rows)
    for j, name in enumerate(header):
        prof[name] = arr[:, j]

    x = prof["x"]
    T = prof["T"]
    dT = np.gradient(T, x, edge_order=2)
    scale = 1.0 + np.max(np.abs(prof["dTdx"]))
    if np.max(np.abs(dT - prof["dTdx"])) > 1e-9 * scale:
        failures.append("flux identity: stored derivative column does not "
                        "match the stored temperature profile")
    # node-wise: the profile must satisfy the identity at least as well as
    # when it was written (clean columns reproduce it bit-for-bit)
    res_now = np.abs(dT - prof["first_moment"])
    res_ref = np.abs(prof["dTdx"] - prof["first_moment"])
    if np.max(res_now - res_ref) > 1e-9 * scale:
        failures.append("flux identity: residual exceeds the stored profile's")
    flux = float(np.max(res_now))
    threshold = report["verify_thresholds"]["flux_residual"]
    if flux > threshold:
        failures.append(
            f"flux identity: residual {flux:.3e} above threshold {threshold:.3e}")
    gamma = report["gamma"]
    if T.min() < -1e-12 or T.max() > gamma + 1e-10:
        failures.append("temperature out of [0, gamma]")
    if prof["bracket_psi"].min() < -1e-12:
        failures.append("negative angular average of intensity")

    with open(os.path.join(out, "decay.csv")) as fh:
        reader = csv.reader(fh)
        dheader = next(reader)
        drows = [[float(v) for v in row] for row in reader]
    darr = np.asarray(drows)
    dev = darr[:, dheader.index("abs_T_minus_Tinf")]
    for j, name in enumerate(dheader):
        if name.startswith("bound_alpha_"):
            if np.max(dev - darr[:, j] * 1.02 - 1e-11) > 0:
                failures.append(f"decay envelope violated for {name}")
    return failures


def sweep(config_path, param, values, outdir=None):
    cfg = RunConfig.load(config_path)
    with open(config_path) as fh:
        raw = json.load(fh)
    base_out = outdir or cfg.outdir
    for val in values:
        raw_mod = json.loads(json.dumps(raw))
        node = raw_mod
        parts = param.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"sweep parameter path '{param}' not in config")
            node = node[p]
        node[parts[-1]] = val
        sub = os.path.join(base_out, f"{param}={val}")
        os.makedirs(sub, exist_ok=True)
        tmp_cfg = os.path.join(sub, "config.json")
        with open(tmp_cfg, "w") as fh:
            json.dump(raw_mod, fh, indent=2, sort_keys=True)
        run(tmp_cfg, outdir=sub)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="radmilne",
        description="nonlinear Milne solver and estimate verification driver")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve and write reports")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_ver = sub.add_parser("verify", help="re-check invariants of a stored report")
    p_ver.add_argument("config")
    p_ver.add_argument("--report", default=None)
    p_sw = sub.add_parser("sweep", help="run over a list of parameter values")
    p_sw.add_argument("config")
    p_sw.add_argument("--param", required=True)
    p_sw.add_argument("--values", required=True,
                      help="comma-separated JSON values")
    p_sw.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            report = run(args.config, outdir=args.out)
            print("run complete; all checks pass"
                  if report["all_checks_pass"] else "run complete; some checks failed")
            return EXIT_OK
        if args.command == "verify":
            failures = verify(args.config, report_dir=args.report)
            if failures:
                for f in failures:
                    print(f"verify: {f}", file=sys.stderr)
                return EXIT_VERIFY
            print("verify: all checks pass")
            return EXIT_OK
        if args.command == "sweep":
            values = [json.loads(v) for v in args.values.split(",")]
            sweep(args.config, args.param, values, outdir=args.out)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IterationFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
