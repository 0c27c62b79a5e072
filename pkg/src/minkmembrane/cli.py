"""Batch front door: run simulations, verification suites, decay fits,
epsilon sweeps and the direct-vs-compactified comparison from JSON
configs, emitting CSV/JSON artifacts.

Exit codes: 0 success, 1 error or verification failure, 2 physical
breakdown (hyperbolicity lost).  The three are never conflated; argparse
usage problems map to 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .diagnostics import (
    NORM_CSV_HEADER,
    DiagnosticsConfig,
    bootstrap_norms,
    box_commutator_check,
    fit_decay_exponent,
    gamma_basis,
    gamma_q_commutation_check,
    load_commutation_table,
    random_polynomial_window,
)
from .equation import (
    Formulation,
    q00,
    random_bundle,
    residual_divergence,
    residual_geometric,
    residual_nullform,
)
from .errors import MinkMembraneError
from .evolution import (
    Breakdown,
    InitialData,
    ReachedEnd,
    SolverConfig,
    SupportGuard,
    evolve,
    initial_state,
)
from .fields import GridSpec, dump_field_csv
from .kelvin import pipeline_levels, verify_conformal_suite
from .windows import window_from_state

# Identity-level relative tolerances enforced by the verify commands.
TOL_FORMULATION = 1e-10
TOL_COMMUTATOR = 1e-8
TOL_CONFORMAL = 1e-6

# Finite-difference identities must lose at least this many bits per
# step halving (fourth-order stencils give 4).
CONFORMAL_ORDER_MIN = 3.8
# Defects this small sit at the rounding floor; order is unmeasurable.
ORDER_FLOOR = 1e-11
# Step used for the halving study when the config leaves fd_step unset:
# large enough that truncation dominates rounding on both levels.
ORDER_BASE_STEP = 2e-2

FD_IDENTITIES = ("q00_scaling", "conformal_box", "box_rho_power")

# Required convergence of the two-route comparison: each joint
# resolution doubling must shrink the relative gap by this factor, and
# the coarsest level must already be this close.
PIPELINE_SHRINK = 3.0
PIPELINE_COARSE_TOL = 5e-2


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _point_label(coords) -> str:
    return ";".join(repr(float(c)) for c in coords)


def _write_csv(path: str, cfg: RunConfig, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash} version={__version__}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(cfl=cfg.time.cfl,
                        formulation=Formulation(cfg.formulation))


def _initial_data(cfg: RunConfig) -> InitialData:
    d = cfg.initial_data
    return InitialData(epsilon=d.epsilon, profile=d.profile, width=d.width,
                       g_profile=d.g_profile, g_width=d.g_width)


def _run_simulation(cfg: RunConfig):
    """Evolve per the config, sampling norms every diagnostics.sample_dt
    once enough history accumulates.  Returns (termination, records,
    final state)."""
    grid = GridSpec(cfg.dimension, cfg.grid.extent, cfg.grid.points)
    solver = _solver_config(cfg)
    state = initial_state(grid, _initial_data(cfg), 0.0, solver)
    diag = DiagnosticsConfig(gamma_order=cfg.diagnostics.gamma_order,
                             sample_dt=cfg.diagnostics.sample_dt,
                             fit_window_start=cfg.diagnostics.fit_window_start)
    records = []
    next_sample = 0.0

    def sampler(st):
        nonlocal next_sample
        if len(st.history) < st.history.maxlen:
            return
        if st.t + 1e-12 < next_sample:
            return
        records.append(bootstrap_norms(window_from_state(st), diag))
        while next_sample <= st.t + 1e-12:
            next_sample += diag.sample_dt

    term = evolve(state, cfg.time.t_end, solver, callback=sampler)
    return term, records, state


def cmd_simulate(cfg: RunConfig, out: str | None,
                 dump_field: str | None) -> int:
    cfg.require("grid", "time", "initial_data")
    out = out or cfg.output or "run.csv"
    term, records, state = _run_simulation(cfg)
    _write_csv(out, cfg, NORM_CSV_HEADER, [r.row() for r in records])
    if dump_field:
        dump_field_csv(state.phi_field(), dump_field,
                       header_comment=f"config_hash={cfg.config_hash} "
                                      f"t={state.t!r}")
    if isinstance(term, ReachedEnd):
        print(f"reached t = {term.t:g} in {term.steps} steps; "
              f"{len(records)} samples -> {out}")
        return 0
    if isinstance(term, Breakdown):
        report = {
            "termination": "breakdown",
            "t": term.t,
            "node": term.node,
            "node_coords": list(term.node_coords),
            "q_value": term.q_value,
        }
        report_path = out + ".breakdown.json"
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2)
        print(f"breakdown at t = {term.t:g} (Q00 = {term.q_value:g}); "
              f"report -> {report_path}")
        return 2
    if isinstance(term, SupportGuard):
        return _fail(f"support reached the guard band at t = {term.t:g}; "
                     f"enlarge the grid")
    return _fail(f"unexpected termination {term!r}")


def formulation_equivalence_cases(dimension: int, count: int, seed: int):
    """Relative defects of the algebraic identities tying the residual
    forms together, on random bundles with bounded null form."""
    rng = np.random.default_rng(seed)
    grid = GridSpec(dimension, 1.0, 9)
    cases = []
    for i in range(count):
        b = random_bundle(grid, rng, q_cap=0.5)
        q = q00(b, b)
        geo = residual_geometric(b)
        null_scaled = residual_nullform(b) / np.sqrt(1.0 - q)
        div = residual_divergence(b)
        scale = float(np.max(np.abs(geo)) + np.max(np.abs(null_scaled))) + 1e-300
        cases.append(("formulation_geometric_nullform", f"n{dimension}", i,
                      float(np.max(np.abs(geo - null_scaled))) / scale))
        scale_d = float(np.max(np.abs(geo)) + np.max(np.abs(div))) + 1e-300
        cases.append(("formulation_divergence_geometric", f"n{dimension}", i,
                      float(np.max(np.abs(div - geo))) / scale_d))
    return cases


def cmd_verify(cfg: RunConfig, out: str | None) -> int:
    out = out or cfg.output or "verify_report.csv"
    rows = []
    failures = []

    def check(identity, function, point, rel, tol):
        rows.append((identity, function, point, rel))
        if rel > tol:
            failures.append((identity, function, rel, tol))

    for n in (1, 2):
        for identity, function, i, rel in formulation_equivalence_cases(
                n, cfg.verify.count, cfg.seed + n):
            check(identity, function, f"bundle#{i}", rel, TOL_FORMULATION)

    rng = np.random.default_rng(cfg.seed + 17)
    for n in (1, 2):
        grid = GridSpec(n, 2.0, 17)
        for key, (defect, scale) in box_commutator_check(grid).items():
            check("box_commutator", key, f"n{n}", defect / scale,
                  TOL_COMMUTATOR)
        table = (load_commutation_table(n, cfg.verify.commutation_table)
                 if cfg.verify.commutation_table else None)
        kinds = ["null_metric"] + (["null_12"] if n == 2 else [])
        for i in range(max(1, cfg.verify.count // 2)):
            u = random_polynomial_window(grid, rng)
            v = random_polynomial_window(grid, rng)
            for g in gamma_basis(n):
                for kind in kinds:
                    defect, scale = gamma_q_commutation_check(
                        u, v, g, q_kind=kind, table=table, with_scale=True)
                    check("gamma_q_commutation", f"{g.label()}|{kind}",
                          f"n{n}#{i}", defect / scale, TOL_COMMUTATOR)

    _write_csv(out, cfg, "identity,function,point,defect", rows)
    by_identity = {}
    for identity, _, _, rel in rows:
        by_identity[identity] = max(by_identity.get(identity, 0.0), rel)
    failed_ids = {f[0] for f in failures}
    for identity in sorted(by_identity):
        status = "FAIL" if identity in failed_ids else "PASS"
        print(f"{identity}: max defect {by_identity[identity]:.3e} [{status}]")
    if failures:
        worst = max(failures, key=lambda f: f[2] / f[3])
        print(f"verification FAILED: {worst[0]} ({worst[1]}) defect "
              f"{worst[2]:.3e} exceeds {worst[3]:.1e}", file=sys.stderr)
        return 1
    print(f"all identities verified; report -> {out}")
    return 0


def _max_defects(cases, identities) -> dict[str, float]:
    out = {k: 0.0 for k in identities}
    for c in cases:
        if c.identity in out:
            out[c.identity] = max(out[c.identity], c.defect)
    return out


def cmd_verify_conformal(cfg: RunConfig, out: str | None) -> int:
    out = out or cfg.output or "verify_conformal_report.csv"
    constants = cfg.verify.conformal_constants
    count = cfg.verify.count
    cases = verify_conformal_suite(cfg.dimension, seed=cfg.seed, count=count,
                                   delta=cfg.verify.fd_step,
                                   constants_path=constants)
    rows = [(c.identity, c.function, _point_label(c.point), c.defect)
            for c in cases]
    _write_csv(out, cfg, "identity,function,point,defect", rows)

    by_identity = {}
    for c in cases:
        by_identity[c.identity] = max(by_identity.get(c.identity, 0.0),
                                      c.defect)
    failed = {k: v for k, v in by_identity.items() if v > TOL_CONFORMAL}
    for identity in sorted(by_identity):
        status = "FAIL" if identity in failed else "PASS"
        print(f"{identity}: max defect {by_identity[identity]:.3e} [{status}]")

    # Step-halving study on the finite-difference identities (analytic
    # identities have no step to refine).
    base = cfg.verify.fd_step or ORDER_BASE_STEP
    max_b = _max_defects(
        verify_conformal_suite(cfg.dimension, seed=cfg.seed, count=count,
                               delta=base, constants_path=constants),
        FD_IDENTITIES)
    max_h = _max_defects(
        verify_conformal_suite(cfg.dimension, seed=cfg.seed, count=count,
                               delta=base / 2, constants_path=constants),
        FD_IDENTITIES)
    order_fail = False
    for identity in FD_IDENTITIES:
        if max_b[identity] <= ORDER_FLOOR:
            print(f"{identity}: defect at rounding floor, order check skipped")
            continue
        order = float(np.log2(max_b[identity] / max(max_h[identity], 1e-300)))
        ok = order >= CONFORMAL_ORDER_MIN
        order_fail = order_fail or not ok
        print(f"{identity}: halving order {order:.2f} "
              f"[{'PASS' if ok else 'FAIL'}]")

    if failed:
        worst = max(failed, key=failed.get)
        print(f"verification FAILED: {worst} defect {failed[worst]:.3e} "
              f"exceeds {TOL_CONFORMAL:.1e}", file=sys.stderr)
        return 1
    if order_fail:
        print("verification FAILED: finite-difference defect order below "
              f"{CONFORMAL_ORDER_MIN}", file=sys.stderr)
        return 1
    print(f"all conformal identities verified; report -> {out}")
    return 0


def _read_norm_csv(path: str) -> dict[str, list[float]]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].startswith("#"):
        lines = lines[1:]
    if not lines:
        raise MinkMembraneError(f"{path} has no data")
    header = lines[0].split(",")
    cols = {name: [] for name in header}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise MinkMembraneError(f"malformed CSV row in {path}: {ln!r}")
        for name, val in zip(header, parts):
            cols[name].append(float(val))
    return cols


def cmd_decay_fit(cfg: RunConfig, csv_path: str | None,
                  out: str | None) -> int:
    if not csv_path:
        return _fail("decay-fit requires --csv pointing at a simulate CSV")
    cols = _read_norm_csv(csv_path)
    for required in ("t", "sup_dphi", "sup_q00"):
        if required not in cols:
            return _fail(f"{csv_path} lacks column {required!r}")
    start = cfg.diagnostics.fit_window_start
    rows = []
    for column in ("sup_dphi", "sup_q00"):
        p, c0, rms = fit_decay_exponent(zip(cols["t"], cols[column]), start)
        rows.append((column, p, c0, rms))
        print(f"{column}: exponent {p:+.4f}, prefactor {c0:.4e}, "
              f"rms residual {rms:.3e} (window t >= {start:g})")
    if out:
        _write_csv(out, cfg, "column,exponent,prefactor,rms_residual", rows)
    return 0


def cmd_sweep_epsilon(cfg: RunConfig, out: str | None) -> int:
    cfg.require("grid", "time", "initial_data", "sweep")
    out = out or cfg.output or "sweep.csv"
    rows = []
    saw_breakdown = False
    for eps in cfg.sweep.epsilons:
        run_cfg = replace(cfg,
                          initial_data=replace(cfg.initial_data, epsilon=eps))
        term, records, _ = _run_simulation(run_cfg)
        if isinstance(term, ReachedEnd):
            outcome, breakdown_t, exponent = "Global", "", ""
            series = [(r.t, r.sup_dphi)
                      for r in records
                      if r.t >= cfg.diagnostics.fit_window_start]
            if len(series) >= 8 and all(v > 0 for _, v in series):
                p, _, _ = fit_decay_exponent(
                    series, cfg.diagnostics.fit_window_start)
                exponent = repr(p)
            print(f"epsilon = {eps:g}: Global")
        elif isinstance(term, Breakdown):
            saw_breakdown = True
            outcome, breakdown_t, exponent = "Breakdown", repr(term.t), ""
            print(f"epsilon = {eps:g}: Breakdown at t = {term.t:g}")
        else:
            return _fail(f"sweep run epsilon={eps:g} ended with {term!r}")
        rows.append((repr(eps), outcome, breakdown_t, exponent))
    _write_csv(out, cfg, "epsilon,outcome,breakdown_t,decay_exponent", rows)
    print(f"sweep written -> {out}")
    return 2 if saw_breakdown else 0


def cmd_compactified_compare(cfg: RunConfig, out: str | None) -> int:
    cfg.require("initial_data")
    out = out or cfg.output or "pipeline.csv"
    conf = cfg.conformal
    data = cfg.initial_data
    profile = data.profile
    if profile == "gaussian":
        print("note: the comparison needs data supported in |x| <= 1; "
              "using the bump profile")
        profile = "bump"
    cfl = cfg.time.cfl if cfg.time is not None else 0.4
    reports = pipeline_levels(
        data.epsilon,
        base_direct=conf.base_direct_points,
        base_compact=conf.base_compact_points,
        levels=conf.levels,
        a=conf.a,
        t_direct=conf.t_direct,
        profile=profile,
        width=data.width,
        y_extent=conf.y_extent,
        s_min=conf.s_min,
        collar=conf.collar,
        cfl=cfl,
        margin_t=conf.margin_t,
    )
    rows = []
    print("level  direct  compact  compared  rejected  sup_direct   "
          "max_abs_diff  max_rel_diff")
    for lvl, r in enumerate(reports):
        rows.append((lvl, r.direct_points, r.compact_points, r.n_compared,
                     r.n_rejected, r.n_outside_compared, r.sup_direct,
                     r.max_abs_diff, r.max_rel_diff))
        print(f"{lvl:5d}  {r.direct_points:6d}  {r.compact_points:7d}  "
              f"{r.n_compared:8d}  {r.n_rejected:8d}  {r.sup_direct:.5e}  "
              f"{r.max_abs_diff:.5e}  {r.max_rel_diff:.5e}")
    _write_csv(out, cfg,
               "level,direct_points,compact_points,n_compared,n_rejected,"
               "n_outside_compared,sup_direct,max_abs_diff,max_rel_diff",
               rows)
    rels = [r.max_rel_diff for r in reports]
    trend_ok = all(b <= a / PIPELINE_SHRINK for a, b in zip(rels, rels[1:]))
    coarse_ok = rels[0] <= PIPELINE_COARSE_TOL
    if trend_ok and coarse_ok:
        print(f"convergence trend holds; report -> {out}")
        return 0
    print(f"convergence trend FAILED: relative gaps {rels}", file=sys.stderr)
    return 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Exit code 2 is reserved for physical breakdown.
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="minkmembrane",
                     description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)
    for name in ("simulate", "verify", "verify-conformal", "decay-fit",
                 "sweep-epsilon", "compactified-compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output artifact path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if name == "simulate":
            p.add_argument("--dump-field", default=None,
                           help="write the final field snapshot CSV here")
        if name == "decay-fit":
            p.add_argument("--csv", default=None,
                           help="norm CSV produced by simulate")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        handlers = {
            "simulate": lambda: cmd_simulate(cfg, args.out, args.dump_field),
            "verify": lambda: cmd_verify(cfg, args.out),
            "verify-conformal": lambda: cmd_verify_conformal(cfg, args.out),
            "decay-fit": lambda: cmd_decay_fit(cfg, args.csv, args.out),
            "sweep-epsilon": lambda: cmd_sweep_epsilon(cfg, args.out),
            "compactified-compare":
                lambda: cmd_compactified_compare(cfg, args.out),
        }
        return handlers[args.command]()
    except (MinkMembraneError, ValueError, OSError) as err:
        return _fail(str(err))


if __name__ == "__main__":
    raise SystemExit(main())
