"""Command line front door: ``mbrh <subcommand> --config run.yaml --out dir``.

Exit status: 0 success, 2 configuration error, 3 numerical abort, 4 I/O error.
"""

from __future__ import annotations

import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from mbrh import __version__
from mbrh.broadening import BroadeningTransform, ProfileError, make_profile
from mbrh.config import ConfigError, RunConfig
from mbrh.estimators import sweep
from mbrh.io import read_csv, write_csv, write_json
from mbrh.oracle import OracleError, SimGrid, compare_fields, integrate_mb
from mbrh.phase import PhaseField, level_line, stationary_points
from mbrh.rhsolver import RHError, SolverConfig, build_instance
from mbrh.spectral import ScatteringData, endpoint_from_boundary

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
SUBCOMMANDS = ("spectrum", "phase", "solve", "oracle", "compare", "plotdata")
log = logging.getLogger("mbrh")


class NumericalAbort(RuntimeError):
    """Raised after partial results and diagnostics have been written."""


class _Context:
    """Validated inputs shared by all subcommands."""

    def __init__(self, cfg: RunConfig, out: Path, threads: int, seed: int):
        self.cfg, self.out, self.threads, self.seed = cfg, out, threads, seed
        b = cfg["boundary"]
        try:
            self.profile = make_profile(cfg["broadening"])
        except (ProfileError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"broadening: {exc}") from exc
        self.transform = BroadeningTransform(self.profile)
        self.data = endpoint_from_boundary(float(b["A0"]), float(b["omega0"]), self.transform)
        self.scat = ScatteringData(self.data)
        s = cfg["solver"]
        self.solver = SolverConfig(nodes_per_piece=int(s["nodes_per_piece"]),
                                   max_lens_radius=float(s["truncation_radius"]))
        g = cfg["grid"]
        self.T, self.L = float(g["T"]), float(g["L"])
        self.nt, self.nx, self.nlambda = int(g["nt"]), int(g["nx"]), int(g["nlambda"])

    def solve_points(self):
        t = self.T * np.arange(1, self.nt + 1) / (self.nt + 1)
        x = self.L * np.arange(1, self.nx + 1) / (self.nx + 1)
        tt, xx = np.meshgrid(t, x, indexing="ij")
        return tt.ravel(), xx.ravel()

    def base_diagnostics(self, command: str) -> dict:
        return {"command": command, "version": __version__, "config_fingerprint": self.cfg.fingerprint,
                "seed": self.seed, "threads": self.threads, "status": "ok", "checks": {}}


def _check(diag: dict, name: str, value: float, tol: float) -> None:
    diag["checks"][name] = {"value": value, "tolerance": tol, "pass": bool(value <= tol)}


def _field_rows(t, x, E):
    return ([a, b, e.real, e.imag, abs(e)] for a, b, e in zip(t, x, E))


FIELD_COLUMNS = ["t", "x", "re_E", "im_E", "abs_E"]


# -- subcommands ------------------------------------------------------------------------


def cmd_spectrum(ctx: _Context) -> None:
    sp = ctx.cfg["spectrum"]
    lam = np.linspace(float(sp["lambda_min"]), float(sp["lambda_max"]), int(sp["n"]))
    scat = ctx.scat
    r, a, b = scat.r(lam, "left"), scat.a(lam, "left"), scat.b(lam, "left")
    rows = ([l, ri.real, ri.imag, abs(ri), ai.real, ai.imag, bi.real, bi.imag]
            for l, ri, ai, bi in zip(lam, r, a, b))
    write_csv(ctx.out / "spectrum.csv", "spectrum",
              ["lambda", "re_r", "im_r", "abs_r", "re_a", "im_a", "re_b", "im_b"], rows)
    diag = ctx.base_diagnostics("spectrum")
    diag.update({"E": scat.E, "alpha0": ctx.data.alpha0, "beta0": ctx.data.beta0})
    _check(diag, "max_abs_r_minus_1", float(max(np.max(np.abs(r)) - 1.0, 0.0)), 1e-12)
    _check(diag, "max_a2_minus_b2_minus_1", float(np.max(np.abs(a * a - b * b - 1.0))), 1e-12)
    _check(diag, "max_abs_re_r", float(np.max(np.abs(r.real))), 1e-12)
    write_json(ctx.out / "spectrum_diagnostics.json", diag)


def cmd_phase(ctx: _Context) -> None:
    ph = ctx.cfg["phase"]
    xi = float(ph["xi"])
    pts = stationary_points(ctx.transform, xi)
    rec = {"xi": xi, "lambda_minus": None if pts is None else pts[0],
           "lambda_plus": None if pts is None else pts[1]}
    write_json(ctx.out / "stationary_points.json", rec)
    lam, nu = level_line(ctx.transform, xi, int(ph["resolution"]))
    write_csv(ctx.out / "level_line.csv", "level_line", ["lambda", "nu_upper", "nu_lower"],
              zip(lam, nu, -nu))
    diag = ctx.base_diagnostics("phase")
    Pi = ctx.transform.Pi(lam[nu > 0], nu[nu > 0])
    _check(diag, "level_line_residual", float(np.max(np.abs(Pi - 1.0 / xi), initial=0.0)), 1e-10)
    _check(diag, "level_line_height_excess", float(max(np.max(nu) - np.sqrt(xi), 0.0)), 0.0)
    write_json(ctx.out / "phase_diagnostics.json", diag)


def _sweep_with_flags(ctx: _Context, lam=None):
    t, x = ctx.solve_points()
    t0 = time.perf_counter()
    sol = sweep(ctx.scat, ctx.transform, ctx.solver, t, x, lam, ctx.threads, errors="record")
    failed = [d for d in sol.diagnostics if "error" in d]
    return sol, failed, time.perf_counter() - t0


def _probe_checks(ctx: _Context, diag: dict) -> None:
    """Jump residual and ``det M`` for one seeded ``t > x`` sample point."""
    t, x = ctx.solve_points()
    ahead = np.nonzero(t > x)[0]
    if ahead.size == 0:
        return
    rng = np.random.default_rng(ctx.seed)
    i = int(rng.choice(ahead))
    inst = build_instance(ctx.scat, ctx.transform, float(t[i]), float(x[i]), ctx.solver)
    inst.solve(ctx.solver.cond_limit)
    n = int(ctx.cfg["solver"]["probe_count"])
    z = rng.uniform(-4, 4, n) + 1j * rng.choice([-1, 1], n) * rng.uniform(0.3, 4, n)
    det = np.linalg.det(inst.evaluate_M(z))
    tol = ctx.cfg["solver"]["tolerances"]
    diag["probe"] = {"t": float(t[i]), "x": float(x[i]), "z": z}
    _check(diag, "det_minus_1", float(np.max(np.abs(det - 1.0))), float(tol["det"]))
    _check(diag, "jump_residual", inst.jump_residual(), float(tol["jump_residual"]))


def cmd_solve(ctx: _Context) -> None:
    s = ctx.cfg["solver"]
    lam = ctx.profile.quadrature(ctx.nlambda)[0] if s["densities"] else None
    sol, failed, secs = _sweep_with_flags(ctx, lam)
    write_csv(ctx.out / "field.csv", "field", FIELD_COLUMNS, _field_rows(sol.t, sol.x, sol.E))
    diag = ctx.base_diagnostics("solve")
    diag.update({"seconds": secs, "points": sol.diagnostics})
    if lam is not None:
        rows = ([a, b, l, f[0, 0].real, f[0, 1].real, f[0, 1].imag]
                for a, b, Fp in zip(sol.t, sol.x, sol.F) for l, f in zip(lam, Fp))
        write_csv(ctx.out / "density.csv", "density", ["t", "x", "lambda", "N", "re_rho", "im_rho"],
                  rows)
        ok = np.isfinite(sol.E)
        if np.any(ok):
            drift = np.abs(sol.N[ok] ** 2 + np.abs(sol.rho[ok]) ** 2 - 1.0)
            _check(diag, "normalization", float(drift.max()), float(s["tolerances"]["normalization"]))
    tol = s["tolerances"]
    quiet = sol.t <= sol.x  # ahead of the light front
    if np.any(quiet):
        _check(diag, "causality", float(np.max(np.abs(sol.E[quiet]))), float(tol["causality"]))
    if failed:
        diag["status"] = "partial"
        diag["failed_points"] = len(failed)
        write_json(ctx.out / "solve_diagnostics.json", diag)
        raise NumericalAbort(f"{len(failed)} of {sol.t.size} solves failed")
    try:
        _probe_checks(ctx, diag)
    except RHError as exc:
        diag["status"] = "partial"
        diag["probe_error"] = str(exc)
        write_json(ctx.out / "solve_diagnostics.json", diag)
        raise NumericalAbort(str(exc)) from exc
    write_json(ctx.out / "solve_diagnostics.json", diag)


def _run_oracle(ctx: _Context):
    o = ctx.cfg["oracle"]
    grid = SimGrid(ctx.T, ctx.L, float(o["delta"]), ctx.nlambda)
    return integrate_mb(grid, ctx.profile, ctx.data.A0, ctx.data.omega0,
                        iterations=int(o["iterations"]))


def cmd_oracle(ctx: _Context) -> None:
    diag = ctx.base_diagnostics("oracle")
    try:
        sol = _run_oracle(ctx)
    except OracleError as exc:
        diag.update({"status": "aborted", "error": str(exc)})
        write_json(ctx.out / "oracle_diagnostics.json", diag)
        raise NumericalAbort(str(exc)) from exc
    k = int(ctx.cfg["oracle"]["output_stride"])
    g = sol.grid
    tt, xx = np.meshgrid(g.t[::k], g.x[::k], indexing="ij")
    write_csv(ctx.out / "oracle_field.csv", "field", FIELD_COLUMNS,
              _field_rows(tt.ravel(), xx.ravel(), sol.E[::k, ::k].ravel()))
    t, x = ctx.solve_points()
    write_csv(ctx.out / "oracle_points.csv", "field", FIELD_COLUMNS,
              _field_rows(t, x, sol.interpolate(t, x)))
    diag.update(sol.diagnostics)
    ahead = np.subtract.outer(g.t, g.x) <= 0
    _check(diag, "causality", float(np.max(np.abs(sol.E[ahead]))), 1e-4)
    _check(diag, "normalization", sol.diagnostics["normalization_drift"],
           float(ctx.cfg["solver"]["tolerances"]["normalization"]))
    write_json(ctx.out / "oracle_diagnostics.json", diag)


def cmd_compare(ctx: _Context) -> None:
    diag = ctx.base_diagnostics("compare")
    sol, failed, secs = _sweep_with_flags(ctx)
    try:
        orc = _run_oracle(ctx)
    except OracleError as exc:
        diag.update({"status": "aborted", "error": str(exc)})
        write_json(ctx.out / "compare_diagnostics.json", diag)
        raise NumericalAbort(str(exc)) from exc
    ok = np.isfinite(sol.E)
    rep = compare_fields(orc, sol.t[ok], sol.x[ok], sol.E[ok])
    rows = ([r["t"], r["x"], r["E_rh"].real, r["E_rh"].imag, r["E_oracle"].real,
             r["E_oracle"].imag, r["abs_error"]] for r in rep["table"])
    write_csv(ctx.out / "compare.csv", "compare",
              ["t", "x", "re_E_rh", "im_E_rh", "re_E_oracle", "im_E_oracle", "abs_error"], rows)
    diag.update({"max_E": rep["max_E"], "rms_E": rep["rms_E"], "rh_seconds": secs,
                 "oracle": orc.diagnostics})
    if failed:
        diag.update({"status": "partial", "failed_points": len(failed)})
        write_json(ctx.out / "compare_diagnostics.json", diag)
        raise NumericalAbort(f"{len(failed)} RH solves failed")
    write_json(ctx.out / "compare_diagnostics.json", diag)


def cmd_plotdata(ctx: _Context) -> None:
    field = ctx.out / "field.csv"
    if not field.is_file():
        raise FileNotFoundError(f"no solve results in {ctx.out} (run 'solve' first)")
    _, cols = read_csv(field)
    write_csv(ctx.out / "plot_heatmap.csv", "heatmap", ["t", "x", "abs_E"],
              zip(cols["t"], cols["x"], cols["abs_E"]))
    dens = ctx.out / "density.csv"
    if dens.is_file():
        _, d = read_csv(dens)
        drift = np.abs(d["N"] ** 2 + d["re_rho"] ** 2 + d["im_rho"] ** 2 - 1.0)
        keys = np.stack([d["t"], d["x"]], 1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        worst = np.zeros(len(uniq))
        np.maximum.at(worst, inv.ravel(), drift)
        write_csv(ctx.out / "plot_drift.csv", "drift", ["t", "x", "max_drift"],
                  ((a, b, w) for (a, b), w in zip(uniq, worst)))
    pl = ctx.cfg["plot"]
    t, x = float(pl["t"]), float(pl["x"])
    inst = build_instance(ctx.scat, ctx.transform, t, x, ctx.solver)
    if hasattr(inst, "disc"):
        roles = np.array(inst.contour.roles())[inst.disc.node_piece]
        write_csv(ctx.out / "plot_contour.csv", "contour", ["piece", "role", "re", "im"],
                  ((int(p), str(r), z.real, z.imag)
                   for p, r, z in zip(inst.disc.node_piece, roles, inst.disc.nodes)))
    n, ext = int(pl["signature_n"]), float(pl["signature_extent"])
    ax = np.linspace(-ext, ext, n)
    re, im = np.meshgrid(ax, ax, indexing="ij")
    z = (re + 1j * im).ravel()
    phase = PhaseField(ctx.transform, t, x)
    sig = phase.signature(z)
    write_csv(ctx.out / "plot_signature.csv", "signature", ["re", "im", "sign"],
              zip(z.real, z.imag, sig))
    if phase.tau > 0 and phase.xi > 0:
        lam, nu = phase.level_line(resolution=int(ctx.cfg["phase"]["resolution"]))
        write_csv(ctx.out / "plot_level_line.csv", "level_line", ["lambda", "nu_upper", "nu_lower"],
                  zip(lam, nu, -nu))
    diag = ctx.base_diagnostics("plotdata")
    diag.update({"t": t, "x": x, "signature_points": int(z.size)})
    write_json(ctx.out / "plotdata_diagnostics.json", diag)


COMMANDS = {"spectrum": cmd_spectrum, "phase": cmd_phase, "solve": cmd_solve,
            "oracle": cmd_oracle, "compare": cmd_compare, "plotdata": cmd_plotdata}


def run(subcommand: str, config: str | Path | None = None, out: str | Path | None = None,
        threads: int = 1, seed: int = 0, verbose: bool = False) -> int:
    """Run one subcommand and return its exit status."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if subcommand not in COMMANDS:
        log.error("unknown subcommand %s", subcommand)
        return EXIT_CONFIG
    try:
        cfg = RunConfig.load(config)
        if threads < 1:
            raise ConfigError("--threads must be positive")
        out_dir = Path(out if out is not None else cfg["outputs"]["directory"])
        ctx = _Context(cfg, out_dir, threads, seed)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        if subcommand == "plotdata" and not out_dir.is_dir():
            raise FileNotFoundError(f"output directory {out_dir} does not exist")
        out_dir.mkdir(parents=True, exist_ok=True)
        log.info("running %s into %s", subcommand, out_dir)
        COMMANDS[subcommand](ctx)
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except NumericalAbort as exc:
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERIC
    except (RHError, OracleError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical abort: %s", exc)
        try:
            write_json(out_dir / f"{subcommand}_diagnostics.json",
                       dict(ctx.base_diagnostics(subcommand), status="aborted", error=str(exc)))
        except OSError:
            pass
        return EXIT_NUMERIC
    return EXIT_OK


def _common(f):
    f = click.option("--verbose", is_flag=True, help="Log progress.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True,
                     help="Seed for probe sampling.")(f)
    f = click.option("--threads", type=int, default=1, show_default=True,
                     help="Worker threads for the (t, x) sweep.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None,
                     help="Output directory (default: outputs.directory).")(f)
    f = click.option("--config", type=click.Path(dir_okay=False), default=None,
                     help="YAML run configuration.")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="mbrh")
def main():
    """RH-based Maxwell-Bloch solver and its direct-integration oracle."""


def _register(name: str, doc: str):
    @main.command(name, help=doc)
    @_common
    def _cmd(config, out, threads, seed, verbose):
        sys.exit(run(name, config, out, threads, seed, verbose))

    return _cmd


_register("spectrum", "Write r, a, b on a real grid (spectrum.csv).")
_register("phase", "Write stationary points and the level line for phase.xi.")
_register("solve", "Solve the RH problem on the (t, x) grid (field.csv, density.csv).")
_register("oracle", "Run the direct integrator (oracle_field.csv, oracle_points.csv).")
_register("compare", "Compare RH and oracle fields on the solve grid (compare.csv).")
_register("plotdata", "Export plot tables from a previous solve directory.")


if __name__ == "__main__":  # pragma: no cover
    main()
