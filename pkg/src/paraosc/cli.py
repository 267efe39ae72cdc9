"""Command-line front end: writes plot-ready CSV figure data plus a manifest.json.

All times given on the command line are drive phases Omega (t - t0).
Exit codes: 0 success, 2 usage error (nothing written), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from paraosc import __version__
from paraosc.auxiliary import SingularEvaluation, characteristic_length, evolve_modes, joint_ground_density
from paraosc.gaussian import GaussianDomainError, entropy_series, wigner_grid
from paraosc.general import (
    AuxiliaryMatrix,
    ConstraintError,
    QuadraticHamiltonian,
    evolve_general,
    joint_ground_density_general,
    normal_mode_init,
)
from paraosc.integrator import IntegrationError, IntegratorConfig, wronskian
from paraosc.mathieu import mode_line, stability_chart
from paraosc.output import manifest_hash, write_csv, write_manifest
from paraosc.scenario import DriveParameters, Mode, ScenarioError

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (IntegrationError, ConstraintError, GaussianDomainError, SingularEvaluation, FloatingPointError)


class UsageError(Exception):
    pass


def _range(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise argparse.ArgumentTypeError(f"need finite lo < hi, got {text!r}")
    return [lo, hi]


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _global_flags(parser, default):
    parser.add_argument("--config", type=Path, default=default, help="scenario JSON file")
    parser.add_argument("--out", type=Path, default=default, help="output directory (default .)")
    parser.add_argument("--rel-tol", type=float, default=default, help="adaptive tolerance (default 1e-10)")
    parser.add_argument("--fixed-step", type=float, default=default,
                        help="use fixed-step RK4 with this step (deterministic fixtures)")


def _scenario_flags(parser):
    parser.add_argument("--omega", type=float)
    parser.add_argument("--g", type=float)
    parser.add_argument("--delta-g", type=float)
    parser.add_argument("--delta-ratio", type=float, help="tie the drive amplitude to g: delta_g = r * g")
    parser.add_argument("--Omega", type=float)
    parser.add_argument("--t0", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paraosc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"paraosc {__version__}")
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)

    p = sub.add_parser("stability-chart", parents=[common], help="Mathieu stability chart (chart.csv)")
    p.add_argument("--a", type=_range, default=[-1.0, 10.0], help="a range lo:hi")
    p.add_argument("--b", type=_range, default=[-3.0, 3.0], help="b range lo:hi")
    p.add_argument("--res", type=int, default=101, help="grid points per axis")

    p = sub.add_parser("mode-line", parents=[common], help="Floquet exponents along g (mode_line.csv)")
    _scenario_flags(p)
    p.add_argument("--g-range", type=_range, default=[0.3, 0.5])
    p.add_argument("--n", type=int, default=201)

    p = sub.add_parser("entropy", parents=[common], help="linear/von Neumann entropy vs time")
    _scenario_flags(p)
    p.add_argument("--t-max", type=float, default=50.0, help="final drive phase Omega t")
    p.add_argument("--samples", type=int, default=1001)

    p = sub.add_parser("wigner", parents=[common], help="reduced Wigner function grids")
    _scenario_flags(p)
    p.add_argument("--times", type=_floats, default=[0.0, 32.0, 50.0])
    p.add_argument("--q-range", type=_range, default=[-8.0, 8.0])
    p.add_argument("--p-range", type=_range, default=[-8.0, 8.0])
    p.add_argument("--res", type=int, default=400)

    p = sub.add_parser("density", parents=[common], help="joint ground-state density grids")
    _scenario_flags(p)
    p.add_argument("--times", type=_floats, default=[0.0, 32.0, 50.0])
    p.add_argument("--x-range", type=_range, default=[-8.0, 8.0])
    p.add_argument("--res", type=int, default=400)

    p = sub.add_parser("general-check", parents=[common],
                       help="general quadratic solver: constraint drift and dual-path check")
    _scenario_flags(p)
    p.add_argument("--periods", type=float, default=100.0)
    p.add_argument("--samples", type=int, default=1001)
    p.add_argument("--corrupt", type=float, default=None,
                   help="scale B_11 of the seed by this factor (negative test)")

    p = sub.add_parser("rerun", help="repeat the run recorded in a manifest.json")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS)
    return parser


SCENARIO_KEYS = ("omega", "g", "delta_g", "delta_ratio", "Omega", "t0")
_GLOBAL_DEFAULTS = {"config": None, "out": Path("."), "rel_tol": None, "fixed_step": None}


def _integrator(args) -> IntegratorConfig:
    if args.fixed_step is not None:
        if not args.fixed_step > 0:
            raise UsageError("--fixed-step must be > 0")
        return IntegratorConfig.fixed(args.fixed_step)
    tol = 1e-10 if args.rel_tol is None else args.rel_tol
    try:
        return IntegratorConfig(rel_tol=tol, abs_tol=tol)
    except ValueError as exc:
        raise UsageError(f"--rel-tol: {exc}")


def _scenario(args) -> tuple:
    """Resolve DriveParameters from defaults, config file and flags; returns (params, delta_ratio)."""
    if getattr(args, "resolved", None) is not None:
        return args.resolved
    data = {"omega": 1.0, "g": 0.4, "Omega": 1.0, "t0": 0.0}
    from_config = {}
    if args.config is not None:
        try:
            from_config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: {exc}")
        if not isinstance(from_config, dict):
            raise UsageError("--config: expected a JSON object")
        data.update(from_config)
    for key in ("omega", "g", "Omega", "t0"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    ratio = getattr(args, "delta_ratio", None)
    if getattr(args, "delta_g", None) is not None:
        if ratio is not None:
            raise UsageError("--delta-g and --delta-ratio are mutually exclusive")
        data["delta_g"] = args.delta_g
    elif ratio is not None:
        if not ratio >= 0:
            raise UsageError("--delta-ratio must be >= 0")
        data["delta_g"] = ratio * data["g"] if isinstance(data["g"], (int, float)) else 0.0
    elif "delta_g" not in from_config:
        ratio = 0.1
        data["delta_g"] = ratio * data["g"] if isinstance(data["g"], (int, float)) else 0.0
    try:
        params = DriveParameters.from_dict(data)
    except ScenarioError as exc:
        raise UsageError(f"scenario {exc}")
    except TypeError as exc:
        raise UsageError(f"scenario: {exc}")
    return params, ratio


def _times(params: DriveParameters, phases):
    return params.t0 + np.asarray(phases, dtype=float) / params.Omega


def _tag(value: float) -> str:
    return format(value, "g").replace("-", "m").replace(".", "p")


def _settings(args, exclude=()) -> dict:
    skip = {"command", "config", "out", "rel_tol", "fixed_step", "resolved", *SCENARIO_KEYS, *exclude}
    out = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        out[key] = value
    return out


class Run:
    """Collects outputs in memory; files are written only after the command succeeded."""

    def __init__(self, args, params=None, ratio=None):
        self.args = args
        self.cfg = _integrator(args)
        self.manifest = {
            "subcommand": args.command,
            "params": params.to_dict() if params else None,
            "delta_ratio": ratio,
            "integrator": {
                "method": self.cfg.method,
                "rel_tol": self.cfg.rel_tol,
                "abs_tol": self.cfg.abs_tol,
                "max_step": self.cfg.max_step,
                "initial_step": self.cfg.initial_step,
            },
            "settings": _settings(args),
            "out": str(args.out),
            "version": __version__,
        }
        self.files = []
        self.summary = {}

    @property
    def hash(self):
        return manifest_hash(self.manifest)

    def comments(self, extra=()):
        lines = [f"paraosc {__version__} {self.manifest['subcommand']}", f"manifest_sha256={self.hash}"]
        if self.manifest["params"]:
            p = self.manifest["params"]
            lines.append("params " + " ".join(f"{k}={format(v, '.17g')}" for k, v in p.items()))
        return lines + list(extra)

    def add(self, name, columns, rows, extra=()):
        self.files.append((name, columns, list(rows), self.comments(extra)))

    def commit(self):
        out = Path(self.args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, columns, rows, comments in self.files:
            write_csv(out / name, columns, rows, comments)
        manifest = dict(self.manifest)
        manifest["sha256"] = self.hash
        if self.summary:
            manifest["summary"] = self.summary
        write_manifest(out / "manifest.json", manifest)


def cmd_stability_chart(args):
    if args.res < 2:
        raise UsageError("--res must be >= 2")
    run = Run(args)
    chart = stability_chart(args.a, args.b, args.res, run.cfg)
    run.add("chart.csv", ["a", "b", "stable", "imF"], chart.rows())
    run.summary = {"stable_fraction": float(chart.stable.mean())}
    return run


def cmd_mode_line(args):
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    if args.g_range[0] < 0:
        raise UsageError("--g-range must start at g >= 0")
    params, ratio = _scenario(args)
    run = Run(args, params, ratio)
    line = mode_line(params, args.g_range, args.n, ratio, run.cfg)
    columns = ["g", "a_minus", "b_minus", "reF_minus", "imF_minus", "stable_minus",
               "a_plus", "b_plus", "reF_plus", "imF_plus", "stable_plus"]
    run.add("mode_line.csv", columns, line.rows(), ["exponents per unit canonical time tau = Omega t / 2"])
    run.summary = {
        "unstable_minus": [[float(a), float(b)] for a, b in line.unstable_intervals(Mode.MINUS)],
        "unstable_plus": [[float(a), float(b)] for a, b in line.unstable_intervals(Mode.PLUS)],
    }
    return run


def _check_samples(n):
    if n < 2:
        raise UsageError("--samples must be >= 2")


def cmd_entropy(args):
    _check_samples(args.samples)
    if not args.t_max > 0:
        raise UsageError("--t-max must be > 0")
    params, ratio = _scenario(args)
    run = Run(args, params, ratio)
    times = _times(params, np.linspace(0, args.t_max, args.samples))
    traj = evolve_modes(params, times[-1], run.cfg, times)
    tm, tp = traj[Mode.MINUS], traj[Mode.PLUS]
    series = entropy_series(tm, tp, times)
    vn = series.von_neumann
    run.add("entropy.csv", ["t", "L", "purity", "vN_entropy"],
            ((t, L, pu, s) for (t, L, pu), s in zip(series, vn)))
    wm = np.abs(wronskian(tm.b, tm.bdot) - 1j)
    wp = np.abs(wronskian(tp.b, tp.bdot) - 1j)
    rows = []
    for i, t in enumerate(times):
        rows.append((
            t, tm.b[i].real, tm.b[i].imag, tm.bdot[i].real, tm.bdot[i].imag,
            tp.b[i].real, tp.b[i].imag, tp.bdot[i].real, tp.bdot[i].imag,
            wm[i], wp[i], math.sqrt(2) * abs(tm.b[i]), math.sqrt(2) * abs(tp.b[i]),
        ))
    run.add("aux.csv", ["t", "reB_minus", "imB_minus", "reBdot_minus", "imBdot_minus",
                        "reB_plus", "imB_plus", "reBdot_plus", "imBdot_plus",
                        "wronskian_err_minus", "wronskian_err_plus", "l_minus", "l_plus"], rows)
    run.summary = {"L_max": float(series.linear.max()), "wronskian_err_max": float(max(wm.max(), wp.max()))}
    return run


def _check_res(res):
    if res < 2:
        raise UsageError("--res must be >= 2")


def _check_phases(phases):
    if not phases or min(phases) < 0:
        raise UsageError("--times must be non-negative drive phases")


def cmd_wigner(args):
    _check_res(args.res)
    _check_phases(args.times)
    params, ratio = _scenario(args)
    run = Run(args, params, ratio)
    phases = sorted(set(args.times))
    times = _times(params, phases)
    traj = evolve_modes(params, max(times[-1], params.t0 + 1e-9), run.cfg, times)
    areas = {}
    for phase, t in zip(phases, times):
        grid = wigner_grid(traj[Mode.MINUS], traj[Mode.PLUS], float(t), args.q_range, args.p_range, args.res)
        run.add(f"wigner_t{_tag(phase)}.csv", ["q", "p", "W"], grid.rows(),
                [f"Omega_t={format(phase, '.17g')} t={format(float(t), '.17g')}"])
        areas[format(phase, "g")] = {"support_area": grid.support_area(), "total": grid.total}
    run.summary = areas
    return run


def _density_moments(X1, X2, rho, cell):
    total = rho.sum() * cell
    m1 = (X1 * rho).sum() * cell / total
    m2 = (X2 * rho).sum() * cell / total
    c11 = ((X1 - m1) ** 2 * rho).sum() * cell / total
    c22 = ((X2 - m2) ** 2 * rho).sum() * cell / total
    c12 = ((X1 - m1) * (X2 - m2) * rho).sum() * cell / total
    ev = np.linalg.eigvalsh(np.array([[c11, c12], [c12, c22]]))
    return float(total), float(ev[-1]), float(ev[0])


def cmd_density(args):
    _check_res(args.res)
    _check_phases(args.times)
    params, ratio = _scenario(args)
    run = Run(args, params, ratio)
    phases = sorted(set(args.times))
    times = _times(params, phases)
    traj = evolve_modes(params, max(times[-1], params.t0 + 1e-9), run.cfg, times)
    x = np.linspace(args.x_range[0], args.x_range[1], args.res)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    cell = float((x[1] - x[0]) ** 2)
    summary_rows = []
    for phase, t in zip(phases, times):
        rho = joint_ground_density(traj[Mode.MINUS], traj[Mode.PLUS], X1, X2, float(t))
        run.add(f"density_t{_tag(phase)}.csv", ["x1", "x2", "density"],
                zip(X1.ravel(), X2.ravel(), rho.ravel()),
                [f"Omega_t={format(phase, '.17g')} t={format(float(t), '.17g')}"])
        total, major, minor = _density_moments(X1, X2, rho, cell)
        lm = characteristic_length(traj[Mode.MINUS], float(t))
        lp = characteristic_length(traj[Mode.PLUS], float(t))
        summary_rows.append((phase, t, total, major, minor, major / minor, lm, lp))
    run.add("density_summary.csv",
            ["Omega_t", "t", "total", "var_major", "var_minor", "stretch", "l_minus", "l_plus"], summary_rows)
    return run


def cmd_general_check(args):
    _check_samples(args.samples)
    if not args.periods > 0:
        raise UsageError("--periods must be > 0")
    if args.corrupt is not None and not math.isfinite(args.corrupt):
        raise UsageError("--corrupt must be finite")
    params, ratio = _scenario(args)
    run = Run(args, params, ratio)
    h = QuadraticHamiltonian.from_drive(params)
    init = normal_mode_init(params)
    if args.corrupt is not None:
        B = init.B.copy()
        B[0, 0] *= args.corrupt
        init = AuxiliaryMatrix.from_b(B, init.Bdot, init.t, h)
    t_end = params.t0 + args.periods * params.period
    check_t = params.t0 + 20.0 / params.Omega
    dens_t = params.t0 + 10.0 / params.Omega
    grid = np.linspace(params.t0, t_end, args.samples)
    times = np.unique(np.concatenate([grid, [t for t in (dens_t, check_t) if t <= t_end]]))
    gen = evolve_general(h, init, t_end, run.cfg, times)
    modes = evolve_modes(params, t_end, run.cfg, times)
    r = 1 / math.sqrt(2)
    rows, dual = [], 0.0
    for i, m in enumerate(gen.samples):
        bm, bp = modes[Mode.MINUS].b[i], modes[Mode.PLUS].b[i]
        composed = np.array([[r * bm, -r * bm], [r * bp, r * bp]])
        if m.t <= check_t + 1e-12:
            dual = max(dual, float(np.max(np.abs(m.B - composed))))
        rows.append((m.t, *(v for z in m.B.ravel() for v in (z.real, z.imag)), *gen.residuals[i]))
    run.add("general.csv", ["t", "reB11", "imB11", "reB12", "imB12", "reB21", "imB21", "reB22", "imB22",
                            "wc1_res", "wc2_res", "wc3_res"], rows)
    report = [("constraint_drift", float(gen.residuals.max()), 1e-8),
              ("dual_path_B_max_dev_to_Omega_t_20", dual, 1e-8)]
    if dens_t <= t_end:
        j = int(np.argmin(np.abs(times - dens_t)))
        d_gen = float(joint_ground_density_general(gen.samples[j], 0.5, -0.3))
        d_norm = float(joint_ground_density(modes[Mode.MINUS], modes[Mode.PLUS], 0.5, -0.3, float(times[j])))
        report.append(("dual_path_density_dev", abs(d_gen - d_norm), 1e-7))
    run.add("general_report.csv", ["metric", "value", "threshold", "pass"],
            ((i, v, thr, v <= thr) for i, (_, v, thr) in enumerate(report)),
            ["metric index: " + ", ".join(f"{i}={name}" for i, (name, _, _) in enumerate(report))])
    run.summary = {name: {"value": v, "threshold": thr, "pass": v <= thr} for name, v, thr in report}
    failed = [name for name, v, thr in report if not v <= thr]
    if failed:
        raise ConstraintError("general-check failed: " + ", ".join(failed))
    return run


COMMANDS = {
    "stability-chart": cmd_stability_chart,
    "mode-line": cmd_mode_line,
    "entropy": cmd_entropy,
    "wigner": cmd_wigner,
    "density": cmd_density,
    "general-check": cmd_general_check,
}


def _rerun_args(args):
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        command = manifest["subcommand"]
        settings = manifest["settings"]
        integ = manifest["integrator"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"manifest: {exc}")
    if command not in COMMANDS:
        raise UsageError(f"manifest: unknown subcommand {command!r}")
    ns = argparse.Namespace(command=command, config=None,
                            out=getattr(args, "out", Path(manifest.get("out", "."))),
                            rel_tol=None, fixed_step=None)
    if integ["method"] == "rk4":
        ns.fixed_step = integ["max_step"]
    else:
        ns.rel_tol = integ["rel_tol"]
    for key, value in settings.items():
        setattr(ns, key, value)
    if manifest.get("params"):
        try:
            params = DriveParameters.from_dict(manifest["params"])
        except (ScenarioError, TypeError) as exc:
            raise UsageError(f"manifest params: {exc}")
        ns.resolved = (params, manifest.get("delta_ratio"))
    return ns


RANGE_FLAGS = ("--a", "--b", "--g-range", "--q-range", "--p-range", "--x-range", "--times")


def _join_range_values(argv):
    """Glue `--b -1:1` into `--b=-1:1` so negative ranges are not taken for options."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in RANGE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1][1:2].isdigit():
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_range_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    for key, value in _GLOBAL_DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    try:
        if args.command == "rerun":
            args = _rerun_args(args)
        run = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"paraosc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"paraosc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    run.commit()
    return 0


if __name__ == "__main__":
    sys.exit(main())
