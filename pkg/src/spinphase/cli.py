"""Command-line interface: batch runs driven by a JSON config file.

Subcommands: evolve, compare, limit-scan, kernel, symbol.  Every run
echoes its resolved configuration to <out>/resolved_config.json and writes
deterministic CSV files (17 significant digits), so identical configs give
byte-identical outputs.  Exit codes: 0 success, 1 validation error,
2 tolerance exceeded, 3 numerical failure.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as la

from . import bopp, dynamics, sphere_ops, sw_transform
from .su2_algebra import SpinContext, spin_matrices

_DEFAULT_TOLERANCE = {
    "evolve": 1e-8,
    "compare": 1e-8,
    "limit-scan": 0.2,
    "kernel": 0.0,
    "symbol": 0.0,
}

_ALLOWED_KEYS = {
    "evolve": {"spin", "sigma", "hamiltonian", "bath", "initial", "time",
               "grid", "outputs", "tolerance", "seed"},
    "compare": {"spin", "sigma", "hamiltonian", "bath", "initial", "time",
                "outputs", "tolerance", "seed"},
    "limit-scan": {"scan", "sigma", "field", "xi", "gamma", "temperature",
                   "outputs", "tolerance", "seed"},
    "kernel": {"spin", "sigma", "grid", "outputs", "tolerance", "seed"},
    "symbol": {"spin", "sigma", "operator", "grid", "outputs", "tolerance", "seed"},
}


def _fmt(x):
    return f"{x:.17g}"


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ValueError("config root must be a JSON object")
    return cfg


def _validate_keys(cfg, command):
    allowed = _ALLOWED_KEYS[command]
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ValueError(f"unknown config keys for {command}: {', '.join(unknown)}")


def _context(cfg):
    spin = cfg.get("spin")
    if not isinstance(spin, dict) or "twice_s" not in spin:
        raise ValueError('config needs "spin": {"twice_s": <int>}')
    return SpinContext(spin["twice_s"])


def _sigma(cfg):
    return sw_transform.validate_sigma(cfg.get("sigma", 0.0))


def _parse_coeff(obj):
    if isinstance(obj, list):
        if len(obj) != 2:
            raise ValueError(f"complex coefficient must be [re, im], got {obj!r}")
        return complex(obj[0], obj[1])
    return complex(obj)


def _parse_expression(obj):
    if not isinstance(obj, list):
        raise ValueError("expression must be a list of [coeff, word] pairs")
    expr = []
    for item in obj:
        if not (isinstance(item, list) and len(item) == 2):
            raise ValueError(f"expression term {item!r} is not [coeff, word]")
        expr.append((_parse_coeff(item[0]), tuple(item[1])))
    return bopp.validate_expression(expr)


def _hamiltonian(cfg):
    """Returns ("expression", expr) or ("quadratic", QuadraticHamiltonian)."""
    h = cfg.get("hamiltonian")
    if not isinstance(h, dict):
        raise ValueError('config needs a "hamiltonian" section')
    if "expression" in h:
        return "expression", _parse_expression(h["expression"])
    if "quadratic" in h:
        q = h["quadratic"]
        qh = dynamics.QuadraticHamiltonian(
            np.asarray(q.get("d", np.zeros((3, 3))), dtype=float),
            np.asarray(q.get("b", np.zeros(3)), dtype=float),
        )
        return "quadratic", qh
    raise ValueError('hamiltonian needs "expression" or "quadratic"')


def _hamiltonian_expression(cfg):
    kind, payload = _hamiltonian(cfg)
    return payload.to_expression() if kind == "quadratic" else payload


def _bath(cfg):
    b = cfg.get("bath")
    if b is None:
        return None
    return dynamics.BathSpec(
        coupling=tuple(_parse_expression(b.get("coupling", []))),
        gamma=float(b.get("gamma", 0.0)),
        temperature=float(b.get("temperature", 1.0)),
    )


def _initial_density(cfg, ctx):
    init = cfg.get("initial")
    if not isinstance(init, dict):
        raise ValueError('config needs an "initial" section')
    if "coherent" in init:
        c = init["coherent"]
        return dynamics.coherent_state(ctx, float(c["theta"]), float(c.get("phi", 0.0)))
    if init.get("mixed"):
        return np.eye(ctx.hilbert_dim, dtype=complex) / ctx.hilbert_dim
    if "matrix_file" in init:
        rho = np.load(init["matrix_file"])
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (ctx.hilbert_dim, ctx.hilbert_dim):
            raise ValueError(f"initial matrix shape {rho.shape} does not match 2S+1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("initial matrix must be Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-8:
            raise ValueError("initial matrix must have unit trace")
        return rho
    raise ValueError('initial needs "coherent", "mixed" or "matrix_file"')


def _time_block(cfg):
    t = cfg.get("time")
    if not isinstance(t, dict):
        raise ValueError('config needs a "time" section')
    t_end = float(t.get("t_end", 1.0))
    dt = float(t.get("dt", 0.01))
    method = t.get("method", "rk4")
    if method not in ("rk4", "expm"):
        raise ValueError(f'time method must be "rk4" or "expm", got {method!r}')
    if t_end <= 0 or dt <= 0:
        raise ValueError("t_end and dt must be positive")
    return t_end, dt, method


def _grid_band(cfg, ctx):
    band = cfg.get("grid", {}).get("band_limit", ctx.band_limit)
    if band < ctx.band_limit:
        raise ValueError(
            f"grid band_limit {band} is below the symbol band {ctx.band_limit}")
    return int(band)


def _pad_coefficients(c, band):
    out = np.zeros(sphere_ops.num_coefficients(band), dtype=complex)
    out[: c.size] = c
    return out


def _out_path(out_dir, cfg, key, default):
    name = cfg.get("outputs", {}).get(key, default)
    return Path(out_dir) / name


def _cmd_evolve(cfg, out_dir, tolerance, rng):
    ctx = _context(cfg)
    sigma = _sigma(cfg)
    bath = _bath(cfg)
    kind, payload = _hamiltonian(cfg)
    if bath is not None:
        h_expr = payload.to_expression() if kind == "quadratic" else payload
        gen = dynamics.qfp_generator(h_expr, bath, sigma, ctx)
        print(f"validity ratio gamma/(S T) = {bath.validity_ratio(ctx):.6g}",
              file=sys.stderr)
    elif kind == "quadratic":
        gen = dynamics.quadratic_generator(payload, sigma, ctx)
    else:
        gen = dynamics.unitary_generator(payload, sigma, ctx)
    rho0 = _initial_density(cfg, ctx)
    c0 = sw_transform.operator_to_symbol(rho0, sigma, ctx)
    t_end, dt, method = _time_block(cfg)
    if "grid" in cfg:
        band = _grid_band(cfg, ctx)  # reject inconsistent bands up front
    result = dynamics.integrate(gen, c0, t_end, dt, method, ctx, sigma, "symbol")
    dynamics.write_trajectory_csv(_out_path(out_dir, cfg, "trajectory",
                                            "trajectory.csv"), result)
    if "grid" in cfg.get("outputs", {}):
        band = _grid_band(cfg, ctx)
        grid, synthesize, _, _ = sphere_ops.grid_synthesis_analysis(band)
        values = synthesize(_pad_coefficients(result.states[-1], band))
        sphere_ops.write_grid_csv(_out_path(out_dir, cfg, "grid", "grid.csv"),
                                  grid, values)
    drift = float(np.max(np.abs(result.trace - result.trace[0])))
    reality = float(np.max(np.abs(
        sphere_ops.apply_conjugation(result.states[-1]) - result.states[-1])))
    print(f"trace drift = {drift:.6g}", file=sys.stderr)
    print(f"reality residual = {reality:.6g}", file=sys.stderr)
    # the exact flow preserves both identically, so either one blowing past
    # the tolerance means the integration is not to be trusted
    if drift > tolerance or reality > tolerance:
        print(f"conservation violated: trace drift {drift:.6g}, reality "
              f"residual {reality:.6g}, tolerance {tolerance:.6g}",
              file=sys.stderr)
        return 2
    return 0


def _cmd_compare(cfg, out_dir, tolerance, rng):
    ctx = _context(cfg)
    if ctx.hilbert_dim > 64:
        raise ValueError("compare oracle is limited to 2S+1 <= 64")
    sigma = _sigma(cfg)
    bath = _bath(cfg)
    if bath is None:
        raise ValueError('compare needs a "bath" section')
    h_expr = _hamiltonian_expression(cfg)
    h_mat = bopp.expression_to_matrix(h_expr, ctx)
    f_mat = bopp.expression_to_matrix(bath.coupling, ctx)
    rho0 = _initial_density(cfg, ctx)
    t_end, dt, _ = _time_block(cfg)
    liou = dynamics.master_liouvillian(h_mat, f_mat, bath.gamma, bath.temperature)
    oracle = dynamics.integrate(liou, dynamics.vec_density(rho0), t_end, dt,
                                "expm", ctx, kind="density")
    gen = dynamics.qfp_generator(h_expr, bath, sigma, ctx)
    c0 = sw_transform.operator_to_symbol(rho0, sigma, ctx)
    phase = dynamics.integrate(gen, c0, t_end, dt, "expm", ctx, sigma, "symbol")
    devs = np.empty(oracle.times.size)
    for i in range(oracle.times.size):
        c_oracle = sw_transform.operator_to_symbol(
            dynamics.unvec_density(oracle.states[i]), sigma, ctx)
        devs[i] = np.max(np.abs(c_oracle - phase.states[i]))
    path = _out_path(out_dir, cfg, "comparison", "compare.csv")
    lines = ["t,deviation"]
    for t, d in zip(oracle.times, devs):
        lines.append(f"{_fmt(t)},{_fmt(d)}")
    path.write_text("\n".join(lines) + "\n")
    worst = float(np.max(devs))
    print(f"max deviation = {worst:.6g}")
    if worst > tolerance:
        print(f"deviation {worst:.6g} exceeds tolerance {tolerance:.6g}",
              file=sys.stderr)
        return 2
    return 0


def _cmd_limit_scan(cfg, out_dir, tolerance, rng):
    scan = cfg.get("scan")
    if not isinstance(scan, dict):
        raise ValueError('config needs a "scan" section')
    mode = scan.get("mode", "bilinear")
    twice_s_values = scan.get("twice_s_values")
    if not twice_s_values:
        raise ValueError('scan needs "twice_s_values"')
    l_test = int(scan.get("l_test", 3))
    sigma = _sigma(cfg)
    result = dynamics.classical_limit_scan(
        mode, twice_s_values, sigma, l_test,
        b=cfg.get("field"), xi=cfg.get("xi"),
        gamma=cfg.get("gamma"), temperature=cfg.get("temperature"))
    path = _out_path(out_dir, cfg, "scan", "scan.csv")
    lines = ["S,deviation"]
    for s, d in zip(result["s_values"], result["deviations"]):
        lines.append(f"{_fmt(s)},{_fmt(d)}")
    path.write_text("\n".join(lines) + "\n")
    slope = result["slope"]
    print(f"slope = {slope:.6f}")
    expected = scan.get("expected_slope")
    if expected is not None:
        if math.isnan(slope):
            if np.max(result["deviations"]) > 1e-12:
                print("slope undefined with non-vanishing deviations",
                      file=sys.stderr)
                return 2
        elif abs(slope - float(expected)) > tolerance:
            print(f"slope {slope:.4f} outside {expected} +- {tolerance}",
                  file=sys.stderr)
            return 2
    return 0


def _cmd_kernel(cfg, out_dir, tolerance, rng):
    ctx = _context(cfg)
    sigma = _sigma(cfg)
    band = int(cfg.get("grid", {}).get("band_limit", ctx.band_limit))
    grid = sphere_ops.make_grid(band)
    path = _out_path(out_dir, cfg, "kernel", "kernel.csv")
    lines = ["theta,phi,row,col,value_re,value_im"]
    for th in grid.thetas:
        for ph in grid.phis:
            delta = sw_transform.kernel_eval(ctx, sigma, th, ph)
            for r in range(ctx.hilbert_dim):
                for c in range(ctx.hilbert_dim):
                    v = delta[r, c]
                    lines.append(
                        f"{_fmt(th)},{_fmt(ph)},{r},{c},{_fmt(v.real)},{_fmt(v.imag)}")
    path.write_text("\n".join(lines) + "\n")
    return 0


def _cmd_symbol(cfg, out_dir, tolerance, rng):
    ctx = _context(cfg)
    sigma = _sigma(cfg)
    op_spec = cfg.get("operator")
    if not isinstance(op_spec, dict):
        raise ValueError('config needs an "operator" section')
    if "spin_component" in op_spec:
        k = int(op_spec["spin_component"])
        if k not in (1, 2, 3):
            raise ValueError("spin_component must be 1, 2 or 3")
        mat = spin_matrices(ctx)[k - 1]
    elif "expression" in op_spec:
        mat = bopp.expression_to_matrix(_parse_expression(op_spec["expression"]), ctx)
    elif op_spec.get("random_hermitian"):
        n = ctx.hilbert_dim
        raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        mat = (raw + raw.conj().T) / 2.0
    else:
        raise ValueError(
            'operator needs "spin_component", "expression" or "random_hermitian"')
    c = sw_transform.operator_to_symbol(mat, sigma, ctx)
    band = _grid_band(cfg, ctx)
    grid, synthesize, _, _ = sphere_ops.grid_synthesis_analysis(band)
    values = synthesize(_pad_coefficients(c, band))
    sphere_ops.write_grid_csv(_out_path(out_dir, cfg, "grid", "symbol.csv"),
                              grid, values)
    return 0


_COMMANDS = {
    "evolve": _cmd_evolve,
    "compare": _cmd_compare,
    "limit-scan": _cmd_limit_scan,
    "kernel": _cmd_kernel,
    "symbol": _cmd_symbol,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spinphase",
        description="Phase-space spin dynamics: evolution, oracle comparison, "
                    "classical-limit scans, kernel and symbol dumps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--tolerance", type=float, default=None,
                       help="override the command's tolerance")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for any randomized inputs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        _validate_keys(cfg, args.command)
        tolerance = args.tolerance
        if tolerance is None:
            tolerance = float(cfg.get("tolerance", _DEFAULT_TOLERANCE[args.command]))
        seed = args.seed
        if seed is None:
            seed = int(cfg.get("seed", 0))
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        resolved = dict(cfg)
        resolved["command"] = args.command
        resolved["tolerance"] = tolerance
        resolved["seed"] = seed
        (out_dir / "resolved_config.json").write_text(
            json.dumps(resolved, indent=2, sort_keys=True) + "\n")
        rng = np.random.default_rng(seed)
        return _COMMANDS[args.command](cfg, out_dir, tolerance, rng)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, FloatingPointError, la.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
