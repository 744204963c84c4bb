"""Batch front end.

Every command reads an optional JSON config, lets shorthand flags override
it, and writes deterministic artifacts into ``--out``: ``summary.json`` plus
CSV tables with 17 significant digits. Nothing time-dependent is recorded,
so a repeated run reproduces the files byte for byte.

Exit codes: 0 success, 1 failed verification or unexpected error,
2 invalid input (window or domain hypothesis), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import DomainError, NumericalFailure, WindowError
from .grid import RadialGrid

log = logging.getLogger("cordes_lab")

COMMANDS = (
    "exponents",
    "radial",
    "linear",
    "kernel",
    "norms",
    "perturb-zero",
    "perturb-domain",
    "verify",
)

# config keys and their types; CLI flags use the same names with '-' for '_'
FIELDS = {
    "N": int,
    "gamma": float,
    "p": float,
    "sigma": float,
    "t": float,
    "k": int,
    "k_max": int,
    "data": str,
    "operator": str,
    "m": int,
    "trials": int,
    "delta": float,
    "g": str,
    "map": str,
    "R": float,
    "max_iter": int,
    "tol": float,
    "per_octave": int,
    "quick": bool,
}


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    seed: int
    output_dir: str | None

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.config).encode()).hexdigest()

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "versions": {
                "package": __version__,
                "code_hash": code_hash(),
                "config_hash": self.config_hash,
            },
        }


def code_hash() -> str:
    root = Path(__file__).resolve().parent
    h = hashlib.sha256()
    for path in sorted(root.rglob("*.py")):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def fmt(x) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class Output:
    """Collects artifacts and writes them once at the end of a run."""

    def __init__(self, out_dir: str | None):
        self.dir = Path(out_dir) if out_dir else None
        self.files: dict[str, tuple] = {}

    def csv(self, name, header, rows):
        self.files[name] = ("csv", header, rows)

    def json(self, name, payload):
        self.files[name] = ("json", payload)

    def flush(self):
        if self.dir is None:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            item = self.files[name]
            path = self.dir / name
            if item[0] == "csv":
                write_csv(path, item[1], item[2])
            else:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(canonical_json(item[1]))


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise DomainError("config must be a JSON object")
    unknown = set(raw) - set(FIELDS) - {"seed"}
    if unknown:
        raise DomainError(f"unknown config fields: {sorted(unknown)}")
    return raw


def merged_config(args) -> tuple[dict, int]:
    cfg = load_config(args.config)
    for key, typ in FIELDS.items():
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key, typ in FIELDS.items():
        if key in cfg and cfg[key] is not None:
            cfg[key] = typ(cfg[key])
    seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
    cfg.pop("seed", None)
    return cfg, seed


def thread_cap() -> int:
    raw = os.environ.get("CORDES_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise DomainError(f"CORDES_LAB_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise DomainError("CORDES_LAB_THREADS must be >= 1")
    return n


def _params(cfg, need_sigma=False):
    from .operator_core import ProblemParams

    if "N" not in cfg or "gamma" not in cfg:
        raise DomainError("N and gamma are required")
    sigma = cfg.get("sigma")
    if need_sigma and sigma is None:
        raise WindowError("sigma is required for this command", "sigma given")
    return ProblemParams(cfg["N"], cfg["gamma"], cfg.get("p", 2.0), sigma, cfg.get("t"))


def _grid(cfg):
    return RadialGrid(per_octave=cfg.get("per_octave", 64))


def mode_rows(mode, residual=None):
    res = np.full(mode.grid.n, math.nan) if residual is None else residual
    d1 = mode.a_prime if mode.a_prime is not None else np.full(mode.grid.n, math.nan)
    d2 = mode.a_double_prime if mode.a_double_prime is not None else np.full(mode.grid.n, math.nan)
    return zip(mode.grid.r, mode.a, d1, d2, res)


MODE_HEADER = ("r", "a", "a_prime", "a_double_prime", "residual")


def pointwise_residual(k, params, mode, b, potential=None):
    from .linear_solver import mode_operator

    d2 = mode.grid.derivative(mode.a_prime)
    return mode_operator(k, params.N, params.gamma, mode.grid.r, mode.a, mode.a_prime, d2, potential) - b


# --- commands ---------------------------------------------------------------


def cmd_exponents(cfg, seed, out: Output):
    from .operator_core import (
        Case,
        cordes_ratio,
        critical_exponent,
        effective_dimension,
        indicial_roots,
        mode_eigenvalue,
        sigma_window,
    )

    params = _params(cfg)
    N, g = params.N, params.gamma
    k_max = cfg.get("k_max", 4)
    windows = {}
    for case in Case:
        try:
            windows[case.name.lower()] = list(sigma_window(case, N, g))
        except WindowError:
            windows[case.name.lower()] = None
    roots = []
    for k in range(k_max + 1):
        pair = indicial_roots(k, params)
        roots.append({"k": k, "lambda": mode_eigenvalue(k, N), "beta_plus": pair.beta_plus, "beta_minus": pair.beta_minus})
    ratio = cordes_ratio(N, g)
    return {
        "p_crit": critical_exponent(N, g),
        "N_eff": effective_dimension(N, g),
        "cordes_ratio": ratio,
        "cordes_condition": ratio > N - 1,
        "sobolev_exponent": (N + 2) / (N - 2),
        "indicial": roots,
        "sigma_windows": windows,
    }


def radial_table(profile, n: int = 1000):
    """(r, w, w', w'') at r = i/n, i = 0..n; the origin row uses the series."""
    from .radial_solver import evaluate_w

    r = np.arange(1, n + 1) / n
    w, dw, d2w = evaluate_w(profile, r)
    raw = profile.raw
    a = 2.0 / (profile.params.p - 1)
    d2_0 = 2 * raw.c2 * raw.R0 ** (a + 2)
    rows = [(0.0, profile.w0, 0.0, d2_0)]
    rows += list(zip(r, w, dw, d2w))
    return rows


def cmd_radial(cfg, seed, out: Output):
    from .radial_solver import evaluate_w, ode_residual, solve_radial

    params = _params(cfg)
    profile = solve_radial(params)
    rows = radial_table(profile)
    out.csv("radial.csv", ("r", "w", "w_prime", "w_double_prime"), rows)
    r = np.linspace(0.003, 0.997, 995)
    h = 1e-3
    w, dw, _ = evaluate_w(profile, r)
    d = [evaluate_w(profile, r + s * h)[1] for s in (-2, -1, 1, 2)]
    d2 = (d[0] - 8 * d[1] + 8 * d[2] - d[3]) / (12 * h)
    res = np.max(np.abs(ode_residual(profile, r, w, dw, d2))) / max(1.0, profile.w0**params.p)
    return {
        "R0": profile.raw.R0,
        "w0": profile.w0,
        "w_prime_at_one": profile.w_prime_at_one,
        "residual_fd": float(res),
        "monotone": bool(np.all(profile.w_prime[1:] < 0)),
    }


def _linear_data(cfg, params, grid, k):
    kind = cfg.get("data", "manufactured")
    r = grid.r
    if kind == "manufactured":
        e = max(0.0, -params.require_sigma()) + 1
        a = r**e * (1 - r)
        da = e * r ** (e - 1) - (e + 1) * r**e
        d2a = e * (e - 1) * r ** (e - 2) - (e + 1) * e * r ** (e - 1)
        return kind, (a, da, d2a)
    if kind == "constant":
        return kind, np.ones(grid.n)
    if kind == "power":
        return kind, r ** (-(2 + params.require_sigma()))
    raise DomainError(f"unknown data kind {kind!r} (manufactured, constant, power)")


def cmd_linear(cfg, seed, out: Output):
    from .linear_solver import LinearizedSolver, mode_operator, solve_cordes_mode
    from .radial_solver import evaluate_w, solve_radial

    params = _params(cfg, need_sigma=True)
    grid = _grid(cfg)
    k = cfg.get("k", 0)
    operator = cfg.get("operator", "cordes")
    kind, data = _linear_data(cfg, params, grid, k)
    exact = None
    V = None
    if operator == "linearized":
        w = solve_radial(params)
        V = params.p * np.maximum(evaluate_w(w, grid.r)[0], 0) ** (params.p - 1)
    elif operator != "cordes":
        raise DomainError(f"unknown operator {operator!r} (cordes, linearized)")
    if isinstance(data, tuple):
        exact = data[0]
        b = mode_operator(k, params.N, params.gamma, grid.r, *data, V)
    else:
        b = data
    if operator == "cordes":
        rep = solve_cordes_mode(k, b, params, grid)
    else:
        rep = LinearizedSolver(w, params, grid).solve(k, b, with_norms=True)
    res = pointwise_residual(k, params, rep.solution, b, V)
    out.csv(f"modes/{k}.csv", MODE_HEADER, mode_rows(rep.solution, res))
    summary = {"operator": operator, "data": kind, **rep.summary()}
    if exact is not None:
        summary["max_error_vs_exact"] = float(np.max(np.abs(rep.solution.a - exact)))
    return summary


def cmd_kernel(cfg, seed, out: Output):
    from .linear_solver import kernel_check, radial_derivative_at_one
    from .radial_solver import solve_radial

    params = _params(cfg)
    w = solve_radial(params)
    k_max = cfg.get("k_max", 8)
    checks = [kernel_check(k, w, params) for k in range(k_max + 1)]
    out.csv("kernel.csv", ("k", "boundary_value", "trivial"), [(c.k, c.boundary_value, int(c.trivial)) for c in checks])
    wr1 = radial_derivative_at_one(w)
    return {
        "modes": [{"k": c.k, "boundary_value": c.boundary_value, "trivial": c.trivial} for c in checks],
        "all_trivial": all(c.trivial for c in checks),
        "w_r_at_one": wr1,
        "k1_structure_ok": wr1 != 0,
    }


def cmd_norms(cfg, seed, out: Output):
    from .harmonics import sphere_area
    from .linear_solver import operator_norm_probe, solve_cordes_mode
    from .weighted_spaces import ModeProfile, x_norm, y_norm

    params = _params(cfg, need_sigma=True)
    grid = _grid(cfg)
    sigma = params.sigma
    f = ModeProfile(0, grid, grid.r ** (-(2 + sigma)) * math.sqrt(sphere_area(params.N - 1)))
    ny = y_norm([f], params)
    payload = {"power_law_Y": ny.to_json()}
    try:
        rep = solve_cordes_mode(0, f.a, params, grid, with_norms=False)
        payload["power_law_solution_X"] = x_norm([rep.solution], params).to_json()
    except WindowError as exc:
        payload["power_law_solution_X"] = {"error": str(exc), "hypothesis": exc.hypothesis}
    summary = {"power_law_Y_norm": ny.norm_value, "power_law_profile_ratio": _profile_ratio(ny)}
    if cfg.get("trials", 0) > 0:
        levels = (cfg["m"],) if "m" in cfg else (2, 4, 8, 16)
        probe = operator_norm_probe(params, levels, cfg["trials"], seed, grid)
        summary["probe"] = probe.to_json()
    out.json("norms.json", payload)
    return summary


def _profile_ratio(report):
    vals = [v for _, v in report.per_annulus]
    return max(vals) / min(vals) if vals and min(vals) > 0 else math.inf


G_CATALOG = ("constant", "radial_bump", "axial")


def _g_modes(name, grid, N):
    from .perturbation.zero_order import g_constant, g_from_function, g_radial_bump

    if name == "constant":
        return g_constant(grid, N)
    if name == "radial_bump":
        return g_radial_bump(grid, N)
    if name == "axial":
        return g_from_function(grid, N, lambda r, c: 1 + r * c, 1)
    raise DomainError(f"unknown g {name!r}; choose from {G_CATALOG}")


def _fixed_point_outputs(out, phi, trace, params):
    out.csv("trace.csv", ("iter", "norm", "diff", "ratio", "residual"), trace.rows())
    for m in phi:
        out.csv(f"modes/{m.k}.csv", MODE_HEADER, mode_rows(m))


def cmd_perturb_zero(cfg, seed, out: Output):
    from .perturbation.zero_order import ZeroOrderConfig, fixed_point_zero_order
    from .radial_solver import solve_radial

    params = _params(cfg)
    grid = _grid(cfg)
    w = solve_radial(params)
    config = ZeroOrderConfig(
        params,
        cfg.get("delta", 0.01),
        _g_modes(cfg.get("g", "constant"), grid, params.N),
        R=cfg.get("R", 0.1),
        max_iter=cfg.get("max_iter", 60),
        tol=cfg.get("tol", 1e-7),
        m=cfg.get("m"),
        grid=grid,
    )
    phi, trace = fixed_point_zero_order(config, w)
    _fixed_point_outputs(out, phi, trace, params)
    if not trace.success:
        raise NumericalFailure(f"zero-order iteration did not meet tol: {trace.summary()}")
    return trace.summary()


def cmd_perturb_domain(cfg, seed, out: Output):
    from .perturbation.domain import DomainMap, fixed_point_domain
    from .radial_solver import solve_radial

    params = _params(cfg)
    grid = _grid(cfg)
    w = solve_radial(params)
    dmap = DomainMap(cfg.get("map", "dilation"), cfg.get("delta", 0.01), params.N)
    res = fixed_point_domain(
        dmap, params, w, grid, m=cfg.get("m"), max_iter=cfg.get("max_iter", 60), tol=cfg.get("tol", 1e-6)
    )
    _fixed_point_outputs(out, res.phi, res.trace, params)
    if not res.trace.success:
        raise NumericalFailure(f"domain iteration did not meet tol: {res.trace.summary()}")
    return {**res.trace.summary(), "certificates": res.certificates}


def cmd_verify(cfg, seed, out: Output):
    from .verify import run_suite

    results = run_suite(quick=cfg.get("quick", False))
    rows = [(r.name, "pass" if r.passed else "FAIL", r.detail) for r in results]
    out.files["verify.csv"] = ("text", rows)
    for name, status, detail in rows:
        print(f"{status:4s}  {name}  {detail}")
    return {
        "checks": [{"name": n, "status": s, "detail": d} for n, s, d in rows],
        "all_passed": all(r.passed for r in results),
    }


HANDLERS = {
    "exponents": cmd_exponents,
    "radial": cmd_radial,
    "linear": cmd_linear,
    "kernel": cmd_kernel,
    "norms": cmd_norms,
    "perturb-zero": cmd_perturb_zero,
    "perturb-domain": cmd_perturb_domain,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cordes-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
        for key, typ in FIELDS.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True)
            else:
                sp.add_argument(flag, dest=key, type=typ)
    return parser


def _write_text_files(out: Output):
    """verify.csv holds strings, so it bypasses the numeric CSV writer."""
    item = out.files.pop("verify.csv", None)
    if item is None or out.dir is None:
        return
    out.dir.mkdir(parents=True, exist_ok=True)
    lines = ["check,status,detail"] + [",".join(f'"{c}"' for c in row) for row in item[1]]
    (out.dir / "verify.csv").write_text("\n".join(lines) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = Output(args.out)
    try:
        cfg, seed = merged_config(args)
        manifest = RunManifest(args.command, cfg, seed, args.out)
        with threadpool_limits(limits=thread_cap()):
            result = HANDLERS[args.command](cfg, seed, out)
        status = 0
        if args.command == "verify" and not result["all_passed"]:
            status = 1
        payload = {"status": "ok" if status == 0 else "failed", "manifest": manifest.to_json(), "result": result}
    except WindowError as exc:
        status, payload = 2, _error("window", exc, getattr(exc, "hypothesis", None))
    except (DomainError, ValueError) as exc:
        status, payload = 2, _error("invalid_input", exc)
    except NumericalFailure as exc:
        status, payload = 3, _error("numerical_failure", exc)
    except Exception as exc:  # noqa: BLE001 - every failure path must emit JSON
        status, payload = 1, _error("unexpected", exc)
    out.json("summary.json", payload)
    _write_text_files(out)
    out.flush()
    if args.out is None or status != 0:
        sys.stdout.write(canonical_json(payload))
    return status


def _error(kind, exc, hypothesis=None):
    err = {"kind": kind, "type": type(exc).__name__, "message": str(exc)}
    if hypothesis:
        err["hypothesis"] = hypothesis
    return {"status": "error", "error": err}


if __name__ == "__main__":
    sys.exit(main())
