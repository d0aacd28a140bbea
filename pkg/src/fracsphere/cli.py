"""Command-line front end: reproducible simulation, spectrum, and check runs.

Subcommands:
  simulate  draw an initial isotropic field, evolve it spectrally, emit
            coefficients, synthesized maps, and a manifest
  spectrum  emit the per-degree spectrum report (theoretical, bound,
            empirical ensemble)
  verify    run the invariant suites and emit a machine-readable pass/fail
            report
  derive    apply the convolution-type derivative to a CSV trajectory

Configuration comes from a JSON file (--config); command-line flags override
config fields.  A manifest JSON produced by a previous run is also accepted
as --config (its embedded config is reused), which reproduces the outputs
byte for byte.  Exit codes: 0 ok, 1 config error, 2 numeric failure,
3 I/O error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .fields import (IsotropicSpectrum, SolutionParams, coordinate_change_estimate,
                     residual_check, sample_gaussian_field, solve_field)
from .serialize import (coeffs_to_csv, field_to_binary, spectrum_report_to_csv,
                        write_manifest)
from .special import InversionError
from .sphere import (HarmonicCoeffs, SphericalGrid, SphericalPoint, analyze,
                     eval_at_points, synthesize)
from .spectrum import build_report, empirical_cl, variance
from .symbols import BernsteinSymbol, SpectralSymbol, symbol_from_json
from .timechange import (PathExhaustedError, convolution_derivative, ltilde,
                         ltilde_mc)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """One run's full configuration; serialized into the manifest."""

    spectrum: dict = field(default_factory=lambda: {
        "type": "power_law", "amplitude": 1.0, "exponent": 4.0})
    phi: dict = field(default_factory=lambda: {"kind": "stable", "alpha": 0.5})
    psi: dict = field(default_factory=lambda: {"kind": "stable", "alpha": 0.5})
    gamma: float = 0.0
    t: list = field(default_factory=lambda: [1.0])
    lmax: int = 16
    n_theta: int | None = None
    n_phi: int | None = None
    ensemble: int = 100
    n: int = 20_000
    n_steps: int = 10_000
    seed: int = 0
    out: str = "out"
    threads: int = 0          # 0: use all available cores
    check: bool = False
    tolerances: dict = field(default_factory=dict)

    def effective_threads(self) -> int:
        import os
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    @staticmethod
    def load(path: str | None, overrides: dict) -> "RunConfig":
        data = {}
        if path is not None:
            with open(path) as fh:
                data = json.load(fh)
            if "config" in data and "outputs" in data:
                data = data["config"]          # manifest rerun
        unknown = set(data) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = RunConfig(**data)
        if isinstance(cfg.t, (int, float)):
            cfg.t = [float(cfg.t)]
        cfg.t = [float(v) for v in cfg.t]
        if cfg.lmax < 0 or cfg.ensemble < 0 or cfg.n < 1 or cfg.n_steps < 1:
            raise ConfigError("lmax/ensemble/n/n_steps out of range")
        return cfg

    def spectrum_obj(self) -> IsotropicSpectrum:
        s = self.spectrum
        if s.get("type") == "table":
            return IsotropicSpectrum.from_table(s["values"])
        return IsotropicSpectrum.power_law(float(s["amplitude"]),
                                           float(s["exponent"]))

    def phi_obj(self) -> BernsteinSymbol:
        sym = symbol_from_json(self.phi)
        if not isinstance(sym, BernsteinSymbol):
            raise ConfigError("phi must be a Bernstein symbol")
        return sym

    def psi_obj(self) -> SpectralSymbol:
        sym = symbol_from_json(self.psi)
        if isinstance(sym, BernsteinSymbol):
            return SpectralSymbol(bernstein=sym)
        return sym

    def grid(self) -> SphericalGrid:
        n_theta = self.n_theta or (self.lmax + 1)
        n_phi = self.n_phi or (2 * self.lmax + 1)
        return SphericalGrid(n_theta, n_phi)


def _tag(t: float) -> str:
    return ("%g" % t).replace(".", "p").replace("-", "m")


def cmd_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.spectrum_obj()
    phi, psi = cfg.phi_obj(), cfg.psi_obj()
    grid = cfg.grid()
    initial = sample_gaussian_field(spec, cfg.lmax, cfg.seed)
    outputs = []
    p = out / "initial_coeffs.csv"
    coeffs_to_csv(initial, p)
    outputs.append(p)
    for t in cfg.t:
        params = SolutionParams(phi=phi, psi=psi, gamma=cfg.gamma, t=t)
        solved = solve_field(initial, params)
        if cfg.check and phi.kind == "linear":
            qs = cfg.gamma + np.asarray(
                [float(psi.value(l * (l + 1.0))) for l in range(cfg.lmax + 1)])
            want = np.exp(-t * qs)
            got = np.ones(cfg.lmax + 1)
            for l in range(cfg.lmax + 1):
                ref = initial.a[l, initial.lmax]
                if ref != 0:
                    got[l] = (solved.a[l, initial.lmax] / ref).real
            if not np.allclose(got, want, rtol=1e-12):
                raise InversionError("linear-symbol closed-form check failed")
        tag = _tag(t)
        p = out / f"solved_coeffs_t{tag}.csv"
        coeffs_to_csv(solved, p)
        outputs.append(p)
        values = synthesize(solved, grid)
        p = out / f"map_t{tag}.f64"
        field_to_binary(values, p, {"lmax": cfg.lmax, "t": t, "seed": cfg.seed})
        outputs.extend([p, Path(str(p) + ".json")])
    write_manifest(out / "manifest.json", "simulate", asdict(cfg), outputs)
    return EXIT_OK


def _spectrum_realization(args) -> np.ndarray:
    spec_dict, phi_dict, psi_dict, gamma, t, lmax, seed = args
    cfg = RunConfig(spectrum=spec_dict, phi=phi_dict, psi=psi_dict)
    spec = cfg.spectrum_obj()
    params = SolutionParams(phi=cfg.phi_obj(), psi=cfg.psi_obj(), gamma=gamma, t=t)
    coeffs = sample_gaussian_field(spec, lmax, seed)
    return empirical_cl(solve_field(coeffs, params))


def cmd_spectrum(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.spectrum_obj()
    t = cfg.t[0]
    params = SolutionParams(phi=cfg.phi_obj(), psi=cfg.psi_obj(),
                            gamma=cfg.gamma, t=t)
    report = build_report(spec, params, cfg.lmax, n_realizations=0,
                          rng_seed=cfg.seed)
    if cfg.ensemble >= 1:
        seeds = np.random.default_rng(cfg.seed).integers(
            0, 2 ** 63 - 1, size=cfg.ensemble)
        jobs = [(cfg.spectrum, cfg.phi, cfg.psi, cfg.gamma, t, cfg.lmax, int(s))
                for s in seeds]
        workers = cfg.effective_threads()
        if workers > 1:
            # order-preserving map: the result is independent of the degree
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_spectrum_realization, jobs, chunksize=16))
        else:
            rows = [_spectrum_realization(j) for j in jobs]
        acc = np.stack(rows)
        report.empirical = acc.mean(axis=0)
        if cfg.ensemble >= 2:
            report.empirical_se = acc.std(axis=0, ddof=1) / math.sqrt(cfg.ensemble)
        report.metadata["n_realizations"] = cfg.ensemble
    report.metadata["versions"] = {"fracsphere": __version__}
    p = out / "spectrum_report.csv"
    spectrum_report_to_csv(report, p)
    write_manifest(out / "manifest.json", "spectrum", asdict(cfg),
                   [p, Path(str(p) + ".json")])
    return EXIT_OK


def _verify_suites(cfg: RunConfig) -> dict:
    """Invariant suites with measured values; sizes scale with cfg.n."""
    phi, psi = cfg.phi_obj(), cfg.psi_obj()
    tol = {
        "eigenfunction": 1e-2,
        "route_deterministic": 1e-5,
        "route_mc_se": 3.0,
        "coordinate_change_se": 3.0,
        "orthonormality": 1e-10,
        "variance_se": 3.0,
    }
    tol.update(cfg.tolerances)
    suites = {}
    rng = np.random.default_rng(cfg.seed)
    spawn = lambda: int(rng.integers(0, 2 ** 63 - 1))

    # eigenfunction residual of the non-local derivative
    grid_t = np.linspace(0.0, 2.0, 1001)
    init = HarmonicCoeffs(2, real_field=True)
    init.set(1, 0, 1.0)
    params = SolutionParams(phi=phi, psi=psi, gamma=cfg.gamma, t=1.0)
    rows = residual_check(init, params, grid_t, eval_window=(0.2, 2.0))
    worst = max(r["residual"] for r in rows)
    suites["eigenfunction_residual"] = {
        "measured": worst, "tolerance": tol["eigenfunction"],
        "pass": bool(worst <= tol["eigenfunction"])}

    # route consistency at (t, lam) = (1, 2)
    lam = 2.0
    det_routes = [ltilde(phi, 1.0, lam, "laplace")]
    if phi.kind in ("stable", "linear"):
        det_routes.append(ltilde(phi, 1.0, lam, "closed_form"))
    det_gap = (abs(det_routes[0] - det_routes[-1])
               / det_routes[-1] if len(det_routes) > 1 else 0.0)
    mc, se = ltilde_mc(phi, 1.0, lam, cfg.n, spawn(), n_steps=cfg.n_steps)
    z = abs(mc - det_routes[0]) / max(se, 1e-300) if se > 0 else 0.0
    ok = det_gap <= tol["route_deterministic"] and z <= tol["route_mc_se"]
    suites["route_consistency"] = {
        "measured": {"deterministic_rel": det_gap, "mc_z": z},
        "tolerance": {"deterministic_rel": tol["route_deterministic"],
                      "mc_z": tol["route_mc_se"]},
        "pass": bool(ok)}

    # spectral solution vs coordinate change at one point
    t_pos = next((v for v in cfg.t if v > 0.0), 1.0)
    params0 = SolutionParams(phi=phi, psi=psi, gamma=0.0, t=t_pos)
    if params0.supports_coordinate_change():
        x = SphericalPoint(math.pi / 3, 1.0)
        target = float(np.real(eval_at_points(
            solve_field(init, params0), [x.theta], [x.phi])[0]))
        est, se = coordinate_change_estimate(init, params0, x, cfg.n, spawn(),
                                             n_steps=cfg.n_steps)
        z = abs(est - target) / max(se, 1e-300) if se > 0 else 0.0
        suites["spectral_vs_coordinate_change"] = {
            "measured": z, "tolerance": tol["coordinate_change_se"],
            "pass": bool(z <= tol["coordinate_change_se"])}

    # orthonormality at lmax 20
    g = SphericalGrid.for_lmax(20)
    worst = 0.0
    for (l0, m0) in [(0, 0), (5, 3), (12, -7), (20, 20)]:
        c = HarmonicCoeffs(20)
        c.set(l0, m0, 1.0)
        back = analyze(synthesize(c, g), 20, g)
        delta = back.a.copy()
        delta[l0, 20 + m0] -= 1.0
        worst = max(worst, float(np.abs(delta).max()))
    suites["orthonormality"] = {
        "measured": worst, "tolerance": tol["orthonormality"],
        "pass": bool(worst <= tol["orthonormality"])}

    # Monte Carlo variance against the truncated sum
    spec = cfg.spectrum_obj()
    params_v = SolutionParams(phi=phi, psi=psi, gamma=cfg.gamma, t=cfg.t[0])
    want, _ = variance(spec, params_v, cfg.lmax)
    n_fields = max(200, min(cfg.ensemble, 2000))
    seeds = np.random.default_rng(spawn()).integers(0, 2 ** 63 - 1, size=n_fields)
    vals = np.empty(n_fields)
    xN = SphericalPoint(0.0, 0.0)
    for i, s in enumerate(seeds):
        coeffs = sample_gaussian_field(spec, cfg.lmax, int(s))
        sol = solve_field(coeffs, params_v)
        vals[i] = float(np.real(eval_at_points(sol, [xN.theta], [xN.phi])[0]))
    sample_var = float(np.var(vals, ddof=1))
    se = sample_var * math.sqrt(2.0 / (n_fields - 1))
    z = abs(sample_var - want) / max(se, 1e-300)
    suites["variance_mc"] = {
        "measured": z, "tolerance": tol["variance_se"],
        "pass": bool(z <= tol["variance_se"])}
    return suites


def cmd_verify(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    suites = _verify_suites(cfg)
    report = {
        "seed": cfg.seed,
        "n": cfg.n,
        "versions": {"fracsphere": __version__},
        "suites": suites,
        "pass": all(s["pass"] for s in suites.values()),
    }
    p = out / "verify_report.json"
    with p.open("w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(out / "manifest.json", "verify", asdict(cfg), [p])
    for name, s in suites.items():
        print(f"{'PASS' if s['pass'] else 'FAIL'} {name}")
    if not report["pass"]:
        failing = [k for k, s in suites.items() if not s["pass"]]
        print(f"verification failed: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_derive(cfg: RunConfig, input_path: str) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ts, us = [], []
    with open(input_path, newline="") as fh:
        for row in csv.DictReader(fh):
            ts.append(float(row["t"]))
            us.append(float(row["u"]))
    ts = np.asarray(ts)
    us = np.asarray(us)
    if ts.size < 3:
        raise ConfigError("trajectory needs at least 3 rows")
    steps = np.diff(ts)
    if ts[0] != 0.0 or not np.allclose(steps, steps[0], rtol=1e-9):
        raise ConfigError("trajectory grid must be uniform and start at 0")
    deriv = convolution_derivative(us, cfg.phi_obj(), float(steps[0]))
    p = out / "derivative.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "D_phi_u"])
        for tv, dv in zip(ts, deriv):
            w.writerow([repr(float(tv)), repr(float(dv))])
    write_manifest(out / "manifest.json", "derive", asdict(cfg), [p])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fracsphere",
        description="Random fields on the sphere under non-local dynamics")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (or a previous manifest)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--threads", type=int)
    common.add_argument("--lmax", type=int)
    common.add_argument("--t", type=float, nargs="+")
    sub.add_parser("simulate", parents=[common])
    sub.add_parser("spectrum", parents=[common])
    sub.add_parser("verify", parents=[common])
    der = sub.add_parser("derive", parents=[common])
    der.add_argument("--input", required=True, help="CSV with columns t,u")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k, None)
                 for k in ("seed", "out", "threads", "lmax", "t")}
    try:
        cfg = RunConfig.load(args.config, overrides)
    except (ConfigError, TypeError, ValueError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "derive":
            return cmd_derive(cfg, args.input)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InversionError, PathExhaustedError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
