"""Batch command-line interface.

Subcommands: ``stationary``, ``moments``, ``pde``, ``simulate``, ``verify``.
Every run writes CSV/JSON artifacts plus a ``manifest.json`` (schema v1)
listing each output with its SHA-256.  Exit codes: 0 success, 1 acceptance
failure, 2 usage or domain error.  Flags win over an optional TOML config.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, cauchy, matsim, moments, stationary, verify
from .errors import FreeJacobiError, TailCertificationError
from .stationary import JacobiParams

try:
    import tomllib  # py>=3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


def _fmt(x):
    return f"{x:.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    return Path(path)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return Path(path)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(out_dir, subcommand, params, outputs, health=None, seed=None):
    import scipy

    man = {
        "schema": "v1",
        "subcommand": subcommand,
        "tool_version": __version__,
        "library_versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seed": seed,
        "params": params,
        "outputs": [
            {"path": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size} for p in outputs
        ],
        "health": health or {},
    }
    return _write_json(Path(out_dir) / "manifest.json", man)


def _load_config(path, section):
    if not path:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return data.get(section, data if all(not isinstance(v, dict) for v in data.values()) else {})


def _merge(args, config, keys):
    # flags win; config fills unset flags; argparse defaults land last
    for key, default in keys.items():
        if getattr(args, key) is None:
            setattr(args, key, config.get(key.replace("_", "-"), config.get(key, default)))


def _outdir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_stationary(args) -> int:
    cfg = _load_config(args.config, "stationary")
    _merge(args, cfg, {"lam": None, "theta": None, "grid_size": 2048})
    if args.lam is None or args.theta is None:
        print("stationary: --lambda and --theta are required", file=sys.stderr)
        return 2
    p = JacobiParams(float(args.lam), float(args.theta))
    out = _outdir(args)
    mu = stationary.stationary_measure(p, grid_size=int(args.grid_size))
    csv_path, json_path = mu.save(out / "measure.csv", out / "measure.json")

    n_mom = 20
    series = stationary.stationary_moments(p, n_mom, method="auto")
    quadr = stationary.stationary_moments(p, n_mom, method="quadrature")
    mom_path = _write_csv(
        out / "moments.csv",
        ["n", "series", "quadrature"],
        [(n, float(series[n]), float(quadr[n])) for n in range(n_mom + 1)],
    )

    report = {
        "lambda": p.lam, "theta": p.theta, "alpha": p.alpha,
        "sde_valid": p.sde_valid, "strict_interior": p.strict_interior,
        "edges": list(stationary.support_edges(p)),
        "atoms": list(stationary.stationary_atoms(p)),
    }
    if p.sde_valid:
        log1m, logj = stationary.stationary_log_potentials(p)
        report["log_potentials"] = {
            "log1m": log1m, "logJ": logj,
            "integral_representation": stationary.log_potential_integral(p),
        }
    else:
        report["log_potentials"] = None
        report["log_potentials_skipped"] = "outside the regime lambda<=1, 1/theta>=lambda+1"
    logpot_path = _write_json(out / "log_potentials.json", report)

    arc = 0.5 + 2.0 * np.exp(1j * np.pi * (np.arange(8) + 0.5) / 8.0)
    kg = max(
        abs(stationary.compressed_k_transform(p, stationary.stationary_cauchy(p, z)) - z)
        for z in arc
    )
    lau = cauchy.laurent_coefficients(lambda zz: stationary.stationary_cauchy(p, zz), 4, radius=8.0)
    selftest = {
        "max_K_of_G_err_on_contour": kg,
        "laurent_vs_series_moments": [
            abs(lau[n] - float(series[n])) for n in range(4)
        ],
    }
    self_path = _write_json(out / "transform_selftest.json", selftest)

    _manifest(out, "stationary", {"lambda": p.lam, "theta": p.theta, "grid_size": int(args.grid_size)},
              [Path(csv_path), Path(json_path), mom_path, logpot_path, self_path])
    if not p.sde_valid:
        print(
            f"stationary: regime violation 1/theta >= lambda+1 (lambda={p.lam}, theta={p.theta}); "
            "density/atom outputs written, SDE-regime flag false",
            file=sys.stderr,
        )
        return 2
    return 0


def _parse_start(text):
    if text == "stationary":
        return "stationary"
    return float(text)


def cmd_moments(args) -> int:
    cfg = _load_config(args.config, "moments")
    _merge(args, cfg, {"lam": None, "theta": None, "start": "0.25", "T": 5.0,
                       "h": 1e-3, "N": 64, "record_every": 10})
    if args.lam is None or args.theta is None:
        print("moments: --lambda and --theta are required", file=sys.stderr)
        return 2
    p = JacobiParams(float(args.lam), float(args.theta))
    N = int(args.N)
    if N < 1:
        print("moments: need N >= 1", file=sys.stderr)
        return 2
    start = _parse_start(str(args.start))
    if start == "stationary":
        start_vec = stationary.stationary_moments(p, N)
        rho0 = 0.0
    else:
        start_vec = start
        rho0 = float(start)
    traj = moments.integrate_moments(
        p, start_vec, T=float(args.T), h=float(args.h), N=N, record_every=int(args.record_every)
    )
    out = _outdir(args)
    traj_path = _write_csv(
        out / "trajectory.csv",
        ["t"] + [f"m{n}" for n in range(1, N + 1)],
        [(float(t),) + tuple(float(v) for v in row[1:]) for t, row in zip(traj.times, traj.moments)],
    )
    rows = []
    for k in range(min(8, N) + 1):
        ck = np.array([moments.chebyshev_functional(m, k) for m in traj.moments])
        for t, c in zip(traj.times, ck):
            rows.append((float(t), k, float(c), float(np.exp(k * t) * c)))
    cheb_path = _write_csv(out / "chebyshev.csv", ["t", "k", "ck", "ck_scaled"], rows)

    _, xp = stationary.support_edges(p)
    health = {}
    outputs = [traj_path, cheb_path]
    try:
        res = moments.log_identity_residual(traj, rho=max(rho0, xp), tol=1e-5)
        outputs.append(_write_csv(out / "log_identity.csv", ["t", "residual"],
                                  list(zip(map(float, traj.times), map(float, res)))))
        health["log_identity_max_residual"] = float(np.max(np.abs(res)))
    except TailCertificationError as exc:
        health["log_identity_skipped"] = str(exc)
    try:
        rate = moments.relaxation_rate(traj)
    except FreeJacobiError:
        rate = None
    outputs.append(_write_json(out / "relaxation_fit.json", {"m1_rate": rate, "exact": -1.0}))
    _manifest(out, "moments",
              {"lambda": p.lam, "theta": p.theta, "start": str(args.start), "T": float(args.T),
               "h": float(args.h), "N": N}, outputs, health=health)
    return 0


def cmd_pde(args) -> int:
    cfg = _load_config(args.config, "pde")
    _merge(args, cfg, {"lam": None, "theta": None, "start": "0.25", "T": 2.0, "h": 1e-3,
                       "x_lo": -4.0, "x_hi": 6.0, "y0": 1.0, "dx": 0.01, "record_every": 200})
    if args.lam is None or args.theta is None:
        print("pde: --lambda and --theta are required", file=sys.stderr)
        return 2
    p = JacobiParams(float(args.lam), float(args.theta))
    z = cauchy.make_contour(float(args.x_lo), float(args.x_hi), float(args.y0), float(args.dx))
    start = _parse_start(str(args.start))
    if start == "stationary":
        g0 = stationary.stationary_cauchy(p, z)
    else:
        g0 = 1.0 / (z - float(start))
    init = cauchy.ContourSample(z, g0)
    series = cauchy.solve_pde(init, p, T=float(args.T), h=float(args.h),
                              record_every=int(args.record_every))
    out = _outdir(args)
    rows = []
    for s in series:
        for zz, gg in zip(s.points, s.values):
            rows.append((float(s.t), float(zz.real), float(zz.imag), float(gg.real), float(gg.imag)))
    contour_path = _write_csv(out / "contour.csv", ["t", "re_z", "im_z", "re_G", "im_G"], rows)

    report = {"herglotz_preserved": all(np.all(s.values.imag < 0) for s in series)}
    if start == "stationary":
        report["stationary_sup_residual"] = float(
            np.max(np.abs(cauchy.pde_rhs(init, p)[init.trust]))
        )
        report["max_drift_from_initial"] = float(
            max(np.max(np.abs((s.values - init.values)[init.trust])) for s in series)
        )
    else:
        traj = moments.integrate_moments(p, float(start), T=float(args.T), h=float(args.h),
                                         N=60, record_every=int(args.record_every))
        mask = np.abs(z) >= 2.0
        mask[: cauchy.TRUST_MARGIN] = False
        mask[-cauchy.TRUST_MARGIN:] = False
        dev = 0.0
        for i, s in enumerate(series):
            oracle = cauchy.cauchy_from_moments(traj.moments[i], z[mask])
            dev = max(dev, float(np.max(np.abs(s.values[mask] - oracle))))
        report["max_dev_vs_moment_oracle"] = dev
    rep_path = _write_json(out / "pde_report.json", report)
    _manifest(out, "pde", {"lambda": p.lam, "theta": p.theta, "start": str(args.start),
                           "T": float(args.T), "h": float(args.h)},
              [contour_path, rep_path])
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, "simulate")
    _merge(args, cfg, {"d": None, "m": None, "p": None, "step": 0.01, "T": 1.0, "trials": 50,
                       "seed": 0, "start": "haar", "scheme": "unitary-corner", "n_emp": 4,
                       "record_every": 1, "snapshot_times": "", "jobs": 1})
    if args.d is None or args.m is None or args.p is None:
        print("simulate: --d, --m and --p are required", file=sys.stderr)
        return 2
    snaps = tuple(float(s) for s in str(args.snapshot_times).split(",") if s.strip())
    start = args.start
    if start not in ("haar", "identity"):
        start = float(start)
    config = matsim.MatrixJacobiConfig(
        m=int(args.m), p=int(args.p), d=int(args.d), step=float(args.step), T=float(args.T),
        trials=int(args.trials), seed=int(args.seed), start=start, scheme=str(args.scheme),
        n_emp=int(args.n_emp), record_every=int(args.record_every), snapshot_times=snaps,
    )
    rec = matsim.simulate_trajectory(config, jobs=int(args.jobs))
    out = _outdir(args)
    mean, err = rec.mean_moments, rec.stderr_moments
    rows = []
    for i, t in enumerate(rec.times):
        for n in range(config.n_emp):
            rows.append((float(t), n + 1, float(mean[i, n]), float(err[i, n])))
    traj_path = _write_csv(out / "trajectory.csv", ["t", "n", "mean_mn", "stderr_mn"], rows)
    eig_rows = []
    for t in sorted(rec.snapshots):
        for v in np.sort(rec.snapshots[t].ravel()):
            eig_rows.append((float(t), float(v)))
    eig_path = _write_csv(out / "eigenvalues.csv", ["t", "eig"], eig_rows)
    health = {
        "clamp_steps": rec.clamp_steps,
        "reorth_events": rec.reorth_events,
        "aborted_trials": rec.aborted_trials,
        "lambda": str(config.lam),
        "theta": str(config.theta),
    }
    _manifest(out, "simulate", dataclasses.asdict(config) | {"jobs": int(args.jobs)},
              [traj_path, eig_path], health=health, seed=config.seed)
    return 0


def cmd_verify(args) -> int:
    name = args.suite
    if name not in verify.SUITES:
        print(f"verify: unknown suite {name!r}; choices: {sorted(verify.SUITES)}", file=sys.stderr)
        return 2
    results, ok = verify.run_suite(name, quick=bool(args.quick), jobs=args.jobs)
    verdict = {
        "suite": name,
        "quick": bool(args.quick),
        "passed": ok,
        "criteria": [
            {"name": r.name, "passed": r.passed, "elapsed_s": round(r.elapsed, 3),
             "details": r.details}
            for r in results
        ],
    }
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.elapsed:.2f}s)")
    if args.json_out:
        _write_json(args.json_out, verdict)
    else:
        print(json.dumps(verdict, indent=2, default=str))
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", default=None, help="optional TOML config; flags win")
    sp.add_argument("--out-dir", default="freejacobi-out")


def build_parser():
    ap = argparse.ArgumentParser(prog="freejacobi",
                                 description="free Jacobi process numerics toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("stationary", help="closed-form stationary law artifacts")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--grid-size", dest="grid_size", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(fn=cmd_stationary)

    sp = sub.add_parser("moments", help="moment hierarchy trajectory and diagnostics")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--start", default=None, help="'stationary' or c in (0,1) for J0 = c P")
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--h", type=float, default=None)
    sp.add_argument("--N", type=int, default=None)
    sp.add_argument("--record-every", dest="record_every", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(fn=cmd_moments)

    sp = sub.add_parser("pde", help="Cauchy-transform PDE on a contour")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--start", default=None)
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--h", type=float, default=None)
    sp.add_argument("--x-lo", dest="x_lo", type=float, default=None)
    sp.add_argument("--x-hi", dest="x_hi", type=float, default=None)
    sp.add_argument("--y0", type=float, default=None)
    sp.add_argument("--dx", type=float, default=None)
    sp.add_argument("--record-every", dest="record_every", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(fn=cmd_pde)

    sp = sub.add_parser("simulate", help="finite-d matrix Monte Carlo")
    for flag, typ in (("--d", int), ("--m", int), ("--p", int), ("--trials", int),
                      ("--seed", int), ("--n-emp", int), ("--record-every", int),
                      ("--jobs", int)):
        sp.add_argument(flag, dest=flag.lstrip("-").replace("-", "_"), type=typ, default=None)
    sp.add_argument("--step", type=float, default=None)
    sp.add_argument("--T", type=float, default=None)
    sp.add_argument("--start", default=None, help="haar | identity | c in (0,1)")
    sp.add_argument("--scheme", default=None, choices=[None, "unitary-corner", "direct-sde"])
    sp.add_argument("--snapshot-times", dest="snapshot_times", default=None,
                    help="comma-separated times for eigenvalue snapshots")
    _add_common(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("verify", help="run acceptance suites")
    sp.add_argument("suite", nargs="?", default="all")
    sp.add_argument("--quick", action="store_true")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--json-out", dest="json_out", default=None)
    sp.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except FreeJacobiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
