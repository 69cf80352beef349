"""Command-line front end.

    spectorus {propagate|check|bounds|duality|spectrum} --config <path>
              [--out <dir>] [--seed <u64>]

All outputs land in a run directory named from a digest of the effective
configuration, with the configuration copied in, so identical runs write
byte-identical trees.  Exit codes: 0 all checks within tolerance, 1 a
verification failed, 2 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from .config import RunConfig
from .errors import SpectorusError
from .torus import fr


def _run_dir(cfg, command):
    digest = hashlib.sha256(cfg.to_text().encode()).hexdigest()[:12]
    name = f"{command}-{cfg.map}-{digest}"
    path = os.path.join(cfg.out, name)
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config.txt"), "w", encoding="utf-8") as f:
        f.write(cfg.to_text())
    return path


def _write(path, name, text):
    with open(os.path.join(path, name), "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def cmd_propagate(cfg):
    from .orbit import orbit_to_csv, propagate

    gmap = cfg.make_map()
    orbit = propagate(gmap, K=cfg.depth, options=cfg.propagate_options())
    out = _run_dir(cfg, "propagate")
    lines = ["k,length,n_samples,slope,alpha_min,alpha_max"]
    for k in range(1, cfg.depth + 1):
        if not orbit.has_curve(k):
            lines.append(f"{k},{fr(orbit.set_length(k))},0,nan,nan,nan")
            continue
        c = orbit.curve(k)
        _write(out, f"gamma_{k:02d}.csv", orbit_to_csv(orbit, k))
        tans = np.concatenate([s.tan for s in c.segments])
        wide = np.abs(tans[:, 0]) > 1e-12
        slope = float(np.median(tans[wide, 1] / tans[wide, 0])) if np.any(wide) else float("inf")
        al = np.concatenate([np.asarray(s.data["alpha"]) for s in c.segments])
        lines.append(
            f"{k},{fr(c.length)},{c.n_samples},{fr(slope)},{fr(np.min(al))},{fr(np.max(al))}"
        )
    _write(out, "summary.csv", "\n".join(lines) + "\n")
    print(out)
    return 0


def cmd_check(cfg):
    from .axioms import run_checks

    gmap = cfg.make_map()
    rep = run_checks(
        gmap,
        K=cfg.depth,
        J=cfg.j_depth or 2 * cfg.depth,
        tol_jump=cfg.tol_jump,
        tol_alpha=cfg.tol_alpha,
        tol_disjoint=cfg.tol_disjoint,
        tol_len=cfg.tol_len,
        options=cfg.propagate_options(),
    )
    out = _run_dir(cfg, "check")
    _write(out, "report.txt", rep.to_text())
    print(out)
    print(f"overall = {'pass' if rep.passed else 'fail'}")
    return 0 if rep.passed else 1


def _bounds(cfg, gmap):
    from .bounds import bound_report, lambda_upper
    from .orbit import PropagateOptions, propagate

    opts = cfg.propagate_options()
    orbit = propagate(gmap, K=cfg.depth, options=opts)
    rep = bound_report(orbit)
    ns, seq, upper, h_m = lambda_upper(gmap, n_max=min(20, max(8, cfg.depth)))
    return orbit, rep, (ns, seq, upper, h_m)


def cmd_bounds(cfg):
    gmap = cfg.make_map()
    _, rep, (ns, seq, upper, h_m) = _bounds(cfg, gmap)
    out = _run_dir(cfg, "bounds")
    _write(out, "lower.csv", rep.to_csv())
    up_lines = ["n,upper"] + [f"{int(n)},{fr(s)}" for n, s in zip(ns, seq)]
    _write(out, "upper.csv", "\n".join(up_lines) + "\n")
    summary = rep.summary() + f"lambda_upper = {fr(upper)}\nh_m = {fr(h_m)}\n"
    _write(out, "summary.txt", summary)
    print(out)
    print(summary, end="")
    return 0


def cmd_duality(cfg):
    from .functionals import Observable, TrigPoly, verify_duality
    from .orbit import propagate

    gmap = cfg.make_map()
    orbit = propagate(gmap, K=max(cfg.k_max + 2, 8), options=cfg.propagate_options())
    rng = np.random.default_rng(cfg.seed)
    rows_all = ["k,lhs,rhs,residual,error_budget"]
    worst = 0.0
    for _ in range(cfg.n_observables):
        g = TrigPoly.random(rng, 3, 2)
        h = Observable.iterated(gmap, g, 1)
        w, rows = verify_duality(gmap, orbit, h, k_max=cfg.k_max)
        worst = max(worst, w)
        for k, lhs, rhs, res, budget in rows:
            rows_all.append(f"{k},{fr(lhs)},{fr(rhs)},{fr(res)},{fr(budget)}")
    out = _run_dir(cfg, "duality")
    _write(out, "duality.csv", "\n".join(rows_all) + "\n")
    _write(out, "summary.txt", f"max_residual = {fr(worst)}\nbudget = {fr(cfg.duality_budget)}\n")
    print(out)
    print(f"max_residual = {fr(worst)}")
    return 0 if worst < cfg.duality_budget else 1


def cmd_spectrum(cfg):
    from .bounds import lambda_bv
    from .orbit import PropagateOptions, propagate
    from .ulam import build_ulam, leading_spectrum, spectrum_to_csv

    gmap = cfg.make_map()
    opts = cfg.propagate_options()
    opts.curve_depth = 0
    orbit = propagate(gmap, K=max(cfg.depth, 10), options=opts)
    disc = lambda_bv(orbit).estimate
    ulam = build_ulam(gmap, N=cfg.ulam_n, samples_per_cell=cfg.ulam_samples, seed=cfg.seed)
    w, res = leading_spectrum(ulam, count=8)
    out = _run_dir(cfg, "spectrum")
    _write(out, "spectrum.csv", spectrum_to_csv(w, res))
    _write(out, "plotdata.csv", spectrum_to_csv(w, res, disc_radius=disc))
    _write(out, "summary.txt", f"leading_modulus = {fr(abs(w[0]))}\ndisc_radius = {fr(disc)}\n")
    print(out)
    print(f"leading_modulus = {fr(abs(w[0]))}  disc_radius = {fr(disc)}")
    return 0


_COMMANDS = {
    "propagate": cmd_propagate,
    "check": cmd_check,
    "bounds": cmd_bounds,
    "duality": cmd_duality,
    "spectrum": cmd_spectrum,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="spectorus",
        description="Discontinuity-curve propagation and spectral bounds "
        "for piecewise expanding torus maps.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="flat key-value run file")
    parser.add_argument("--out", default=None, help="output root (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        if args.out is not None:
            cfg.values["out"] = args.out
        if args.seed is not None:
            cfg.values["seed"] = args.seed
        cfg.validated()
        return _COMMANDS[args.command](cfg)
    except SpectorusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
