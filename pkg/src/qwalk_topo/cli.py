"""Command-line harness: one subcommand per experiment, driven by JSON configs.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import analytics, spectral, topology
from .errors import ConfigError, NoBoundState, NumericalFailure, OnCriticalLine, QwalkError
from .io import ExperimentConfig, state_rows, write_csv, write_json
from .lattice import Line, Piecewise, localized_state, probability_in_window
from .protocols import (
    Conventional1D,
    Reflecting1D,
    SplitStep1D,
    TimeShiftedSplitStep1D,
    TwoDSimple,
    TwoDSixOp,
    build_protocol,
    evolve,
    evolve_iter,
    family_from_dict,
    geometry_from_dict,
    is_2d,
    one_step_unitary,
)

log = logging.getLogger("qwalk_topo")


# ---------------------------------------------------------------------------
# parameter helpers


def _spin(value) -> np.ndarray:
    if value is None:
        return np.array([1.0, 0.0], dtype=complex)
    try:
        parts = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in value]
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad spin {value!r}") from exc
    if len(parts) != 2 or np.linalg.norm(parts) == 0:
        raise ConfigError("spin must be two amplitudes with nonzero norm")
    return np.array(parts) / np.linalg.norm(parts)


def _grid(doc, name: str) -> np.ndarray:
    if isinstance(doc, list):
        return np.asarray(doc, dtype=float)
    try:
        start, stop, num = float(doc["start"]), float(doc["stop"]), int(doc["num"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list or {{start, stop, num}}") from exc
    if num < 1:
        raise ConfigError(f"{name}.num must be positive")
    return np.linspace(start, stop, num, endpoint=bool(doc.get("endpoint", False)))


def _req(params: dict, key: str):
    if key not in params:
        raise ConfigError(f"missing parameter {key!r}")
    return params[key]


def _int(params: dict, key: str, default=None) -> int:
    v = params.get(key, default)
    if v is None:
        raise ConfigError(f"missing parameter {key!r}")
    try:
        iv = int(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be an integer") from exc
    if iv != v:
        raise ConfigError(f"{key} must be an integer")
    return iv


# ---------------------------------------------------------------------------
# experiments


def run_walk1d(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    fam = family_from_dict(_req(p, "protocol"))
    if is_2d(fam):
        raise ConfigError("walk1d needs a 1D protocol family")
    n = _int(p, "steps")
    if n < 0:
        raise ConfigError("steps must be non-negative")
    geom = geometry_from_dict(p["geometry"]) if "geometry" in p else Line.centered(max(n, 1))
    site = _int(p, "site", 0)
    radius = _int(p, "window_radius", 5)
    state = localized_state(geom, site, _spin(p.get("spin")))
    proto = build_protocol(fam, geom)
    xs = geom.coords()
    dist_rows, win_rows = [], []

    def record(t, st):
        prob = np.sum(np.abs(st.amplitudes) ** 2, axis=1)
        dist_rows.extend([t, int(x), float(q)] for x, q in zip(xs, prob))
        win_rows.append([t, probability_in_window(st, site, radius)])

    record(0, state)
    for t, st in enumerate(evolve_iter(state, proto, n), 1):
        record(t, st)
    write_csv(out / "distribution.csv", ["step", "site", "probability"], dist_rows)
    write_csv(out / "window.csv", ["step", "p_window"], win_rows)
    summary = {"steps": n, "window_radius": radius, "p_window_final": win_rows[-1][1],
               "p_window": [r[1] for r in win_rows], "paper_figure": cfg.paper_figure}
    write_json(out / "walk1d.json", summary)
    return summary


def run_phase1d(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    t1, t2 = _grid(_req(p, "theta1"), "theta1"), _grid(_req(p, "theta2"), "theta2")
    cells = topology.phase_diagram_1d(t1, t2, n_k=_int(p, "n_k", 1024), workers=workers)
    rows = [[c.theta1, c.theta2, c.invariant, c.min_gap_0, c.min_gap_pi,
             int(topology.on_critical_line_1d(c.theta1, c.theta2, 1e-9))] for c in cells]
    write_csv(out / "phase1d.csv", ["theta1", "theta2", "winding", "min_gap_0", "min_gap_pi", "critical"], rows)
    counts = {str(k): sum(1 for c in cells if c.invariant == k) for k in (0, 1)}
    counts["critical"] = sum(1 for c in cells if c.invariant is None)
    write_json(out / "phase1d.json", {"cells": len(cells), "counts": counts})
    return counts


def run_phase2d(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    family = p.get("family", "sixop")
    t1, t2 = _grid(_req(p, "theta1"), "theta1"), _grid(_req(p, "theta2"), "theta2")
    cells = topology.phase_diagram_2d(family, t1, t2, n_k=_int(p, "n_k", 128), workers=workers)
    rows = []
    lines = []
    for c in cells:
        status = topology.gapless_lines_sixop(c.theta1, c.theta2).status if family == "sixop" else ""
        rows.append([c.theta1, c.theta2, c.invariant, c.min_gap_0, c.min_gap_pi, status])
    if family == "sixop":
        lines = sixop_line_segments(t1.min(), t1.max(), t2.min(), t2.max())
    write_csv(out / "phase2d.csv", ["theta1", "theta2", "chern", "min_gap_0", "min_gap_pi", "analytic"], rows)
    values = sorted({c.invariant for c in cells if c.invariant is not None})
    write_json(out / "phase2d.json", {"family": family, "cells": len(cells), "chern_values": values,
                                      "gapless_lines": lines})
    return {"chern_values": values}


def sixop_line_segments(t1_lo: float, t1_hi: float, t2_lo: float, t2_hi: float) -> list[dict]:
    """Analytic gapless lines clipped to a box, as labeled straight segments."""
    segs = []
    span = int(np.ceil(max(abs(t1_lo), abs(t1_hi), abs(t2_lo), abs(t2_hi)) / np.pi)) + 2
    for n in range(-span, span + 1):
        # theta2 = 2 n pi: horizontal lines, closing both gaps
        y = 2 * n * np.pi
        if t2_lo <= y <= t2_hi:
            segs.append({"label": f"t2={2 * n}*pi", "gap": "0,pi", "p0": [t1_lo, y], "p1": [t1_hi, y]})
        for sgn, name in ((1.0, "t1+t2/2"), (-1.0, "t1-t2/2")):
            c = n * np.pi
            # theta1 = c - sgn * theta2 / 2
            a = (c - sgn * 0.5 * t2_lo, t2_lo)
            b = (c - sgn * 0.5 * t2_hi, t2_hi)
            if max(a[0], b[0]) < t1_lo or min(a[0], b[0]) > t1_hi:
                continue
            even = n % 2 == 0
            gap = ("0" if even else "pi") if sgn > 0 else ("pi" if even else "0")
            segs.append({"label": f"{name}={n}*pi", "gap": gap, "p0": list(a), "p1": list(b)})
    return segs


def run_edge2d(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    fam = family_from_dict(_req(p, "protocol"))
    if not is_2d(fam):
        raise ConfigError("edge2d needs a 2D protocol family")
    ly = _int(p, "ly", 100)
    kx = spectral.strip_k_grid(fam, _int(p, "n_kx", 101))
    y_par = p.get("y_parity")
    strip = spectral.strip_spectrum(fam, kx, ly, pr_fraction=float(p.get("pr_fraction", 0.2)),
                                    distance_cutoff=float(p.get("distance_cutoff", 5.0)),
                                    workers=workers, y_parity=None if y_par is None else int(y_par))
    rows = []
    for i, k in enumerate(strip.kx):
        for j in range(strip.energies.shape[1]):
            rows.append([k, strip.energies[i, j], bool(strip.edge[i, j]), strip.mean_y[i, j],
                         int(strip.nearest_boundary[i, j])])
    write_csv(out / "edge2d.csv", ["kx", "eigenphase", "edge_tag", "mean_y", "boundary"], rows)
    summary: dict = {"ly": ly, "n_kx": len(kx), "boundaries": strip.boundaries,
                     "edge_tagged": int(strip.edge.sum()), "paper_figure": cfg.paper_figure}
    bulk = p.get("bulk")
    if bulk:
        cls = type(fam)
        g0, gpi = spectral.bulk_gaps([cls(float(a), float(b)) for a, b in bulk])
        branches = spectral.edge_branches(strip, g0, gpi, margin=float(p.get("gap_margin", 0.0)))
        summary["gaps"] = {"0": g0, "pi": gpi}
        summary["branches"] = [{"boundary": b.boundary, "gap": b.gap, "n_points": len(b.kx),
                                "kx_first": b.kx[0], "kx_last": b.kx[-1],
                                "slope_sign": sorted({int(x) for x in np.sign(b.slopes)})}
                               for b in branches]
        if p.get("energy_winding", False):
            period = len(kx) * (kx[1] - kx[0])
            curves = spectral.chain_edge_branches(branches, period)
            summary["curves"] = [{"boundary": c.boundary, "winding": c.winding, "loops": c.loops}
                                 for c in curves]
    write_json(out / "edge2d.json", summary)
    return summary


def run_boundstate(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    theta, phi = float(_req(p, "theta")), float(p.get("phi", 0.0))
    length = _int(p, "length", 60)
    report: dict = {"theta": theta, "phi": phi, "length": length}
    proto = build_protocol(Reflecting1D(theta, phi), Line.ending_at_zero(length))
    u = one_step_unitary(proto)
    spec = spectral.diagonalize(u, proto.geometry)
    resid = topology.verify_chiral_symmetry(u, topology.chiral_frame(theta))
    report["chiral_residual"] = resid
    if resid > 1e-10:
        log.warning("reflecting phase breaks chiral symmetry (residual %.2e); bound states are not pinned", resid)
        report["warning"] = "chiral symmetry broken"
    # in-gap localized eigenstates near the edge
    pr = spec.participation_ratio()
    xs = proto.geometry.coords()
    depth = spec.site_probabilities() @ np.abs(xs)
    loc = np.flatnonzero((pr < 0.2 * length) & (depth < 0.25 * length))
    report["numerical"] = [{"energy": spec.energies[i], "participation": pr[i], "mean_depth": depth[i]}
                           for i in loc]
    try:
        b = analytics.reflecting_bound_state(theta, phi)
    except (ConfigError, NoBoundState) as exc:
        report["analytic"] = None
        report["analytic_reason"] = str(exc)
    else:
        psi = b.amplitudes(length).ravel()
        near = spec.select(b.energy, 1e-8)
        fid = float(np.sum(np.abs(spec.vectors[:, near].conj().T @ psi) ** 2)) if len(near) else 0.0
        report["analytic"] = {"energy": b.energy, "zeta": b.zeta, "decay_length": b.decay_length,
                              "edge_spinor": b.edge_spinor, "fidelity": fid,
                              "residual": float(np.linalg.norm(u @ psi - np.exp(-1j * b.energy) * psi))}
        cols, rows = state_rows(b.state(length))
        write_csv(out / "bound_state.csv", cols, rows)
    write_json(out / "boundstate.json", report)
    return report


def run_asymptotic(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    fam = family_from_dict(p.get("protocol", {"family": "conventional", "theta": np.pi / 2}))
    spin = _spin(p.get("spin"))
    X = _grid(p.get("X", {"start": -1.0, "stop": 1.0, "num": 401, "endpoint": True}), "X")
    dist = analytics.asymptotic_distribution(fam, spin, X, n_k=_int(p, "n_k", analytics.N_K_ASYMPTOTIC))
    cols, rows = ["X", "density"], [[x, d] for x, d in zip(dist.X, dist.density)]
    special = isinstance(fam, Conventional1D) and np.isclose(fam.theta.theta, np.pi / 2) \
        and np.allclose(np.abs(spin), [1, 0])
    if special:
        cols += ["closed_form_printed", "closed_form_derived"]
        printed = analytics.closed_form_theta_half(X)
        derived = analytics.density_theta_half(X)
        rows = [r + [a, b] for r, a, b in zip(rows, printed, derived)]
    write_csv(out / "asymptotic.csv", cols, rows)
    report: dict = {"total": dist.total()}
    n_emp = _int(p, "compare_steps", 400)
    if n_emp > 0:
        report["ks_distance"] = {str(n): analytics.ks_distance(dist, n) for n in (n_emp // 4, n_emp // 2, n_emp)}
    write_json(out / "asymptotic.json", report)
    return report


def run_spectrum(cfg: ExperimentConfig, out: Path, workers: int = 1) -> dict:
    p = cfg.params
    fam = family_from_dict(_req(p, "protocol"))
    geom = geometry_from_dict(_req(p, "geometry"))
    proto = build_protocol(fam, geom)
    spec = spectral.diagonalize(one_step_unitary(proto), geom)
    pos = spec.position_expectation()
    pr = spec.participation_ratio()
    if pos.ndim == 1:
        rows = [[i, e, x, q] for i, (e, x, q) in enumerate(zip(spec.energies, pos, pr))]
        cols = ["index", "eigenphase", "position", "participation"]
    else:
        rows = [[i, e, x[0], x[1], q] for i, (e, x, q) in enumerate(zip(spec.energies, pos, pr))]
        cols = ["index", "eigenphase", "x", "y", "participation"]
    write_csv(out / "spectrum.csv", cols, rows)
    report: dict = {"n_states": len(spec), "n_zero": int(len(spec.select(0.0, 1e-6))),
                    "n_pi": int(len(spec.select(np.pi, 1e-6)))}
    if isinstance(fam, (SplitStep1D, TimeShiftedSplitStep1D, Conventional1D)) and "charge_theta1" in p:
        frame = topology.chiral_frame(float(p["charge_theta1"]))
        ch = topology.bound_state_charges(spec, frame, window=float(p.get("window", 1e-6)))
        report["charges"] = {"Q0": ch.Q0, "Qpi": ch.Qpi}
    write_json(out / "spectrum.json", report)
    return report


# ---------------------------------------------------------------------------
# self tests: small instances of each module's invariants


def _check(cond: bool, what: str) -> None:
    if not cond:
        raise NumericalFailure(f"selftest failed: {what}")


def selftest_walk1d() -> None:
    g = Line.centered(20)
    s = localized_state(g, 0, (1, 1j))
    out = evolve(s, build_protocol(SplitStep1D(0.7, 1.3), g), 20)
    _check(abs(out.norm_sq() - 1) < 1e-10, "norm conservation")
    a = evolve(s, build_protocol(Conventional1D(0.9), g), 5).amplitudes
    b = evolve(s, build_protocol(SplitStep1D(0.9, 0.0), g), 5).amplitudes
    _check(np.max(np.abs(a - b)) < 1e-12, "conventional equals split-step with theta2 = 0")


def selftest_phase1d() -> None:
    rng = np.random.default_rng(1)
    for _ in range(20):
        t1, t2 = rng.uniform(-np.pi, np.pi, 2)
        if topology.critical_distance_1d(t1, t2) < 1e-2:
            continue
        w = topology.winding_number(spectral.bloch_band(SplitStep1D(t1, t2), n_k=256), topology.chiral_frame(t1))
        _check(abs(w) == topology.winding_closed_form(t1, t2), "winding matches closed form")


def selftest_phase2d() -> None:
    for t in ((7 * np.pi / 6, 7 * np.pi / 6), (3 * np.pi / 2, 3 * np.pi / 2), (0.3, 0.2)):
        band = spectral.bloch_band(TwoDSixOp(*t), n_k=64)
        c1 = topology.chern_number_berry_plaquette(band)
        c2 = topology.chern_number_solid_angle(band)
        c3 = topology.chern_number_berry_plaquette(band, upper=False)
        _check(c1 == c2 and c1 == -c3, "Chern methods and sum rule agree")
    band = spectral.bloch_band(TwoDSimple(1.0, 2.0), n_k=64)
    _check(topology.chern_number_berry_plaquette(band) == 0, "simple walk is Chern trivial")


def selftest_edge2d() -> None:
    fam = TwoDSimple(_pw(0.0, np.pi), _pw(np.pi, 0.0))
    kx = 0.3
    E = spectral.strip_spectrum(fam, [kx], 16).energies[0]
    allowed = np.array([np.pi / 2, -np.pi / 2, kx - np.pi / 2, kx + np.pi / 2, -kx - np.pi / 2, -kx + np.pi / 2])
    gap = np.abs(np.angle(np.exp(1j * (E[:, None] - allowed[None, :])))).min(axis=1)
    _check(np.max(gap) < 1e-10, "exact strip spectrum is flat bulk plus linear edge branches")


def _pw(minus: float, plus: float):
    return Piecewise(0, minus, plus)


def selftest_boundstate() -> None:
    b = analytics.reflecting_bound_state(np.pi / 2, 0.0)
    proto = build_protocol(Reflecting1D(np.pi / 2, 0.0), Line.ending_at_zero(40))
    u = one_step_unitary(proto)
    psi = b.amplitudes(40).ravel()
    _check(np.linalg.norm(u @ psi + psi) < 1e-8, "analytic edge state is an eigenvector")
    _check(abs(b.transfer_eigenvalues[0] * b.transfer_eigenvalues[1] - 1) < 1e-12, "transfer product is 1")


def selftest_asymptotic() -> None:
    d = analytics.asymptotic_distribution(Conventional1D(np.pi / 2), (1, 0), np.linspace(-1, 1, 201), n_k=2 ** 14)
    _check(abs(d.total() - 1) < 1e-6, "density normalized")
    dy = analytics.asymptotic_distribution(Conventional1D(np.pi / 2), (1, 1j), np.linspace(-1, 1, 201), n_k=2 ** 14)
    _check(np.max(np.abs(dy.density - dy.density[::-1])) < 1e-8, "spin +y gives an even density")


def selftest_spectrum() -> None:
    proto = build_protocol(SplitStep1D(-np.pi / 2, 3 * np.pi / 4), Line(24))
    spec = spectral.diagonalize(one_step_unitary(proto), proto.geometry)
    E = np.sort(spec.energies)
    _check(np.max(np.abs(E + E[::-1])) < 1e-8, "E and -E come in pairs")
    u = one_step_unitary(proto)
    _check(topology.verify_chiral_symmetry(u, topology.chiral_frame(-np.pi / 2)) < 1e-12, "chiral residual")


COMMANDS: dict[str, tuple[Callable, Callable]] = {
    "walk1d": (run_walk1d, selftest_walk1d),
    "phase1d": (run_phase1d, selftest_phase1d),
    "phase2d": (run_phase2d, selftest_phase2d),
    "edge2d": (run_edge2d, selftest_edge2d),
    "boundstate": (run_boundstate, selftest_boundstate),
    "asymptotic": (run_asymptotic, selftest_asymptotic),
    "spectrum": (run_spectrum, selftest_spectrum),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qwalk-topo", description="Topological quantum-walk experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="experiment JSON document")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="parallel workers for sweeps")
        sp.add_argument("--selftest", action="store_true", help="run the invariant checks and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    run, selftest = COMMANDS[args.command]
    try:
        if args.selftest:
            t0 = time.perf_counter()
            selftest()
            print(f"{args.command} selftest passed in {time.perf_counter() - t0:.1f} s")
            return 0
        if args.config is None:
            raise ConfigError("--config is required unless --selftest is given")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = ExperimentConfig.load(args.config)
        if cfg.experiment != args.command:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.command!r}")
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        run(cfg, out, args.workers)
        print(f"{args.command}: wrote results to {out}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, OnCriticalLine) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except QwalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
