"""
``srlab`` command-line front end.

Every subcommand reads a scenario file, writes CSV files into the output
directory and drops a ``<file>.manifest.json`` next to each one. Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import constants as C
from .chip import (
    SingularPointError,
    TwoEnsembleSplit,
    coupling,
    coupling_distribution,
    coupling_scale,
    match_two_ensembles,
    regime_check,
    sample_moments,
)
from .config import ConfigError, Scenario, load_scenario, scenario_hash
from .perturbation import ToleranceError, dicke_state, evolve_first
from .propagator import Sector, propagator
from .qnum import InvalidQuantumNumber
from .sse import (
    NumericalFailure,
    RankAmbiguous,
    build_collective_lowering,
    dark_space,
    ensemble_stats,
    run_trajectory,
)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class Writer:
    """Single writer for CSV outputs and their manifests."""

    def __init__(self, scenario: Scenario, command: str, out: Path):
        self.scenario = scenario
        self.command = command
        self.out = out
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.written: list[Path] = []

    def csv(self, name: str, header: list[str], rows) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise RuntimeError(f"row width {len(row)} != header width {len(header)}")
            w.writerow([_fmt(v) for v in row])
        path = self.out / name
        path.write_text(buf.getvalue())
        self._manifest(path)
        self.written.append(path)
        return path

    def _manifest(self, path: Path):
        manifest = {
            "tool": "srlab",
            "tool_version": __version__,
            "command": self.command,
            "scenario_hash": scenario_hash(self.scenario),
            "scenario_source": self.scenario.source,
            "seed": self.scenario.seed,
            "constants": C.TABLE_VERSION,
            "started": self.started,
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "file": path.name,
        }
        Path(f"{path}.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _tau_grid(value) -> list[float]:
    taus = [value] if isinstance(value, (int, float)) else list(value)
    if not taus or any(t < 0 for t in taus):
        raise ConfigError("tau values must be non-negative")
    return [float(t) for t in taus]


# ---------------------------------------------------------------------------
# subcommands


def cmd_field_map(sc: Scenario, w: Writer, args) -> None:
    circuit, loop = sc.circuit(), sc.loop()
    fm = sc.section("field_map", required=False)
    d = circuit.d
    x0 = d * 0.25 if fm["x_min_m"] is None else fm["x_min_m"]
    x1 = d * 0.75 if fm["x_max_m"] is None else fm["x_max_m"]
    z0 = 0.4 * d if fm["z_min_m"] is None else fm["z_min_m"]
    z1 = 0.6 * d if fm["z_max_m"] is None else fm["z_max_m"]
    y = d / 2 if fm["y_m"] is None else fm["y_m"]
    if fm["nx"] < 1 or fm["nz"] < 1:
        raise ConfigError("[field_map] grid must have at least one point per axis")
    if x1 < x0 or z1 < z0:
        raise ConfigError("[field_map] empty grid range")
    xs = np.linspace(x0, x1, fm["nx"])
    zs = np.linspace(z0, z1, fm["nz"])
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    pts = np.stack([X.ravel(), np.full(X.size, y), Z.ravel()], axis=-1)
    g = coupling(pts, circuit, loop) / (2 * math.pi)
    w.csv("field_map.csv", ["x_m", "z_m", "g_over_2pi_hz"], zip(X.ravel(), Z.ravel(), g))
    print(f"coupling scale G/2pi = {coupling_scale(circuit) / (2 * math.pi):.6g} Hz")


def cmd_coupling_dist(sc: Scenario, w: Writer, args) -> None:
    cd = sc.section("coupling_dist", required=False)
    if cd["n_samples"] < 2 or cd["bins"] < 1:
        raise ConfigError("[coupling_dist] need n_samples >= 2 and bins >= 1")
    hist = coupling_distribution(sc.trap(), sc.circuit(), sc.loop(), cd["n_samples"], sc.seed, cd["bins"])
    edges = hist.edges
    w.csv("coupling_dist.csv", ["g_over_G", "probability_density"], zip(hist.centers, hist.density))
    mom = sample_moments(hist.g_over_G)
    rows = [("mean_g_over_G", mom.mean_g), ("var_g_over_G", mom.var_g), ("skew_g_over_G", mom.skew_g)]
    n = sc.section("ensemble", required=False)["n_atoms"]
    if n:
        split = match_two_ensembles(mom, n)
        rows += [("n1", split.n1), ("n2", split.n2), ("g1_over_G", split.g1), ("g2_over_G", split.g2), ("dg_tilde", split.dg_tilde)]
    w.csv("coupling_moments.csv", ["quantity", "value"], rows)
    for k, v in rows:
        print(f"{k} = {v:.6g}")
    print(f"support [{edges[0]:.4g}, {edges[-1]:.4g}]")


def cmd_regime_check(sc: Scenario, w: Writer, args) -> None:
    rg = sc.section("regime")
    circuit = sc.circuit()
    if circuit.kappa is None:
        raise ConfigError("[circuit] regime check needs kappa_per_s or quality")
    report = regime_check(circuit, sc.trap(), rg["n_atoms"], 2 * math.pi * rg["g_typ_hz"], rg["threshold"])
    for line in report.lines():
        print(line)
    w.csv(
        "regime.csv",
        ["condition", "ratio", "passed"],
        [(it.name, it.ratio, int(it.passed)) for it in report.items],
    )
    w.csv(
        "regime_bounds.csv",
        ["quantity", "value"],
        [("n_upper", report.n_upper), ("n_lower", report.n_lower), ("t_max_k", report.t_max)],
    )


def cmd_propagate(sc: Scenario, w: Writer, args) -> None:
    p = sc.section("propagate")
    jp = p["j"] if p["jp"] is None else p["jp"]
    try:
        x = Sector(p["j"], jp, p["k"])
    except (InvalidQuantumNumber, ValueError) as exc:
        raise ConfigError(f"[propagate] {exc}") from exc
    J = (x.j.twice if x.j.twice >= x.jp.twice else x.jp.twice) / 2 + 0.5
    m = x.m_values
    for tau in _tau_grid(p["tau"]):
        D = propagator(x, tau, J)
        rows = [(m[a], m[b], D[a, b]) for a in range(x.size) for b in range(x.size)]
        tag = f"j{x.j.twice}_jp{x.jp.twice}_k{x.k.twice}_tau{tau:g}"
        w.csv(f"propagator_{tag}.csv", ["m", "n", "D"], rows)


def cmd_inversion(sc: Scenario, w: Writer, args) -> None:
    split = sc.split()
    inv = sc.section("inversion", required=False)
    if inv["n_tau"] < 2 or inv["tau_max"] <= 0:
        raise ConfigError("[inversion] need n_tau >= 2 and tau_max > 0")
    tau = np.linspace(0.0, inv["tau_max"], inv["n_tau"])
    state = evolve_first(dicke_state(split.jmax), split, tau)
    w.csv(
        "inversion.csv",
        ["tau", "jz0", "jz1_per_dgtilde"],
        zip(tau, state.jz("rho0"), state.jz("rho1")),
    )


def cmd_sse(sc: Scenario, w: Writer, args) -> None:
    cfg = sc.sse_config()
    s = sc.section("sse", required=False)
    stats = ensemble_stats(cfg, bins=s["bins"], threads=sc.threads)
    w.csv(
        "sse_histogram.csv",
        ["bin_left", "bin_right", "count"],
        zip(stats.edges[:-1], stats.edges[1:], stats.counts),
    )
    w.csv("sse_mean.csv", ["tau", "jz_over_j"], zip(cfg.record_grid, stats.grid_mean))
    for i in range(min(s["write_trajectories"], cfg.n_traj)):
        rec = run_trajectory(cfg, i)
        w.csv(f"trajectory_{i:05d}.csv", ["tau", "jz_over_j"], zip(cfg.record_grid, rec.jz_over_j))
    print(f"mean final <Jz>/j = {stats.mean:.6f} +/- {stats.stderr:.6f} (std {stats.std:.6f})")


def cmd_sweep(sc: Scenario, w: Writer, args) -> None:
    sw = sc.section("sweep")
    e = sc.section("ensemble")
    if e["n1"] is None or e["n2"] is None:
        raise ConfigError("[ensemble] sweep needs n1 and n2")
    rows = []
    for dg in sw["dg_values"]:
        if not isinstance(dg, (int, float)) or not -1 <= dg <= 1:
            raise ConfigError(f"[sweep] invalid dg value {dg!r}")
        st = ensemble_stats(sc.sse_config(TwoEnsembleSplit.from_dg(e["n1"], e["n2"], float(dg))), threads=sc.threads)
        rows.append((float(dg), st.mean, st.std))
        print(f"dg_tilde={dg:g}: mean={st.mean:.6f} std={st.std:.6f}")
    w.csv("sweep.csv", ["dgtilde", "mean", "std"], rows)


def cmd_dark(sc: Scenario, w: Writer, args) -> None:
    split = sc.split()
    K = dark_space(build_collective_lowering(split))
    dim2 = split.n2 + 1
    print(f"kernel dimension {K.shape[1]}")
    rows = []
    for idx in range(K.shape[0]):
        m1 = split.j1 - idx // dim2
        m2 = split.j2 - idx % dim2
        rows.append((idx, m1, m2, *K[idx].real))
    w.csv("dark_kernel.csv", ["index", "m1", "m2", *[f"v{i}" for i in range(K.shape[1])]], rows)
    for c in range(K.shape[1]):
        v = K[:, c]
        terms = [f"{v[i].real:+.6f}|{rows[i][1]:g},{rows[i][2]:g}>" for i in range(len(v)) if abs(v[i]) > 1e-12]
        print(f"v{c} = " + " ".join(terms))


COMMANDS = {
    "field-map": (cmd_field_map, "coupling map g/2pi on an (x, z) grid"),
    "coupling-dist": (cmd_coupling_dist, "thermal coupling histogram, moments and two-ensemble split"),
    "regime-check": (cmd_regime_check, "validity conditions of the superradiance model"),
    "propagate": (cmd_propagate, "dump the propagator matrix of one sector"),
    "inversion": (cmd_inversion, "zeroth and first order population inversion"),
    "sse": (cmd_sse, "stochastic trajectory ensemble"),
    "sweep": (cmd_sweep, "ensemble statistics versus dg_tilde"),
    "dark": (cmd_dark, "kernel of the collective lowering operator"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srlab", description="superradiant relaxation toolkit")
    parser.add_argument("--version", action="version", version=f"srlab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario TOML file")
    common.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
    common.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
    common.add_argument("--threads", type=int, help="worker threads for trajectory ensembles")
    common.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    overrides = list(args.set)
    for key, value in (("seed", args.seed), ("threads", args.threads)):
        if value is not None:
            overrides.append(("run", key, value))
    if args.out is not None:
        overrides.append(("run", "out", str(args.out)))
    fn, _ = COMMANDS[args.command]
    try:
        sc = load_scenario(args.config, overrides)
        writer = Writer(sc, args.command, sc.out)
        fn(sc, writer, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ToleranceError, SingularPointError, RankAmbiguous, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
