"""Command-line front end.

    python run_experiment.py [command] --config run.ini [--out DIR] [--format csv,svg]
                             [--threads N] [--log-level LEVEL]

The command defaults to the configuration's [experiment] name. Exit status is
0 on success, 2 for configuration or empty-input errors and 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .averaged.chart import local_chart
from .averaged.system import AveragedSystem, averaged_systems
from .averaged.twist import isochronous_control, twist
from .contracts.run_config import EXPERIMENTS, FORMATS, RunConfig, describe, load_run_config
from .errors import ConfigError, NoDataError, ThermokamError
from .hamiltonian.families import HamiltonianSpec
from .hamiltonian.reeb import SADDLE, ReebEdge, ReebGraph, reeb_graph
from .hamiltonian.temperatures import admissible_temperatures
from .poincare.scan import ScanGrid, ScanThresholds, fraction_stability, torus_scan
from .poincare.sections import averaging_agreement, section_for_edge
from .quadrature.profiles import ActionProfile, action_axis_table, build_profile, build_profiles, limits_table
from .reconstruct.design import (
    DesignedHamiltonian,
    isochrone_width,
    named_design,
    round_trip,
)
from .settings import Settings, configure_logging
from .storage.figures import Series, line_figure, scatter_figure
from .storage.tables import format_value, write_summary, write_table
from .thermostats.fields import thermostat_checklist

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_EPS = (0.1, 0.05, 0.025)
DEFAULT_U_VALUES = (0.1, 0.5, 1.0, 2.0, 4.0, 9.0, 16.0, 25.0)


@dataclass(frozen=True)
class RunContext:
    config: RunConfig
    out_dir: str
    formats: Tuple[str, ...]
    threads: int

    @property
    def precision(self) -> int:
        return self.config.output.precision

    @property
    def csv(self) -> bool:
        return "csv" in self.formats

    @property
    def svg(self) -> bool:
        return "svg" in self.formats

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def table(self, frame: pd.DataFrame, name: str, written: List[str]) -> None:
        if self.csv:
            written.append(write_table(frame, self.path(name), precision=self.precision))

    def summary(self, values: Dict[str, object], name: str, written: List[str]) -> None:
        written.append(write_summary(values, self.path(name), precision=self.precision))


# -----------------------------
# Shared setup
# -----------------------------

def _edge(graph: ReebGraph, index: int) -> ReebEdge:
    if not 0 <= index < len(graph.edges):
        raise ConfigError([f"[experiment] edge: no edge {index}; the graph has {len(graph.edges)} edges"])
    return graph.edges[index]


def _edge_profile(ctx: RunContext, H: HamiltonianSpec) -> Tuple[ReebGraph, ActionProfile]:
    graph = reeb_graph(H)
    edge = _edge(graph, int(ctx.config.experiment.get("edge", 0)))
    profile = build_profile(H, edge, ctx.config.grid.spec(), ks=ctx.config.grid.ks, graph=graph,
                            workers=ctx.threads)
    return graph, profile


def _first_system(H: HamiltonianSpec, profile: ActionProfile, ctx: RunContext) -> AveragedSystem:
    systems = averaged_systems(H, profile, ctx.config.thermostat.spec())
    if not systems:
        raise NoDataError(f"no thermostatic equilibrium on edge {profile.edge.index} "
                          f"at T={ctx.config.thermostat.temperature}")
    return systems[0]


def _window_top(edge: ReebEdge, h0: float, ctx: RunContext) -> float:
    if edge.bounded:
        return edge.h_hi
    return float(ctx.config.experiment.get("h_hi", edge.h_lo + 5.0 * (h0 - edge.h_lo)))


# -----------------------------
# profile
# -----------------------------

def cmd_profile(ctx: RunContext) -> List[str]:
    H = ctx.config.hamiltonian.build()
    graph = reeb_graph(H)
    ks = ctx.config.grid.ks
    profiles = build_profiles(H, ctx.config.grid.spec(), ks=ks, graph=graph, workers=ctx.threads)
    written: List[str] = []
    for prof in profiles:
        name = f"profile_edge{prof.edge.index}.csv"
        ctx.table(prof.table, name, written)
        print(f"[profile] edge={prof.edge.index} orientation={prof.edge.orientation} "
              f"rows={len(prof.table)} written={ctx.path(name)}")
    ctx.table(limits_table(profiles), "profile_vertex_limits.csv", written)

    admissible: Dict[str, object] = {"family": H.family, "edges": len(graph.edges)}
    for k in ks:
        adm = admissible_temperatures(H, k, graph=graph, profiles=profiles)
        admissible[f"k{k}.excluded"] = list(adm.excluded) or None
    ctx.summary(admissible, "admissible.txt", written)

    if ctx.svg:
        written.extend(_profile_figures(ctx, graph, profiles, ks))
    return written


def _profile_figures(ctx: RunContext, graph: ReebGraph, profiles: Sequence[ActionProfile],
                     ks: Sequence[int]) -> List[str]:
    saddles = [v.h for v in graph.vertices if v.kind == SADDLE]
    out = [line_figure(
        ctx.path("kappa_vs_h.svg"),
        [Series(p.h, p.column("K"), f"edge {p.edge.index}") for p in profiles],
        xlabel="H", ylabel="K", title="K vs H", vlines=saddles,
    )]
    rescaled = []
    for p in profiles:
        rescaled.append(Series(p.h, p.column("K"), "k=1" if p is profiles[0] else None))
        for k in ks:
            label = f"k={k}" if p is profiles[0] else None
            rescaled.append(Series(p.h, p.column(f"Ktilde_{k}") * (k + 1) / 2.0, label))
    out.append(line_figure(ctx.path("ktilde_rescaled.svg"), rescaled, xlabel="H",
                           ylabel="Ktilde_k (k+1)/2", title="rescaled weighted temperatures", vlines=saddles))
    logs = []
    for p in profiles:
        sel = p.h > -1.0
        for k in ks:
            label = f"k={k}" if p is profiles[0] else None
            logs.append(Series(np.log(p.h[sel] + 1.0), np.log(p.column(f"f_{k}")[sel]), label))
    out.append(line_figure(ctx.path("ln_fk.svg"), logs, xlabel="ln(H+1)", ylabel="ln f_k", title="ln f_k"))
    axis = []
    for p in profiles:
        t = action_axis_table(p)
        axis.append(Series(t["I"], t["K"], f"K, edge {p.edge.index}"))
        axis.append(Series(t["I"], t["H_I"], f"H_I, edge {p.edge.index}", "--"))
    out.append(line_figure(ctx.path("kappa_vs_action.svg"), axis, xlabel="I", ylabel="K, H_I",
                           title="K and H_I against the action"))
    return out


# -----------------------------
# averaged
# -----------------------------

def cmd_averaged(ctx: RunContext) -> List[str]:
    H = ctx.config.hamiltonian.build()
    spec = ctx.config.thermostat.spec()
    exp = ctx.config.experiment
    graph = reeb_graph(H)
    edges = [_edge(graph, int(exp.get("edge")))] if exp.get("edge") is not None else list(graph.edges)

    potential_rows, equilibrium_rows, twist_frames = [], [], []
    summary: Dict[str, object] = {"variant": spec.variant, "T": spec.T}
    systems: List[Tuple[int, AveragedSystem]] = []
    for edge in edges:
        profile = build_profile(H, edge, ctx.config.grid.spec(), ks=ctx.config.grid.ks, graph=graph,
                                workers=ctx.threads)
        for j, system in enumerate(averaged_systems(H, profile, spec)):
            systems.append((j, system))
    if not systems:
        raise NoDataError(f"no thermostatic equilibrium for {spec.variant} at T={spec.T}")

    for j, system in systems:
        e = system.profile.edge.index
        eq = system.equilibrium
        I = system.profile.value("I", system.h_nodes)
        potential_rows.append(pd.DataFrame({
            "edge": e, "equilibrium": j, "h": system.h_nodes, "I": I,
            "sigma": system.sigma_nodes, "U": system.U_nodes,
            "sigma_minus_lnI": system.sigma_nodes - np.log(I / eq.I0),
        }))
        chart = local_chart(system)
        hess = system.hessian_at_equilibrium()
        equilibrium_rows.append({
            "edge": e, "equilibrium": j, "h0": eq.h0, "I0": eq.I0,
            "hess_hh": hess[0, 0], "hess_xixi": hess[1, 1],
            "curvature": chart.curvature(), "barrier": chart.barrier(),
        })
        rep = twist(chart, levels=int(exp.get("twist_levels", 20)), g_max=exp.get("twist_g_max"),
                    g_lo_frac=exp.get("twist_g_lo_frac"), workers=ctx.threads)
        frame = rep.as_frame()
        frame.insert(0, "control", False)
        frame.insert(0, "equilibrium", j)
        frame.insert(0, "edge", e)
        frame["nonisochronous"] = rep.nonisochronous
        twist_frames.append(frame)
        key = f"edge{e}.eq{j}"
        summary[f"{key}.h0"] = eq.h0
        summary[f"{key}.twist_at_bottom"] = float(rep.twist[0])
        summary[f"{key}.twist_err_at_bottom"] = float(rep.twist_err[0])
        summary[f"{key}.all_flagged"] = rep.all_flagged
        if rep.birkhoff is not None:
            summary[f"{key}.birkhoff_resultant_ok"] = rep.birkhoff.resultant_ok
        if exp.get("isochronous_control", False):
            ctrl = twist(isochronous_control(chart), levels=int(exp.get("twist_levels", 20)),
                         g_max=exp.get("twist_g_max"), g_lo_frac=exp.get("twist_g_lo_frac"),
                         workers=ctx.threads)
            cf = ctrl.as_frame()
            cf.insert(0, "control", True)
            cf.insert(0, "equilibrium", j)
            cf.insert(0, "edge", e)
            cf["nonisochronous"] = ctrl.nonisochronous
            twist_frames.append(cf)
            summary[f"{key}.control_max_twist"] = float(np.max(np.abs(ctrl.twist)))
        print(f"[averaged] edge={e} h0={eq.h0:.12g} I0={eq.I0:.12g} twist={rep.twist[0]:.6g} "
              f"+- {rep.twist_err[0]:.2g} flagged={int(rep.nonisochronous.sum())}/{len(rep.g)}")

    written: List[str] = []
    ctx.table(pd.concat(potential_rows, ignore_index=True), "averaged_potential.csv", written)
    ctx.table(pd.DataFrame(equilibrium_rows), "equilibria.csv", written)
    ctx.table(pd.concat(twist_frames, ignore_index=True), "twist.csv", written)
    ctx.summary(summary, "summary.txt", written)
    if ctx.svg:
        pots = potential_rows
        written.append(line_figure(
            ctx.path("sigma_vs_lnI.svg"),
            [Series(p["h"], p["sigma_minus_lnI"], f"edge {p['edge'].iloc[0]}") for p in pots],
            xlabel="H", ylabel="sigma - ln(I/I0)", title="Darboux coordinate against ln I",
        ))
        written.append(line_figure(
            ctx.path("potential.svg"),
            [Series(p["sigma"], p["U"], f"edge {p['edge'].iloc[0]}") for p in pots],
            xlabel="sigma", ylabel="U", title=f"averaged potential ({spec.variant}, T={spec.T:g})",
        ))
    return written


# -----------------------------
# scan / agreement
# -----------------------------

def cmd_scan(ctx: RunContext) -> List[str]:
    H = ctx.config.hamiltonian.build()
    spec = ctx.config.thermostat.spec()
    exp = ctx.config.experiment
    _, profile = _edge_profile(ctx, H)
    system = _first_system(H, profile, ctx)
    edge = profile.edge
    h0 = system.equilibrium.h0
    section = section_for_edge(H, edge, h_hi=_window_top(edge, h0, ctx), xi_max=float(exp.get("xi_max", 3.0)))
    thresholds = ScanThresholds(
        residual=float(exp.get("residual_threshold", 1e-4)),
        separation=float(exp.get("separation_threshold", 1e-3)),
        boundary_fraction=float(exp.get("boundary_fraction", 0.02)),
    )
    centre_h = float(exp.get("h0", h0))
    h_half = float(exp.get("h_half", 0.2 * (h0 - edge.h_lo)))
    xi_half = float(exp.get("xi_half", 0.2 * math.sqrt(spec.T)))
    n_h = int(exp.get("n_h", 41))
    n_xi = int(exp.get("n_xi", n_h))
    n_iters = int(exp.get("n_iters", 2000))

    def run(nh: int, nx: int):
        grid = ScanGrid.around(centre_h, h_half, xi_half, nh, nx)
        return torus_scan(H, spec, section, grid, n_iters, centre=(h0, 0.0), thresholds=thresholds,
                          workers=ctx.threads)

    report = run(n_h, n_xi)
    summary = report.summary()
    summary.update({"edge": edge.index, "h_eq": h0, "variant": spec.variant})
    if exp.get("refine", False):
        fine = run(2 * n_h - 1, 2 * n_xi - 1)
        summary["fine_fraction"] = fine.fraction
        summary["fraction_stability"] = fraction_stability(report, fine)

    written: List[str] = []
    ctx.table(report.points, "scan_points.csv", written)
    ctx.summary(summary, "scan_summary.txt", written)
    if ctx.svg:
        pts = report.points
        written.append(scatter_figure(ctx.path("scan.svg"), pts["h0"], pts["xi0"], pts["class"],
                                      xlabel="h", ylabel="xi",
                                      title=f"{spec.variant} eps={spec.epsilon:g}: {report.fraction:.3f} tori"))
    print(f"[scan] points={len(report.points)} fraction={report.fraction:.4f} "
          f"weighted={report.weighted_fraction:.4f} returns={n_iters}")
    return written


def cmd_agreement(ctx: RunContext) -> List[str]:
    H = ctx.config.hamiltonian.build()
    exp = ctx.config.experiment
    _, profile = _edge_profile(ctx, H)
    system = _first_system(H, profile, ctx)
    edge = profile.edge
    h_eq = system.equilibrium.h0
    section = section_for_edge(H, edge, h_hi=_window_top(edge, h_eq, ctx), xi_max=float(exp.get("xi_max", 3.0)))
    x0 = (float(exp.get("h0", h_eq + 0.5 * (h_eq - edge.h_lo))),
          float(exp.get("xi0", 0.4 * math.sqrt(system.spec.T))))
    report = averaging_agreement(system, section, x0, exp.get("eps", list(DEFAULT_EPS)))

    written: List[str] = []
    ctx.table(pd.DataFrame(report.as_records(), columns=["eps", "defect"]), "agreement.csv", written)
    summary = dict(report.summary())
    summary.update({"h0": x0[0], "xi0": x0[1], "variant": system.spec.variant,
                    "slope_lo": report.slope_range[0], "slope_hi": report.slope_range[1]})
    ctx.summary(summary, "agreement_summary.txt", written)
    print(f"[agreement] slope={format_value(report.slope, 6)} ok={report.ok}")
    return written


# -----------------------------
# reconstruct
# -----------------------------

def _designed(ctx: RunContext) -> Tuple[DesignedHamiltonian, float]:
    exp = ctx.config.experiment
    beta = float(exp.get("beta", 1.0 / ctx.config.thermostat.temperature))
    points = int(exp.get("points", 1600))
    sigma1 = exp.get("sigma1")
    designed, pot = named_design(str(exp.get("potential", "rational")), beta,
                                 sigma1=None if sigma1 is None else float(sigma1), n=points)
    return designed, pot.width_scale


def cmd_reconstruct(ctx: RunContext) -> List[str]:
    exp = ctx.config.experiment
    designed, width_scale = _designed(ctx)
    u_values = exp.get("u_values", list(DEFAULT_U_VALUES))
    lo = designed.sigma1 + 1e-3 * abs(designed.sigma1)
    widths = isochrone_width(designed.U_tilde, lo, math.inf, u_values)
    widths["expected"] = width_scale * np.sqrt(widths["u"].to_numpy())
    trip = round_trip(designed)

    summary: Dict[str, object] = dict(designed.summary())
    summary["potential"] = exp.get("potential", "rational")
    summary["width_max_deviation"] = float(np.max(np.abs(widths["width"] - widths["expected"])))
    summary["round_trip_sigma"] = trip["sigma"]
    summary["round_trip_potential"] = trip["potential"]

    written: List[str] = []
    ctx.table(designed.table, "design.csv", written)
    ctx.table(widths, "width.csv", written)
    ctx.summary(summary, "reconstruct_summary.txt", written)
    if ctx.svg:
        t = designed.table
        written.append(line_figure(
            ctx.path("design.svg"),
            [Series(t["sigma"], t["H"], "H"), Series(t["sigma"], t["I"], "I", "--")],
            xlabel="sigma", ylabel="H, I", title=f"designed hamiltonian, beta={designed.beta:g}",
        ))
    if "W_a_closed" in designed.checks:
        print(f"[reconstruct] integral check {designed.W_a:.6f} vs {designed.checks['W_a_closed']:.6f}")
    print(f"[reconstruct] width deviation {summary['width_max_deviation']:.3e} "
          f"round trip {max(trip['sigma'], trip['potential']):.3e}")
    return written


# -----------------------------
# checklist
# -----------------------------

def cmd_checklist(ctx: RunContext) -> List[str]:
    H = ctx.config.hamiltonian.build()
    spec = ctx.config.thermostat.spec()
    exp = ctx.config.experiment
    report = thermostat_checklist(H, spec, int(exp.get("samples", 1000)), seed=int(exp.get("seed", 7)))
    written: List[str] = []
    ctx.summary(report.as_dict(), "checklist.txt", written)
    print(f"[checklist] {spec.variant}: defect={report.max_defect:.3e} proper={report.proper_in_xi} "
          f"pattern={report.pattern_ok}")
    return written


COMMANDS: Dict[str, Callable[[RunContext], List[str]]] = {
    "profile": cmd_profile,
    "averaged": cmd_averaged,
    "scan": cmd_scan,
    "agreement": cmd_agreement,
    "reconstruct": cmd_reconstruct,
    "checklist": cmd_checklist,
}


# -----------------------------
# Entry point
# -----------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Thermostated KAM experiments on one-degree-of-freedom hamiltonians")
    parser.add_argument("command", nargs="?", choices=EXPERIMENTS,
                        help="Experiment to run (defaults to [experiment] name)")
    parser.add_argument("--config", required=True, help="Path to the run configuration (.ini)")
    parser.add_argument("--out", default=None, help="Output directory (overrides [output] directory)")
    parser.add_argument("--format", default=None, help="Comma-separated output formats: csv,svg")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes for profiles and scans")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parser


def _formats(flag: Optional[str], config: RunConfig) -> Tuple[str, ...]:
    if flag is None:
        return tuple(config.output.formats)
    formats = tuple(f.strip().lower() for f in flag.split(",") if f.strip())
    bad = [f for f in formats if f not in FORMATS]
    if bad or not formats:
        raise ConfigError([f"--format: expected a comma-separated subset of {FORMATS}, got {flag!r}"])
    return formats


def run(args: argparse.Namespace, settings: Settings) -> List[str]:
    config = load_run_config(args.config)
    command = args.command or config.experiment.name
    threads = args.threads if args.threads is not None else settings.threads
    if threads < 1:
        raise ConfigError([f"--threads must be >= 1, got {threads}"])
    out_dir = args.out or config.output.directory or settings.output_dir
    ctx = RunContext(config=config, out_dir=out_dir, formats=_formats(args.format, config), threads=threads)
    for line in describe(config):
        logger.debug("config %s", line)
    logger.info("running %s from %s into %s", command, config.source, out_dir)
    written = COMMANDS[command](ctx)
    print(f"[{command}] wrote {len(written)} files to {out_dir}")
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.from_env()
        if args.log_level:
            settings.log_level = args.log_level.upper()
            settings._validate()
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    configure_logging(settings.log_level, color=settings.color_logs)

    try:
        run(args, settings)
    except (ConfigError, NoDataError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThermokamError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK
