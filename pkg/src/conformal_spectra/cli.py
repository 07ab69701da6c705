"""Command line front end: ``conformal-spectra <subcommand> [options]``.

Exit status: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.io

from . import shapes
from .config import RunConfig, load_config
from .diagnostics import bad_point_scan, energy_identity_check, sphere_map_report
from .eigen import solve
from .exceptions import ConfigError, NoBoundary, NumericalError, ParseError, TopologyError
from .fem import Kind, build_problem
from .flow import PathFamily, minmax_deform, run_flow
from .functional import evaluate
from .io import plot_series_svg, read_field, sparse_vector, write_field, write_json, write_trace_csv
from .mesh import ConformalFactor, load_mesh, refine
from .subgradient import generate_candidates, is_critical, validate_pairing

log = logging.getLogger("conformal_spectra")

SUBCOMMANDS = ("spectrum", "subgrad", "flow", "minmax", "diagnose")
EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 1, 2, 3


def build_mesh(mc):
    if mc.path:
        mesh = load_mesh(mc.path)
    elif mc.shape == "icosphere":
        mesh = shapes.icosphere(mc.size)
    elif mc.shape == "unit_disk":
        mesh = shapes.unit_disk(mc.size)
    elif mc.shape == "flat_torus":
        mesh = shapes.flat_torus(mc.size)
    elif mc.shape == "icosahedron":
        mesh = shapes.icosahedron()
    else:
        mesh = shapes.octahedron()
    return refine(mesh, mc.refine, sphere_project=mc.sphere_project)


def initial_factor(cfg, mesh, spec):
    fc = cfg.factor
    if fc.path:
        values = read_field(fc.path, mesh.n_vertices)
    elif fc.perturb:
        values = shapes.bump_factor(mesh, fc.perturb, fc.bumps, fc.width, seed=cfg.seed)
    else:
        values = np.ones(mesh.n_vertices)
    return ConformalFactor(values, spec.support)


def mesh_summary(mesh):
    return {
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
        "euler_characteristic": mesh.euler_characteristic(),
        "boundary_loops": len(mesh.boundary_loops),
    }


def _solver_kw(cfg):
    return dict(eig_tol=cfg.solver.eig_tol, cluster_tol=cfg.solver.cluster_tol, method=cfg.solver.method,
                seed=cfg.seed)


def _eigen_summary(eig):
    return {
        "values": eig.values,
        "renormalized": eig.renormalized,
        "residuals": eig.residuals,
        "clusters": [c.tolist() for c in eig.clusters],
        "total_measure": eig.total_measure,
    }


def cmd_spectrum(cfg, mesh, out):
    spec = cfg.functional_spec()
    f = initial_factor(cfg, mesh, spec)
    problem = build_problem(mesh, f, spec.kind)
    if cfg.output.dump_matrices:
        scipy.io.mmwrite(str(out / "stiffness.mtx"), problem.stiffness)
        scipy.io.mmwrite(str(out / "mass.mtx"), problem.mass)
    eig = solve(problem, cfg.solver.count, **_solver_kw(cfg))
    if cfg.output.fields:
        for k in range(1, min(eig.count, cfg.solver.count)):
            write_field(out / f"eigvec_{k}.field", eig.vectors[:, k])
    return {"kind": spec.kind, **_eigen_summary(eig)}


def _subgrad(cfg, mesh, f, spec):
    ev = evaluate(spec, mesh, f, **_solver_kw(cfg))
    sset = generate_candidates(ev.eigen, ev, samples=cfg.subgradient.samples, seed=cfg.seed,
                               max_cluster=cfg.subgradient.max_cluster)
    validate_pairing(sset)
    return ev, sset


def cmd_subgrad(cfg, mesh, out):
    spec = cfg.functional_spec()
    f = initial_factor(cfg, mesh, spec)
    ev, sset = _subgrad(cfg, mesh, f, spec)
    rep = is_critical(sset, cfg.subgradient.critical_tol, relative=cfg.subgradient.relative)
    if cfg.output.fields:
        write_field(out / "tau.field", rep.tau)
        write_field(out / "psi_canonical.field", sset.candidates[0].psi)
    return {
        "energy": ev.value,
        "renormalized": ev.renormalized,
        "pseudo_norm": rep.value,
        "tau": sparse_vector(rep.tau),
        "critical": rep.critical,
        "tolerance": rep.tol,
        "n_candidates": len(sset),
        "certificate": {
            "mixture": sparse_vector(rep.mixture),
            "mixture_sup": rep.mixture_sup,
            "nonnegative_mix": rep.nonnegative_mix,
            "zero_in_hull": rep.zero_in_hull,
        },
    }


def _trace_summary(trace):
    last = trace.records[-1]
    return {
        "status": trace.status,
        "steps": len(trace) - 1,
        "energy": last.energy,
        "pseudo_norm": last.pseudo_norm,
        "renormalized": last.renormalized,
        "ps_points": trace.ps_points,
        "energies": trace.energies,
        "pseudo_norms": trace.pseudo_norms,
    }


def _plots(out, traces, enabled):
    if not enabled:
        return
    e = {f"node {i}" if len(traces) > 1 else "E": (np.arange(len(t)), t.energies) for i, t in enumerate(traces)}
    p = {f"node {i}" if len(traces) > 1 else "|dE|": (np.arange(len(t)), np.maximum(t.pseudo_norms, 1e-300))
         for i, t in enumerate(traces)}
    plot_series_svg(out / "energy.svg", e, "E")
    plot_series_svg(out / "pseudo_norm.svg", p, "pseudo-norm", logy=True)


def cmd_flow(cfg, mesh, out):
    spec = cfg.functional_spec()
    f = initial_factor(cfg, mesh, spec)
    fc = cfg.flow_config()
    trace = run_flow(spec, mesh, f, fc)
    write_trace_csv(out / "trace.csv", trace)
    if cfg.output.fields:
        write_field(out / "factor_final.field", trace.final_factor.values)
        for rec in trace.records:
            if rec.factor is not None and fc.snapshot_every and rec.step % fc.snapshot_every == 0 and rec.step:
                write_field(out / f"factor_{rec.step:05d}.field", rec.factor)
    _plots(out, [trace], cfg.output.svg)
    return _trace_summary(trace)


def cmd_minmax(cfg, mesh, out):
    spec = cfg.functional_spec()
    start = initial_factor(cfg, mesh, spec).values
    mc = cfg.minmax
    if mc.end_path:
        end = read_field(mc.end_path, mesh.n_vertices)
    else:
        end = shapes.bump_factor(mesh, mc.end_perturb, cfg.factor.bumps, cfg.factor.width, seed=cfg.seed + 1)
    family = PathFamily.linear(start, end, mc.nodes)
    res = minmax_deform(spec, mesh, family, cfg.flow_config(), max_sweeps=mc.max_sweeps,
                        segment_samples=mc.segment_samples, level_eps=mc.level_eps,
                        check_endpoints=mc.check_endpoints, endpoint_tol=mc.endpoint_tol,
                        patience=mc.patience)
    write_trace_csv(out / "trace.csv", res.traces)
    if cfg.output.fields:
        for i, c in enumerate(res.ps_candidates):
            write_field(out / f"ps_candidate_{i}.field", c.factor)
    _plots(out, res.traces, cfg.output.svg and bool(res.traces))
    return {
        "c_estimate": res.c_estimate,
        "level_history": res.history,
        "ps_candidates": [
            {"position": c.position, "energy": c.energy, "pseudo_norm": c.pseudo_norm,
             "condition_margin": c.condition_margin, "condition_holds": c.condition_holds}
            for c in res.ps_candidates
        ],
        "node_status": [t.status for t in res.traces],
    }


def cmd_diagnose(cfg, mesh, out):
    spec = cfg.functional_spec()
    f = initial_factor(cfg, mesh, spec)
    kw = _solver_kw(cfg)
    kw["cluster_tol"] = max(cfg.diagnose.window, cfg.solver.cluster_tol)
    ev = evaluate(spec, mesh, f, **kw)
    rep = sphere_map_report(ev.eigen, ev, f, weights=cfg.diagnose.weights)
    ident = energy_identity_check(ev.eigen, ev, f)
    result = {
        "renormalized": ev.eigen.renormalized,
        "sphere_map": {
            "delta": rep.delta,
            "omega_energy": rep.omega_energy,
            "harmonic_residual": rep.harmonic_residual,
            "normalizations": rep.normalizations,
            "weights": rep.weights,
            "columns": rep.columns,
            "near_critical": rep.near_critical,
        },
        "energy_identity": {
            "dirichlet_energy": ident.dirichlet_energy,
            "mass_weighted_sum": ident.mass_weighted_sum,
            "gap": ident.gap,
        },
    }
    if spec.kind is Kind.LAPLACE:
        scan = bad_point_scan(mesh, f, ev.eigen, cfg.diagnose.radii, k_m=max(spec.indices),
                              max_centers=cfg.diagnose.max_centers)
        result["bad_points"] = {
            "radii": scan.radii,
            "n_centers": len(scan.centers),
            "threshold": scan.threshold,
            "hits": [list(h) for h in scan.hits],
            "disjoint_hits": [list(h) for h in scan.disjoint_hits],
            "k_m": scan.k_m,
            "bound_respected": scan.bound_respected,
            "skipped_balls": scan.skipped,
        }
    if cfg.output.fields:
        write_field(out / "omega.field", rep.omega)
    return result


COMMANDS = {
    "spectrum": cmd_spectrum,
    "subgrad": cmd_subgrad,
    "flow": cmd_flow,
    "minmax": cmd_minmax,
    "diagnose": cmd_diagnose,
}


def build_parser():
    p = argparse.ArgumentParser(prog="conformal-spectra",
                                description="Optimize Laplace and Steklov eigenvalues over conformal factors.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--mesh", help="ASCII OFF mesh (overrides the config)")
    p.add_argument("--shape", help="built-in mesh when no file is given")
    p.add_argument("--refine", type=int, help="midpoint subdivision levels")
    p.add_argument("--sphere-project", action="store_true", default=None,
                   help="project refined vertices to the unit sphere")
    p.add_argument("--kind", choices=("laplace", "steklov"))
    p.add_argument("--indices", help="eigenvalue indices, e.g. '1' or '1,2'")
    p.add_argument("--count", type=int, help="number of eigenpairs for 'spectrum'")
    p.add_argument("--eig-tol", type=float)
    p.add_argument("--ps-eps", type=float, help="Palais-Smale threshold for the flow")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--perturb", type=float, help="amplitude of the random bump factor")
    p.add_argument("--factor", help="initial factor as a .field file")
    p.add_argument("--dump-matrices", action="store_true", default=None,
                   help="write stiffness and mass as MatrixMarket files")
    p.add_argument("--no-svg", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    m = cfg.mesh
    if args.mesh:
        m.path = args.mesh
    if args.shape:
        m.shape, m.path = args.shape, None
    if args.refine is not None:
        m.refine = args.refine
    if args.sphere_project:
        m.sphere_project = True
    if args.kind:
        cfg.functional = {**cfg.functional, "kind": args.kind}
    if args.indices:
        try:
            cfg.functional = {**cfg.functional, "indices": tuple(int(x) for x in args.indices.replace(",", " ").split())}
        except ValueError:
            raise ConfigError(f"bad --indices {args.indices!r}") from None
    if args.count is not None:
        cfg.solver.count = args.count
    if args.eig_tol is not None:
        cfg.solver.eig_tol = args.eig_tol
    if args.ps_eps is not None:
        cfg.flow["ps_eps"] = args.ps_eps
    if args.max_steps is not None:
        cfg.flow["max_steps"] = args.max_steps
    if args.perturb is not None:
        cfg.factor.perturb = args.perturb
    if args.factor:
        cfg.factor.path = args.factor
    if args.dump_matrices:
        cfg.output.dump_matrices = True
    if args.no_svg:
        cfg.output.svg = False
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.outdir = args.out
    return cfg.validate()


def run(subcommand, cfg):
    """Execute one subcommand and write ``summary.json`` plus artifacts; returns the summary."""
    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = build_mesh(cfg.mesh)
    result = COMMANDS[subcommand](cfg, mesh, out)
    summary = {
        "subcommand": subcommand,
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "mesh": mesh_summary(mesh),
        "result": result,
    }
    write_json(out / "summary.json", summary)
    return summary


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        run(args.subcommand, cfg)
    except (ConfigError, NoBoundary) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ParseError, TopologyError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
