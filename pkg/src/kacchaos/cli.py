"""Command line entry point.

Every run is configured by a flat ``key = value`` file (``--config``) plus
command line overrides, and every random stream is derived from ``seed``.
The effective configuration is written next to the outputs as ``config.txt``;
passing that file back with ``--config`` reproduces the run byte for byte.

Exit codes: 0 ok, 1 usage, 2 condition validation failed, 3 numerical
failure, 4 statistical test failed.
"""

import argparse
import dataclasses
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .chaos import REPORT_HEADER, Budget, ReportRow, chaoticity_test, ks_distance, propagation_test
from .energy import get_energy
from .equilibrium import (equilibrium_law, select_prefactor, solve_z0, z_asymptotic,
                          z_bruteforce, z_exact_classical)
from .errors import (ContractError, DomainError, KacError, NumericError, StatisticalTestFailure,
                     ValidationError)
from .kacwalk import init_microcanonical, simulate
from .meanfield import equilibrium_sampler, mf_solve, normal_sampler, uniform_sampler
from .numerics import QuadratureSpec
from .planar import (PlanarLaw, PlanarEnergy, sample_planar, solve_z0_2d, z_asymptotic_2d,
                     z_exact_planar_classical)
from .streams import chain_stream, make_stream

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_STATISTICAL = 0, 1, 2, 3, 4
OUTPUT_ENV = "KACCHAOS_OUTPUT_DIR"

# stream keys per subcommand, so different commands never share numbers
STREAM_KEYS = {"walk": 1, "meanfield": 2, "chaos": 3, "propagation": 4, "planar-sample": 5}


@dataclass
class RunConfig:
    energy: str = "classical"
    N: tuple = (1000,)
    seed: int = 20240101
    t_end: float = 1.0
    steps: int = 1_000_000
    chains: int = 1
    workers: int = 1
    snapshot_times: tuple = ()
    output_dir: str = "kacchaos-output"
    relative_tolerance: float = 1e-10
    absolute_tolerance: float = 1e-14
    rate_constant: float = 2.0
    dt: float = 0.01
    M: int = 100_000
    k: int = 1
    f0: str = "uniform"
    burn_in: int = -1
    samples: int = 100_000
    batches: int = 20
    sweeps: float = 1.0
    correction: str = "metropolis"
    p: tuple = (0.0, 0.0)
    scaled_momentum: bool = False
    planar: bool = False
    svg: bool = True

    def validate(self):
        if any(n < 2 for n in self.N):
            raise DomainError("N must be >= 2")
        if self.chains < 1 or self.workers < 1:
            raise DomainError("chains and workers must be >= 1")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.correction not in ("metropolis", "none"):
            raise DomainError("correction must be metropolis or none")
        if self.f0 not in SAMPLERS:
            raise DomainError(f"f0 must be one of {sorted(SAMPLERS)}")
        if len(self.p) != 2:
            raise DomainError("p needs two components")
        return self

    @property
    def quadrature(self):
        return QuadratureSpec(self.relative_tolerance, self.absolute_tolerance)

    @property
    def burn(self):
        return None if self.burn_in < 0 else self.burn_in

    @property
    def budget(self):
        return Budget(samples=self.samples, batches=self.batches, sweeps=self.sweeps,
                      burn_in=self.burn, mf_particles=self.M, mf_dt=self.dt)


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_ELEM = {"N": int, "snapshot_times": float, "p": float}


def _parse_bool(s):
    s = str(s).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {s!r}")


def convert(name, raw):
    """Typed value for config key ``name`` from a string or list of strings."""
    f = FIELDS.get(name)
    if f is None:
        raise DomainError(f"unknown config key {name!r}")
    if f.type is tuple:
        items = raw if isinstance(raw, (list, tuple)) else str(raw).replace(",", " ").split()
        return tuple(_ELEM[name](x) for x in items)
    if f.type is bool:
        return _parse_bool(raw)
    if f.type is int:
        return int(float(raw)) if "e" in str(raw).lower() else int(raw)
    return f.type(raw)


def read_config(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{n}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = convert(k, v)
    return out


def config_lines(cfg: RunConfig):
    def show(v):
        if isinstance(v, tuple):
            return " ".join(io.fmt(x) for x in v)
        return io.fmt(v)

    return {k: show(getattr(cfg, k)) for k in FIELDS}


# -- commands ----------------------------------------------------------------

SAMPLERS = {
    "uniform": lambda e, sol: uniform_sampler(),
    "normal": lambda e, sol: normal_sampler(),
    "equilibrium": lambda e, sol: equilibrium_sampler(sol, e),
}


def _energy(cfg):
    return get_energy(cfg.energy)


def _saddle(cfg, e):
    return solve_z0(e, cfg.quadrature)


def cmd_z0(cfg, out: Path):
    e = _energy(cfg)
    if cfg.planar:
        return cmd_planar_z0(cfg, out)
    sol = _saddle(cfg, e)
    io.write_saddle(out / "saddle.csv", sol)
    kv = dict(sol.as_row(), S_z0=sol.S_z0, residual=sol.residual, bound_b=sol.bound_b,
              bound_K=sol.bound_K)
    io.write_kv(out / "saddle.txt", kv)
    print(f"z0={sol.z0:.12g} C={sol.C:.12g} integral={sol.integral_value:.12g}")
    return EXIT_OK


def _walk_chain(args):
    cfg, c = args
    e = _energy(cfg)
    sol = _saddle(cfg, e)
    N = cfg.N[0]
    rng = chain_stream(cfg.seed, c, STREAM_KEYS["walk"])
    burn = 100 * N if cfg.burn is None else cfg.burn
    state = init_microcanonical(e, N, sol, burn, rng, correction=cfg.correction)
    times = cfg.snapshot_times or (cfg.t_end,)
    tr = simulate(state, cfg.t_end, rng, snapshot_times=times)
    return tr.snapshots, tr.summary


def cmd_walk(cfg, out: Path):
    jobs = [(cfg, c) for c in range(cfg.chains)]
    if cfg.workers > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_walk_chain, jobs))
    else:
        results = [_walk_chain(j) for j in jobs]
    e = _energy(cfg)
    sol = _saddle(cfg, e)
    law = equilibrium_law(sol, e)
    rows = []
    for c, (snaps, summary) in enumerate(results):
        suffix = "" if cfg.chains == 1 else f"_chain{c}"
        io.write_csv(out / f"walk_snapshots{suffix}.csv", ("time", "particle_index", "velocity"),
                     io.snapshot_rows(snaps))
        io.write_csv(out / f"walk_summary{suffix}.csv", ("time", "collisions", "total_energy"), summary)
    pooled = np.concatenate([s.velocities for snaps, _ in results for s in snaps[-1:]])
    ks = ks_distance(pooled, law.cdf)
    rows.append(ReportRow("walk", e.name, cfg.N[0], 1, cfg.t_end, "ks_final", ks, math.nan,
                          ks < 1.95 / math.sqrt(len(pooled)) + 0.01))
    io.write_csv(out / "walk_report.csv", REPORT_HEADER, [r.as_tuple() for r in rows])
    if cfg.svg:
        io.write_text(out / "walk.svg", io.histogram_overlay(
            pooled, law.pdf, title=f"{e.name} walk, N={cfg.N[0]}, t={cfg.t_end:g}"))
    print(f"final-snapshot KS to equilibrium: {ks:.4g} ({len(pooled)} samples)")
    return EXIT_OK


def cmd_meanfield(cfg, out: Path):
    e = _energy(cfg)
    sol = _saddle(cfg, e)
    law = equilibrium_law(sol, e)
    rng = make_stream(cfg.seed, STREAM_KEYS["meanfield"])
    times = cfg.snapshot_times or (cfg.t_end,)
    ens = mf_solve(e, SAMPLERS[cfg.f0](e, sol), cfg.M, cfg.t_end, rng, dt=cfg.dt,
                   rate_constant=cfg.rate_constant, snapshot_times=times,
                   correction=cfg.correction)
    io.write_csv(out / "meanfield_snapshots.csv", ("time", "particle_index", "velocity"),
                 io.snapshot_rows(ens.snapshots))
    summary, rows = [], []
    for s in ens.snapshots:
        summary.append((s.time, s.collisions, s.total_energy))
        ks = ks_distance(s.velocities, law.cdf)
        rows.append(ReportRow("meanfield", e.name, cfg.M, 1, s.time, "ks_equilibrium", ks,
                              math.nan, ks < 0.01))
    io.write_csv(out / "meanfield_summary.csv", ("time", "collisions", "total_energy"), summary)
    io.write_csv(out / "meanfield_report.csv", REPORT_HEADER, [r.as_tuple() for r in rows])
    if cfg.svg and ens.snapshots:
        io.write_text(out / "meanfield.svg", io.histogram_overlay(
            ens.snapshots[-1].velocities, law.pdf, title=f"{e.name} mean field, t={cfg.t_end:g}"))
    for r in rows:
        print(f"t={r.t:g} KS to equilibrium: {r.value:.4g}")
    return EXIT_OK


def _write_report(out, name, rep):
    io.write_csv(out / f"{name}.csv", REPORT_HEADER, [r.as_tuple() for r in rep.rows])
    for r in rep.rows:
        print(f"N={r.N} {r.metric}={r.value:.4g} +- {r.stderr:.2g}")
    print(f"{rep.test}: {'pass' if rep.passed else 'fail'}")


def cmd_chaos(cfg, out: Path):
    e = _energy(cfg)
    sol = _saddle(cfg, e)
    rng = make_stream(cfg.seed, STREAM_KEYS["chaos"])
    rep = chaoticity_test(e, sol, cfg.N, cfg.k, cfg.budget, rng, correction=cfg.correction)
    _write_report(out, "chaos_report", rep)
    if cfg.svg:
        series = {}
        for m in sorted({r.metric for r in rep.rows}):
            xs, ys, es = rep.series(m)
            series[m] = (xs, ys, es)
        io.write_text(out / "chaos.svg", io.line_chart(
            series, title=f"{e.name} chaoticity, k={cfg.k}", xlabel="N", ylabel="distance",
            logx=True))
    return EXIT_OK if rep.passed else EXIT_STATISTICAL


def cmd_propagation(cfg, out: Path):
    e = _energy(cfg)
    sol = _saddle(cfg, e)
    rng = make_stream(cfg.seed, STREAM_KEYS["propagation"])
    rep = propagation_test(e, SAMPLERS[cfg.f0](e, sol), cfg.N, cfg.t_end, cfg.budget, rng,
                           correction=cfg.correction)
    _write_report(out, "propagation_report", rep)
    if cfg.svg:
        io.write_text(out / "propagation.svg", io.line_chart(
            {"w1": rep.series("w1")}, title=f"{e.name} propagation, t={cfg.t_end:g}",
            xlabel="N", ylabel="W1 to mean field", logx=True))
    return EXIT_OK if rep.passed else EXIT_STATISTICAL


def cmd_asymptotics(cfg, out: Path):
    e = _energy(cfg)
    sol = _saddle(cfg, e)
    name, errs = select_prefactor()
    rows = []
    for N in cfg.N:
        a = z_asymptotic(e, N, sol)
        if e.name == "classical":
            ex, how = z_exact_classical(N).log, "sphere"
        elif N <= 8:
            ex, how = z_bruteforce(e, N, float(N)).log, "convolution"
        else:
            ex, how = math.nan, "none"
        rows.append((N, a.log, ex, math.exp(a.log - ex) if math.isfinite(ex) else math.nan,
                     a.prefactor, how))
    io.write_csv(out / "asymptotics.csv",
                 ("N", "log_Z_asymptotic", "log_Z_exact", "ratio", "prefactor", "oracle"), rows)
    io.write_csv(out / "prefactor.csv", ("candidate", "relative_error_N50", "selected"),
                 [(k, v, k == name) for k, v in errs.items()])
    for r in rows:
        print(f"N={r[0]} ratio={r[3]:.6g}")
    if cfg.svg:
        good = [r for r in rows if math.isfinite(r[3])]
        if good:
            io.write_text(out / "asymptotics.svg", io.line_chart(
                {"ratio": ([r[0] for r in good], [r[3] for r in good], None)},
                title=f"{e.name}: asymptotic / exact Z", xlabel="N", ylabel="ratio", logx=True))
    return EXIT_OK


def _planar(cfg):
    return PlanarEnergy(_energy(cfg))


def cmd_planar_z0(cfg, out: Path):
    pe = _planar(cfg)
    sad = solve_z0_2d(pe, cfg.quadrature)
    io.write_saddle(out / "planar_saddle.csv", sad)
    rows = []
    for N in cfg.N:
        a = z_asymptotic_2d(pe, N, cfg.p, sad)
        ex = z_exact_planar_classical(N, cfg.p).log if pe.name == "classical" else math.nan
        rows.append((N, a.log, ex, math.exp(a.log - ex) if math.isfinite(ex) else math.nan))
    io.write_csv(out / "planar_asymptotics.csv", ("N", "log_Z_asymptotic", "log_Z_exact", "ratio"),
                 rows)
    print(f"z0_2d={sad.z0:.12g} C2={sad.C2:.12g} hessian_det={sad.hessian_det:.12g}")
    return EXIT_OK


def cmd_planar_sample(cfg, out: Path):
    pe = _planar(cfg)
    sad = solve_z0_2d(pe, cfg.quadrature)
    N = cfg.N[0]
    # scaled_momentum reads p per particle, i.e. a total momentum of N p
    p = np.asarray(cfg.p) * (N if cfg.scaled_momentum else 1.0)
    rng = make_stream(cfg.seed, STREAM_KEYS["planar-sample"])
    run = sample_planar(pe, N, p, sad, cfg.steps, rng, pool=cfg.samples)
    io.write_csv(out / "planar_snapshots.csv", ("time", "particle_index", "vx", "vy"),
                 io.planar_snapshot_rows([(float(cfg.steps), run.state.velocities)]))
    io.write_saddle(out / "planar_saddle.csv", sad)
    t = float(cfg.steps)
    rows = [
        ReportRow("planar", pe.name, N, 1, t, "ks_component", run.component.ks, math.nan,
                  run.component.threshold_pass),
        ReportRow("planar", pe.name, N, 1, t, "ks_radial", run.radial.ks, math.nan,
                  run.radial.threshold_pass),
        ReportRow("planar", pe.name, N, 1, t, "acceptance_ratio", run.acceptance_ratio, math.nan,
                  True),
        ReportRow("planar", pe.name, N, 1, t, "mean_vx", run.mean_components[0], math.nan, True),
        ReportRow("planar", pe.name, N, 1, t, "mean_vy", run.mean_components[1], math.nan, True),
        ReportRow("planar", pe.name, N, 1, t, "max_energy_residual", run.max_energy_residual,
                  math.nan, run.max_energy_residual <= 1e-10),
        ReportRow("planar", pe.name, N, 1, t, "max_momentum_residual", run.max_momentum_residual,
                  math.nan, run.max_momentum_residual <= 1e-12),
    ]
    io.write_csv(out / "planar_report.csv", REPORT_HEADER, [r.as_tuple() for r in rows])
    if cfg.svg:
        law = PlanarLaw(pe, sad)
        grid = np.linspace(-law.rmax, law.rmax, 4001)
        dens = np.gradient(law.component_cdf(grid), grid)
        io.write_text(out / "planar.svg", io.histogram_overlay(
            run.state.velocities.ravel(), lambda x: np.interp(x, grid, dens),
            title=f"{pe.name} planar components, N={N}"))
    for r in rows:
        print(f"{r.metric}={r.value:.4g}")
    return EXIT_OK


COMMANDS = {
    "z0": cmd_z0,
    "walk": cmd_walk,
    "meanfield": cmd_meanfield,
    "chaos": cmd_chaos,
    "propagation": cmd_propagation,
    "asymptotics": cmd_asymptotics,
    "planar-z0": cmd_planar_z0,
    "planar-sample": cmd_planar_sample,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="kacchaos", description="Kac walks with a general particle energy.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value configuration file")
        for f in dataclasses.fields(RunConfig):
            flag = "--" + f.name.replace("_", "-")
            if f.type is tuple:
                sp.add_argument(flag, dest=f.name, nargs="+", default=None)
            elif f.type is bool:
                sp.add_argument(flag, dest=f.name, nargs="?", const="true", default=None)
            else:
                sp.add_argument(flag, dest=f.name, default=None)
    return parser


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then the output-dir variable, then flags."""
    values = {}
    if args.config:
        values.update(read_config(args.config))
    if os.environ.get(OUTPUT_ENV):
        values["output_dir"] = os.environ[OUTPUT_ENV]
    for name in FIELDS:
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = convert(name, raw)
    return RunConfig(**values).validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (DomainError, ValueError, OSError) as exc:
        print(f"kacchaos: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_kv(out / "config.txt", config_lines(cfg))
    try:
        return COMMANDS[args.command](cfg, out)
    except ValidationError as exc:
        print(f"kacchaos: validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StatisticalTestFailure as exc:
        print(f"kacchaos: statistical test failed: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL
    except (NumericError, ContractError, FloatingPointError) as exc:
        print(f"kacchaos: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, OSError) as exc:
        print(f"kacchaos: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KacError as exc:
        print(f"kacchaos: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
