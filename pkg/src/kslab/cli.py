"""Command-line front end.

Usage::

    kslab dispersion|simulate|experiment|sweep [--config PATH] [--out PATH]
          [--seed INT] [--key value ...]

The config file is flat ``key = value`` text (``#`` starts a comment);
``--key value`` on the command line overrides it.  Output is CSV with a
``#``-prefixed header of constants; floats carry 17 significant digits.

Exit codes: 0 success, 2 configuration error, 3 blow-up, 4 internal
numerical contradiction.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import dispersion, experiment, nonlinear, spectral
from .errors import (
    BadAmplitude,
    BlowUp,
    KSError,
    NumericalContradiction,
    StableRegime,
)
from .model import ModelParams, critical_wavenumber_squared, validate
from .spectral import SpectralField

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NUMERICAL = 0, 2, 3, 4
COMMANDS = ("dispersion", "simulate", "experiment", "sweep")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    mu: float = 1.0
    chi: float = 1.0
    D: float = 1.0
    f: float = 1.0
    k: float = 1.0
    U_bar: float = 3.0
    d: int = 2
    N: int = 16
    M: int | None = None
    dt: float | None = None
    t_end: float = 1.0
    dealias: str = "two-thirds"
    integrator: str = "imex-rk2"
    delta: float = 1e-3
    deltas: str | None = None
    theta_override: float | None = None
    w0: str = "dominant"
    w0_coeffs: str | None = None
    q0: str | None = None
    C0_override: float | None = None
    C1_override: float | None = None
    samples: int = 64
    quad_dt: float = 1e-2
    delta0: float | None = None
    t_budget: float | None = None
    sample_every: int = 100
    out: str = "-"
    seed: int = 0

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.mu, self.chi, self.D, self.f, self.k, self.U_bar, self.d)

    def solver(self, lambda_max: float) -> nonlinear.SolverConfig:
        dt = self.dt if self.dt is not None else nonlinear.default_dt(lambda_max)
        return nonlinear.SolverConfig(
            N=self.N, M=self.M, dt=dt, t_end=self.t_end, dealias=self.dealias, integrator=self.integrator
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    optional = "None" in kind
    if optional and text.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("float"):
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        if kind.startswith("int"):
            return int(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.split()[0]}") from None
    return text


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = raw
    return values


def _parse_overrides(tokens) -> dict:
    values = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
        else:
            try:
                raw = next(it)
            except StopIteration:
                raise ConfigError(f"{key}: missing value") from None
        values[key] = raw
    return values


def build_config(values: dict) -> RunConfig:
    kwargs = {}
    for key, raw in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown configuration key")
        kwargs[key] = _convert(key, raw)
    cfg = RunConfig(**kwargs)
    try:
        validate(cfg.params)
    except KSError as exc:
        raise ConfigError(str(exc)) from None
    for name in ("N", "samples", "sample_every"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name}: must be >= 1")
    if cfg.w0 not in ("dominant", "random", "list"):
        raise ConfigError(f"w0: must be dominant, random or list (got {cfg.w0!r})")
    return cfg


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(buf, header: list, columns: list, rows):
    for key, value in header:
        buf.write(f"# {key}={fmt(value)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")


def _emit(cfg: RunConfig, text: str):
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _param_header(cfg: RunConfig):
    p = cfg.params
    return [(name, getattr(p, name)) for name in ("mu", "chi", "D", "f", "k", "U_bar", "d")] + [
        ("V_bar", p.V_bar)
    ]


def parse_coeffs(text: str, N: int, d: int) -> SpectralField:
    """Parse ``u:1,0=0.5; v:1,0=0.25`` into a coefficient field."""
    field = SpectralField.zeros(N, d)
    for item in filter(None, (s.strip() for s in text.split(";"))):
        try:
            comp, rest = item.split(":", 1)
            idx, val = rest.split("=", 1)
            q = tuple(int(i) for i in idx.split(","))
            comp = comp.strip()
            value = float(val)
        except ValueError:
            raise ConfigError(f"w0_coeffs: cannot parse entry {item!r}") from None
        if comp not in ("u", "v") or len(q) != d or min(q) < 0 or max(q) > N:
            raise ConfigError(f"w0_coeffs: bad entry {item!r} for N={N}, d={d}")
        getattr(field, comp)[q] = value
    return field


def initial_field(cfg: RunConfig, spec) -> SpectralField:
    """Unit-L2 initial profile w0 described by the config."""
    N, d = cfg.N, cfg.d
    if cfg.w0 == "dominant":
        q0 = None
        if cfg.q0:
            q0 = tuple(int(i) for i in cfg.q0.split(","))
            if q0 not in spec.omega_max:
                raise ConfigError(f"q0: {q0} is not a fastest-growing mode")
        return experiment.dominant_mode_field(spec, q0, N=N)
    if cfg.w0 == "random":
        rng = np.random.default_rng(cfg.seed)
        q2 = spectral.wavenumber_squared(N, d)
        decay = 1.0 / (1.0 + q2) ** 2
        w = SpectralField(rng.standard_normal(q2.shape) * decay, rng.standard_normal(q2.shape) * decay)
    else:
        if not cfg.w0_coeffs:
            raise ConfigError("w0_coeffs: required when w0 = list")
        w = parse_coeffs(cfg.w0_coeffs, N, d)
    norm = spectral.l2_norm(w)
    if norm == 0:
        raise ConfigError("w0_coeffs: initial field is zero")
    return w * (1.0 / norm)


def cmd_dispersion(cfg: RunConfig) -> int:
    p = cfg.params
    spec = dispersion.spectrum_summary(p, cfg.N)
    q2c = critical_wavenumber_squared(p)
    header = _param_header(cfg) + [
        ("N", cfg.N),
        ("q2_critical", q2c),
        ("lambda_max", spec.lambda_max),
        ("nu", spec.nu),
        ("unstable_count", len(spec.unstable)),
        ("omega_max_count", len(spec.omega_max)),
        ("omega_max", " ".join(",".join(map(str, q)) for q in sorted(spec.omega_max))),
    ]
    columns = [f"q{i + 1}" for i in range(p.d)] + ["q_squared", "lambda_minus", "lambda_plus", "r_plus_1"]
    rows = []
    for q in spectral.modes(cfg.N, p.d):
        rows.append(
            list(q)
            + [int(spec.q2[q]), spec.lambda_minus[q], spec.lambda_plus[q], spec.rho_plus[q]]
        )
    buf = io.StringIO()
    _write_csv(buf, header, columns, rows)
    _emit(cfg, buf.getvalue())
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    p = cfg.params
    spec = dispersion.spectrum_summary(p, cfg.N, check_band=False)
    solver = cfg.solver(spec.lambda_max)
    w0 = initial_field(cfg, spec)
    status = "completed"
    try:
        traj = nonlinear.simulate(cfg.delta * w0, p, solver, sample_every=cfg.sample_every)
    except BlowUp as exc:
        traj = exc.trajectory
        status = "blow-up"
    idx = spectral.modes(cfg.N, cfg.d)
    tag = ["_".join(map(str, q)) for q in idx]
    columns = ["t", "mass", "l2", "h2"] + [f"u_{s}" for s in tag] + [f"v_{s}" for s in tag]
    rows = []
    for t, s, m in zip(traj.times, traj.states, traj.masses):
        rows.append([t, m, spectral.l2_norm(s), spectral.h2_norm(s)] + list(s.u.ravel()) + list(s.v.ravel()))
    header = _param_header(cfg) + [
        ("N", solver.N),
        ("M", solver.M),
        ("dt", solver.dt),
        ("t_end", solver.t_end),
        ("delta", cfg.delta),
        ("status", status),
    ]
    buf = io.StringIO()
    _write_csv(buf, header, columns, rows)
    _emit(cfg, buf.getvalue())
    return EXIT_OK if status == "completed" else EXIT_BLOWUP


REPORT_COLUMNS = [
    "t",
    "l2",
    "h2",
    "gap_ratio",
    "bracket",
    "duhamel_residual",
    "energy",
    "linear_deviation",
    "mass",
    "status",
]


def _prepare_experiment(cfg: RunConfig):
    p = cfg.params
    spec = dispersion.spectrum_summary(p, cfg.N)
    if not spec.lambda_max > 0:
        raise StableRegime(f"lambda_max = {spec.lambda_max:.6g} <= 0: nothing grows")
    consts = experiment.default_constants(
        p,
        spec,
        C0=cfg.C0_override,
        C1=cfg.C1_override,
        theta_override=cfg.theta_override,
        seed=cfg.seed,
    )
    return p, spec, cfg.solver(spec.lambda_max), consts, initial_field(cfg, spec)


def _run_one(cfg, delta, p, spec, solver, consts, w0):
    try:
        return experiment.run(
            delta,
            w0,
            p,
            solver,
            consts,
            spectrum=spec,
            t_budget=cfg.t_budget,
            n_samples=cfg.samples,
            quad_dt=cfg.quad_dt,
            delta0=cfg.delta0,
        )
    except BlowUp as exc:
        return exc.report


def _constants_header(consts):
    return [(f.name, getattr(consts, f.name)) for f in dataclasses.fields(consts)]


def _report_header(report):
    return [
        ("delta", report.delta),
        ("T_delta", report.T_delta),
        ("t_stop", report.t_stop),
        ("w0_l2", report.w0_l2),
        ("w0_h2", report.w0_h2),
        ("fitted_C", report.fitted_C),
        ("T_star", report.T_star),
        ("T_star_star", report.T_star_star),
        ("energy_fraction", report.energy_fraction),
        ("status", report.status),
    ]


def _report_rows(report, prefix=()):
    for i, t in enumerate(report.times):
        yield list(prefix) + [
            t,
            report.l2_series[i],
            report.h2_series[i],
            report.gap_ratio[i],
            report.bracket[i],
            report.duhamel_residual[i],
            report.energy_series[i],
            report.linear_deviation[i],
            report.mass_series[i],
            report.status,
        ]


def cmd_experiment(cfg: RunConfig) -> int:
    p, spec, solver, consts, w0 = _prepare_experiment(cfg)
    experiment.escape_time(cfg.delta, consts.theta, spec.lambda_max)
    report = _run_one(cfg, cfg.delta, p, spec, solver, consts, w0)
    header = _param_header(cfg) + [("N", solver.N), ("M", solver.M), ("dt", solver.dt)]
    header += _constants_header(consts) + _report_header(report)
    header += [("note", n) for n in report.notes]
    buf = io.StringIO()
    _write_csv(buf, header, REPORT_COLUMNS, _report_rows(report))
    _emit(cfg, buf.getvalue())
    return EXIT_OK if report.status != "blow-up" else EXIT_BLOWUP


def parse_deltas(text) -> list:
    if text is None:
        return []
    try:
        return [float(s) for s in text.replace(";", ",").split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"deltas: cannot parse {text!r}") from None


def cmd_sweep(cfg: RunConfig, deltas=None) -> int:
    deltas = parse_deltas(cfg.deltas) if deltas is None else list(deltas)
    if not deltas:
        raise ConfigError("deltas: empty amplitude list")
    p, spec, solver, consts, w0 = _prepare_experiment(cfg)
    for delta in deltas:
        experiment.escape_time(delta, consts.theta, spec.lambda_max)
    reports = [_run_one(cfg, delta, p, spec, solver, consts, w0) for delta in deltas]

    header = _param_header(cfg) + [("N", solver.N), ("M", solver.M), ("dt", solver.dt)]
    header += _constants_header(consts)
    for i, r in enumerate(reports):
        header.append(
            (
                f"run{i}",
                f"delta={fmt(r.delta)} status={r.status} fitted_C={fmt(r.fitted_C)} "
                f"T_delta={fmt(r.T_delta)} final_l2={fmt(r.l2_series[-1])}",
            )
        )
    fitted = [r.fitted_C for r in reports if r.status != "blow-up"]
    if fitted:
        header.append(("fitted_C_spread", max(fitted) / min(fitted)))
    rows = (row for r in reports for row in _report_rows(r, prefix=(r.delta,)))
    buf = io.StringIO()
    _write_csv(buf, header, ["delta"] + REPORT_COLUMNS, rows)
    _emit(cfg, buf.getvalue())
    return EXIT_OK if fitted else EXIT_BLOWUP


HANDLERS = {
    "dispersion": cmd_dispersion,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
}


def make_parser():
    parser = argparse.ArgumentParser(
        prog="kslab",
        description="Keller-Segel linear/nonlinear instability laboratory.",
        epilog="Any configuration key may be given as --key value.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value configuration file")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args, rest = parser.parse_known_args(argv)
    try:
        values = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    values.update(parse_config_text(fh.read()))
            except OSError as exc:
                raise ConfigError(f"config: {exc}") from None
        values.update(_parse_overrides(rest))
        cfg = build_config(values)
        return HANDLERS[args.command](cfg)
    except (ConfigError, BadAmplitude, StableRegime, ValueError) as exc:
        print(f"kslab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalContradiction as exc:
        print(f"kslab: numerical contradiction: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KSError as exc:
        print(f"kslab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
