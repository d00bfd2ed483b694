"""Escape-time experiment: nonlinear evolution of a small perturbation compared
against its fastest-growing linear modes, plus the energy/bootstrap diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .dispersion import SpectrumSummary, growth_constant_estimate, spectrum_summary
from .errors import BadAmplitude, BlowUp, InsufficientSamples, StableRegime
from .linprop import dominant_projection, propagate
from .model import ModelParams, validate
from .nonlinear import SolverConfig, Stepper, Trajectory, nonlinear_term, simulate
from .spectral import SpectralField

ENERGY_SLACK = 0.05
SAFETY_C0 = 2.0
SAFETY_C1 = 2.0


@dataclass(frozen=True)
class TheoremConstants:
    """Constants of the tracking estimate for one parameter set.

    ``C1_hat`` is the growth constant actually used (already including any
    safety factor).  ``theta`` is either half of the largest amplitude allowed
    by C0*C3*theta < min(lambda_max/4, mu/8, (U chi)^2/(4 mu)) or a
    user-supplied override, flagged by ``theta_overridden``.
    """

    A: float
    C2: float
    C1_hat: float
    C3: float
    C0: float
    theta: float
    nu: float
    lambda_max: float
    theta_bound: float
    theta_overridden: bool = False


def energy_weight(params: ModelParams) -> float:
    return (params.U_bar * params.chi) ** 2 / (params.D * params.mu)


def energy_forcing(params: ModelParams) -> float:
    p = params
    return (p.U_bar * p.chi * p.f) ** 6 / (2.0 * p.D**3 * p.mu**5 * p.k**3)


def smallness_threshold(params: ModelParams, C0: float) -> float:
    return min(params.mu / 4, (params.U_bar * params.chi) ** 2 / (2 * params.mu)) / C0


def constants(
    params: ModelParams,
    spectrum: SpectrumSummary,
    C0: float,
    C1: float,
    theta_override: float | None = None,
) -> TheoremConstants:
    validate(params)
    lam = spectrum.lambda_max
    if not lam > 0:
        raise StableRegime(f"lambda_max = {lam:.6g} <= 0: no growing mode")
    A = energy_weight(params)
    C2 = energy_forcing(params)
    C3 = C1**2 * max(A, 1.0 / A) * max(4.0 * C2 / lam, 1.0)
    bound = min(lam / 4, params.mu / 8, (params.U_bar * params.chi) ** 2 / (4 * params.mu)) / (C0 * C3)
    theta = 0.5 * bound if theta_override is None else float(theta_override)
    return TheoremConstants(
        A=A,
        C2=C2,
        C1_hat=C1,
        C3=C3,
        C0=C0,
        theta=theta,
        nu=spectrum.nu,
        lambda_max=lam,
        theta_bound=bound,
        theta_overridden=theta_override is not None,
    )


def default_constants(params, spectrum, *, C0=None, C1=None, theta_override=None, seed=0):
    """Constants with the empirical C0 and C1 probes (times their safety factors)
    filled in where not given."""
    if C0 is None:
        C0 = SAFETY_C0 * sobolev_constant_probe(8, 200, d=params.d, seed=seed)
    if C1 is None:
        C1 = SAFETY_C1 * growth_constant_estimate(params, min(spectrum.N, 8), 200, seed=seed)
    return constants(params, spectrum, C0, C1, theta_override)


def escape_time(delta: float, theta: float, lambda_max: float) -> float:
    """Time at which delta * exp(lambda_max t) reaches theta."""
    if not 0 < delta < theta:
        raise BadAmplitude(f"need 0 < delta < theta (delta={delta!r}, theta={theta!r})")
    if not lambda_max > 0:
        raise StableRegime(f"lambda_max = {lambda_max!r} <= 0")
    return math.log(theta / delta) / lambda_max


def dominant_mode_field(spectrum: SpectrumSummary, q0=None, N: int | None = None) -> SpectralField:
    """r_plus(q0) e_{q0}, normalised to unit L^2 norm; q0 defaults to the
    smallest index in omega_max."""
    N = spectrum.N if N is None else N
    if q0 is None:
        q0 = min(spectrum.omega_max, key=lambda q: tuple(reversed(q)))
    w = SpectralField.from_modes(N, spectrum.d, {q0: spectrum.pair(q0).r_plus})
    return w * (1.0 / spectral.l2_norm(w))


def energy_series(states, A: float) -> np.ndarray:
    """Second-order energy sum_{i,j} int |d_i d_j u|^2 + A |d_i d_j v|^2."""
    if not states:
        return np.array([])
    q2, gamma = spectral._mode_tables(states[0].N, states[0].d)
    w = q2**2 * gamma
    return np.array([float(np.sum(w * (s.u**2 + A * s.v**2))) for s in states])


@dataclass
class EnergyDiagnostic:
    times: np.ndarray
    E2: np.ndarray
    lhs: np.ndarray  # 1/2 dE2/dt at interior points (centred difference)
    rhs: np.ndarray  # C2 ||u||^2 at interior points
    applicable: np.ndarray  # H^2 smallness hypothesis holds
    holds: np.ndarray

    @property
    def fraction_holding(self) -> float:
        n = int(self.applicable.sum())
        if n == 0:
            return 1.0
        return float((self.holds & self.applicable).sum()) / n


def energy_diagnostic(trajectory: Trajectory, params: ModelParams, consts: TheoremConstants) -> EnergyDiagnostic:
    times = np.asarray(trajectory.times, dtype=float)
    E2 = energy_series(trajectory.states, consts.A)
    interior = slice(1, len(times) - 1)
    if len(times) < 3:
        empty = np.array([])
        return EnergyDiagnostic(times, E2, empty, empty, empty.astype(bool), empty.astype(bool))
    lhs = 0.5 * (E2[2:] - E2[:-2]) / (times[2:] - times[:-2])
    u_sq = np.array([spectral.l2_norm(SpectralField(s.u, np.zeros_like(s.v))) ** 2 for s in trajectory.states])
    rhs = consts.C2 * u_sq[interior]
    h2 = np.array([spectral.h2_norm(s) for s in trajectory.states])[interior]
    applicable = h2 <= smallness_threshold(params, consts.C0)
    holds = lhs <= (1.0 + ENERGY_SLACK) * rhs
    return EnergyDiagnostic(times, E2, lhs, rhs, applicable, holds)


def duhamel_residual(
    trajectory: Trajectory,
    params: ModelParams,
    spectrum: SpectrumSummary,
    quad_dt: float,
    cfg: SolverConfig | None = None,
):
    """Defect of the variation-of-constants formula along a trajectory.

    At each used sample t_n returns ||w(t_n) - e^{L t_n} w(0) - I_n|| where
    I_n approximates int_0^t e^{L(t-s)} N(w(s)) ds by the composite trapezoid
    rule, N being the chemotactic flux term.  The trajectory must be uniformly
    sampled with spacing <= quad_dt; every k-th sample is used, k being the
    largest stride with spacing <= quad_dt.  With ``cfg.linear_only`` the flux
    term is dropped, matching the solver's test hook.

    Returns ``(times, residuals)``.
    """
    times = np.asarray(trajectory.times, dtype=float)
    if len(times) < 2:
        raise InsufficientSamples("need at least two samples")
    gaps = np.diff(times)
    h0 = gaps.mean()
    if np.max(np.abs(gaps - h0)) > 1e-9 * h0:
        raise InsufficientSamples("trajectory samples are not uniformly spaced")
    if h0 > quad_dt * (1 + 1e-9):
        raise InsufficientSamples(f"sample spacing {h0:.4g} exceeds quad_dt={quad_dt:.4g}")
    stride = max(1, int(math.floor(quad_dt / h0 * (1 + 1e-9))))
    idx = np.arange(0, len(times), stride)
    used_t = times[idx]
    states = [trajectory.states[i] for i in idx]
    cfg = cfg or SolverConfig(N=states[0].N)
    stepper = Stepper(params, cfg, spectrum)
    w0 = states[0]

    out = np.zeros(len(idx))
    integral = SpectralField.zeros(w0.N, w0.d)
    def flux(w):
        if cfg.linear_only:
            return SpectralField.zeros(w.N, w.d)
        return nonlinear_term(w, params, cfg)

    prev_nl = flux(w0)
    for n in range(1, len(idx)):
        h = used_t[n] - used_t[n - 1]
        nl = flux(states[n])
        integral = stepper.apply_linear(integral + (0.5 * h) * prev_nl, h) + (0.5 * h) * nl
        lin = propagate(w0, used_t[n], spectrum)
        out[n] = spectral.l2_norm(states[n] - lin - integral)
        prev_nl = nl
    return used_t, out


def sobolev_constant_probe(N: int, samples: int, d: int = 1, seed: int = 0) -> float:
    """Empirical constant C0 for the embeddings used by the bootstrap argument.

    Running maximum of ||g||_inf / ||g||_{H^2} and, for mean-zero g,
    ||g||_{L^4} / ||grad g||, over the constant function, e_{(1,0,...)} and
    ``samples`` random cosine polynomials of degree N with coefficients
    decaying like 1/(1+q^2).  L^4 norms use midpoint quadrature, exact here;
    the sup norm is taken on the same grid.
    """
    return float(_sobolev_ratios(N, samples, d, seed).max())


def _sobolev_ratios(N, samples, d, seed):
    M = max(2 * N + 2, 16)
    q2, gamma = spectral._mode_tables(N, d)
    cell = (np.pi / M) ** d
    origin = (0,) * d

    def ratios(c):
        g = spectral.synthesize_array(c, M)
        h2 = np.sqrt(np.sum((1 + q2) ** 2 * gamma * c**2))
        r = np.max(np.abs(g)) / h2
        c0 = c.copy()
        c0[origin] = 0.0
        grad = np.sqrt(np.sum(q2 * gamma * c0**2))
        if grad > 0:
            g0 = spectral.synthesize_array(c0, M)
            r = max(r, (np.sum(g0**4) * cell) ** 0.25 / grad)
        return r

    rng = np.random.default_rng(seed)
    shape = (N + 1,) * d
    const = np.zeros(shape)
    const[origin] = 1.0
    out = [ratios(const)]
    if N >= 1:
        first = np.zeros(shape)
        first[(1,) + (0,) * (d - 1)] = 1.0
        out.append(ratios(first))
    for _ in range(samples):
        out.append(ratios(rng.standard_normal(shape) / (1.0 + q2)))
    return np.maximum.accumulate(np.array(out))


@dataclass
class ExperimentReport:
    delta: float
    T_delta: float
    t_stop: float
    constants: TheoremConstants
    w0_l2: float
    w0_h2: float
    times: np.ndarray
    l2_series: np.ndarray
    h2_series: np.ndarray
    gap_ratio: np.ndarray
    bracket: np.ndarray
    duhamel_residual: np.ndarray
    energy_series: np.ndarray
    linear_deviation: np.ndarray
    mass_series: np.ndarray
    status: str = "completed"
    fitted_C: float = float("nan")
    T_star: float | None = None
    T_star_star: float | None = None
    energy_fraction: float = float("nan")
    notes: list = field(default_factory=list)


def _first_crossing(times, values, limit):
    over = np.nonzero(values > limit)[0]
    return float(times[over[0]]) if len(over) else None


def run(
    delta: float,
    w0: SpectralField,
    params: ModelParams,
    cfg: SolverConfig,
    consts: TheoremConstants,
    *,
    spectrum: SpectrumSummary | None = None,
    t_budget: float | None = None,
    n_samples: int = 64,
    quad_dt: float = 1e-2,
    delta0: float | None = None,
) -> ExperimentReport:
    """Evolve delta*w0 up to the escape time and measure the tracking error.

    Report samples are ``n_samples`` evenly spaced interior times of
    [0, T] plus both ends, T = min(T_delta, t_budget).  In between, the state
    is recorded every <= quad_dt for the Duhamel check.

    On blow-up the partially filled report is attached to the raised
    :class:`BlowUp` as ``exc.report``.
    """
    if spectrum is None:
        spectrum = spectrum_summary(params, cfg.N)
    norm0 = spectral.l2_norm(w0)
    if abs(norm0 - 1.0) > 1e-10:
        raise ValueError(f"w0 must have unit L2 norm (got {norm0!r})")
    if delta0 is not None and delta > delta0:
        raise BadAmplitude(f"delta={delta!r} exceeds configured delta0={delta0!r}")
    lam = spectrum.lambda_max
    T = escape_time(delta, consts.theta, lam)
    t_stop = T if t_budget is None else min(T, t_budget)
    status = "completed" if t_stop == T else "budget-exceeded"

    report_t = np.linspace(0.0, t_stop, n_samples + 2)
    report_t[-1] = t_stop
    per_gap = max(1, math.ceil((report_t[1] - report_t[0]) / quad_dt - 1e-9))
    dense_t = np.linspace(0.0, t_stop, (n_samples + 1) * per_gap + 1)
    dense_t[::per_gap] = report_t

    data = delta * w0
    stepper = Stepper(params, cfg, spectrum)
    try:
        traj = simulate(data, params, cfg, sample_times=dense_t, stepper=stepper)
    except BlowUp as exc:
        traj = exc.trajectory
        status = "blow-up"
        blowup = exc
    else:
        blowup = None

    n_dense = len(traj.times)
    pick = np.arange(0, n_dense, per_gap)
    times = np.asarray(traj.times)[pick]
    states = [traj.states[i] for i in pick]

    if n_dense > 1:
        _, resid = duhamel_residual(traj, params, spectrum, quad_dt=dense_t[1], cfg=cfg)
        resid = resid[pick]
    else:
        resid = np.zeros(1)

    l2 = np.array([spectral.l2_norm(s) for s in states])
    h2 = np.array([spectral.h2_norm(s) for s in states])
    growth = delta * np.exp(lam * times)
    gap = np.array(
        [spectral.l2_norm(s - dominant_projection(data, t, spectrum)) for s, t in zip(states, times)]
    ) / growth
    lin_dev = np.array([spectral.l2_norm(s - propagate(data, t, spectrum)) for s, t in zip(states, times)])
    w0_h2 = spectral.h2_norm(w0)
    bracket = np.exp(-spectrum.nu * times) + delta * w0_h2**2 + growth
    energy = energy_series(states, consts.A)

    sub = Trajectory(list(times), states, [traj.masses[i] for i in pick])
    ediag = energy_diagnostic(sub, params, consts)

    report = ExperimentReport(
        delta=delta,
        T_delta=T,
        t_stop=t_stop,
        constants=consts,
        w0_l2=norm0,
        w0_h2=w0_h2,
        times=times,
        l2_series=l2,
        h2_series=h2,
        gap_ratio=gap,
        bracket=bracket,
        duhamel_residual=resid,
        energy_series=energy,
        linear_deviation=lin_dev,
        mass_series=np.array([traj.masses[i] for i in pick]),
        status=status,
        fitted_C=float(np.max(gap / bracket)),
        T_star=_first_crossing(times, lin_dev, 0.5 * consts.C1_hat * growth),
        T_star_star=_first_crossing(times, h2, smallness_threshold(params, consts.C0)),
        energy_fraction=ediag.fraction_holding,
    )
    report.notes.append("nu counts lambda_minus of every mode and lambda_plus off omega_max")
    report.notes.append(f"C1_hat includes safety factor (probe x {SAFETY_C1:g} by default)")
    if blowup is not None:
        blowup.report = report
        raise blowup
    return report
