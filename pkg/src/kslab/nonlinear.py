"""Pseudo-spectral integrator for the full perturbation system.

The linear part is advanced exactly through the per-mode propagators
e^{L h} (integrating factor); the chemotactic flux term -chi div(u grad v)
is evaluated on a padded collocation grid and advanced with an explicit
two-stage midpoint rule:

    k1 = N(w_n)
    w_mid = E(h/2) (w_n + h/2 k1)
    w_{n+1} = E(h) w_n + h E(h/2) N(w_mid)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import spectral
from .dispersion import SpectrumSummary, propagator_matrices, spectrum_summary
from .errors import BlowUp, GridTooCoarse, NonFinite
from .model import ModelParams
from .spectral import SpectralField

DEALIAS_RULES = ("two-thirds", "none")
INTEGRATORS = ("imex-rk2",)
BLOWUP_THRESHOLD = 1e8


def min_dealiased_grid(N: int) -> int:
    return math.ceil(3 * (N + 1) / 2)


@dataclass(frozen=True)
class SolverConfig:
    N: int = 16
    M: int | None = None
    dt: float = 1e-3
    t_end: float = 1.0
    dealias: str = "two-thirds"
    integrator: str = "imex-rk2"
    # test hook: drop the chemotactic flux term entirely
    linear_only: bool = False
    blowup_threshold: float = BLOWUP_THRESHOLD

    def __post_init__(self):
        if self.M is None:
            object.__setattr__(self, "M", min_dealiased_grid(self.N))
        if self.N < 0:
            raise ValueError(f"N must be >= 0 (got {self.N})")
        if self.dealias not in DEALIAS_RULES:
            raise ValueError(f"unknown dealias rule {self.dealias!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dealias == "two-thirds" and self.M < min_dealiased_grid(self.N):
            raise GridTooCoarse(
                f"two-thirds dealiasing needs M >= {min_dealiased_grid(self.N)} (got M={self.M})"
            )
        if self.M < self.N + 2:
            raise GridTooCoarse(f"M={self.M} must be at least N+2={self.N + 2}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0 (got {self.dt})")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0 (got {self.t_end})")


def default_dt(lambda_max: float) -> float:
    if lambda_max == 0:
        return 1e-3
    return min(1e-3, 0.5 / abs(lambda_max))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    status: str = "completed"

    def append(self, t, state):
        self.times.append(float(t))
        self.states.append(state)
        self.masses.append(mass(state))

    @property
    def N(self):
        return self.states[0].N


def mass(state: SpectralField) -> float:
    """Integral of u over the box: only the q = 0 mode contributes."""
    return float(state.u[(0,) * state.d] * np.pi**state.d)


@lru_cache(maxsize=None)
def _dealias_mask(N, d, M):
    keep = np.arange(N + 1) < 2 * M / 3
    mask = keep
    for _ in range(d - 1):
        mask = np.multiply.outer(mask, keep)
    return np.asarray(mask, dtype=float)


def nonlinear_term(state: SpectralField, params: ModelParams, cfg: SolverConfig) -> SpectralField:
    """Cosine coefficients of -chi div(u grad v); the v-component is zero.

    Each flux u * d_i v is odd in x_i, so it is projected onto sin(q_i x_i)
    along axis i and cosines elsewhere, and d/dx_i sin(q_i x_i) =
    q_i cos(q_i x_i) brings it back to the cosine basis.
    """
    N, M, d = state.N, cfg.M, state.d
    if N != cfg.N:
        raise ValueError(f"state truncation N={N} does not match config N={cfg.N}")
    zero = np.zeros_like(state.u)
    if params.chi == 0 or not state.u.any() or not state.v.any():
        return SpectralField(zero, zero.copy())
    u_grid = spectral.synthesize_array(state.u, M)
    q = np.arange(N + 1, dtype=float)
    div = np.zeros_like(state.u)
    for i in range(d):
        flux = u_grid * spectral.synthesize_array(state.v, M, deriv_axes=(i,))
        s = spectral.analyze_array(flux, N, sine_axes=(i,))
        shape = [1] * d
        shape[i] = N + 1
        div += q.reshape(shape) * s
    out = -params.chi * div
    if cfg.dealias == "two-thirds":
        out *= _dealias_mask(N, d, M)
    return SpectralField(out, zero)


@lru_cache(maxsize=64)
def _spectrum(params: ModelParams, N: int) -> SpectrumSummary:
    # the solver is also used on truncations that miss part of the unstable band
    return spectrum_summary(params, N, check_band=False)


class Stepper:
    """Holds the propagator blocks for the step sizes in use."""

    def __init__(self, params: ModelParams, cfg: SolverConfig, spectrum: SpectrumSummary | None = None):
        self.params = params
        self.cfg = cfg
        self.spectrum = spectrum if spectrum is not None else _spectrum(params, cfg.N)
        self._cache = {}

    def _blocks(self, h):
        blocks = self._cache.get(h)
        if blocks is None:
            if len(self._cache) > 8:
                self._cache.clear()
            blocks = self._cache[h] = propagator_matrices(self.spectrum, h)
        return blocks

    def apply_linear(self, w: SpectralField, h: float) -> SpectralField:
        P = self._blocks(h)
        return SpectralField(
            P[..., 0, 0] * w.u + P[..., 0, 1] * w.v,
            P[..., 1, 0] * w.u + P[..., 1, 1] * w.v,
        )

    def rhs(self, w: SpectralField) -> SpectralField:
        return nonlinear_term(w, self.params, self.cfg)

    def step(self, w: SpectralField, h: float) -> SpectralField:
        if self.cfg.linear_only:
            out = self.apply_linear(w, h)
        else:
            k1 = self.rhs(w)
            mid = self.apply_linear(w + (0.5 * h) * k1, 0.5 * h)
            k2 = self.rhs(mid)
            out = self.apply_linear(w, h) + h * self.apply_linear(k2, 0.5 * h)
        if not out.is_finite():
            raise NonFinite("state became non-finite")
        norm = spectral.l2_norm(out)
        if norm > self.cfg.blowup_threshold:
            raise NonFinite(f"L2 norm {norm:.3g} exceeds blow-up threshold")
        return out


def step(state: SpectralField, dt: float, params: ModelParams, cfg: SolverConfig) -> SpectralField:
    """Advance one integrating-factor midpoint step of size ``dt``."""
    return Stepper(params, cfg).step(state, dt)


def _uniform_steps(span, dt):
    n = max(1, math.ceil(span / dt - 1e-9))
    return n, span / n


def simulate(
    w0: SpectralField,
    params: ModelParams,
    cfg: SolverConfig,
    sample_every: int = 1,
    sample_times=None,
    stepper: Stepper | None = None,
) -> Trajectory:
    """Integrate from ``w0`` and record samples.

    Without ``sample_times`` the interval [0, t_end] is split into equal
    steps no larger than ``cfg.dt`` and every ``sample_every``-th state is
    kept (plus the final one).  With ``sample_times`` (increasing, starting at
    0) each gap between consecutive times is split into equal steps no larger
    than ``cfg.dt`` so the samples are hit exactly.

    Raises :class:`BlowUp` carrying the partial trajectory on failure.
    """
    if w0.N != cfg.N:
        raise ValueError(f"initial data has N={w0.N}, config has N={cfg.N}")
    if not w0.is_finite():
        raise NonFinite("initial data is not finite")
    stepper = stepper or Stepper(params, cfg)
    traj = Trajectory()
    traj.append(0.0, w0)
    w = w0
    t = 0.0
    try:
        if sample_times is None:
            if cfg.t_end == 0:
                return traj
            n, h = _uniform_steps(cfg.t_end, cfg.dt)
            for i in range(1, n + 1):
                w = stepper.step(w, h)
                t = i * h if i < n else cfg.t_end
                if i % sample_every == 0 or i == n:
                    traj.append(t, w)
        else:
            times = np.asarray(sample_times, dtype=float)
            if times[0] != 0 or np.any(np.diff(times) <= 0):
                raise ValueError("sample_times must start at 0 and increase strictly")
            for t0, t1 in zip(times[:-1], times[1:]):
                n, h = _uniform_steps(t1 - t0, cfg.dt)
                for i in range(1, n + 1):
                    w = stepper.step(w, h)
                    t = t0 + i * h
                t = float(t1)
                traj.append(t1, w)
    except NonFinite as exc:
        traj.status = "blow-up"
        raise BlowUp(traj.times[-1], traj, str(exc)) from exc
    return traj
