"""Exact solution operator of the linearised system via modal eigen-decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import SpectrumSummary
from .errors import DegenerateEigenbasis, PropagationOverflow
from .spectral import SpectralField

EXP_CAP = 700.0


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """Amplitudes along r_minus(q) and r_plus(q) for every mode."""

    minus: np.ndarray
    plus: np.ndarray

    def __getitem__(self, q):
        q = tuple(q)
        return float(self.minus[q]), float(self.plus[q])


def _check_cover(field: SpectralField, spectrum: SpectrumSummary):
    if field.d != spectrum.d or field.N > spectrum.N:
        raise ValueError(
            f"spectrum (N={spectrum.N}, d={spectrum.d}) does not cover field "
            f"(N={field.N}, d={field.d})"
        )


def _restrict(arr, N):
    return arr[(slice(0, N + 1),) * arr.ndim]


def decompose(field: SpectralField, spectrum: SpectrumSummary) -> ModalDecomposition:
    _check_cover(field, spectrum)
    rm = _restrict(spectrum.rho_minus, field.N)
    rp = _restrict(spectrum.rho_plus, field.N)
    det = rm - rp
    if np.any(np.abs(det) < 1e-14):
        raise DegenerateEigenbasis("eigenvectors r_minus, r_plus are numerically parallel")
    minus = (field.u - rp * field.v) / det
    plus = (rm * field.v - field.u) / det
    return ModalDecomposition(minus, plus)


def recompose(modal: ModalDecomposition, spectrum: SpectrumSummary) -> SpectralField:
    N = modal.minus.shape[0] - 1
    rm = _restrict(spectrum.rho_minus, N)
    rp = _restrict(spectrum.rho_plus, N)
    return SpectralField(modal.minus * rm + modal.plus * rp, modal.minus + modal.plus)


def _check_time(t, spectrum):
    if t < 0:
        raise ValueError(f"propagation time must be >= 0 (got {t})")
    if t * spectrum.lambda_max > EXP_CAP:
        raise PropagationOverflow(
            f"lambda_max * t = {t * spectrum.lambda_max:.4g} exceeds {EXP_CAP}"
        )


def propagate(field: SpectralField, t: float, spectrum: SpectrumSummary) -> SpectralField:
    """e^{Lt} applied to ``field``, exactly, mode by mode."""
    _check_time(t, spectrum)
    modal = decompose(field, spectrum)
    N = field.N
    em = np.exp(_restrict(spectrum.lambda_minus, N) * t)
    ep = np.exp(_restrict(spectrum.lambda_plus, N) * t)
    return recompose(ModalDecomposition(modal.minus * em, modal.plus * ep), spectrum)


def dominant_projection(field: SpectralField, t: float, spectrum: SpectrumSummary) -> SpectralField:
    """e^{lambda_max t} times the r_plus component of ``field`` on the fastest modes."""
    _check_time(t, spectrum)
    modal = decompose(field, spectrum)
    mask = _restrict(spectrum.dominant_mask, field.N)
    plus = np.where(mask, modal.plus, 0.0) * np.exp(spectrum.lambda_max * t)
    rp = _restrict(spectrum.rho_plus, field.N)
    return SpectralField(plus * rp, plus)


def linear_rhs(field: SpectralField, spectrum: SpectrumSummary) -> SpectralField:
    """Right-hand side of the linearised system, evaluated modally."""
    p = spectrum.params
    q2 = _restrict(spectrum.q2, field.N)
    du = -p.mu * q2 * field.u + p.chi * p.U_bar * q2 * field.v
    dv = p.f * field.u - (p.D * q2 + p.k) * field.v
    return SpectralField(du, dv)
