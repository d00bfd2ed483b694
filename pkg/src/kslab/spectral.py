"""Neumann cosine-series representation of fields on the box (0, pi)^d.

A field is stored as coefficients of the (unnormalised) basis
``e_q(x) = prod_i cos(q_i x_i)`` for ``0 <= q_i <= N``.  Grid samples live on
midpoint nodes ``x_j = (j + 1/2) pi / M``, which makes the forward transform a
type-II cosine transform with exact discrete orthogonality for ``q < M``.

Transforms are dense matrix products applied one axis at a time; at the sizes
used here (N <= 64) that is fast enough and keeps results deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridTooCoarse


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Cosine coefficients of the pair (u, v), each of shape (N+1,)*d."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape:
            raise ValueError(f"component shapes differ: {u.shape} vs {v.shape}")
        if u.ndim < 1 or len(set(u.shape)) != 1:
            raise ValueError(f"coefficients must be a cube (N+1,)*d, got {u.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def N(self) -> int:
        return self.u.shape[0] - 1

    @property
    def d(self) -> int:
        return self.u.ndim

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())

    def __add__(self, other):
        return SpectralField(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return SpectralField(self.u - other.u, self.v - other.v)

    def __mul__(self, scalar):
        return SpectralField(scalar * self.u, scalar * self.v)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.u, -self.v)

    def copy(self):
        return SpectralField(self.u.copy(), self.v.copy())

    def resized(self, N: int) -> "SpectralField":
        """Zero-pad or truncate to truncation order ``N``."""
        return SpectralField(_resize(self.u, N), _resize(self.v, N))

    @classmethod
    def zeros(cls, N: int, d: int) -> "SpectralField":
        shape = (N + 1,) * d
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_modes(cls, N: int, d: int, modes: dict) -> "SpectralField":
        """Build a field from ``{q: (u_q, v_q)}``."""
        field = cls.zeros(N, d)
        for q, (uq, vq) in modes.items():
            q = tuple(q)
            field.u[q] = uq
            field.v[q] = vq
        return field


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of (u, v) on the M^d midpoint grid."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape:
            raise ValueError(f"component shapes differ: {u.shape} vs {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def M(self) -> int:
        return self.u.shape[0]

    @property
    def d(self) -> int:
        return self.u.ndim


def _resize(a, N):
    out = np.zeros((N + 1,) * a.ndim)
    keep = tuple(slice(0, min(N, a.shape[0] - 1) + 1) for _ in range(a.ndim))
    out[keep] = a[keep]
    return out


def nodes(M: int) -> np.ndarray:
    return (np.arange(M) + 0.5) * np.pi / M


def grid(M: int, d: int) -> list[np.ndarray]:
    """Coordinate arrays (``indexing='ij'``) of the midpoint grid."""
    x = nodes(M)
    return np.meshgrid(*([x] * d), indexing="ij")


@lru_cache(maxsize=None)
def _cos_synth(N, M):
    m = np.cos(np.outer(nodes(M), np.arange(N + 1)))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _dsin_synth(N, M):
    # d/dx cos(q x) = -q sin(q x)
    q = np.arange(N + 1)
    m = -q * np.sin(np.outer(nodes(M), q))
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _cos_analysis(N, M):
    q = np.arange(N + 1)
    m = np.cos(np.outer(q, nodes(M))) * (2.0 / M)
    m[0] *= 0.5
    m[q >= M] = 0.0
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _sin_analysis(N, M):
    # coefficients of sin(q x), q = 0..N; the q = 0 row is identically zero
    q = np.arange(N + 1)
    m = np.sin(np.outer(q, nodes(M))) * (2.0 / M)
    m[q > M] = 0.0
    if M <= N:
        m[M] *= 0.5
    m.setflags(write=False)
    return m


def _apply(arr, mat, axis):
    out = np.tensordot(mat, arr, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def synthesize_array(coeffs: np.ndarray, M: int, deriv_axes=()) -> np.ndarray:
    """Evaluate a cosine series on the M^d grid, differentiating once along each
    axis listed in ``deriv_axes``."""
    N = coeffs.shape[0] - 1
    out = coeffs
    for axis in range(coeffs.ndim):
        mat = _dsin_synth(N, M) if axis in deriv_axes else _cos_synth(N, M)
        out = _apply(out, mat, axis)
    return out


def analyze_array(samples: np.ndarray, N: int, sine_axes=()) -> np.ndarray:
    """Project grid samples onto cos (or sin, along ``sine_axes``) modes 0..N."""
    M = samples.shape[0]
    out = samples
    for axis in range(samples.ndim):
        mat = _sin_analysis(N, M) if axis in sine_axes else _cos_analysis(N, M)
        out = _apply(out, mat, axis)
    return out


def synthesize(field: SpectralField, M: int) -> GridField:
    if M < field.N + 1:
        raise GridTooCoarse(f"M={M} cannot represent truncation N={field.N}")
    return GridField(synthesize_array(field.u, M), synthesize_array(field.v, M))


def analyze(grid_field: GridField, N: int) -> SpectralField:
    """Cosine coefficients up to order N.

    For M >= N+1 this inverts :func:`synthesize` exactly on fields of degree
    <= N.  Content at frequencies >= M folds back onto lower modes (aliasing);
    content between N+1 and M-1 is simply dropped.
    """
    if grid_field.M < N + 1:
        raise GridTooCoarse(f"M={grid_field.M} cannot resolve truncation N={N}")
    return SpectralField(analyze_array(grid_field.u, N), analyze_array(grid_field.v, N))


@lru_cache(maxsize=None)
def _mode_tables(N, d):
    q = np.arange(N + 1)
    axes = np.meshgrid(*([q] * d), indexing="ij")
    q2 = sum(a.astype(float) ** 2 for a in axes)
    nonzero = sum((a != 0).astype(int) for a in axes)
    gamma = np.pi**d / 2.0**nonzero
    for arr in (q2, gamma):
        arr.setflags(write=False)
    return q2, gamma


def wavenumber_squared(N: int, d: int) -> np.ndarray:
    """q^2 = sum q_i^2 for every mode of the truncation."""
    return _mode_tables(N, d)[0]


def basis_norm_squared(N: int, d: int) -> np.ndarray:
    """||e_q||^2 over (0, pi)^d, i.e. pi^d / 2^(number of nonzero q_i)."""
    return _mode_tables(N, d)[1]


def modes(N: int, d: int):
    """All mode indices of the truncation, in C order."""
    return [tuple(int(i) for i in idx) for idx in np.ndindex(*((N + 1,) * d))]


def l2_norm(field: SpectralField) -> float:
    gamma = basis_norm_squared(field.N, field.d)
    return float(np.sqrt(np.sum((field.u**2 + field.v**2) * gamma)))


def h2_norm(field: SpectralField) -> float:
    q2, gamma = _mode_tables(field.N, field.d)
    w = (1.0 + q2) ** 2 * gamma
    return float(np.sqrt(np.sum((field.u**2 + field.v**2) * w)))


def gradient_on_grid(field: SpectralField, M: int) -> tuple[GridField, ...]:
    """Grid samples of d/dx_i (u, v) for each axis i, by term-wise
    differentiation of the cosine series."""
    if M < field.N + 2:
        raise GridTooCoarse(f"gradient needs M >= N+2 (M={M}, N={field.N})")
    return tuple(
        GridField(
            synthesize_array(field.u, M, deriv_axes=(i,)),
            synthesize_array(field.v, M, deriv_axes=(i,)),
        )
        for i in range(field.d)
    )
