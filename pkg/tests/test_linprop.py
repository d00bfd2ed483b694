import numpy as np
import pytest

from conftest import FLAGSHIP
from kslab import spectral
from kslab.dispersion import spectrum_summary
from kslab.errors import PropagationOverflow
from kslab.linprop import (
    decompose,
    dominant_projection,
    linear_rhs,
    propagate,
    recompose,
)
from kslab.model import ModelParams
from kslab.spectral import SpectralField


@pytest.fixture(scope="module")
def spec8():
    return spectrum_summary(FLAGSHIP, 8)


def random_field(seed, N=8, d=2):
    rng = np.random.default_rng(seed)
    shape = (N + 1,) * d
    return SpectralField(rng.standard_normal(shape), rng.standard_normal(shape))


def rk4_mode(p, q2, w, t, dt=1e-4):
    L = np.array([[-p.mu * q2, p.chi * p.U_bar * q2], [p.f, -p.D * q2 - p.k]])
    n = int(round(t / dt))
    y = np.array(w, dtype=float)
    for _ in range(n):
        k1 = L @ y
        k2 = L @ (y + 0.5 * dt * k1)
        k3 = L @ (y + 0.5 * dt * k2)
        k4 = L @ (y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_decompose_eigenvector(spec8):
    rp = spec8.pair((1, 0)).r_plus
    rm = spec8.pair((1, 0)).r_minus
    w = SpectralField.from_modes(8, 2, {(1, 0): rp})
    m = decompose(w, spec8)
    assert m[(1, 0)] == pytest.approx((0.0, 1.0), abs=1e-14)
    w = SpectralField.from_modes(8, 2, {(1, 0): (rm[0] + 2 * rp[0], 3.0)})
    assert decompose(w, spec8)[(1, 0)] == pytest.approx((1.0, 2.0), rel=1e-13)


def test_recompose_round_trip(spec8):
    w = random_field(0)
    back = recompose(decompose(w, spec8), spec8)
    assert spectral.l2_norm(back - w) <= 1e-11 * spectral.l2_norm(w)


def test_propagate_zero_time_is_identity(spec8):
    w = random_field(1)
    assert spectral.l2_norm(propagate(w, 0.0, spec8) - w) <= 1e-12 * spectral.l2_norm(w)


def test_propagate_eigen_solution(spec8):
    q0 = (2, 1)
    w = SpectralField.from_modes(8, 2, {q0: spec8.pair(q0).r_plus})
    t = 0.9
    out = propagate(w, t, spec8)
    assert np.allclose(out.u, w.u * np.exp(spec8.pair(q0).lambda_plus * t), rtol=1e-13, atol=0)
    assert np.allclose(out.v, w.v * np.exp(spec8.pair(q0).lambda_plus * t), rtol=1e-13, atol=0)


def test_propagate_matches_rk4_per_mode(spec8):
    w = random_field(2, N=4)
    out = propagate(w, 0.7, spec8)
    for q in [(0, 0), (1, 0), (2, 3), (4, 4)]:
        ref = rk4_mode(FLAGSHIP, sum(i * i for i in q), (w.u[q], w.v[q]), 0.7)
        got = np.array([out.u[q], out.v[q]])
        assert np.linalg.norm(got - ref) <= 1e-6 * np.linalg.norm(ref)


@pytest.mark.parametrize("s, t", [(0.3, 1.1), (2.5, 2.5), (5.0, 0.0), (1.7, 4.2)])
def test_semigroup(spec8, s, t):
    w = random_field(3)
    a = propagate(propagate(w, s, spec8), t, spec8)
    b = propagate(w, s + t, spec8)
    assert spectral.l2_norm(a - b) <= 1e-10 * spectral.l2_norm(b)


def test_time_derivative_matches_linear_operator(spec8):
    q2 = spectral.wavenumber_squared(8, 2)
    rng = np.random.default_rng(4)
    decay = np.exp(-q2 / 4)
    w = SpectralField(rng.standard_normal(q2.shape) * decay, rng.standard_normal(q2.shape) * decay)
    t = 1.3
    exact = linear_rhs(propagate(w, t, spec8), spec8)

    def err(h):
        fd = (propagate(w, t + h, spec8) - propagate(w, t - h, spec8)) * (0.5 / h)
        return spectral.l2_norm(fd - exact)

    e1, e2 = err(1e-2), err(5e-3)
    assert e1 < 1e-3 * spectral.l2_norm(exact)
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_dominant_projection_properties(spec8):
    off = SpectralField.from_modes(8, 2, {(2, 2): (1.0, 0.5)})
    assert spectral.l2_norm(dominant_projection(off, 1.0, spec8)) == 0.0

    q0 = (0, 1)
    w = SpectralField.from_modes(8, 2, {q0: spec8.pair(q0).r_plus})
    assert spectral.l2_norm(dominant_projection(w, 0.0, spec8) - w) <= 1e-14

    g = random_field(5)
    base = spectral.l2_norm(dominant_projection(g, 0.0, spec8))
    for t in (0.5, 3.0):
        grown = spectral.l2_norm(dominant_projection(g, t, spec8))
        assert grown == pytest.approx(np.exp(spec8.lambda_max * t) * base, rel=1e-13)


def test_remainder_decays_at_gap_rate(spec8):
    # every non-dominant component decays relative to e^{lambda_max t} at least
    # as fast as e^{-nu t}, so the triangle-inequality bound below holds for all t
    g = random_field(6)
    m = decompose(g, spec8)
    gamma = spectral.basis_norm_squared(8, 2)
    dom = spec8.dominant_mask
    norm_m = np.abs(m.minus) * np.hypot(spec8.rho_minus, 1.0)
    norm_p = np.abs(m.plus) * np.hypot(spec8.rho_plus, 1.0) * ~dom
    bound = np.sum(np.sqrt(gamma) * (norm_m + norm_p))
    for t in np.linspace(0.0, 30.0, 61):
        rem = spectral.l2_norm(propagate(g, t, spec8) - dominant_projection(g, t, spec8))
        assert rem * np.exp(-spec8.lambda_max * t) <= bound * np.exp(-spec8.nu * t) * (1 + 1e-12)


def test_overflow_guard(spec8):
    with pytest.raises(PropagationOverflow):
        propagate(random_field(7), 701.0 / spec8.lambda_max, spec8)


def test_negative_time_rejected(spec8):
    with pytest.raises(ValueError):
        propagate(random_field(7), -1.0, spec8)


def test_unequal_diffusion_stays_accurate():
    p = ModelParams(mu=0.2, chi=2.0, D=5.0, f=0.7, k=1.3, U_bar=2.0, d=1)
    s = spectrum_summary(p, 40)
    w = random_field(8, N=40, d=1)
    back = recompose(decompose(w, s), s)
    assert spectral.l2_norm(back - w) <= 1e-11 * spectral.l2_norm(w)
    out = propagate(w, 0.05, s)
    for q in [(0,), (3,), (15,)]:
        ref = rk4_mode(p, q[0] ** 2, (w.u[q], w.v[q]), 0.05, dt=1e-5)
        assert np.linalg.norm([out.u[q] - ref[0], out.v[q] - ref[1]]) <= 1e-6 * np.linalg.norm(ref)
