import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FLAGSHIP, LAMBDA_MAX
from kslab import spectral
from kslab.dispersion import (
    _roots,
    dispersion_residual,
    eigenpair,
    growth_constant_estimate,
    growth_ratio,
    propagator_matrices,
    spectrum_summary,
)
from kslab.errors import TruncationTooSmall
from kslab.model import ModelParams, critical_wavenumber_squared
from kslab.spectral import SpectralField

positive = st.floats(min_value=1e-2, max_value=1e2)


def naive_roots(p, q2):
    b = q2 * (p.mu + p.D) + p.k
    c = q2 * (p.mu * (p.D * q2 + p.k) - p.chi * p.U_bar * p.f)
    s = math.sqrt(b * b - 4 * c)
    return (-b - s) / 2, (-b + s) / 2


def test_eigenpair_zero_mode():
    e = eigenpair(FLAGSHIP, (0, 0))
    assert e.lambda_plus == 0.0
    assert e.lambda_minus == pytest.approx(-1.0, rel=1e-15)
    assert e.r_plus == pytest.approx((1.0, 1.0), rel=1e-15)


def test_eigenpair_first_mode():
    e = eigenpair(FLAGSHIP, (1, 0))
    assert e.lambda_plus == pytest.approx((-3 + math.sqrt(13)) / 2, rel=1e-14)
    assert e.lambda_minus == pytest.approx((-3 - math.sqrt(13)) / 2, rel=1e-14)
    assert e.r_plus[0] == pytest.approx(2.3027756377319946, rel=1e-14)
    assert e.r_plus[1] == 1.0


def test_eigenpair_marginal_mode():
    e = eigenpair(FLAGSHIP, (1, 1))
    assert e.lambda_plus == 0.0
    assert e.lambda_minus == pytest.approx(-5.0, rel=1e-15)


@pytest.mark.parametrize("q", [(0, 2), (3, 1), (5, 5)])
def test_eigenvector_satisfies_eigen_equation(q):
    e = eigenpair(FLAGSHIP, q)
    q2 = e.q2
    p = FLAGSHIP
    L = np.array([[-p.mu * q2, p.chi * p.U_bar * q2], [p.f, -p.D * q2 - p.k]])
    for lam, r in ((e.lambda_minus, e.r_minus), (e.lambda_plus, e.r_plus)):
        r = np.array(r)
        assert np.allclose(L @ r, lam * r, rtol=1e-12, atol=1e-12 * max(1, q2))
        # constructed form [(lam + D q^2 + k)/f, 1]
        assert r[0] == pytest.approx((lam + p.D * q2 + p.k) / p.f, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(mu=positive, chi=positive, D=positive, f=positive, k=positive, U=positive, q2=st.integers(0, 2000))
def test_roots_against_naive_formula_and_vieta(mu, chi, D, f, k, U, q2):
    p = ModelParams(mu=mu, chi=chi, D=D, f=f, k=k, U_bar=U, d=1)
    lm, lp = (float(x) for x in _roots(p, float(q2)))
    assert lm < lp
    b = q2 * (mu + D) + k
    c = q2 * (mu * (D * q2 + k) - chi * U * f)
    assert lp + lm == pytest.approx(-b, rel=1e-9)
    assert lp * lm == pytest.approx(c, rel=1e-9, abs=1e-12 * max(1.0, abs(b * lm)))
    scale = max(1.0, q2 * q2, b * b)
    for lam in (lm, lp):
        assert abs(dispersion_residual(p, q2, lam)) <= 1e-10 * scale


@settings(max_examples=200, deadline=None)
@given(mu=positive, chi=positive, D=positive, f=positive, k=positive, U=positive, q2=st.floats(0, 1e4))
def test_criterion_equivalence(mu, chi, D, f, k, U, q2):
    p = ModelParams(mu=mu, chi=chi, D=D, f=f, k=k, U_bar=U, d=1)
    _, lp = _roots(p, q2)
    crit = mu * (D * q2 + k) - chi * U * f
    if abs(crit) > 1e-9 * (mu * (D * q2 + k) + chi * U * f):
        assert (lp > 0) == (q2 > 0 and crit < 0)


def test_large_wavenumber_asymptotics():
    p = ModelParams(mu=0.5, chi=2.0, D=2.0, f=1.5, k=0.7, U_bar=1.3, d=1)
    q2 = 1e4
    lm, lp = _roots(p, q2)
    assert lp / q2 == pytest.approx(-min(p.mu, p.D), rel=0.05)
    assert lm / q2 == pytest.approx(-max(p.mu, p.D), rel=0.05)


@pytest.mark.parametrize("q", [1, 3, 10])
def test_matches_naive_formula_at_moderate_q(q):
    p = ModelParams(mu=1.0, chi=1.0, D=3.0, f=1.0, k=1.0, U_bar=3.0, d=1)
    lm, lp = naive_roots(p, q * q)
    e = eigenpair(p, (q,))
    assert e.lambda_plus == pytest.approx(lp, rel=1e-10)
    assert e.lambda_minus == pytest.approx(lm, rel=1e-10)


def test_flagship_summary():
    s = spectrum_summary(FLAGSHIP, 8)
    assert s.unstable == {(1, 0), (0, 1)}
    assert s.omega_max == {(1, 0), (0, 1)}
    assert s.lambda_max == pytest.approx(LAMBDA_MAX, rel=1e-14)
    # next eigenvalue below lambda_max is the zero root at q^2 = 0 and q^2 = 2
    assert s.nu == pytest.approx(LAMBDA_MAX, rel=1e-14)


def test_summary_by_enumeration():
    p = ModelParams(mu=0.3, chi=1.7, D=0.8, f=1.1, k=0.4, U_bar=2.0, d=2)
    s = spectrum_summary(p, 12)
    lp = {q: eigenpair(p, q).lambda_plus for q in spectral.modes(12, 2)}
    lm = {q: eigenpair(p, q).lambda_minus for q in spectral.modes(12, 2)}
    lam_max = max(lp.values())
    top = {q for q, v in lp.items() if v >= lam_max * (1 - 1e-12)}
    rest = max([v for q, v in lp.items() if q not in top] + list(lm.values()))
    assert s.lambda_max == lam_max
    assert s.omega_max == top
    assert s.nu == pytest.approx(lam_max - rest, rel=1e-12)
    assert s.unstable == {q for q, v in lp.items() if v > 0}
    q2c = critical_wavenumber_squared(p)
    assert all(sum(i * i for i in q) < q2c for q in s.unstable)
    assert len({sum(i * i for i in q) for q in s.omega_max}) <= 2
    assert s.nu > 0


def test_stable_params_have_no_unstable_modes():
    s = spectrum_summary(ModelParams(U_bar=1.0), 6)
    assert s.unstable == frozenset()
    assert s.lambda_max <= 0


def test_truncation_too_small():
    with pytest.raises(TruncationTooSmall):
        spectrum_summary(ModelParams(chi=10.0), 2)


def test_pairs_mapping_is_complete():
    s = spectrum_summary(FLAGSHIP, 3)
    pairs = s.pairs
    assert len(pairs) == 16
    assert pairs[(1, 0)].lambda_plus == s.lambda_max


def test_propagator_block_zero_time_is_identity():
    s = spectrum_summary(FLAGSHIP, 6)
    P = propagator_matrices(s, 0.0)
    assert np.allclose(P, np.eye(2), atol=1e-12)


def test_dominant_mode_ratio_is_one():
    s = spectrum_summary(FLAGSHIP, 8)
    w = SpectralField.from_modes(8, 2, {(1, 0): s.pair((1, 0)).r_plus})
    for t in (0.0, 0.5, 3.0, 20.0):
        assert growth_ratio(s, w, t) == pytest.approx(1.0, rel=1e-12)


def test_stable_mode_ratio_decays():
    s = spectrum_summary(FLAGSHIP, 8)
    w = SpectralField.from_modes(8, 2, {(2, 1): s.pair((2, 1)).r_plus})
    ratios = [growth_ratio(s, w, t) for t in (0.0, 1.0, 2.0, 4.0)]
    assert ratios[0] == pytest.approx(1.0)
    assert all(a > b for a, b in zip(ratios, ratios[1:]))


def test_growth_constant_estimate():
    c1 = growth_constant_estimate(FLAGSHIP, 8, 20, seed=1)
    assert 1 - 1e-9 <= c1 < 10
    # more trials never lowers the estimate for the same seed prefix
    assert growth_constant_estimate(FLAGSHIP, 8, 40, seed=1) >= c1 - 1e-15
