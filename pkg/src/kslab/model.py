"""Physical parameters of the Keller-Segel system and its homogeneous state."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BadDimension, NonPositiveParameter

POSITIVE_FIELDS = ("mu", "chi", "D", "f", "k", "U_bar")


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the cell/chemical system.

    ``mu`` cell motility, ``chi`` chemotactic sensitivity, ``D`` chemical
    diffusion, ``f`` secretion rate, ``k`` degradation rate, ``U_bar`` the
    homogeneous cell density and ``d`` the dimension of the box (0, pi)^d.
    """

    mu: float = 1.0
    chi: float = 1.0
    D: float = 1.0
    f: float = 1.0
    k: float = 1.0
    U_bar: float = 3.0
    d: int = 2

    @property
    def V_bar(self) -> float:
        return self.f * self.U_bar / self.k


@dataclass(frozen=True)
class SteadyState:
    U_bar: float
    V_bar: float


def validate(params: ModelParams) -> ModelParams:
    for name in POSITIVE_FIELDS:
        value = getattr(params, name)
        # written as "not > 0" so that NaN is rejected too
        if not value > 0:
            raise NonPositiveParameter(name, value)
    if isinstance(params.d, bool) or int(params.d) != params.d or not 1 <= params.d <= 3:
        raise BadDimension(f"dimension d must be 1, 2 or 3 (got {params.d!r})")
    return params


def steady_state(params: ModelParams) -> SteadyState:
    validate(params)
    return SteadyState(U_bar=params.U_bar, V_bar=params.f * params.U_bar / params.k)


def critical_wavenumber_squared(params: ModelParams) -> float | None:
    """Upper end of the open band 0 < q^2 < q2_c of linearly unstable modes.

    Returns None when chi*U_bar*f <= mu*k, in which case no mode satisfies the
    (strict) aggregation criterion mu*(D*q^2 + k) - chi*U_bar*f < 0.
    """
    validate(params)
    drive = params.chi * params.U_bar * params.f - params.mu * params.k
    if drive <= 0:
        return None
    return drive / (params.mu * params.D)


def criterion_value(params: ModelParams, q2: float) -> float:
    """mu*(D*q^2 + k) - chi*U_bar*f; negative means q^2 is aggregating."""
    return params.mu * (params.D * q2 + params.k) - params.chi * params.U_bar * params.f
