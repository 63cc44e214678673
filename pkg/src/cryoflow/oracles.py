"""Analytical reference solutions used to verify the solvers.

``erfc`` comes from the C math library (``math.erfc``), accurate to a few
ulp over the whole real line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constitutive import L_RHO, freezing_partition, thermal_conductivity, volumetric_heat_capacity

SQRT_PI = math.sqrt(math.pi)


def stefan_lambda(st: float, lo: float = 1e-8, hi: float = 5.0, tol: float = 1e-12) -> float:
    """Root of ``lam * exp(lam**2) * erf(lam) = St / sqrt(pi)`` by bisection.

    Stops once the bracket is narrower than ``tol`` and the residual is
    below ``tol`` as well.
    """
    if not st > 0.0:
        raise ValueError("Stefan number must be positive")
    target = st / SQRT_PI

    def f(lam):
        return lam * math.exp(lam * lam) * math.erf(lam) - target

    if f(hi) < 0.0:
        raise ValueError(f"Stefan number {st} outside the bracket [{lo}, {hi}]")
    # keep halving past ``tol`` until the residual is also below ``tol``
    while True:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (hi - lo <= tol and abs(fm) <= tol) or mid in (lo, hi):
            return mid
        if fm > 0.0:
            hi = mid
        else:
            lo = mid


@dataclass(frozen=True)
class StefanProblem:
    """One-phase freezing of a medium initially at 0 degC, surface held at ``Ts`` < 0.

    ``stefan_number`` is ``C_f * |Ts| / (L_f * rho_w * theta)`` with ``C_f``
    the frozen volumetric heat capacity and ``theta`` the freezable water.
    """

    Ts: float
    kappa_f: float
    stefan_number: float

    def __post_init__(self):
        if not self.Ts < 0.0:
            raise ValueError("Ts must be below 0 degC")
        if not self.kappa_f > 0.0:
            raise ValueError("kappa_f must be positive")
        if not self.stefan_number > 0.0:
            raise ValueError("stefan_number must be positive")

    @property
    def lam(self) -> float:
        return stefan_lambda(self.stefan_number)


def stefan_front(problem: StefanProblem, t: float) -> float:
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return 2.0 * problem.lam * math.sqrt(problem.kappa_f * t)


def stefan_problem_for_layer(layer, Ts: float) -> StefanProblem:
    """Map a saturated soil layer to its one-phase Stefan problem.

    Frozen properties are taken fully frozen (liquid at ``theta_r``); the
    freezable water is ``theta_s - theta_r``.
    """
    frozen = freezing_partition(-1e3 * layer.freeze_w, layer.theta_s, layer)
    c_f = float(volumetric_heat_capacity(frozen.theta_liq, frozen.theta_ice, layer))
    k_f = float(thermal_conductivity(frozen.theta_liq, frozen.theta_ice, layer))
    latent = L_RHO * (layer.theta_s - layer.theta_r)
    return StefanProblem(Ts=Ts, kappa_f=k_f / c_f, stefan_number=c_f * abs(Ts) / latent)


def erfc_profile(Ts: float, kappa: float, z: float, t: float) -> float:
    """Temperature of a semi-infinite medium at 0 after the surface steps to ``Ts``."""
    if not t > 0.0:
        raise ValueError("t must be positive")
    return Ts * math.erfc(z / (2.0 * math.sqrt(kappa * t)))


def hydrostatic_head(h0: float, z: float) -> float:
    """Pressure head at depth ``z`` for uniform total head (water table at ``z = -h0``)."""
    return h0 + z


def unit_gradient_flux(h: float, layer) -> float:
    """Steady downward flux of a uniform-head column draining under gravity alone."""
    from .constitutive import effective_saturation, hydraulic_conductivity, water_retention

    theta = water_retention(h, layer)
    se = effective_saturation(theta, layer)
    return float(hydraulic_conductivity(se, theta, 0.0, layer))
