"""Closed-form constitutive relations.

Every function takes a ``layer`` argument that may be a :class:`SoilLayer`
(scalar parameters) or a :class:`CellParameters` (per-cell arrays); numpy
broadcasting handles both.

* retention and relative conductivity: van Genuchten (1980) / Mualem (1976)
* ice impedance: ``10 ** (-omega * Q)`` with ``Q`` the ice fraction of pore water
* soil freezing curve: exponential decay of unfrozen water below 0 degC
* thermal conductivity: geometric-mean mixing of solid, water, ice and air
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

L_FUSION = 3.34e5  # J/kg
RHO_WATER = 1000.0  # kg/m3
RHO_ICE = 917.0  # kg/m3
C_WATER = 4182.0  # J/(kg K)
C_ICE = 2108.0  # J/(kg K)
K_AIR = 0.025  # W/(m K)

# volumetric products used throughout the solvers
CW_RHO = C_WATER * RHO_WATER
CI_RHO = C_ICE * RHO_ICE
L_RHO = L_FUSION * RHO_WATER


def _vg_m(layer):
    return 1.0 - 1.0 / np.asarray(layer.vg_n, dtype=float)


def water_retention(h, layer):
    """Volumetric water content for pressure head ``h`` (m)."""
    h = np.asarray(h, dtype=float)
    n = np.asarray(layer.vg_n, dtype=float)
    m = _vg_m(layer)
    suction = np.maximum(-h, 0.0)
    se = (1.0 + (layer.vg_alpha * suction) ** n) ** (-m)
    return layer.theta_r + (layer.theta_s - layer.theta_r) * se


def retention_capacity(h, layer):
    """d(theta)/dh of :func:`water_retention`; zero for h >= 0."""
    h = np.asarray(h, dtype=float)
    n = np.asarray(layer.vg_n, dtype=float)
    m = _vg_m(layer)
    a = np.asarray(layer.vg_alpha, dtype=float)
    suction = np.maximum(-h, 0.0)
    x = (a * suction) ** n
    # dSe/d(suction) = -m n a (a s)^(n-1) (1 + x)^(-m-1); d/dh flips the sign
    with np.errstate(divide="ignore", invalid="ignore"):
        dse = m * n * a * (a * suction) ** (n - 1.0) * (1.0 + x) ** (-m - 1.0)
    dse = np.where(suction > 0.0, dse, 0.0)
    return (layer.theta_s - layer.theta_r) * dse


def effective_saturation(theta, layer):
    theta = np.asarray(theta, dtype=float)
    lo = np.asarray(layer.theta_r, dtype=float)
    hi = np.asarray(layer.theta_s, dtype=float)
    if np.any(theta < lo) or np.any(theta > hi):
        raise ValueError("theta outside [theta_r, theta_s]")
    return (theta - lo) / (hi - lo)


def impedance_factor(theta_liq, theta_ice, layer):
    theta_liq = np.asarray(theta_liq, dtype=float)
    theta_ice = np.asarray(theta_ice, dtype=float)
    pore_water = theta_ice + theta_liq
    q = np.divide(theta_ice, pore_water, out=np.zeros(np.broadcast(theta_ice, pore_water).shape),
                  where=pore_water > 0.0)
    return 10.0 ** (-np.asarray(layer.impedance_omega) * q)


def hydraulic_conductivity(se, theta_liq, theta_ice, layer):
    """Mualem conductivity at saturation ``se`` times the ice impedance factor."""
    se = np.clip(np.asarray(se, dtype=float), 0.0, 1.0)
    m = _vg_m(layer)
    # 1 - (1 - y)^m without cancellation for small y
    with np.errstate(divide="ignore"):
        kr = np.sqrt(se) * (-np.expm1(m * np.log1p(-se ** (1.0 / m)))) ** 2
    return layer.K_sat * kr * impedance_factor(theta_liq, theta_ice, layer)


class FreezeThawPartition(NamedTuple):
    theta_liq: np.ndarray
    theta_ice: np.ndarray
    d_theta_liq_dT: np.ndarray


def freezing_partition(T, theta_total, layer) -> FreezeThawPartition:
    """Split total water into liquid and ice at temperature ``T`` (degC)."""
    T = np.asarray(T, dtype=float)
    theta_total = np.asarray(theta_total, dtype=float)
    w = np.asarray(layer.freeze_w, dtype=float)
    frozen = T < 0.0
    decay = np.exp(np.minimum(T, 0.0) / w)
    excess = theta_total - layer.theta_r
    theta_liq = np.where(frozen, layer.theta_r + excess * decay, theta_total)
    theta_ice = theta_total - theta_liq
    # refit liquid from ice so that liquid + ice == total holds bit-exactly
    theta_liq = theta_total - theta_ice
    dliq = np.where(frozen, excess * decay / w, 0.0)
    return FreezeThawPartition(theta_liq, theta_ice, dliq)


def volumetric_heat_capacity(theta_liq, theta_ice, layer):
    return (1.0 - layer.theta_s) * layer.C_solid + theta_liq * CW_RHO + theta_ice * CI_RHO


def apparent_heat_capacity(T, theta_total, layer):
    part = freezing_partition(T, theta_total, layer)
    c_vol = volumetric_heat_capacity(part.theta_liq, part.theta_ice, layer)
    return c_vol + L_RHO * part.d_theta_liq_dT


def thermal_conductivity(theta_liq, theta_ice, layer):
    theta_s = np.asarray(layer.theta_s, dtype=float)
    air = np.maximum(theta_s - theta_liq - theta_ice, 0.0)
    return (
        np.asarray(layer.k_solid) ** (1.0 - theta_s)
        * np.asarray(layer.k_water) ** theta_liq
        * np.asarray(layer.k_ice) ** theta_ice
        * K_AIR ** air
    )


def energy_content(T, theta_liq, theta_ice, layer):
    """Sensible plus latent energy per unit volume (J/m3).

    Reference: 0 degC, all water liquid. Ice carries a latent deficit of
    ``L_f * rho_w`` per unit volume (ice counted at water density).
    """
    c_vol = volumetric_heat_capacity(theta_liq, theta_ice, layer)
    return c_vol * T - L_RHO * theta_ice
