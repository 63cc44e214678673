"""Vertical column discretization, soil layering and the evolving column state.

Depth is positive downward with the origin at the ground surface.
Temperatures are in degrees Celsius, 0 degC being the freezing point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ColumnMesh:
    """Cell-centered 1D mesh. ``z_face`` has ``n_cells + 1`` entries."""

    z_face: np.ndarray

    def __post_init__(self):
        zf = np.asarray(self.z_face, dtype=float)
        if zf.ndim != 1 or zf.size < 3:
            raise ValueError("a column mesh needs at least 2 cells")
        if zf[0] != 0.0:
            raise ValueError("z_face[0] must be 0 (ground surface)")
        if np.any(np.diff(zf) <= 0.0):
            raise ValueError("z_face must be strictly increasing")
        zf.setflags(write=False)
        object.__setattr__(self, "z_face", zf)

    @property
    def n_cells(self) -> int:
        return self.z_face.size - 1

    @property
    def dz(self) -> np.ndarray:
        return np.diff(self.z_face)

    @property
    def z_center(self) -> np.ndarray:
        return 0.5 * (self.z_face[:-1] + self.z_face[1:])

    @property
    def depth(self) -> float:
        return float(self.z_face[-1])


def build_mesh(depth: float, n_cells: int, grading: float = 1.0) -> ColumnMesh:
    """Geometric mesh of ``n_cells`` cells over ``[0, depth]``.

    ``grading`` is the ratio between the bottom and the top cell thickness,
    so consecutive cells grow by ``grading ** (1 / (n_cells - 1))``.
    """
    if not depth > 0.0:
        raise ValueError(f"depth must be positive, got {depth}")
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError(f"n_cells must be an integer >= 2, got {n_cells}")
    if not grading > 0.0:
        raise ValueError(f"grading must be positive, got {grading}")
    n_cells = int(n_cells)
    if grading == 1.0:
        weights = np.ones(n_cells)
    else:
        ratio = grading ** (1.0 / (n_cells - 1))
        weights = ratio ** np.arange(n_cells)
    dz = depth * weights / weights.sum()
    z_face = np.concatenate(([0.0], np.cumsum(dz)))
    # pin the bottom face exactly; cumsum drifts in the last ulp
    z_face[-1] = depth
    return ColumnMesh(z_face)


@dataclass(frozen=True)
class SoilLayer:
    """Hydraulic, thermal and freezing parameters of one soil horizon."""

    z_top: float
    z_bottom: float
    K_sat: float = 1.0e-6
    theta_r: float = 0.05
    theta_s: float = 0.45
    vg_alpha: float = 2.0
    vg_n: float = 1.6
    C_solid: float = 2.0e6
    k_solid: float = 2.0
    k_water: float = 0.57
    k_ice: float = 2.2
    freeze_w: float = 0.5
    impedance_omega: float = 7.0

    def __post_init__(self):
        for problem in self.violations():
            raise ConfigError(problem)

    def violations(self) -> list[str]:
        out = []
        if not self.z_bottom > self.z_top:
            out.append("layer requires z_bottom > z_top")
        if not 0.0 <= self.theta_r < self.theta_s <= 1.0:
            out.append("layer requires 0 <= theta_r < theta_s <= 1")
        if not self.vg_n > 1.0:
            out.append("layer requires vg_n > 1")
        if not self.vg_alpha > 0.0:
            out.append("layer requires vg_alpha > 0")
        if not self.K_sat > 0.0:
            out.append("layer requires K_sat > 0")
        if not self.freeze_w > 0.0:
            out.append("layer requires freeze_w > 0")
        if not self.impedance_omega >= 0.0:
            out.append("layer requires impedance_omega >= 0")
        for name in ("C_solid", "k_solid", "k_water", "k_ice"):
            if not getattr(self, name) > 0.0:
                out.append(f"layer requires {name} > 0")
        return out


LAYER_PARAMETERS = tuple(f.name for f in fields(SoilLayer) if f.name not in ("z_top", "z_bottom"))


@dataclass(frozen=True)
class SoilProfile:
    layers: tuple[SoilLayer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ConfigError("soil profile needs at least one layer")
        if layers[0].z_top != 0.0:
            raise ConfigError(f"first layer must start at z_top = 0, got {layers[0].z_top}")
        for upper, lower in zip(layers, layers[1:]):
            if lower.z_top != upper.z_bottom:
                raise ConfigError(
                    f"layers not contiguous: z_bottom {upper.z_bottom} followed by z_top {lower.z_top}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> float:
        return self.layers[-1].z_bottom

    @classmethod
    def uniform(cls, depth: float, **params) -> "SoilProfile":
        return cls((SoilLayer(0.0, depth, **params),))


@dataclass(frozen=True)
class CellParameters:
    """Per-cell soil parameters, attribute-compatible with :class:`SoilLayer`."""

    layer_index: np.ndarray
    K_sat: np.ndarray
    theta_r: np.ndarray
    theta_s: np.ndarray
    vg_alpha: np.ndarray
    vg_n: np.ndarray
    C_solid: np.ndarray
    k_solid: np.ndarray
    k_water: np.ndarray
    k_ice: np.ndarray
    freeze_w: np.ndarray
    impedance_omega: np.ndarray

    def __getitem__(self, idx) -> "CellParameters":
        return CellParameters(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})


def sample_profile(profile: SoilProfile, mesh: ColumnMesh) -> CellParameters:
    """Assign each cell the layer containing its center.

    A center lying exactly on a layer boundary goes to the upper layer.
    """
    if profile.depth < mesh.depth:
        raise ConfigError(
            f"soil profile ends at {profile.depth} m but the mesh extends to {mesh.depth} m; "
            f"depth range [{profile.depth}, {mesh.depth}] m is not covered"
        )
    bottoms = np.array([layer.z_bottom for layer in profile.layers])
    # first layer whose bottom is >= center -> upper layer on ties
    idx = np.searchsorted(bottoms, mesh.z_center, side="left")
    arrays = {
        name: np.array([getattr(profile.layers[i], name) for i in idx], dtype=float)
        for name in LAYER_PARAMETERS
    }
    return CellParameters(layer_index=idx, **arrays)


@dataclass
class ColumnState:
    """Mutable state of one column; owned by a single simulation at a time."""

    h: np.ndarray
    T: np.ndarray
    theta_liq: np.ndarray
    theta_ice: np.ndarray
    t: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def theta_total(self) -> np.ndarray:
        return self.theta_liq + self.theta_ice

    def copy(self) -> "ColumnState":
        return replace(
            self,
            h=self.h.copy(),
            T=self.T.copy(),
            theta_liq=self.theta_liq.copy(),
            theta_ice=self.theta_ice.copy(),
            extra=dict(self.extra),
        )

    def check(self, cells: CellParameters, atol: float = 1e-12) -> list[str]:
        """Return the list of violated state invariants (empty when valid)."""
        out = []
        for name in ("h", "T", "theta_liq", "theta_ice"):
            bad = np.flatnonzero(~np.isfinite(getattr(self, name)))
            if bad.size:
                out.append(f"non-finite {name} at cell {bad[0]}")
        if np.any(self.theta_liq < cells.theta_r - atol):
            out.append(f"theta_liq below theta_r at cell {np.argmax(self.theta_liq < cells.theta_r - atol)}")
        if np.any(self.theta_ice < -atol):
            out.append("negative theta_ice")
        if np.any(self.theta_total > cells.theta_s + atol):
            out.append("theta_liq + theta_ice exceeds theta_s")
        if np.any((self.T >= 0.0) & (self.theta_ice > 0.0)):
            out.append("ice present at T >= 0")
        return out
