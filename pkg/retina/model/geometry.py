"""
Tissue layers, grid settings and the absorption parameters.
All quantities are SI (m, s, K, W). The axial coordinate z starts at the retina surface and
points along the beam, so the top margin lies at negative z.
"""
import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Set up global logger for geometry settings
logger = logging.getLogger(__name__)

# Layers in the order the beam passes them
LAYER_ORDER = ('retina', 'rpe', 'unpigmented', 'choroid', 'sclera')


class Material(BaseModel):
    """Thermal constants of the tissue (water-like, shared by all layers)"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    density: float = Field(993.0, gt=0, description='rho in kg/m^3')
    heat_capacity: float = Field(4176.0, gt=0, description='C_p in J/(kg K)')
    conductivity: float = Field(0.627, gt=0, description='k in W/(m K)')

    @property
    def diffusivity(self) -> float:
        """Thermal diffusivity k/(rho C_p) in m^2/s"""
        return self.conductivity / (self.density * self.heat_capacity)

    @property
    def volumetric_heat_capacity(self) -> float:
        return self.density * self.heat_capacity


class LayerStack(BaseModel):
    """
    Layer thicknesses and reference absorption coefficients.

    Defaults are average porcine values: thicknesses in m, absorption in 1/m.
    """
    model_config = ConfigDict(frozen=True, extra='forbid')

    retina: float = Field(190e-6, gt=0)
    rpe: float = Field(6e-6, gt=0)
    unpigmented: float = Field(4e-6, gt=0)
    choroid: float = Field(400e-6, gt=0)
    sclera: float = Field(139e-6, gt=0)
    mu_rpe: float = Field(1204e2, ge=0)
    mu_choroid: float = Field(270e2, ge=0)
    material: Material = Field(default_factory=Material)

    def thickness(self, name: str) -> float:
        if name not in LAYER_ORDER:
            raise ValueError(f"Unknown layer '{name}'")
        return getattr(self, name)

    @property
    def total_thickness(self) -> float:
        return sum(self.thickness(name) for name in LAYER_ORDER)

    def interfaces(self) -> List[Tuple[str, float, float]]:
        """
        Layer extents along the beam.

        Returns:
            list: (name, top, bottom) tuples with z measured from the retina surface
        """
        extents = []
        top = 0.0
        for name in LAYER_ORDER:
            bottom = top + self.thickness(name)
            extents.append((name, top, bottom))
            top = bottom
        return extents

    @property
    def rpe_top(self) -> float:
        return self.retina

    @property
    def rpe_center(self) -> float:
        return self.retina + 0.5 * self.rpe

    @property
    def choroid_top(self) -> float:
        return self.retina + self.rpe + self.unpigmented

    @property
    def choroid_bottom(self) -> float:
        return self.choroid_top + self.choroid


class GridConfig(BaseModel):
    """Cylinder geometry, mesh resolution and sample period"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    radius: float = Field(1e-3, gt=0, description='outer radius R')
    beam_radius: float = Field(1e-4, gt=0, description='flat-top beam radius R_I')
    margin_top: float = Field(200e-6, ge=0, description='tissue-free margin above the retina')
    margin_bottom: float = Field(200e-6, ge=0, description='margin below the sclera')
    n_r: int = Field(41, ge=3)
    n_z: int = Field(81, ge=len(LAYER_ORDER) + 2)
    rpe_intervals: int = Field(4, ge=2, description='axial mesh intervals inside the RPE (even)')
    dt: float = Field(1e-3, gt=0, description='sample period delta in s')

    @field_validator('rpe_intervals')
    @classmethod
    def _even_rpe_intervals(cls, value: int) -> int:
        # the RPE mid-depth has to be a mesh node
        if value % 2:
            raise ValueError('rpe_intervals must be even')
        return value

    @model_validator(mode='after')
    def _beam_inside_cylinder(self):
        if self.beam_radius >= self.radius:
            raise ValueError(f'beam_radius={self.beam_radius} must be below radius={self.radius}')
        return self


class AbsorptionScale(BaseModel):
    """Prefactors alpha = (alpha_RPE, alpha_ch) on the reference absorption coefficients"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    rpe: float = Field(..., ge=0)
    ch: float = Field(..., ge=0)

    def as_array(self) -> np.ndarray:
        return np.array([self.rpe, self.ch], dtype=float)

    @classmethod
    def from_array(cls, values) -> 'AbsorptionScale':
        return cls(rpe=float(values[0]), ch=float(values[1]))

    def shifted(self, d_rpe: float = 0.0, d_ch: float = 0.0) -> 'AbsorptionScale':
        return AbsorptionScale(rpe=self.rpe + d_rpe, ch=self.ch + d_ch)

    def __str__(self):
        return f"(rpe={self.rpe:.6g}, ch={self.ch:.6g})"


# Cohort mean and standard deviation of the constant-power fits
REFERENCE_MEAN = AbsorptionScale(rpe=0.7636, ch=0.0986)
REFERENCE_STD = AbsorptionScale(rpe=0.1907, ch=0.0281)


class ParameterDomain(BaseModel):
    """Admissible box D for alpha (mean plus/minus two standard deviations by default)"""
    model_config = ConfigDict(frozen=True, extra='forbid')

    rpe: Tuple[float, float] = (0.3821, 1.1451)
    ch: Tuple[float, float] = (0.0424, 0.1549)

    @field_validator('rpe', 'ch')
    @classmethod
    def _ordered_bounds(cls, value):
        low, high = value
        if not 0 <= low < high:
            raise ValueError(f'bounds must satisfy 0 <= low < high, got {value}')
        return value

    @property
    def center(self) -> AbsorptionScale:
        return AbsorptionScale(rpe=0.5 * sum(self.rpe), ch=0.5 * sum(self.ch))

    def contains(self, alpha: AbsorptionScale, tol: float = 1e-12) -> bool:
        return (self.rpe[0] - tol <= alpha.rpe <= self.rpe[1] + tol
                and self.ch[0] - tol <= alpha.ch <= self.ch[1] + tol)

    def corners(self) -> List[AbsorptionScale]:
        return [AbsorptionScale(rpe=a, ch=b) for a in self.rpe for b in self.ch]

    def grid(self, n_rpe: int = 5, n_ch: int = 5) -> List[AbsorptionScale]:
        """Uniform tensor grid, alpha_RPE varying slowest"""
        return [AbsorptionScale(rpe=float(a), ch=float(b))
                for a in np.linspace(*self.rpe, n_rpe)
                for b in np.linspace(*self.ch, n_ch)]

    def line(self, n: int, ch: float) -> List[AbsorptionScale]:
        """Uniform samples along alpha_RPE with alpha_ch held at `ch`"""
        return [AbsorptionScale(rpe=float(a), ch=ch) for a in np.linspace(*self.rpe, n)]
