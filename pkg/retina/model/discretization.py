"""
Finite-difference model of the axisymmetric heat equation

    dT/dt = kappa (d_rr + (1/r) d_r + d_zz) T + source

on the (r, z) half-plane with T = 0 on r = R and on both axial ends. The radial mesh is
uniform; the axial mesh is piecewise uniform with a node on every layer interface and on the
RPE mid-depth. Unknowns are ordered axial-major: k = (j - 1) * (n_r - 1) + i for radial node i
and axial node j.
"""
import heapq
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from retina.model.absorption import LAYER_CODES, TRANSPARENT, attenuation
from retina.model.geometry import LAYER_ORDER, AbsorptionScale, GridConfig, LayerStack

# Set up global logger for model assembly
logger = logging.getLogger(__name__)

# Gauss-Legendre points per axial interval for the output quadrature
AXIAL_GAUSS_POINTS = 8

# Dense eigenvalue check of A_c up to this size
DENSE_CHECK_SIZE = 400


@dataclass(frozen=True)
class AxialQuadrature:
    """
    Gauss points on the absorbing axial intervals. Each point carries the hat-function weights
    of the two interval nodes, so that sum(g * weight) integrates the piecewise-linear
    interpolant of a nodal field against g.
    """
    code: np.ndarray
    depth: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight_left: np.ndarray
    weight_right: np.ndarray

    def nodal_weights(self, layers: LayerStack, alpha: AbsorptionScale, orders, n_z: int) -> np.ndarray:
        g = attenuation(layers, alpha, self.code, self.depth, orders)
        return (np.bincount(self.left, weights=g * self.weight_left, minlength=n_z)
                + np.bincount(self.right, weights=g * self.weight_right, minlength=n_z))


@dataclass(frozen=True, eq=False)
class FullOrderModel:
    """Discretized heat model; immutable after build_model"""
    layers: LayerStack
    grid: GridConfig
    r: np.ndarray
    z: np.ndarray
    node_layer: np.ndarray
    node_depth: np.ndarray
    node_segment: Tuple[str, ...]
    A: sparse.csc_matrix
    radial_weights: np.ndarray
    beam_mask: np.ndarray
    quadrature: AxialQuadrature
    peak_index: int
    mass: np.ndarray
    segment_intervals: dict = field(default_factory=dict)

    @property
    def n_radial(self) -> int:
        return len(self.r) - 1

    @property
    def n_axial(self) -> int:
        return len(self.z) - 2

    @property
    def n(self) -> int:
        return self.n_radial * self.n_axial

    @property
    def state_shape(self) -> Tuple[int, int]:
        return self.n_axial, self.n_radial

    @property
    def source_scale(self) -> float:
        """1/(rho C_p pi R_I^2): converts absorbed W/m into K/s per unit volume"""
        material = self.layers.material
        return 1.0 / (material.volumetric_heat_capacity * np.pi * self.grid.beam_radius ** 2)

    @property
    def axial_extent(self) -> float:
        return float(self.z[-1] - self.z[0])

    def index(self, i_r: int, j_z: int) -> int:
        """State index of radial node i_r and axial node j_z (1 <= j_z <= n_z - 2)"""
        if not (0 <= i_r < self.n_radial and 1 <= j_z <= self.n_axial):
            raise ValueError(f"node ({i_r}, {j_z}) is not an unknown of the model")
        return (j_z - 1) * self.n_radial + i_r

    def node_of(self, k: int) -> Tuple[int, int]:
        return k % self.n_radial, k // self.n_radial + 1

    @cached_property
    def steady_lu(self):
        """Sparse LU of A_c, shared by all steady-state solves"""
        logger.debug(f"Factorizing A_c for steady-state solves (n={self.n})")
        return splu(self.A.tocsc())

    def summary(self) -> dict:
        return {
            'n': self.n,
            'n_r': len(self.r),
            'n_z': len(self.z),
            'axial_extent_m': self.axial_extent,
            'radius_m': self.grid.radius,
            'beam_radius_m': self.grid.beam_radius,
            'dt_s': self.grid.dt,
            'diffusivity_m2_s': self.layers.material.diffusivity,
            'segment_intervals': dict(self.segment_intervals),
        }


def _axial_segments(layers: LayerStack, grid: GridConfig) -> List[Tuple[str, float]]:
    segments = []
    if grid.margin_top > 0:
        segments.append(('margin_top', grid.margin_top))
    segments.extend((name, layers.thickness(name)) for name in LAYER_ORDER)
    if grid.margin_bottom > 0:
        segments.append(('margin_bottom', grid.margin_bottom))
    return segments


def _allocate_intervals(segments: List[Tuple[str, float]], total: int, rpe_intervals: int) -> List[int]:
    """
    Distribute `total` axial intervals over the segments. The RPE gets exactly
    `rpe_intervals`; every other segment gets at least one and spare intervals go to the
    segment with the coarsest spacing.
    """
    counts = [rpe_intervals if name == 'rpe' else 1 for name, _ in segments]
    spare = total - sum(counts)
    if spare < 0:
        raise ValueError(
            f"grid.n_z={total + 1} leaves a layer without mesh nodes; "
            f"at least {sum(counts) + 1} axial nodes are needed for {len(segments)} segments "
            f"and {rpe_intervals} RPE intervals")

    heap = [(-thickness, position) for position, (name, thickness) in enumerate(segments)
            if name != 'rpe']
    heapq.heapify(heap)
    for _ in range(spare):
        _, position = heapq.heappop(heap)
        counts[position] += 1
        heapq.heappush(heap, (-segments[position][1] / counts[position], position))
    return counts


def _axial_mesh(layers: LayerStack, grid: GridConfig):
    segments = _axial_segments(layers, grid)
    counts = _allocate_intervals(segments, grid.n_z - 1, grid.rpe_intervals)

    z_parts, codes, depths, names = [], [], [], []
    top = -grid.margin_top
    for (name, thickness), count in zip(segments, counts):
        nodes = np.linspace(top, top + thickness, count + 1)[:-1]
        z_parts.append(nodes)
        codes.extend([LAYER_CODES.get(name, TRANSPARENT)] * count)
        depths.append(nodes - top)
        names.extend([name] * count)
        top += thickness
    # bottom Dirichlet node
    z_parts.append(np.array([top]))
    codes.append(TRANSPARENT)
    depths.append(np.zeros(1))
    names.append(segments[-1][0])

    z = np.concatenate(z_parts)
    if np.any(np.diff(z) <= 0):
        raise ValueError("axial mesh is not strictly monotone")
    for name in LAYER_ORDER:
        if name not in names:
            raise ValueError(f"layer '{name}' contains no mesh node")
    return (z, np.array(codes, dtype=int), np.concatenate(depths), tuple(names),
            {name: count for (name, _), count in zip(segments, counts)})


def _radial_operator(r: np.ndarray) -> sparse.csr_matrix:
    """d_rr + (1/r) d_r on the radial unknowns r_0 .. r_{n_r-2}; 2 d_rr on the axis"""
    h = r[1] - r[0]
    m = len(r) - 1
    diag = np.full(m, -2.0 / h ** 2)
    lower = np.zeros(m - 1)
    upper = np.zeros(m - 1)
    # symmetry limit at r = 0 with ghost node T_{-1} = T_1
    diag[0] = -4.0 / h ** 2
    upper[0] = 4.0 / h ** 2
    ri = r[1:m]
    lower[:] = 1.0 / h ** 2 - 1.0 / (2.0 * ri * h)
    upper[1:] = (1.0 / h ** 2 + 1.0 / (2.0 * ri * h))[:-1]
    return sparse.diags([lower, diag, upper], [-1, 0, 1], format='csr')


def _axial_operator(z: np.ndarray) -> sparse.csr_matrix:
    """Three-point d_zz on a non-uniform mesh, interior nodes only"""
    h_minus = z[1:-1] - z[:-2]
    h_plus = z[2:] - z[1:-1]
    span = h_minus + h_plus
    lower = 2.0 / (h_minus * span)
    upper = 2.0 / (h_plus * span)
    diag = -2.0 / (h_minus * h_plus)
    return sparse.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], format='csr')


def _symmetrizing_weights(T: sparse.spmatrix) -> np.ndarray:
    """
    Positive diagonal m with diag(m) T symmetric, for a tridiagonal T with positive off-diagonals:
    m_{i+1} T_{i+1,i} = m_i T_{i,i+1}.
    """
    upper = T.diagonal(1)
    lower = T.diagonal(-1)
    if np.any(upper <= 0) or np.any(lower <= 0):
        raise ValueError("stencil has non-positive off-diagonal entries")
    return np.concatenate([[1.0], np.cumprod(upper / lower)])


def _beam_average_weights(r: np.ndarray, beam_radius: float) -> np.ndarray:
    """
    Trapezoidal weights of (2/R_I^2) * integral_0^{R_I} r T(r) dr with T linear between nodes.
    The last partial interval uses the interpolated value at R_I.
    """
    weights = np.zeros(len(r))
    last = int(np.searchsorted(r, beam_radius, side='right')) - 1
    for k in range(last):
        half = 0.5 * (r[k + 1] - r[k])
        weights[k] += half * r[k]
        weights[k + 1] += half * r[k + 1]
    tail = beam_radius - r[last]
    if tail > 0:
        theta = tail / (r[last + 1] - r[last])
        weights[last] += 0.5 * tail * (r[last] + beam_radius * (1.0 - theta))
        weights[last + 1] += 0.5 * tail * beam_radius * theta
    return weights / (0.5 * beam_radius ** 2)


def _axial_quadrature(z: np.ndarray, codes: np.ndarray, depths: np.ndarray) -> AxialQuadrature:
    points, gauss_weights = np.polynomial.legendre.leggauss(AXIAL_GAUSS_POINTS)
    parts = {key: [] for key in ('code', 'depth', 'left', 'right', 'weight_left', 'weight_right')}
    for j in range(len(z) - 1):
        # an interval belongs to the layer of its upper node
        if codes[j] == TRANSPARENT:
            continue
        h = z[j + 1] - z[j]
        local = 0.5 * (points + 1.0)
        parts['code'].append(np.full(len(points), codes[j]))
        parts['depth'].append(depths[j] + h * local)
        parts['left'].append(np.full(len(points), j))
        parts['right'].append(np.full(len(points), j + 1))
        parts['weight_left'].append(0.5 * h * gauss_weights * (1.0 - local))
        parts['weight_right'].append(0.5 * h * gauss_weights * local)
    return AxialQuadrature(**{key: np.concatenate(value) for key, value in parts.items()})


def _peak_node(z: np.ndarray, layers: LayerStack) -> int:
    target = layers.rpe_center
    j = int(np.argmin(np.abs(z - target)))
    half_cell = 0.5 * min(z[j] - z[j - 1] if j > 0 else np.inf,
                          z[j + 1] - z[j] if j < len(z) - 1 else np.inf)
    if abs(z[j] - target) > half_cell or not 1 <= j <= len(z) - 2:
        raise ValueError(f"no mesh node within half a cell of the RPE center z={target:.3e}")
    return j


def build_model(layers: LayerStack, grid: GridConfig) -> FullOrderModel:
    """
    Assemble the finite-difference model.

    Args:
        layers: LayerStack with thicknesses, absorption references and material constants
        grid: GridConfig with geometry and resolution

    Returns:
        FullOrderModel: sparse A_c of size (n_r - 1)(n_z - 2) with the Dirichlet rows eliminated
    """
    logger.info(f"build_model called with n_r={grid.n_r}, n_z={grid.n_z}, R={grid.radius}, "
                f"R_I={grid.beam_radius}")

    z, codes, depths, names, intervals = _axial_mesh(layers, grid)
    logger.debug(f"Axial intervals per segment: {intervals}")

    r = np.linspace(0.0, grid.radius, grid.n_r)
    if grid.beam_radius > r[-2]:
        raise ValueError(f"beam_radius={grid.beam_radius} must not exceed the last interior "
                         f"radial node r={r[-2]:.3e}")

    kappa = layers.material.diffusivity
    radial = _radial_operator(r)
    axial = _axial_operator(z)
    A = kappa * (sparse.kron(sparse.identity(len(z) - 2), radial)
                 + sparse.kron(axial, sparse.identity(len(r) - 1)))
    A = A.tocsc()
    # diag(mass) A is symmetric: r-weighted cell volumes up to scaling
    mass = np.kron(_symmetrizing_weights(axial), _symmetrizing_weights(radial))

    weights = _beam_average_weights(r, grid.beam_radius)
    peak_axial = _peak_node(z, layers)

    model = FullOrderModel(
        layers=layers,
        grid=grid,
        r=r,
        z=z,
        node_layer=codes,
        node_depth=depths,
        node_segment=names,
        A=A,
        radial_weights=weights[:-1],
        beam_mask=(r[:-1] <= grid.beam_radius * (1.0 + 1e-12)).astype(float),
        quadrature=_axial_quadrature(z, codes, depths),
        peak_index=(peak_axial - 1) * (len(r) - 1),
        mass=mass / mass.max(),
        segment_intervals=intervals,
    )

    if model.n <= DENSE_CHECK_SIZE:
        abscissa = float(np.max(np.linalg.eigvals(A.toarray()).real))
        logger.debug(f"Spectral abscissa of A_c: {abscissa:.6e}")
        if abscissa >= 0:
            raise ValueError(f"A_c is not stable (spectral abscissa {abscissa:.3e})")

    logger.info(f"Model built: n={model.n}, axial extent={model.axial_extent:.4e} m")
    return model
