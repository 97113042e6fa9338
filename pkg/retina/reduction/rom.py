"""
Parametric reduced-order models and their serialization.

Both variants share the projected state matrices
    A_r = W^T A_c V                         (continuous)
    A_d = W^T (I - delta A_c)^{-1} V        (projected implicit Euler)
and differ in how B_r(alpha), B_d(alpha) and C_r(alpha) are evaluated online.
"""
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from math import prod
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from retina.model import AbsorptionScale, FullOrderModel, OperatorSampler, ParameterDomain
from retina.reduction.irka import ProjectionPair

# Set up global logger for reduced models
logger = logging.getLogger(__name__)

VARIANTS = ('taylor', 'deim_gb')


@dataclass(kw_only=True, eq=False)
class ParametricROM:
    variant: str
    pair: ProjectionPair
    A_r: np.ndarray
    A_d: np.ndarray
    delta: float
    domain: Optional[ParameterDomain] = None
    metadata: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.A_r.shape[0]

    @cached_property
    def stable(self) -> bool:
        """Continuous poles in the open left half plane and discrete poles inside the unit disc"""
        if not (np.all(np.isfinite(self.A_r)) and np.all(np.isfinite(self.A_d))):
            return False
        return bool(np.max(np.linalg.eigvals(self.A_r).real) < 0
                    and np.max(np.abs(np.linalg.eigvals(self.A_d))) < 1)

    def _check_domain(self, alpha: AbsorptionScale) -> None:
        if self.domain is not None and not self.domain.contains(alpha):
            logger.warning(f"ROM evaluated at alpha={alpha} outside its parameter domain")

    def _inputs(self, alpha: AbsorptionScale) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def outputs(self, alpha: AbsorptionScale) -> np.ndarray:
        """Reduced output matrix [C_vol V; C_peak V] of shape (2, d)"""
        raise NotImplementedError

    def instantiate(self, alpha: AbsorptionScale) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Continuous reduced triple (A_r, B_r(alpha), C_r(alpha))"""
        self._check_domain(alpha)
        return self.A_r, self._inputs(alpha)[0], self.outputs(alpha)

    def discrete(self, alpha: AbsorptionScale) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Discrete prediction model x_{k+1} = A_d x_k + B_d(alpha) u_k with outputs C_r(alpha)"""
        self._check_domain(alpha)
        return self.A_d, self._inputs(alpha)[1], self.outputs(alpha)

    def dc_gain(self, alpha: AbsorptionScale) -> np.ndarray:
        """Continuous steady-state gains (G_vol, G_peak) of the reduced model"""
        A_r, B_r, C_r = self.instantiate(alpha)
        return -C_r @ np.linalg.solve(A_r, B_r)

    def discrete_dc_gain(self, alpha: AbsorptionScale) -> np.ndarray:
        A_d, B_d, C_r = self.discrete(alpha)
        return C_r @ np.linalg.solve(np.eye(self.d) - A_d, B_d)

    def simulate(self, alpha: AbsorptionScale, u_seq, x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Reduced recursion with the sampling convention of the full model: y[k] = C_r x_k.

        Returns:
            tuple: (y_vol, y_peak)
        """
        A_d, B_d, C_r = self.discrete(alpha)
        u = np.asarray(u_seq, dtype=float).ravel()
        x = np.zeros(self.d) if x0 is None else np.asarray(x0, dtype=float)
        outputs = np.empty((2, len(u)))
        for k, power in enumerate(u):
            outputs[:, k] = C_r @ x
            x = A_d @ x + B_d * power
        return outputs[0], outputs[1]

    def _arrays(self) -> dict:
        return {'V': self.pair.V, 'W': self.pair.W, 'A_r': self.A_r, 'A_d': self.A_d}

    def _header(self) -> dict:
        return {
            'variant': self.variant,
            'delta': self.delta,
            'domain': self.domain.model_dump(mode='json') if self.domain is not None else None,
            'metadata': self.metadata,
        }


@dataclass(kw_only=True, eq=False)
class TaylorROM(ParametricROM):
    """Taylor expansion of B and C_vol about alpha0, projected onto (V, W)"""
    alpha0: AbsorptionScale
    orders: List[Tuple[int, int]]
    B_table: np.ndarray
    B_table_d: np.ndarray
    C_table: np.ndarray
    c_peak: np.ndarray

    @property
    def order(self) -> int:
        return max(i + j for i, j in self.orders)

    def monomials(self, alpha: AbsorptionScale) -> np.ndarray:
        offset = (alpha.rpe - self.alpha0.rpe, alpha.ch - self.alpha0.ch)
        return np.array([prod(o ** p for o, p in zip(offset, orders)) for orders in self.orders])

    def _inputs(self, alpha):
        weights = self.monomials(alpha)
        return self.B_table @ weights, self.B_table_d @ weights

    def outputs(self, alpha):
        return np.vstack([self.monomials(alpha) @ self.C_table, self.c_peak])

    def _arrays(self):
        arrays = super()._arrays()
        arrays.update({'B_table': self.B_table, 'B_table_d': self.B_table_d,
                       'C_table': self.C_table, 'c_peak': self.c_peak})
        return arrays

    def _header(self):
        header = super()._header()
        header.update({'alpha0': self.alpha0.model_dump(), 'orders': [list(o) for o in self.orders]})
        return header


@dataclass(kw_only=True, eq=False)
class DeimROM(ParametricROM):
    """
    DEIM-approximated operators on a global basis:
        B_r(alpha) = (W^T U_B M_B) B(alpha)[idx_B]
        C_r(alpha) = C(alpha)[:, idx_C] (M_C^T U_C^T V)
    """
    input_sampler: OperatorSampler
    output_sampler: OperatorSampler
    B_side: np.ndarray
    B_side_d: np.ndarray
    C_side: np.ndarray

    def _inputs(self, alpha):
        sampled = self.input_sampler.input_entries(alpha)
        return self.B_side @ sampled, self.B_side_d @ sampled

    def outputs(self, alpha):
        return self.output_sampler.output_entries(alpha) @ self.C_side

    def _arrays(self):
        arrays = super()._arrays()
        arrays.update({'B_side': self.B_side, 'B_side_d': self.B_side_d, 'C_side': self.C_side,
                       'input_indices': self.input_sampler.indices,
                       'output_indices': self.output_sampler.indices})
        return arrays


def rom_instantiate(rom: ParametricROM, alpha: AbsorptionScale) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(A_r, B_r(alpha), C_r(alpha)) at a cost independent of the full dimension"""
    return rom.instantiate(alpha)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def save_rom(rom: ParametricROM, path) -> Tuple[Path, Path]:
    """
    Write `<path>.npz` (matrices) and `<path>.json` (variant, delta, domain, metadata).

    Returns:
        tuple: paths of both files
    """
    base = Path(path).with_suffix('')
    arrays_path, header_path = base.with_suffix('.npz'), base.with_suffix('.json')
    np.savez(arrays_path, **rom._arrays())
    header_path.write_text(json.dumps(rom._header(), indent=2, default=_json_default))
    logger.info(f"Saved {rom.variant} ROM (d={rom.d}) to {arrays_path}")
    return arrays_path, header_path


def load_rom(path, model: FullOrderModel) -> ParametricROM:
    """Read a ROM written by save_rom; DEIM samplers are rebuilt from `model`"""
    base = Path(path).with_suffix('')
    header = json.loads(base.with_suffix('.json').read_text())
    with np.load(base.with_suffix('.npz')) as data:
        arrays = {key: data[key] for key in data.files}
    if arrays['V'].shape[0] != model.n:
        raise ValueError(f"ROM was built for n={arrays['V'].shape[0]}, model has n={model.n}")

    common = {
        'variant': header['variant'],
        'pair': ProjectionPair(V=arrays['V'], W=arrays['W']),
        'A_r': arrays['A_r'],
        'A_d': arrays['A_d'],
        'delta': header['delta'],
        'domain': ParameterDomain(**header['domain']) if header['domain'] else None,
        'metadata': header['metadata'],
    }
    if header['variant'] == 'taylor':
        return TaylorROM(
            **common,
            alpha0=AbsorptionScale(**header['alpha0']),
            orders=[tuple(o) for o in header['orders']],
            B_table=arrays['B_table'], B_table_d=arrays['B_table_d'],
            C_table=arrays['C_table'], c_peak=arrays['c_peak'],
        )
    if header['variant'] == 'deim_gb':
        return DeimROM(
            **common,
            input_sampler=OperatorSampler(model, arrays['input_indices']),
            output_sampler=OperatorSampler(model, arrays['output_indices']),
            B_side=arrays['B_side'], B_side_d=arrays['B_side_d'], C_side=arrays['C_side'],
        )
    raise ValueError(f"unknown ROM variant '{header['variant']}'")
