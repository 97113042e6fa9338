"""
Simulation package.
Implicit Euler stepping, steady states and excitation signals.
"""
from retina.simulation.stepper import Stepper, Trajectory, make_stepper, simulate
from retina.simulation.steady_state import dc_gain, steady_state, steady_state_control
from retina.simulation.excitation import constant_input, piecewise_constant_input

__all__ = [
    'Stepper', 'Trajectory', 'make_stepper', 'simulate',
    'dc_gain', 'steady_state', 'steady_state_control',
    'constant_input', 'piecewise_constant_input',
]
