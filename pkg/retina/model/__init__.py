"""
Heat model package.
Layer geometry, the Lambert-Beer absorption profile, the finite-difference discretization and
the parameter-dependent input/output operators.
"""
from retina.model.geometry import (
    LAYER_ORDER,
    REFERENCE_MEAN,
    REFERENCE_STD,
    AbsorptionScale,
    GridConfig,
    LayerStack,
    Material,
    ParameterDomain,
)
from retina.model.absorption import absorption_profile, attenuation, g_profile
from retina.model.discretization import FullOrderModel, build_model
from retina.model.operators import (
    OperatorSampler,
    assemble_input,
    assemble_output_peak,
    assemble_output_vol,
    assemble_outputs,
    input_coefficient,
    output_vol_coefficient,
)

__all__ = [
    'LAYER_ORDER', 'REFERENCE_MEAN', 'REFERENCE_STD',
    'AbsorptionScale', 'GridConfig', 'LayerStack', 'Material', 'ParameterDomain',
    'absorption_profile', 'attenuation', 'g_profile',
    'FullOrderModel', 'build_model',
    'OperatorSampler', 'assemble_input', 'assemble_output_peak', 'assemble_output_vol',
    'assemble_outputs', 'input_coefficient', 'output_vol_coefficient',
]
