"""
Retina package.
Temperature models of retinal laser treatment: the finite-difference heat model, parameter
estimation, sensitivity analysis, parametric model reduction and predictive control.
Each area lives in its own subpackage.
"""
