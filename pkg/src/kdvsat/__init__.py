"""Simulation and control synthesis for the bilinearly controlled linear KdV-Schrodinger equation on the circle."""

from .errors import (BudgetExceeded, ConfigError, CostGuard, DegenerateFit, DepthBudget, KdvSatError, NonDiffeo,
                     NormMismatch, NotInSpan, NotPositive, TruncationLoss)
from .flows import FlowMap, diffeo_apply, flow_period, integrate_flow, transport_apply
from .spectral import (ControlProfileSet, ControlProgram, Segment, SolverConfig, SpectralState, evolve_constant,
                       evolve_program, free_flow, heat_regularize, phase_multiply, sobolev_norm, translate)
from .trig import (Basis, Bracket, CubedDerivative, Gen, Lin, LinComb, TrigPoly, VectorField, derivative,
                   evaluate, evaluate_bracket, fn_step, lie_bracket, mode_certificate, multiply, polarized_product,
                   vectorfield_certificate)

__version__ = "0.1.0"
