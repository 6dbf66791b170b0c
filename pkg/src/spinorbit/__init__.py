"""
spinorbit
=========

Coherent-state semiclassics for Hamiltonians with spin-orbit coupling,
``H = H0(x, xi) + C(x, xi) . S``: spin-coherent states, skew-product and
spin-orbit classical flows, thawed Gaussian packets with Maslov tracking,
a split-step spinor reference solver and the experiments that compare them.
"""

from .spin import (SpinRep, make_spin_matrices, section_g, coherent_vector,
                   husimi_overlap, overlap_phase, berezin_reconstruct, sphere_quadrature)
from .model import SpinOrbitModel, builtin, eval_h_so, MODEL_NAMES
from .classical import (FlowKind, TrajectoryBundle, integrate_flow, lyapunov_max,
                        growth_power, theta_delta, ehrenfest_time)
from .gaussian import (GaussianPacket, siegel_action, gb_matrix, wigner_function,
                       wigner_second_moment, evaluate_packet, propagate_packet,
                       propagate_packet_scenarioA, propagate_packet_scenarioB)
from .quantum import Grid, GridState, PropagatorConfig, split_step, error_norm, observables

__version__ = "0.1.0"
