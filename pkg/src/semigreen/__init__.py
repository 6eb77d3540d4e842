"""Matrix-free semiclassical spectral operators on periodic FFT boxes."""

from .factorization import (FactorSet, build_factor_set,
                            decomposition_residual, divergence_symbol,
                            e_one_sphere_residual, factored_op,
                            factorization_residual, factorization_sweep,
                            flattened_symbol, j_heat_symbol, j_op, q_op,
                            reference_op)
from .flatten import (FlatteningMap, flat_conjugated_laplacian, flat_g_phi,
                      flatten_field, graph_bump, shear_op, unflatten_field)
from .greens_free import (ShiftCheckReport, SplitReport, adjoint_conjugated_laplacian,
                          characteristic_clearance, conjugated_laplacian,
                          conjugated_symbol, g_phi_apply, g_phi_multiplier,
                          g_phi_op, g_phi_shifted_check, g_phi_split,
                          select_detuned_box)
from .grid import (Field, Grid, fourier_h, inverse_fourier_h, make_grid,
                   margin_window, smoothstep7)
from .heatflow import (HeatSymbol, causal_inverse, half_space_inverse,
                       heat_operator, refined_inverse, steady_inverse,
                       support_leak)
from .linop import LinOp, check_adjoint, check_linearity, diagonal, identity, multiplier
from .norms import inner, lr_norm, mixed_norm, sobolev_norm, sup_norm
from .parametrix import (ParametrixBundle, boundary_plane_index,
                         build_parametrix, default_domain_mask, p_l_apply,
                         p_s_apply, p_s_residue_apply, parametrix_residual,
                         plane_trace, small_symbol_split, undamped_roots)
from .probes import (NormReport, ScalingReport, op_norm_probe, scaling_fit,
                     standard_probe_family, tangential_band_probe)
from .psido import (FullSymbol, SeparableFullSymbol, TangSymbol,
                    compose_expansion, quantize_full, quantize_tangential,
                    tangential_multiplier)
from .solvers import ConvergenceError, SolveResult, richardson_solve

__version__ = "0.1.0"
