"""semilab: desk-scale audits of semiclassical resolvent lower bounds.

The package certifies, on discretized one-dimensional models, the scaling
law sigma_min(P - z) >= c h^(2/3) (|z| - T)^(1/3) for magnetic Schrodinger
operators with complex electric potential, together with every symbol-level
ingredient the estimate rests on: growth hypotheses of the model, symbol
class memberships, weight-function inequalities, and the Weyl/Wick
quantization identities.
"""

from .cutoffs import CutoffProfile, chi_profile, psi_profile
from .models import (MODELS, ModelError, PotentialModel, audit_conditions,
                     default_sample, eval_potentials, get_model)
from .symbols import (CalibratedConstants, PhasePoint, ProofConstants, SymbolField,
                      WeightParams, calibrate_constants, choose_R, eval_F, eval_G,
                      eval_Psi, eval_chi_t, eval_g, eval_lambda, eval_p, eval_q,
                      hamilton_derivative)
from .audits import (InequalityReport, PhaseGrid, SymbolClassReport,
                     audit_ellipticity, audit_psi_derivatives, audit_rep_bounds,
                     audit_weight_inequality, check_symbol_class, default_phase_grid)
from .quantize import (CoherentFrame, GridSpec, OperatorMatrix, QuantizeError,
                       check_weyl_composition, check_wick_identities, coherent_frame,
                       empirical_opnorm, weyl_general, weyl_poly, wick,
                       wick_remainder)
from .resolvent import (GridPolicy, RegionParams, SweepRecord, certify_lower_bound,
                        compare_pq, fit_exponents, region_contains, sigma_min, sweep)

__version__ = "0.1.0"
