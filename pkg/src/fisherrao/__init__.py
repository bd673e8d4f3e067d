"""Fisher-Rao distances between parametric probability distributions.

Closed forms where they exist, certified lower/upper bounds otherwise, and
guaranteed ``(1 + eps)``-multiplicative or ``delta``-additive
approximations built on top of them.

Modules:

* :mod:`fisherrao.spd` - SPD matrix functions, affine-invariant and Birkhoff geometry
* :mod:`fisherrao.manifold` - metric fields, curve lengths, Hessian test, geodesic shooting
* :mod:`fisherrao.families` - statistical families, their closed forms and the registry
* :mod:`fisherrao.bounds` - lower and upper bounds
* :mod:`fisherrao.approx` - metric-scaling estimates and guaranteed approximations
* :mod:`fisherrao.cli` - command-line front end
"""

__version__ = "0.1.0"

from .errors import (ApproximationFailure, CapabilityError, DomainError, FisherRaoError,
                     InvalidInput, NumericalFailure)
from .spd import (ahm_midpoint, birkhoff_distance, birkhoff_geodesic, extreme_eigs,
                  spd_distance, spd_geodesic, sym_eigen)
from .manifold import (Curve, HessianTest, MetricField, christoffels, curve_length,
                       geodesic_bvp_oracle, hessian_metric_test, length_element)
from .families import (FamilyDescriptor, get_family, categorical_fisher_rao,
                       categorical_hellinger, location_scale_distance, mvn_jeffreys, mvn_kl)
from .bounds import (BoundsPair, CalvoOllerEmbedding, bco_distance, calvo_oller_lb,
                     fisher_manhattan_ub, jeffreys_bregman_ub, lerp_curve_ub,
                     pullback_birkhoff_curve)
from .approx import (ApproxConfig, DistanceEstimate, approx_add, approx_mult_geodesic,
                     approx_mult_pregeodesic, fdiv_small_scale, metric_scaling_amortized,
                     metric_scaling_approx)

__all__ = [name for name in dir() if not name.startswith("_")]
