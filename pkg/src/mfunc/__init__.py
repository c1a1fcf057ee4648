"""M-functions for symmetric power L-functions: local densities under the
Sato-Tate measure, their Fourier transforms, products over primes, inversion,
and comparison against newform data."""

__version__ = "0.1.0"

from .errors import (DataError, DomainError, MFuncError, MissingEigenvalues,
                     NonDecayingTransform, NumericalError, ParseError, ToleranceNotMet,
                     ValidationError)
from .gseries import (GCoeffTable, g_coeff_table, g_majorant, g_pair_sum, local_transform,
                      local_transform_series, main_factor, unit_factor)
from .local import (LocalParams, ValueInterval, g_local, local_density,
                    local_transform_quadrature, script_g, st_mean_G, theta_of_u, value_interval)
from .mfunction import (DensityGrid, LimitMarker, TransformTable, finite_density_convolution,
                        finite_transform, finite_transform_table, invert_density, limit_transform,
                        limit_transform_table, mc_compare, support_interval, transform_table)
from .newforms import (LevelBatch, NewformRecord, empirical_average, parse_newforms,
                       partial_log_L, petersson_check, s_r_sum, synthetic_batch)
from .primes import PrimeSet, prime_set, primes_up_to
from .sato_tate import STQuadrature, STSampler, st_cdf, st_quadrature, st_sample
