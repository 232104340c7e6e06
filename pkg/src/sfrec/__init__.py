"""Sound field reconstruction from sparse microphone observations.

Core layers: plane-wave grids and dictionaries (:mod:`sfrec.grids`), field
simulation (:mod:`sfrec.simulate`), subdomain partitioning
(:mod:`sfrec.partition`), direct sparse solvers (:mod:`sfrec.direct`), the
convolutional smooth-sparse solver (:mod:`sfrec.convadmm`), derived velocity
and intensity fields (:mod:`sfrec.fields`) and metrics
(:mod:`sfrec.metrics`).  Experiments, an HTTP service and a CLI sit on top.
"""

from ._version import __version__
from .convadmm import (AdmmState, ConvParams, ConvProblem, ConvResult,
                       GradientOperator, make_conv_problem, soft_threshold)
from .convadmm import solve as solve_conv
from .direct import (CoefficientVector, Lasso, LassoLOOCV, LeastSquares,
                     LinearInverseProblem, Ridge, RidgeLOOCV,
                     reconstruct_global, solve_lasso, solve_least_squares,
                     solve_local_independent, solve_ridge_loocv)
from .fields import (Medium, VectorField, intensity, monopole_velocity,
                     plane_wave_velocity, velocity_from_conv_maps,
                     velocity_from_global, velocity_from_local_maps)
from .grids import (DirectionSet, Grid, PlaneWaveDictionary, build_dictionary,
                    fibonacci_hemisphere, make_grid, semicircle_directions,
                    subdomain_grid)
from .metrics import NMSE_FLOOR_DB, EvalReport, nmse, similarity
from .partition import (PartitionScheme, PartitionedField, circular_convolve,
                        crop, extract_patches, overlap_average, padded_grid,
                        wavelength_partition, zero_pad)
from .simulate import (ObservationSet, SoundField, add_noise, monopole_field,
                       observe, plane_wave_field, regular_subsample,
                       sample_observations, superpose)

__all__ = [name for name in dir() if not name.startswith("_")]
