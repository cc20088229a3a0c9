"""Boosting variational inference with Laplace-matched Gaussian components.

A Gaussian mixture is grown greedily towards an unnormalised target density:
each step centres a new component on a peak of the log-residual
``log(f / q)``, takes its covariance from the local curvature, and picks the
mixture weight by projected stochastic gradient descent on the ELBO.
"""
from ._accel import backend
from .boost import (BoostError, BoostTrace, CheckpointError, IterationRecord, RunConfig,
                    load_checkpoint, replay, resume, run_bvi, save_checkpoint)
from .estimators import (MCEstimate, SupportMismatchError, alpha_gradient_estimate,
                         elbo_estimate)
from .gaussmix import (DimensionError, GaussianComponent, MixtureApproximation,
                       dumps_mixture, gaussian_log_density, loads_mixture,
                       mixture_extend, mixture_log_density, mixture_moments, mixture_sample)
from .oracle import (OracleError, ReferencePosterior, gaussian_kl, mh_reference,
                     quadrature_kl, quadrature_reference, rem)
from .search import (DegenerateHessianError, LaplacePeak, PeakSearchError, SearchConfig,
                     build_component, find_peak, stabilized_log_residual)
from .targets import (LogisticModel, SensorModel, TargetDensity, bundled_sensor_model,
                      load_csv_dataset, load_nodal, make_banana, make_cauchy, make_gmm,
                      make_gmm1d, make_gmm2d, make_logistic, make_sensor)
from .weights import AlphaResult, SgdConfig, solve_alpha

__version__ = "0.1.0"
