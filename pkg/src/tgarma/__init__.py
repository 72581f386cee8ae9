"""Bayesian transformed GARMA models for positive time series.

Box-Cox transformed series with gamma or inverse-Gaussian conditional
distributions on a log-link ARMA recursion, fitted by random-walk
Metropolis, with model-selection criteria, forecasting, residual
diagnostics and replication studies.
"""

from .assess import (CriteriaReport, ResidualReport, acf_pacf, cpo,
                     criteria_report, dic, ebic, mape, posterior_mean_params,
                     quantile_residuals)
from .errors import (ConfigError, DataError, DimensionError, DomainError,
                     NumericError, SamplerError)
from .forecast import ForecastResult, forecast, rolling_one_step
from .inference import (Chain, FitSummary, MCMCConfig, ModeResult, PriorSpec,
                        find_mode, geweke, hpd, log_posterior, log_prior,
                        maximize_log_density, mh_sample,
                        random_walk_metropolis, summarize)
from .model import (Family, LinkState, ModelOrder, ModelSpec, ParamVector,
                    compute_link, gamma_cdf, gamma_logpdf, invgauss_cdf,
                    invgauss_logpdf, loglik, loglik_terms, param_names,
                    sample_family)
from .simlab import (DESK_MCMC, SelectionReport, SimConfig, SimReport,
                     load_sim_config, run_replication_study,
                     run_selection_study, simulate_tgarma)
from .transform import (DEFAULT_FLOOR, EPS_LAMBDA, Series, TransformedSeries,
                        boxcox, inv_boxcox, transform_series)

__version__ = "0.1.0"
