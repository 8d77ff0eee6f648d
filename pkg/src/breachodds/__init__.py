"""Monte Carlo probabilities of global temperature breaching 1.5 and 2 degC.

Trend models with an ENSO covariate, a Markov-switching ONI simulator and
long-memory errors are fitted per observational realization, simulated
forward, and summarised as breach curves of the centred 20-year mean.
"""
from .backtest import Bands, CoverageReport, overlay_reference, prediction_bands, run_backtest, score_coverage
from .breach import BreachDistribution, breach_distribution, centered_ma_240, first_breach
from .engine import (
    RealizationFit,
    ScenarioConfig,
    SimulatedPath,
    fit_ensemble,
    fit_realization,
    prepare_ensemble,
    simulate_paths,
)
from .enso import MsModel, fit_markov_switching, hamilton_filter, select_regimes, simulate_oni
from .errors import (
    BreachOddsError,
    DomainError,
    EstimationError,
    NumericalError,
    ParseError,
    StructuralError,
)
from .ingest import align, parse_ensemble_csv, parse_oni, rebaseline
from .kernels import BACKEND
from .longmem import MemoryEstimate, estimate_d, forecast_error, fracdiff
from .series import BaselineSpec, EnsembleDataset, MonthDate, MonthlySeries
from .trend import TrendFit, TrendKind, fit_trend, sample_coefficients, select_model

__version__ = "0.1.0"
