"""Individual claims reserving with one-shot projection-to-ultimate forecasts."""
__version__ = "0.1.0"

from .errors import (
    CensoredCellError,
    ConfigError,
    DegenerateTriangleError,
    InsufficientDataError,
    NumericalError,
    ReservingError,
    SchemaError,
    SingularFitError,
    TrainingError,
)
from .claims import ClaimHistory, Portfolio, Triangle, aggregate, censor, load_portfolio, write_portfolio
from .chain_ladder import (
    ClFactors,
    MackResult,
    fit_cl_factors,
    forecast_error,
    mack_msep,
    predict_oneshot,
    predict_rollforward,
    true_ultimates,
)
from .rbns import RbnsPrediction, cl_split, ibnr_decompose, predict_rbns_cl
from .regression import (
    ModelSpec,
    PtUFit,
    Variant,
    build_design,
    fit_least_squares,
    fit_weighted_factor,
    ind_rmse,
    run_oneshot,
)
from .fnn import FnnConfig, FnnModel, FnnRegressor, calibrate_balance, predict_fnn, train_fnn
from .bootstrap import BootstrapResult, bootstrap_estimation_error, resample_portfolio
from .ibnr import ReserveReport, STriangle, assemble_report, build_s_triangle, predict_ibnr_from_s
from .simulator import SimConfig, expected_cl_factors, simulate
