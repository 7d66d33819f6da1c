"""spmvtune: cascaded SpMV configuration prediction with an asynchronous
predict-while-solve GMRES runtime.
"""

from .errors import (FormatInapplicableError, MatrixMarketError,
                     ModelSchemaError, SolverNumericalError, SpmvTuneError,
                     StagnationError, UnsupportedConfigError)
from .features import FEATURE_NAMES, FeatureVector, extract_features
from .formats import (DIA_OFFSET_CAP, CooMatrix, CsrMatrix, DiaMatrix,
                      EllMatrix, FormatTag, HybMatrix, convert, format_of,
                      spmv_reference, to_coo)
from .inference import (CascadeDecision, CascadeModelSet, CascadeStage,
                        TreeEnsembleModel, cascade_predict, load_model,
                        model_from_dict, predict_class)
from .kernels import (DEFAULT_CONFIG, LANE_WIDTHS, Library, SpmvConfig,
                      default_workers, enumerate_configs, execute_spmv)
from .mmio import load_matrix_market, parse_matrix_market
from .bench import (StageLabels, TimingRecord, build_dataset, compare_solvers,
                    label_from_times, route_labels, time_all_configs,
                    time_config)
from .solver import (ConfigMailbox, ConfigSwap, GmresParams, SolveReport,
                     SpmvExecutor, async_solve, gmres_solve,
                     sequential_predict_solve)

__version__ = "0.1.0"
