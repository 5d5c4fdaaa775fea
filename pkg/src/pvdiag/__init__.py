"""PV-array fault simulation, GADF featurization and CNN diagnosis."""

from . import correction, errors, nn, pipeline, preprocess
from .arraysim import (ArrayConfig, CASE2_CLASSES, FaultClass, FaultSpec,
                       IVCurve, SCENARIO_CLASSES, array_iv_curve, drive_series,
                       sample_fault, sample_seed, simulate_sample,
                       string_current)
from .envseries import EnvSeries, load_env_csv, write_synthetic_env_csv
from .pipeline import RunConfig, generate, run_experiment, run_grid
from .preprocess import (Global, IscVoc, Normal, gadf, gtiv_matrix,
                         isc_voc_strategy, stacked_feature)
from .pvmodule import (EnvCondition, ModuleParams, STC, module_iv_curve,
                       open_circuit_voltage, photocurrent, shell_sp70)

__version__ = "1.0.0"
