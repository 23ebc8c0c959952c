"""RSS-based multi-user positioning aided by a reconfigurable reflecting surface.

A simulator and optimization engine: complex-gain channel model over a blocked
region of interest, Bayesian block inference from noisy RSS, a per-cycle
configuration search that minimizes an expected-misdecision loss, a cyclic
measurement protocol, and a sweep harness with baseline schemes.
"""

from .scene import Scene, SceneSpec, build_scene, load_scene_spec, wavelength, with_updates
from .channel import (GainTable, ReflectionModel, build_gain_table, config_field,
                      delta_mean_rss, mean_rss, sample_rss)
from .inference import (BeliefState, LossParams, confusion_bound, exact_confusion_integral,
                        loss_upper_bound, map_estimate, positioning_loss, update_prior)
from .objective import CycleObjective
from .optimizer import (CoResult, LmcsResult, OptimizerSettings, SortedLocalMinima,
                        co_optimize, descent_ratio, lmcs, unit_neighborhood)
from .protocol import (CycleRecord, CycleTiming, OptimizedSelector, ProtocolConfig,
                       positioning_error, run_cycle, run_positioning)
from .harness import (SweepResult, SweepSpec, no_ris_baseline, random_config_baseline,
                      run_single, run_sweep)
from .report import emit_report

__version__ = "0.1.0"

__all__ = [
    "Scene", "SceneSpec", "build_scene", "load_scene_spec", "wavelength", "with_updates",
    "GainTable", "ReflectionModel", "build_gain_table", "config_field",
    "delta_mean_rss", "mean_rss", "sample_rss",
    "BeliefState", "LossParams", "confusion_bound", "exact_confusion_integral",
    "loss_upper_bound", "map_estimate", "positioning_loss", "update_prior",
    "CycleObjective",
    "CoResult", "LmcsResult", "OptimizerSettings", "SortedLocalMinima",
    "co_optimize", "descent_ratio", "lmcs", "unit_neighborhood",
    "CycleRecord", "CycleTiming", "OptimizedSelector", "ProtocolConfig",
    "positioning_error", "run_cycle", "run_positioning",
    "SweepResult", "SweepSpec", "no_ris_baseline", "random_config_baseline",
    "run_single", "run_sweep",
    "emit_report",
    "__version__",
]
