"""Cell-load estimation in load-coupled networks with minimax monotone interpolation."""

from .baselines import KernelModel, KnnModel, kernel_fit, kernel_predict, knn_fit, knn_predict
from .bench import BenchConfig, BenchReport, pearson, rmse, run_benchmark, sup_error
from .learner import Envelope, LearnerModel, envelope, estimate_lipschitz, fit, predict, smooth_monotone
from .loadmodel import (
    NetworkScenario,
    is_feasible,
    load_map,
    sinr,
    solve_conditional_eigen,
    solve_fixed_point,
)
from .scenario import ScenarioParams, TrainingSet, generate_dataset, generate_scenario, pathloss_db

__version__ = "0.1.0"
