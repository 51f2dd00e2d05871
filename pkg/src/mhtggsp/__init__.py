"""Multiple hypothesis testing over graph-time domains with lfdr-based FDR control.

p-value distributions are modelled by a sigmoid-beta two-group mixture whose
parameter is a bandlimited signal on (sensor graph) x [-pi, pi], fitted by
maximum likelihood. Rejections use a step-up rule on the estimated lfdr.
"""
from .basis import BandlimitedSignal, design_matrix, design_row, evaluate_signal, time_basis_eval
from .detector import bh_procedure, detect_lfdr, evaluate, lfdr_vector, step_up_threshold
from .estimator import SampleSet, bic_select, fit_mle, gradient, log_likelihood
from .experiment import FitSpec, monte_carlo
from .graph import build_knn_graph, eigendecompose, graph_fourier_basis, laplacian
from .pvalue_model import SIGMOID_BETA, UNIFORM_NULL, f1_of, lfdr, mixture_density, pi0_of, sigmoid
from .scenario import (
    ModelMatchedConfig,
    ModelMatchedScenario,
    TransmitterConfig,
    TransmitterScenario,
    gen_model_matched,
    gen_transmitter_scenario,
    gp_sample,
    grid_times,
)

__version__ = "0.1.0"

__all__ = [
    "BandlimitedSignal", "design_matrix", "design_row", "evaluate_signal", "time_basis_eval",
    "bh_procedure", "detect_lfdr", "evaluate", "lfdr_vector", "step_up_threshold",
    "SampleSet", "bic_select", "fit_mle", "gradient", "log_likelihood",
    "FitSpec", "monte_carlo",
    "build_knn_graph", "eigendecompose", "graph_fourier_basis", "laplacian",
    "SIGMOID_BETA", "UNIFORM_NULL", "f1_of", "lfdr", "mixture_density", "pi0_of", "sigmoid",
    "ModelMatchedConfig", "ModelMatchedScenario", "TransmitterConfig", "TransmitterScenario",
    "gen_model_matched", "gen_transmitter_scenario", "gp_sample", "grid_times",
]
