from .low_rank import Gradients, LowRankModel, init_model, predict_row, sample_model
from .optimizer import DivergenceError, OptimizerState, optimizer_step
