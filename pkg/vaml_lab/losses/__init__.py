from .expected import expected_muzero_loss, expected_vaml_loss, itervaml_expectation
from .kl import kl_loss
from .sampled import cvaml_sampled, itervaml_sampled, muzero_loss, sampled_vaml_loss, variance_estimate
from .spec import LossReport, LossSpec
from .td import expected_td_loss, td_loss
