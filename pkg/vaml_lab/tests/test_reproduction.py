# vaml_lab/tests/test_reproduction.py
"""Reproducciones a escala de escritorio (lentas: minutos).

Se activan con VAML_SLOW_TESTS=1.
"""
import os
import unittest
from collections import defaultdict
from dataclasses import replace

import numpy as np

from vaml_lab.app.bootstrap import summarize_cells
from vaml_lab.app.config import ROSTER, PiConfig, SweepConfig, TrainingConfig, load_sweep_config
from vaml_lab.app.garnet_cell import run_garnet_cell
from vaml_lab.app.policy_iteration import run_policy_iteration
from vaml_lab.app.sweep_worker import SweepRunner
from vaml_lab.logic.cliffwalk import CliffwalkSpec
from vaml_lab.logic.garnet import GarnetSpec
from vaml_lab.tests.test_harness import CONFIG_DIR

SLOW = os.environ.get("VAML_SLOW_TESTS") == "1"
OPTIMAL_RETURN = -(1.0 - 0.9**6) / (1.0 - 0.9)


@unittest.skipUnless(SLOW, "VAML_SLOW_TESTS=1 para correr las reproducciones")
class TestGarnetReproduction(unittest.TestCase):
    def test_calibrated_losses_give_lower_value_error(self):
        config = load_sweep_config(CONFIG_DIR / "garnet_desk.yaml")
        labels = ("vaml10+td", "cvaml10+td", "vaml11", "cvaml11")
        config = replace(config, algorithms=tuple(ROSTER[label] for label in labels))
        records = SweepRunner(config, jobs=os.cpu_count() or 1).run()

        cells = {key: ci for key, _, ci in summarize_cells(records)}
        means = defaultdict(list)
        for (tau, rank, label), ci in cells.items():
            means[label].append(ci.mean)

        for plain, calibrated in (("vaml10+td", "cvaml10+td"), ("vaml11", "cvaml11")):
            self.assertLessEqual(np.mean(means[calibrated]), np.mean(means[plain]))
            separated = [
                (tau, rank)
                for (tau, rank, label), ci in cells.items()
                if label == calibrated and ci.upper <= cells[(tau, rank, plain)].lower
            ]
            self.assertTrue(separated, msg=f"{calibrated} no se separa de {plain} en ninguna celda")

    def test_deterministic_collapse(self):
        config = SweepConfig(
            garnet=GarnetSpec(n_states=10, n_successors=3),
            temperature_grid=(1e-6,),
            rank_grid=(10,),
            n_problems=2,
            training=TrainingConfig(steps=3000, init_scale=1.0),
        )
        for plain, calibrated in (("vaml10+td", "cvaml10+td"), ("vaml11", "cvaml11")):
            a = run_garnet_cell(config, 1e-6, 10, ROSTER[plain], 0)
            b = run_garnet_cell(config, 1e-6, 10, ROSTER[calibrated], 0)
            self.assertAlmostEqual(a.value_mse, b.value_mse, delta=1e-6 * max(1.0, a.value_mse))

    def test_kl_full_rank_recovers_values(self):
        config = SweepConfig(
            garnet=GarnetSpec(n_states=10, n_successors=3),
            temperature_grid=(1.0,),
            rank_grid=(10,),
            n_problems=2,
            training=TrainingConfig(steps=20000),
        )
        record = run_garnet_cell(config, 1.0, 10, ROSTER["kl+td"], 0)
        self.assertLessEqual(record.value_mse, 1e-4)


@unittest.skipUnless(SLOW, "VAML_SLOW_TESTS=1 para correr las reproducciones")
class TestCliffwalkReproduction(unittest.TestCase):
    def test_full_rank_kl_reaches_optimal_return(self):
        config = PiConfig(
            cliffwalk=CliffwalkSpec(),
            move_prob_grid=(1.0,),
            rank_grid=(25,),
            algorithms=(ROSTER["kl+td"],),
            n_iterations=10,
            n_problems=2,
            training=TrainingConfig(steps=2000),
        )
        record = run_policy_iteration(config, 1.0, 25, ROSTER["kl+td"], 0)
        self.assertFalse(record.failed, msg=record.error)
        self.assertAlmostEqual(record.returns[-1], OPTIMAL_RETURN, delta=1e-6)


if __name__ == "__main__":
    unittest.main()
