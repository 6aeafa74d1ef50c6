#!/usr/bin/env python3

############################################################################
#
# MODULE:       shared fixtures of the dlcz_sim test suites
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      seeded random generators and small configurations
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import numpy as np
import pytest

from dlcz_sim.config import load_config


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def make_config(**overrides):
    """Default configuration with dotted-path overrides."""
    return load_config(overrides=overrides)


@pytest.fixture
def quick_config():
    """Configuration with trial numbers small enough for unit tests."""
    return make_config(
        **{
            "experiment.trials": 20000,
            "experiment.mode_trials": 20000,
            "experiment.tile_size": 5000,
            "experiment.bootstrap": 0,
            "experiment.max_records": 200,
            "experiment.tomo_samples": 16000,
            "phase_lock.duration": 1.0,
        },
    )
