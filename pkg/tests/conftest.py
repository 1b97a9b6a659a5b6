import numpy as np
import pytest

from wfslab import session as sess
from wfslab.config import SimulationConfig


@pytest.fixture(scope="session")
def array16():
    from wfslab.wavefield import build_square_array

    return build_square_array(2.0, 16, 1.6)


@pytest.fixture(scope="session")
def small_cohort_dir(tmp_path_factory):
    """Two logged sessions with default policies, shared across test modules."""
    cfg = SimulationConfig()
    cfg.participants = 2
    cfg.wfs_first = 1
    cfg.base_seed = 424
    base = tmp_path_factory.mktemp("cohort")
    sess.run_cohort(
        cfg.participant_specs(),
        cfg.models_factory(),
        cfg.agent_factory(),
        base,
        hand_dropout=cfg.hand_dropout,
    )
    return base


@pytest.fixture(scope="session")
def small_cohort(small_cohort_dir):
    from wfslab.logfiles import read_cohort

    return read_cohort(small_cohort_dir)


def assert_close(actual, expected, tol=1e-9):
    assert np.all(np.abs(np.asarray(actual) - np.asarray(expected)) <= tol), (
        f"{actual} != {expected} (tol {tol})"
    )
