from types import SimpleNamespace

import pytest

from ampr.synth import degrade, generate_scene, standard_suite


@pytest.fixture(scope="session")
def suite_data():
    """Every standard-suite case generated once per test session."""
    data = {}
    for case in standard_suite():
        frames, gt = generate_scene(case.scene, case.seed)
        coarse = degrade(gt, case.degradation, case.seed)
        data[case.name] = SimpleNamespace(case=case, frames=frames, gt=gt, coarse=coarse)
    return data
