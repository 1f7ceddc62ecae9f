import importlib
import sys

import numpy as np
import pytest

from lcmopt.model import Dataset, LcmParams
from lcmopt.simulate import get_bundle, sample


def _backend_modules():
    mods = [importlib.import_module("lcmopt._pykernels")]
    try:
        mods.append(importlib.import_module("lcmopt._ckernels"))
    except ImportError:
        pass
    return mods


BACKENDS = _backend_modules()


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bundle_1a_data():
    spec = get_bundle("1A")
    return spec, sample(spec.params, spec.n, 7)


@pytest.fixture(scope="session")
def bundle_1c_data():
    spec = get_bundle("1C")
    return spec, sample(spec.params, spec.n, 7)


@pytest.fixture
def tiny_params():
    # two classes, one binary and one ternary variable
    return LcmParams([0.3, 0.7], [[[0.2, 0.8], [0.5, 0.25, 0.25]],
                                  [[0.6, 0.4], [0.1, 0.1, 0.8]]])


@pytest.fixture
def tiny_data(tiny_params):
    rows = [[1, 1], [1, 2], [2, 3], [2, 3], [1, 3], [2, 1]]
    return Dataset(rows, tiny_params.scheme)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
