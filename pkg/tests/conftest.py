import numpy as np
import pytest

from qfadiag import _backend

BACKENDS = ["python"] + (["cython"] if _backend.kernels_ext is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = _backend.kernels_ext if request.param == "cython" else _backend.kernels_py
    for target in ("qfadiag.qreg.kernels", "qfadiag.garch.kernels"):
        monkeypatch.setattr(target, mod)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
