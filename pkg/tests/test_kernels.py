import numpy as np
import pytest

from subplanck import _accel, core, fockoracle, hypercube
from subplanck.hypercube import KrausSpec


@pytest.fixture
def both_backends():
    def run(fn):
        out = {}
        for name in ("numba", "numpy"):
            _accel.set_backend(name)
            out[name] = fn()
        return out["numba"], out["numpy"]

    yield run
    _accel.set_backend(None)


@pytest.mark.parametrize("method,n,mu,nbar", [
    ("terms", 2, 3.0, 0.0), ("terms", 3, 1.0, 0.7), ("chain", 3, 1e-6, 0.0), ("chain", 2, 0.2, 1.0),
])
def test_wigner_backends_agree(both_backends, method, n, mu, nbar):
    st_ = hypercube.build_state(KrausSpec(n, mu, nbar=nbar))
    gs = core.default_grid(st_, max_points=40)
    a, b = both_backends(lambda: core.evaluate_grid(st_, gs, method=method).values)
    assert np.abs(a - b).max() <= 1e-9 * np.abs(a).max()


def test_fock_backends_agree(both_backends):
    rho = fockoracle.fock_build(KrausSpec(2, 2.0))
    gs = core.GridSpec.square(5.0, 17)
    a, b = both_backends(lambda: fockoracle.fock_wigner(rho, gs).values)
    assert np.abs(a - b).max() < 1e-13


def test_env_flag(monkeypatch):
    monkeypatch.setenv("SUBPLANCK_DISABLE_NUMBA", "1")
    assert _accel.backend() == "numpy"
    monkeypatch.setenv("SUBPLANCK_DISABLE_NUMBA", "0")
    assert _accel.backend() == ("numba" if _accel.HAVE_NUMBA else "numpy")


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_threads(monkeypatch):
    _accel.set_threads(1)
    monkeypatch.setenv("SUBPLANCK_THREADS", "1")
    _accel.set_threads(None)
    with pytest.raises(ValueError):
        _accel.set_threads(0)
