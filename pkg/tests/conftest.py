import numpy as np
import pytest

from dfr import kernels
from dfr.numerics import finite_diff_gradient


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    impl = kernels.available_backends()[request.param]
    monkeypatch.setattr(kernels, "_impl", impl)
    return request.param


def sampled_fd_check(f, x, analytic, n_coords=None, rng=None, h=1e-5, floor=1e-8):
    """Max element-wise relative error between ``analytic`` and central differences of ``f`` at ``x``.

    With ``n_coords`` only that many randomly chosen coordinates are differenced.
    ``floor`` bounds the denominator from below so that gradients that are
    analytically zero are compared against difference noise in absolute terms.
    """
    x = np.array(x, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if n_coords is None or n_coords >= x.size:
        fd = finite_diff_gradient(f, x, h)
        return float(_rel(analytic, fd, floor).max())
    rng = rng or np.random.default_rng(0)
    flat_idx = rng.choice(x.size, size=n_coords, replace=False)
    worst = 0.0
    for i in flat_idx:
        def g(v, i=i):
            y = x.copy().reshape(-1)
            y[i] = v[0, 0]
            return f(y.reshape(x.shape))
        fd = finite_diff_gradient(g, np.array([[x.reshape(-1)[i]]]), h)[0, 0]
        worst = max(worst, float(_rel(analytic.reshape(-1)[i], fd, floor)))
    return worst


def _rel(a, b, floor):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, detail = results[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
