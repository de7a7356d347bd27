"""The compiled kernels and their pure-Python twins must agree."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpi import _kernels
from cpi._kernels import _fallback

compiled = _kernels.compiled
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not available")


def test_backend_selection():
    assert _kernels.BACKEND_NAME in ("compiled", "python")
    if compiled is None:
        assert _kernels.lasso_cd is _fallback.lasso_cd


def test_pure_python_env_switch():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "import cpi; print(cpi.BACKEND_NAME)"],
                         env={"CPI_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@needs_ext
@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(5, 60), st.integers(1, 8), st.integers(1, 6),
       st.sampled_from([-1, 0, 2, 5]))
def test_tree_parity(seed, n, p, min_node, max_depth):
    g = np.random.default_rng(seed)
    x = np.asfortranarray(np.round(g.standard_normal((n, p)), 1))
    y = np.round(g.standard_normal(n), 1)
    sample = g.integers(0, n, n).astype(np.int64)
    mtry = int(g.integers(1, p + 1))
    a = compiled.build_tree(x, y, sample, mtry, min_node, max_depth, seed)
    b = _fallback.build_tree(x, y, sample, mtry, min_node, max_depth, seed)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


@needs_ext
def test_forest_predict_parity():
    g = np.random.default_rng(1)
    x = np.asfortranarray(g.standard_normal((80, 4)))
    y = (x[:, 0] > 0).astype(float)
    tree = compiled.build_tree(x, y, np.arange(80, dtype=np.int64), 2, 3, -1, 9)
    roots = np.array([0], dtype=np.int64)
    xc = np.ascontiguousarray(g.standard_normal((50, 4)))
    for vote in (False, True):
        np.testing.assert_array_equal(compiled.predict_forest(xc, *tree, roots, vote),
                                      _fallback.predict_forest(xc, *tree, roots, vote))


@needs_ext
@settings(max_examples=20, deadline=None)
@given(st.integers(1, 150), st.integers(1, 300), st.integers(0, 2 ** 63))
def test_signflip_parity(n, draws, seed):
    d = np.random.default_rng(n).standard_normal(n)
    np.testing.assert_array_equal(compiled.signflip_subset_sums(d, draws, seed),
                                  _fallback.signflip_subset_sums(d, draws, seed))


def test_signflip_bits_are_fair():
    d = np.zeros(70)
    d[65] = 1.0
    sums = _kernels.signflip_subset_sums(d, 20_000, 123)
    assert abs(sums.mean() - 0.5) < 0.02


@needs_ext
def test_lasso_parity():
    g = np.random.default_rng(2)
    x = g.standard_normal((60, 12))
    x = np.asfortranarray((x - x.mean(0)) / x.std(0, ddof=1))
    y = x[:, 0] - x[:, 3] + g.standard_normal(60)
    y -= y.mean()
    col_sq = np.einsum("ij,ij->j", x, x) / 60
    out = []
    for k in (compiled, _fallback):
        beta, resid = np.zeros(12), y.copy()
        k.lasso_cd(x, resid, beta, col_sq, 0.05, 1e-16, 100_000)
        out.append((beta, resid))
    np.testing.assert_allclose(out[0][0], out[1][0], atol=1e-10)
    np.testing.assert_allclose(out[0][1], y - x @ out[0][0], atol=1e-10)
