import numpy as np
import pytest

from conftest import random_sample
from lskr._engine import HAVE_NUMBA, batch_predict
from lskr.errors import EmptyWindowError, ShapeError, ValidationError
from lskr.estimators import (
    KernelFit,
    LocalFit,
    Method,
    Sample,
    fit_surface,
    ll_fit,
    nw_predict,
)
from lskr.kernels import Bandwidth, KernelSpec
from lskr.local_design import assemble
from lskr.metrics import GridSpec

SPEC = KernelSpec()


class TestSampleValidation:
    def test_one_dim_covariates_promoted(self):
        s = Sample(u=[0.1, 0.2], x=[1.0, 2.0], y=[0.0, 0.0])
        assert s.x.shape == (2, 1)
        assert s.dim == 1

    def test_rejects_unsorted_times(self):
        with pytest.raises(ValidationError):
            Sample(u=[0.5, 0.1], x=[[0.0], [0.0]], y=[0.0, 0.0])

    def test_rejects_out_of_range_times(self):
        with pytest.raises(ValidationError):
            Sample(u=[-0.1, 0.5], x=[[0.0], [0.0]], y=[0.0, 0.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            Sample(u=[0.1, 0.5], x=[[0.0], [np.inf]], y=[0.0, 0.0])

    def test_arrays_read_only(self):
        s = Sample(u=[0.1, 0.5], x=[[0.0], [1.0]], y=[0.0, 1.0])
        with pytest.raises(ValueError):
            s.y[0] = 5.0


class TestNwPredict:
    def test_single_observation(self):
        s = Sample(u=[0.5], x=[[0.5]], y=[4.25])
        assert nw_predict(s, SPEC, Bandwidth(0.3, (0.3,)), (0.52, [0.52])) == 4.25

    def test_constant_is_exact(self):
        rng = np.random.default_rng(0)
        s = random_sample(rng, n=100, y_fn=lambda u, x: np.full(len(u), 3.7))
        got = nw_predict(s, SPEC, Bandwidth(0.2, (0.2,)), (0.5, [0.5]))
        assert got == 3.7

    def test_two_equidistant_points_average(self):
        # exactly representable symmetric offsets give equal weights
        s = Sample(u=[0.375, 0.625], x=[[0.5], [0.5]], y=[0.0, 4.0])
        bw = Bandwidth(0.5, (0.5,))
        from lskr.kernels import product_weight

        w1 = product_weight(SPEC, bw, 0.5, 0.375, [0.5], [0.5])
        w2 = product_weight(SPEC, bw, 0.5, 0.625, [0.5], [0.5])
        assert w1 == w2 > 0
        assert nw_predict(s, SPEC, bw, (0.5, [0.5])) == pytest.approx(2.0)

    def test_empty_window(self):
        s = Sample(u=[0.9], x=[[0.9]], y=[1.0])
        with pytest.raises(EmptyWindowError):
            nw_predict(s, SPEC, Bandwidth(0.05, (0.05,)), (0.1, [0.1]))

    def test_bounded_by_active_range(self):
        rng = np.random.default_rng(4)
        for seed in range(25):
            r = np.random.default_rng(seed)
            s = random_sample(r, n=60)
            bw = Bandwidth(r.uniform(0.05, 0.5), (r.uniform(0.05, 0.5),))
            uq, xq = r.uniform(0, 1), r.uniform(0, 1)
            try:
                v = nw_predict(s, SPEC, bw, (uq, [xq]))
            except EmptyWindowError:
                continue
            from lskr.local_design import _weights

            w = _weights(s.u, s.x, SPEC, bw, uq, np.array([xq]))
            active = s.y[w > 0]
            assert active.min() <= v <= active.max()

    def test_query_time_outside_unit_interval(self):
        s = Sample(u=[0.5], x=[[0.5]], y=[1.0])
        with pytest.raises(ValidationError):
            nw_predict(s, SPEC, Bandwidth(0.3, (0.3,)), (1.2, [0.5]))


class TestLlFit:
    def test_affine_exactness(self):
        rng = np.random.default_rng(1)
        s = random_sample(rng, n=300, y_fn=lambda u, x: 1.5 - 2.0 * u + 0.5 * x[:, 0])
        fit = ll_fit(s, SPEC, Bandwidth(0.25, (0.25,)), (0.4, [0.6]))
        assert fit.value == pytest.approx(1.5 - 0.8 + 0.3, abs=1e-10)
        assert fit.scaled_gradient[0] == pytest.approx(-2.0 * 0.25, abs=1e-10)
        assert fit.scaled_gradient[1] == pytest.approx(0.5 * 0.25, abs=1e-10)

    def test_single_observation_ridge(self):
        s = Sample(u=[0.5], x=[[0.5]], y=[2.5])
        fit = ll_fit(s, SPEC, Bandwidth(0.3, (0.3,)), (0.5, [0.5]))
        assert fit.diag.ridge_applied
        # closed form: rank-one system plus ridge on the diagonal
        sys = assemble(s, SPEC, Bandwidth(0.3, (0.3,)), (0.5, [0.5]), s.y)
        ridge = 1e-10 * np.trace(sys.gram)
        expected = sys.moment[0] / (sys.gram[0, 0] + ridge)
        assert fit.value == pytest.approx(expected, rel=1e-12)
        assert fit.value == pytest.approx(2.5, rel=1e-9)
        assert np.allclose(fit.scaled_gradient, 0.0)

    def test_parabola_matches_dense_wls_oracle(self):
        rng = np.random.default_rng(8)
        n = 200
        u = np.sort(rng.uniform(0, 1, n))
        x = rng.uniform(0, 1, (n, 1))
        xq, uq = 0.5, 0.5
        y = (x[:, 0] - xq) ** 2
        s = Sample(u=u, x=x, y=y)
        bw = Bandwidth(0.3, (0.3,))
        fit = ll_fit(s, SPEC, bw, (uq, [xq]))
        from lskr.kernels import product_weight

        w = np.array([product_weight(SPEC, bw, uq, u[t], [xq], x[t]) for t in range(n)])
        design = np.column_stack([np.ones(n), (u - uq) / bw.h_time, (x[:, 0] - xq) / bw.h_cov[0]])
        sw = np.sqrt(w)
        oracle, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
        assert fit.value == pytest.approx(oracle[0], rel=1e-9)
        assert fit.value > 0.0


class TestSharedProperties:
    def test_shift_equivariance(self):
        rng = np.random.default_rng(9)
        s = random_sample(rng, n=150)
        shifted = Sample(u=s.u, x=s.x, y=s.y + 11.5)
        bw = Bandwidth(0.2, (0.3,))
        q = (0.45, [0.5])
        assert nw_predict(shifted, SPEC, bw, q) == pytest.approx(
            nw_predict(s, SPEC, bw, q) + 11.5, abs=1e-9
        )
        assert ll_fit(shifted, SPEC, bw, q).value == pytest.approx(
            ll_fit(s, SPEC, bw, q).value + 11.5, abs=1e-9
        )

    def test_monotone_mass_in_bandwidth(self):
        rng = np.random.default_rng(10)
        s = random_sample(rng, n=120)
        q = (0.5, [0.5])
        actives = []
        for h in (0.05, 0.1, 0.2, 0.4):
            sys = assemble(s, SPEC, Bandwidth(h, (h,)), q, s.y)
            actives.append(sys.n_active)
        assert actives == sorted(actives)

    def test_nw_equals_ll_on_mirror_symmetric_design(self):
        # mirrored observations with equal weights kill the off-diagonal
        # gram entries, making the local linear intercept a plain average
        off = np.array([0.0625, 0.125, 0.1875])
        u = np.sort(np.concatenate([0.5 - off, 0.5 + off]))
        x = np.full((6, 1), 0.5)
        y = np.concatenate([off**2, off**2])  # symmetric responses
        s = Sample(u=u, x=x, y=y[np.argsort(np.concatenate([0.5 - off, 0.5 + off]))])
        bw = Bandwidth(0.25, (0.25,))
        nw = nw_predict(s, SPEC, bw, (0.5, [0.5]))
        ll = ll_fit(s, SPEC, bw, (0.5, [0.5]))
        assert nw == pytest.approx(ll.value, abs=1e-8)


class TestFitSurface:
    def test_constant_sample(self):
        rng = np.random.default_rng(2)
        s = random_sample(rng, n=200, y_fn=lambda u, x: np.full(len(u), -1.25))
        surf = fit_surface(s, SPEC, Bandwidth(0.2, (0.2,)), GridSpec(10), Method.NW)
        vals = surf.values[~surf.missing]
        assert len(vals) > 0
        assert np.all(vals == -1.25)

    def test_nodes_match_scalar_predictions(self):
        rng = np.random.default_rng(3)
        s = random_sample(rng, n=150)
        bw = Bandwidth(0.25, (0.3,))
        grid = GridSpec(4, (0.0, 1.0), ((0.2, 0.8),))
        for method, scalar in ((Method.NW, nw_predict), (Method.LL, None)):
            surf = fit_surface(s, SPEC, bw, grid, method)
            for i, uq in enumerate(grid.u_nodes()):
                for j, xq in enumerate(grid.x_nodes()):
                    if surf.missing[i, j]:
                        continue
                    if scalar is not None:
                        want = scalar(s, SPEC, bw, (uq, [xq]))
                    else:
                        want = ll_fit(s, SPEC, bw, (uq, [xq])).value
                    assert surf.values[i, j] == pytest.approx(want, rel=1e-12)

    def test_affine_truth_ll_exact_at_interior(self):
        rng = np.random.default_rng(5)
        s = random_sample(rng, n=800, y_fn=lambda u, x: 2 + u - 3 * x[:, 0])
        surf = fit_surface(s, SPEC, Bandwidth(0.2, (0.2,)), GridSpec(9), Method.LL)
        truth = 2 + surf.axes[0][:, None] - 3 * surf.axes[1][None, :]
        inner = ~surf.missing
        assert np.max(np.abs((surf.values - truth)[inner])) < 1e-8

    def test_empty_cells_marked_not_fatal(self):
        s = Sample(u=[0.5, 0.52], x=[[0.5], [0.51]], y=[1.0, 2.0])
        surf = fit_surface(s, SPEC, Bandwidth(0.05, (0.05,)), GridSpec(11), Method.NW)
        assert surf.missing.any()
        assert np.isnan(surf.values[surf.missing]).all()
        assert (~surf.missing).any()

    def test_dim_mismatch(self):
        s = Sample(u=[0.5, 0.6], x=np.zeros((2, 2)), y=[0.0, 1.0])
        with pytest.raises(ShapeError):
            fit_surface(s, SPEC, Bandwidth(0.2, (0.2, 0.2)), GridSpec(4), Method.NW)


class TestEngineParity:
    @pytest.mark.parametrize("method", ["nw", "ll"])
    def test_numba_and_numpy_paths_agree(self, method):
        if not HAVE_NUMBA:
            pytest.skip("numba not installed")
        rng = np.random.default_rng(12)
        s = random_sample(rng, n=250, d=2)
        bw = Bandwidth(0.2, (0.25, 0.35))
        uq = rng.uniform(0, 1, 40)
        xq = rng.uniform(0, 1, (40, 2))
        fast = batch_predict(s.u, s.x, s.y, uq, xq, SPEC, bw, method, use_numba=True)
        slow = batch_predict(s.u, s.x, s.y, uq, xq, SPEC, bw, method, use_numba=False)
        assert np.array_equal(fast.ok, slow.ok)
        ok = fast.ok
        assert np.allclose(fast.values[ok], slow.values[ok], rtol=1e-12, atol=1e-13)
        assert np.allclose(fast.mass, slow.mass, rtol=1e-12, atol=1e-13)
        if method == "ll":
            assert np.allclose(fast.gradients[ok], slow.gradients[ok], rtol=1e-10, atol=1e-11)

    def test_batch_matches_scalar_reference(self):
        rng = np.random.default_rng(13)
        s = random_sample(rng, n=200)
        bw = Bandwidth(0.22, (0.27,))
        uq = rng.uniform(0.05, 0.95, 30)
        xq = rng.uniform(0.05, 0.95, (30, 1))
        for method in (Method.NW, Method.LL):
            out = batch_predict(s.u, s.x, s.y, uq, xq, SPEC, bw, method.value)
            for i in range(30):
                if not out.ok[i]:
                    continue
                if method is Method.NW:
                    want = nw_predict(s, SPEC, bw, (uq[i], xq[i]))
                else:
                    want = ll_fit(s, SPEC, bw, (uq[i], xq[i])).value
                assert out.values[i] == pytest.approx(want, rel=1e-11, abs=1e-12)


class TestKernelFitHandle:
    def test_predict_matches_functions(self):
        rng = np.random.default_rng(14)
        s = random_sample(rng, n=100)
        bw = Bandwidth(0.3, (0.3,))
        fit = KernelFit(s, SPEC, bw, Method.NW)
        assert fit.predict(0.5, [0.5]) == nw_predict(s, SPEC, bw, (0.5, [0.5]))
        fit_ll = KernelFit(s, SPEC, bw, Method.LL)
        assert fit_ll.predict(0.5, [0.5]) == ll_fit(s, SPEC, bw, (0.5, [0.5])).value
        assert isinstance(fit_ll.local_fit(0.5, [0.5]), LocalFit)
        with pytest.raises(ValidationError):
            fit.local_fit(0.5, [0.5])
