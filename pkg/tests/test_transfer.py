import numpy as np
import pytest

from lskr.datagen import BiasFamily, SimConfig, bias_eval, generate_pair
from lskr.errors import (
    DegenerateInputError,
    EmptyWindowError,
    TransferInfeasibleError,
    ValidationError,
)
from lskr.estimators import Domain, KernelFit, Method, Sample
from lskr.kernels import Bandwidth, KernelSpec
from lskr.transfer import (
    BiasSmoothness,
    fit_pooled,
    fit_transfer,
    oracle_rate,
    pooled_union,
    standardize_to,
    tl_predict,
    tl_predict_full,
    tl_surface,
)

SPEC = KernelSpec()


def make_pair(seed=0, t0=150, t1=900, offset=None, noise=0.0):
    """Target/source pair with identical truths except a fixed offset."""
    rng = np.random.default_rng(seed)
    truth = lambda u, x: 2.0 + np.sin(np.pi * u) + x
    tu = np.sort(rng.uniform(0, 1, t0))
    tx = rng.uniform(0, 1, (t0, 1))
    ty = truth(tu, tx[:, 0]) + noise * rng.normal(size=t0)
    su = np.sort(rng.uniform(0, 1, t1))
    sx = rng.uniform(0, 1, (t1, 1))
    sy = truth(su, sx[:, 0]) + noise * rng.normal(size=t1)
    if offset is not None:
        sy = sy + offset  # source surface shifted: bias = target - source = -offset
    return (
        Sample(u=tu, x=tx, y=ty, domain_label=Domain.TARGET),
        Sample(u=su, x=sx, y=sy, domain_label=Domain.SOURCE),
    )


class TestFitTransfer:
    def test_additive_decomposition_identity(self):
        target, source = make_pair(noise=0.05)
        fit = fit_transfer(target, source, SPEC, Bandwidth(0.2, (0.2,)), Bandwidth(0.3, (0.3,)), Method.NW)
        rng = np.random.default_rng(1)
        for _ in range(50):
            q = (float(rng.uniform(0.1, 0.9)), [float(rng.uniform(0.1, 0.9))])
            got = tl_predict(fit, q)
            want = fit.source_fit.predict(*q) + fit.bias_fit.predict(*q)
            assert got == want

    @pytest.mark.parametrize("method", [Method.NW, Method.LL])
    def test_zero_residual_fixed_point(self, method):
        _, source = make_pair(noise=0.05)
        source_fit = KernelFit(source, SPEC, Bandwidth(0.25, (0.25,)), method)
        rng = np.random.default_rng(2)
        tu = np.sort(rng.uniform(0.05, 0.95, 120))
        tx = rng.uniform(0.05, 0.95, (120, 1))
        out = source_fit.predict_batch(tu, tx)
        assert out.ok.all()
        target = Sample(u=tu, x=tx, y=out.values, domain_label=Domain.TARGET)
        fit = fit_transfer(target, source, SPEC, source_fit.bw, Bandwidth(0.3, (0.3,)), method)
        assert np.all(fit.bias_fit.sample.y == 0.0)
        for q in [(0.3, [0.4]), (0.5, [0.5]), (0.7, [0.6])]:
            assert fit.bias_fit.predict(*q) == 0.0
            assert tl_predict(fit, q) == fit.source_fit.predict(*q)

    def test_constant_offset_recovered(self):
        c = 0.75
        target, source = make_pair(offset=-c, noise=0.0, t0=300, t1=3000)
        fit = fit_transfer(target, source, SPEC, Bandwidth(0.08, (0.08,)), Bandwidth(0.4, (0.4,)), Method.LL)
        for uq in np.linspace(0.2, 0.8, 5):
            for xq in np.linspace(0.2, 0.8, 5):
                assert fit.bias_fit.predict(uq, [xq]) == pytest.approx(c, abs=1e-2)

    def test_skipped_residuals_counted(self):
        rng = np.random.default_rng(4)
        su = np.sort(rng.uniform(0.35, 0.65, 300))
        source = Sample(u=su, x=rng.uniform(0, 1, (300, 1)), y=np.ones(300), domain_label=Domain.SOURCE)
        # 60 of 100 target times sit within reach of the source window
        tu = np.linspace(0.21, 0.8, 60)
        tu = np.sort(np.concatenate([tu, np.linspace(0.0, 0.1, 40)]))
        target = Sample(u=tu, x=np.full((100, 1), 0.5), y=np.ones(100), domain_label=Domain.TARGET)
        bw = Bandwidth(0.15, (0.6,))
        fit = fit_transfer(target, source, SPEC, bw, Bandwidth(0.5, (0.6,)), Method.NW)
        assert fit.n_residual_skipped == 100 - len(fit.bias_fit.sample)
        assert fit.n_residual_skipped >= 40

    def test_infeasible_when_most_windows_empty(self):
        rng = np.random.default_rng(5)
        su = np.sort(rng.uniform(0.45, 0.55, 200))
        source = Sample(u=su, x=rng.uniform(0, 1, (200, 1)), y=np.ones(200), domain_label=Domain.SOURCE)
        tu = np.linspace(0.0, 1.0, 100)
        target = Sample(u=tu, x=np.full((100, 1), 0.5), y=np.ones(100), domain_label=Domain.TARGET)
        # windows reach only u in [0.40, 0.60]: about 21 of 100 target points
        with pytest.raises(TransferInfeasibleError):
            fit_transfer(target, source, SPEC, Bandwidth(0.05, (0.6,)), Bandwidth(0.3, (0.3,)), Method.NW)

    def test_label_validation(self):
        target, source = make_pair()
        with pytest.raises(ValidationError):
            fit_transfer(source, target, SPEC, Bandwidth(0.2, (0.2,)), Bandwidth(0.2, (0.2,)), Method.NW)

    def test_component_named_on_empty_window(self):
        target, source = make_pair(t0=200, t1=800)
        fit = fit_transfer(target, source, SPEC, Bandwidth(0.02, (0.02,)), Bandwidth(0.4, (0.4,)), Method.NW)
        query = None
        for uq in np.linspace(0, 1, 200):
            try:
                fit.source_fit.predict(uq, [0.99])
            except EmptyWindowError:
                query = (uq, [0.99])
                break
        if query is None:
            pytest.skip("no empty source window found")
        with pytest.raises(EmptyWindowError) as exc:
            tl_predict(fit, query)
        assert exc.value.component == "source"


class TestTlPredictFull:
    def test_equal_bandwidths_sum_gradients(self):
        target, source = make_pair(noise=0.02)
        bw = Bandwidth(0.25, (0.25,))
        fit = fit_transfer(target, source, SPEC, bw, bw, Method.LL)
        q = (0.5, [0.5])
        full = tl_predict_full(fit, q)
        src = fit.source_fit.local_fit(*q)
        bias = fit.bias_fit.local_fit(*q)
        assert full.value == src.value + bias.value
        assert np.allclose(full.scaled_gradient, src.scaled_gradient + bias.scaled_gradient)

    def test_affine_truths_recover_slopes(self):
        rng = np.random.default_rng(5)
        t0, t1 = 400, 3000
        tu = np.sort(rng.uniform(0, 1, t0))
        tx = rng.uniform(0, 1, (t0, 1))
        su = np.sort(rng.uniform(0, 1, t1))
        sx = rng.uniform(0, 1, (t1, 1))
        m_src = lambda u, x: 1.0 + 2.0 * u + 3.0 * x
        bias = lambda u, x: 0.5 - 1.0 * u + 0.5 * x
        target = Sample(u=tu, x=tx, y=m_src(tu, tx[:, 0]) + bias(tu, tx[:, 0]), domain_label=Domain.TARGET)
        source = Sample(u=su, x=sx, y=m_src(su, sx[:, 0]), domain_label=Domain.SOURCE)
        h1 = Bandwidth(0.2, (0.2,))
        h_tl = Bandwidth(0.35, (0.3,))
        fit = fit_transfer(target, source, SPEC, h1, h_tl, Method.LL)
        q = (0.5, [0.5])
        full = tl_predict_full(fit, q)
        # gradient reported in h_tl scaling: time slope (2 - 1), x slope (3 + 0.5)
        want = np.array([(2.0 - 1.0) * h_tl.h_time, (3.0 + 0.5) * h_tl.h_cov[0]])
        assert full.value == pytest.approx(m_src(0.5, 0.5) + bias(0.5, 0.5), abs=1e-6)
        assert np.allclose(full.scaled_gradient, want, atol=1e-6)

    def test_nw_rejected(self):
        target, source = make_pair()
        fit = fit_transfer(target, source, SPEC, Bandwidth(0.2, (0.2,)), Bandwidth(0.2, (0.2,)), Method.NW)
        with pytest.raises(ValidationError):
            tl_predict_full(fit, (0.5, [0.5]))


class TestTlSurface:
    def test_missing_where_either_component_missing(self):
        target, source = make_pair(t0=120, t1=500)
        fit = fit_transfer(target, source, SPEC, Bandwidth(0.15, (0.15,)), Bandwidth(0.05, (0.05,)), Method.NW)
        from lskr.metrics import GridSpec

        grid = GridSpec(15)
        surf = tl_surface(fit, grid)
        src = fit.source_fit.surface(grid)
        bias = fit.bias_fit.surface(grid)
        assert np.array_equal(surf.missing, src.missing | bias.missing)
        ok = ~surf.missing
        assert np.allclose(surf.values[ok], (src.values + bias.values)[ok])


class TestPooled:
    def test_standardization_hand_case(self):
        got = standardize_to(np.array([0.0, 2.0]), np.array([10.0, 14.0]))
        assert np.allclose(got, [10.0, 14.0])

    def test_pooled_moments_match_target_train(self):
        rng = np.random.default_rng(6)
        target, source = make_pair(seed=7, noise=0.1)
        y_std = standardize_to(source.y, target.y)
        assert np.mean(y_std) == pytest.approx(np.mean(target.y), abs=1e-12)
        assert np.std(y_std) == pytest.approx(np.std(target.y), abs=1e-12)

    def test_duplicate_times_dropped_from_source(self):
        target = Sample(u=[0.2, 0.4, 0.6], x=[[0.1], [0.2], [0.3]], y=[1.0, 2.0, 3.0])
        source = Sample(
            u=[0.2, 0.3, 0.5], x=[[0.5], [0.6], [0.7]], y=[4.0, 5.0, 6.0],
            domain_label=Domain.SOURCE,
        )
        union = pooled_union(target, source)
        assert len(union) == 5
        assert np.count_nonzero(union.u == 0.2) == 1
        assert np.all(np.diff(union.u) >= 0)

    def test_source_empty_after_dedup_degenerates_to_target(self):
        target = Sample(u=[0.2, 0.4, 0.6, 0.8], x=[[0.1], [0.2], [0.3], [0.4]], y=[1.0, 2.0, 3.0, 2.5])
        source = Sample(u=[0.2, 0.4], x=[[0.9], [0.8]], y=[5.0, 6.0], domain_label=Domain.SOURCE)
        union = pooled_union(target, source)
        assert len(union) == 4
        assert np.array_equal(union.y, target.y)

    def test_zero_target_variance(self):
        target = Sample(u=[0.2, 0.4], x=[[0.1], [0.2]], y=[3.0, 3.0])
        source = Sample(u=[0.3, 0.5], x=[[0.1], [0.2]], y=[1.0, 2.0], domain_label=Domain.SOURCE)
        with pytest.raises(DegenerateInputError):
            fit_pooled(target, source, SPEC, Bandwidth(0.3, (0.3,)), Method.NW)

    def test_identical_distributions_consistency(self):
        rng = np.random.default_rng(8)
        target, source = make_pair(seed=9, noise=0.05, t0=200, t1=200)
        bw = Bandwidth(0.3, (0.3,))
        pooled = fit_pooled(target, source, SPEC, bw, Method.NW)
        assert len(pooled.sample) <= 400
        q = (0.5, [0.5])
        target_only = KernelFit(target, SPEC, bw, Method.NW)
        assert pooled.predict(*q) == pytest.approx(target_only.predict(*q), abs=0.2)


class TestOracleRate:
    def test_case1_strong_stationarity(self):
        got = oracle_rate(2000, 1, 1.0, 1.0)
        assert got.case == 1
        assert got.rate_exponent == -1.0 / 3.0
        assert got.h_exponent == -1.0 / 6.0
        log_t = np.log(2000)
        assert got.rate_order == pytest.approx(log_t ** (2 / 6) * 2000 ** (-2 / 6))
        assert got.h_order == pytest.approx(log_t ** (1 / 6) * 2000 ** (-1 / 6))

    def test_case2_remainder_dominated(self):
        got = oracle_rate(2000, 1, 0.1, 1.0)
        assert got.case == 2
        assert got.rate_exponent == pytest.approx(-2 * 0.1 / 3)
        assert got.rate_exponent == pytest.approx(-1.0 / 15.0)
        assert got.rate_order == pytest.approx(2000 ** (-2 * 0.1 / 3))

    def test_case3_small_curvature(self):
        got = oracle_rate(2000, 1, 0.1, 1e-6)
        assert got.case == 3
        assert got.rate_exponent == -1.0 / 3.0
        log_t = np.log(2000)
        assert got.rate_order == pytest.approx(
            (1e-6) ** (2 / 6) * log_t ** (2 / 6) * 2000 ** (-2 / 6)
        )

    def test_rate_monotone_in_curvature(self):
        etas = np.geomspace(1e-8, 1.0, 60)
        rates = [oracle_rate(2000, 1, 0.1, float(e)).rate_order for e in etas]
        assert all(a <= b + 1e-15 for a, b in zip(rates, rates[1:]))

    def test_validation(self):
        with pytest.raises(ValidationError):
            oracle_rate(2000, 1, 0.0, 1.0)
        with pytest.raises(ValidationError):
            oracle_rate(2000, 1, 0.5, 2.0)
        with pytest.raises(ValidationError):
            oracle_rate(2000, 0, 0.5, 0.5)
        with pytest.raises(ValidationError):
            BiasSmoothness(-1.0, 0.5)


class TestSimulatedBiasRecovery:
    def test_quadratic_bias_sign_convention(self):
        # source surface is target surface plus the family bias, so the
        # recovered cross-domain bias is its negative
        cfg = SimConfig(t0=400, t1=3000, noise_sd=0.0, base_seed=21)
        fam = BiasFamily("quad", 4.0)
        target, source = generate_pair(cfg, fam, 0)
        fit = fit_transfer(
            target, source, SPEC, Bandwidth(0.15, (0.15,)), Bandwidth(0.25, (0.25,)), Method.LL
        )
        for uq in (0.3, 0.5, 0.7):
            for xq in (0.3, 0.5, 0.7):
                want = -bias_eval(fam, uq, xq)
                assert fit.bias_fit.predict(uq, [xq]) == pytest.approx(want, abs=0.08)
