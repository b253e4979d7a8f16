import json
import math

import numpy as np
import pytest

from abcmisspec.abc import AcceptedSet, ReferenceTable, abc_reject, posterior_mean
from abcmisspec.diagnostics import (
    DiagnosticReport,
    GofConfig,
    asymptotic_gof,
    choose_Nn,
    discrepancy_diag,
    estimate_variance,
    j_statistic,
    powers_h,
    predictive_pvalue,
    simulated_gof,
)
from abcmisspec.errors import NonpositiveDofError, SimulationError, SingularMatrixError
from abcmisspec.models import simulate_normal
from abcmisspec.numerics import chi2_quantile
from abcmisspec.problems import ModelSpec, UniformPrior, normal_model
from abcmisspec.summaries import NORMAL_SPEC, SummarySpec, summaries_normal
from abcmisspec.rng import SeedPath

REPORT_FIELDS = {"kind", "statistic", "dof", "critical_value", "quantiles", "reject", "seconds"}


@pytest.fixture(scope="module")
def normal_fit():
    y = simulate_normal(0.0, 0.8, 200, SeedPath(1, (0,)))
    model = normal_model()
    eta = summaries_normal(y)
    table, acc = abc_reject(model, eta, 20_000, 0.01, 200, SeedPath(1, (1,)))
    return model, y, eta, table, acc


class TestChooseNn:
    def test_floor_binds(self):
        assert choose_Nn(100, 1) == 10_000

    def test_three_parameters(self):
        assert choose_Nn(1000, 3) == math.ceil(math.log(1000) * 1000**1.5) == 218_443

    def test_scale_constant(self):
        assert choose_Nn(1000, 3, C=2.0) == math.ceil(2 * math.log(1000) * 1000**1.5)


class TestJ:
    def test_zero_gap(self):
        assert j_statistic([1.0, 2.0], [1.0, 2.0], np.eye(2), 50) == 0.0

    def test_hand_value(self):
        n = 16
        # sqrt(n) * delta = (3, 4)
        assert j_statistic(np.array([3.0, 4.0]) / 4, [0.0, 0.0], np.eye(2), n) == pytest.approx(25.0)

    def test_reparameterisation_invariance(self, rng):
        for _ in range(20):
            A = rng.normal(size=(3, 3))
            V = A @ A.T + 0.5 * np.eye(3)
            a, b = rng.normal(size=3), rng.normal(size=3)
            D = np.diag(rng.uniform(0.1, 10, size=3))
            M = rng.normal(size=(3, 3)) + 3 * np.eye(3)
            base = j_statistic(a, b, V, 100)
            assert j_statistic(D @ a, D @ b, D @ V @ D.T, 100) == pytest.approx(base, rel=1e-10)
            assert j_statistic(M @ a, M @ b, M @ V @ M.T, 100) == pytest.approx(base, rel=1e-10)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            j_statistic([1.0, 0.0], [0.0, 0.0], np.zeros((2, 2)), 10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            j_statistic([1.0, 0.0], [0.0, 0.0], np.eye(3), 10)


class TestAsymptoticGof:
    def test_nonpositive_dof(self):
        spec = SummarySpec("one", 1, ("m",), True, 0)
        model = ModelSpec("m", ("t",), spec, UniformPrior((0.0,), (1.0,)), None, None, None)
        with pytest.raises(NonpositiveDofError) as exc:
            asymptotic_gof(model, [0.0], [0.0], GofConfig(), 10, 1, V0=np.eye(1))
        assert exc.value.code == "nonpositive-dof"

    def test_report_and_rejection_under_misfit(self, normal_fit):
        model, y, eta, _, acc = normal_fit
        cfg = GofConfig(Nn=10_000, variance_source="analytic")
        rep = asymptotic_gof(model, posterior_mean(acc), eta, cfg, y.size, 3, data=y)
        assert rep.dof == 1
        assert rep.critical_value == pytest.approx(chi2_quantile(1, 0.95))
        assert rep.reject
        assert rep.config["replicates"] == 50
        assert REPORT_FIELDS <= set(rep.to_dict())

    def test_forced_equal_summaries_never_reject(self):
        model = normal_model()
        # constant simulated summaries equal to the observed ones
        fixed = ModelSpec(
            "fixed", ("t",), NORMAL_SPEC, model.prior,
            lambda th, n, rng: np.tile([0.0, 1.0], (th.shape[0], 1)), None, None,
        )
        for alpha in (0.5, 0.9, 0.999):
            rep = asymptotic_gof(fixed, [0.0], [0.0, 1.0], GofConfig(Nn=100, alpha_level=alpha), 10, 1,
                                 V0=np.eye(2))
            assert rep.statistic == 0.0 and not rep.reject

    def test_variance_sources(self, normal_fit):
        model, y, *_ = normal_fit
        for src in ("plug-in", "bootstrap", "analytic"):
            est = estimate_variance(model, y, GofConfig(variance_source=src, B=400), 1)
            assert est.provenance == src
            np.testing.assert_allclose(np.diag(est.matrix), [0.64, 2 * 0.64**2], rtol=0.35)

    def test_deterministic(self, normal_fit):
        model, y, eta, _, acc = normal_fit
        cfg = GofConfig(variance_source="plug-in")
        a = asymptotic_gof(model, posterior_mean(acc), eta, cfg, y.size, 5, data=y)
        b = asymptotic_gof(model, posterior_mean(acc), eta, cfg, y.size, 5, data=y)
        assert a.statistic == b.statistic


class TestSimulatedGof:
    def test_r_exceeds_n(self, normal_fit):
        _, _, _, table, acc = normal_fit
        with pytest.raises(ValueError):
            simulated_gof(table, acc, table.N + 1, 0.05, 1)

    def test_no_rejection_below_all_replicates(self):
        rng = np.random.default_rng(0)
        s = rng.normal(size=(400, 2)) * 5
        eta = np.zeros(2)
        s[:10] = rng.normal(size=(10, 2)) * 1e-3
        d = np.linalg.norm(s - eta, axis=1)
        table = ReferenceTable(rng.normal(size=(400, 1)), s, d, eta, 0.025)
        from abcmisspec.abc import accept

        acc = accept(table)
        rep = simulated_gof(table, acc, 50, 0.05, 2)
        assert rep.statistic < rep.resampled.min()
        assert not rep.reject

    def test_detects_misfit(self, normal_fit):
        _, _, _, table, acc = normal_fit
        rep = simulated_gof(table, acc, 100, 0.05, 4)
        assert rep.reject
        assert np.all(np.diff(rep.resampled) >= 0)

    def test_all_rows_scope(self, normal_fit):
        _, _, _, table, acc = normal_fit
        rep = simulated_gof(table, acc, 20, 0.05, 4, scope="all")
        assert rep.statistic == pytest.approx(table.distances.mean())
        with pytest.raises(ValueError):
            simulated_gof(table, acc, 20, 0.05, 4, scope="some")


class TestPredictive:
    def test_constant_scalar_never_rejects(self):
        spec = NORMAL_SPEC
        model = ModelSpec(
            "const", ("t",), spec, UniformPrior((0.0,), (1.0,)),
            lambda th, n, rng: np.tile([0.5, 2.0], (th.shape[0], 1)), None, None,
        )
        acc = AcceptedSet(np.full((10, 1), 0.5), np.zeros((10, 2)), np.arange(10))
        rep = predictive_pvalue(acc, model, 1, 100, 0.05, 20, 1, [0.5, 2.0])
        assert not rep.reject

    def test_bad_index(self, normal_fit):
        model, y, eta, _, acc = normal_fit
        with pytest.raises(ValueError):
            predictive_pvalue(acc, model, 2, 10, 0.05, y.size, 1, eta)

    def test_detects_variance_misfit(self, normal_fit):
        model, y, eta, _, acc = normal_fit
        rep = predictive_pvalue(acc, model, 1, 100, 0.05, y.size, 1, eta)
        assert rep.reject and rep.statistic == eta[1]


class TestDiscrepancy:
    def test_identical_adjusted_gives_zero(self, normal_fit):
        model, y, eta, _, acc = normal_fit
        same = AcceptedSet(acc.draws, acc.summaries, acc.indices, adjusted=acc.draws.copy())
        rep = discrepancy_diag(same, model, posterior_mean(acc), 10, 2000, 0.05, 0.05, y.size, 1, eta)
        assert rep.statistic == 0.0 and not rep.reject

    def test_powers_h(self):
        np.testing.assert_array_equal(powers_h(np.array([[2.0], [-1.0]])), [[4.0, 8.0], [1.0, -1.0]])

    def test_inner_failure_carries_index(self, normal_fit):
        model, y, eta, _, acc = normal_fit
        with pytest.raises(SimulationError, match="replication 0"):
            # inner acceptance of 2 draws is too few for the adjustment
            discrepancy_diag(acc, model, posterior_mean(acc), 3, 200, 0.01, 0.05, y.size, 1, eta)


def test_report_json_and_sorting():
    rep = DiagnosticReport("simulated-gof", 1.0, False, 0.1, 0.05, resampled=[3.0, 1.0, 2.0])
    d = json.loads(rep.to_json())
    assert REPORT_FIELDS <= set(d)
    assert d["resampled"] == [1.0, 2.0, 3.0]
    shuffled = DiagnosticReport("simulated-gof", 1.0, False, 0.1, 0.05, resampled=[2.0, 3.0, 1.0])
    np.testing.assert_array_equal(rep.resampled, shuffled.resampled)
