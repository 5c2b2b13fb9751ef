"""Ranking metrics, significance testing and property-weight export,
checked against independent reference implementations."""
import numpy as np
import pytest
from scipy import special

from conftest import make_micro_ctx
from rprm import evaluate
from rprm.evaluate import (MetricReport, TTestResult, UserMetrics,
                           average_precision, paired_ttest, phi_distribution_np,
                           precision_at_k, rank_items, recall_at_k)
from rprm.model import PHI_INIT


def ref_precision(ranked, relevant, k):
    return float(np.isin(ranked[:k], list(relevant)).sum()) / k


def ref_recall(ranked, relevant, k):
    return float(np.isin(ranked[:k], list(relevant)).sum()) / len(relevant)


def ref_average_precision(ranked, relevant):
    """AP as the mean over relevant items of precision at their rank
    (missing items contribute zero)."""
    total = 0.0
    for item in relevant:
        if item in ranked:
            rank = ranked.index(item) + 1
            total += ref_precision(ranked, relevant, rank)
    return total / len(relevant)


def ref_ttest_p(diffs):
    """Two-sided paired t probability through the incomplete beta form."""
    d = np.asarray(diffs, dtype=np.float64)
    n = d.size
    t = d.mean() / (d.std(ddof=1) / np.sqrt(n))
    df = n - 1
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t))), float(t)


class TestMetricsAgainstOracle:
    def test_worked_example(self):
        # relevant items found at ranks 1 and 3: AP = (1 + 2/3) / 2
        ranked = [7, 4, 9, 1]
        relevant = {7, 9}
        assert average_precision(ranked, relevant) == pytest.approx((1 + 2 / 3) / 2)
        assert precision_at_k(ranked, relevant, 1) == 1.0
        assert precision_at_k(ranked, relevant, 4) == 0.5
        assert recall_at_k(ranked, relevant, 2) == 0.5

    def test_missing_relevant_item_caps_ap(self):
        assert average_precision([1, 2], {1, 99}) == pytest.approx(0.5)

    def test_randomized_against_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(5, 60))
            ranked = rng.permutation(n).tolist()
            n_rel = int(rng.integers(1, n))
            relevant = set(rng.choice(n, size=n_rel, replace=False).tolist())
            k = int(rng.integers(1, n + 5))
            assert abs(precision_at_k(ranked, relevant, k)
                       - ref_precision(ranked, relevant, k)) <= 1e-12
            assert abs(recall_at_k(ranked, relevant, k)
                       - ref_recall(ranked, relevant, k)) <= 1e-12
            assert abs(average_precision(ranked, relevant)
                       - ref_average_precision(ranked, relevant)) <= 1e-12

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValueError):
            precision_at_k([1], {1}, 0)
        with pytest.raises(ValueError):
            recall_at_k([1], set(), 1)
        with pytest.raises(ValueError):
            average_precision([1], set())


class TestReportAggregation:
    def test_macro_averages(self):
        users = [UserMetrics(user=0, ap=1.0, p1=1.0, p10=0.2, r10=1.0),
                 UserMetrics(user=1, ap=0.5, p1=0.0, p10=0.1, r10=0.5)]
        rep = MetricReport(per_user=users)
        assert rep.map == pytest.approx(0.75)
        assert rep.p1 == pytest.approx(0.5)
        assert rep.n_users == 2
        assert rep.summary()["MAP"] == pytest.approx(0.75)

    def test_empty_report(self):
        rep = MetricReport(per_user=[])
        assert rep.map == 0.0 and rep.n_users == 0


class TestRanking:
    def test_orders_by_score_then_id(self):
        ctx = make_micro_ctx(variant="bprmf", seed=0, n_items=5)
        ctx.params["item_bias"].value[:] = 0.0
        ctx.params["user_bias"].value[:] = 0.0
        ctx.params["global_bias"].value[:] = 0.0
        ctx.params["item_embed"].value[:] = 0.0  # all scores tie
        ranked = rank_items(ctx, 0, exclude=set(), relevant={1})
        assert ranked.items == [0, 1, 2, 3, 4]  # id ascending on ties

    def test_excludes_items(self):
        ctx = make_micro_ctx(variant="bprmf", seed=1, n_items=5)
        ranked = rank_items(ctx, 0, exclude={0, 3}, relevant=set())
        assert set(ranked.items) == {1, 2, 4}

    def test_matches_pairwise_predict(self):
        for variant in ("full", "bprmf"):
            ctx = make_micro_ctx(variant=variant, seed=2, n_items=6)
            ranked = rank_items(ctx, 1, exclude=set(), relevant=set())
            scores = {i: ctx.predict(1, i).value for i in range(6)}
            expected = sorted(range(6), key=lambda i: (-scores[i], i))
            assert ranked.items == expected


class TestPairedTTest:
    def test_matches_beta_form_randomized(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(5, 40))
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.5, size=n) + rng.normal() * 0.2
            res = paired_ttest(a, b)
            p_ref, t_ref = ref_ttest_p(a - b)
            assert res.t == pytest.approx(t_ref, abs=1e-9)
            assert res.p == pytest.approx(p_ref, abs=1e-9)
            assert not res.degenerate

    def test_antisymmetric(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=10), rng.normal(size=10)
        fwd, rev = paired_ttest(a, b), paired_ttest(b, a)
        assert fwd.t == pytest.approx(-rev.t, abs=1e-12)
        assert fwd.p == pytest.approx(rev.p, abs=1e-12)

    def test_identical_vectors_degenerate(self):
        res = paired_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.degenerate and res.t == 0.0 and res.p == 1.0

    def test_constant_shift_degenerate(self):
        res = paired_ttest([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert res.degenerate and res.t == np.inf and res.p == 0.0

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            paired_ttest([1.0], [2.0])
        with pytest.raises(ValueError):
            paired_ttest([1.0, 2.0], [1.0, 2.0, 3.0])


class TestPhiExport:
    def test_uniform_at_init(self, toy_dataset, toy_split):
        from rprm.model import ModelConfig, init_params
        cfg = ModelConfig(variant="full", d_id=4, m=4)
        params = init_params(cfg, toy_dataset.n_users, toy_dataset.n_items, 8)
        rows = evaluate.export_phi(params, cfg, toy_dataset, split=toy_split)
        kinds = {etype for etype, _, _ in rows}
        assert kinds == {"user", "item", "user_items_mean"}
        assert len(rows) == 2 * toy_dataset.n_users + toy_dataset.n_items
        for _, _, d in rows:
            assert np.allclose(d, 1.0 / 6.0, atol=1e-12)

    def test_distribution_matches_stored_weights(self):
        rng = np.random.default_rng(3)
        row = rng.normal(size=6)
        d = phi_distribution_np(row)
        w = np.logaddexp(0.0, row)
        assert np.allclose(d, w / w.sum(), atol=1e-15)

    def test_rejects_variant_without_weights(self, toy_dataset):
        from rprm.model import ModelConfig, init_params
        cfg = ModelConfig(variant="noprop", d_id=4, m=4)
        params = init_params(cfg, toy_dataset.n_users, toy_dataset.n_items, 8)
        with pytest.raises(ValueError, match="no property weights"):
            evaluate.export_phi(params, cfg, toy_dataset)

    def test_csv_round_trip(self, tmp_path):
        rows = [("user", 0, np.full(6, 1 / 6)), ("item", 3, np.linspace(0.1, 0.2, 6))]
        path = tmp_path / "phi.csv"
        evaluate.write_phi_csv(rows, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0].startswith("entity_type,entity_id,age,")
        assert len(lines) == 3

    def test_report_per_user_round_trip(self, tmp_path):
        users = [UserMetrics(user=u, ap=0.1 * u, p1=float(u % 2), p10=0.05 * u,
                             r10=0.2) for u in range(5)]
        rep = MetricReport(per_user=users)
        evaluate.write_report(rep, tmp_path / "rep.json",
                              per_user_path=tmp_path / "per_user.csv")
        back = evaluate.read_per_user_csv(tmp_path / "per_user.csv")
        assert set(back) == set(range(5))
        assert back[3]["ap"] == pytest.approx(0.3)
