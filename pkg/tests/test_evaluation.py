import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leakdet import evaluation as ev
from leakdet import models
from leakdet.audio import Recording


def brute_force_auc(scores, labels):
    """Independent O(n^2) oracle: count (leak, no-leak) pairs."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    pos = scores[labels]
    neg = scores[~labels]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_separation(self):
        assert ev.auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_ties_is_half(self):
        assert ev.auc([3.0, 3.0, 3.0, 3.0], [1, 0, 1, 0]) == 0.5

    def test_three_of_four_pairs(self):
        assert ev.auc([0.9, 0.3, 0.6, 0.1], [1, 1, 0, 0]) == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            ev.auc([1.0, 2.0], [1, 1])
        with pytest.raises(ValueError, match="both classes"):
            ev.auc([1.0, 2.0], [0, 0])

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 100_000))
    def test_matches_brute_force_exactly(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 60))
        scores = rng.integers(0, 8, n).astype(float)  # quantized: plenty of ties
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        assert ev.auc(scores, labels) == brute_force_auc(scores, labels)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_negation_flips_auc_without_ties(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 50))
        scores = rng.permutation(n).astype(float)  # distinct values
        labels = (rng.random(n) < 0.5).astype(int)
        labels[0], labels[1] = 0, 1
        assert ev.auc(-scores, labels) == pytest.approx(1.0 - ev.auc(scores, labels), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_invariant_under_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 60))
        scores = rng.normal(size=n) * 3
        labels = (rng.random(n) < 0.5).astype(int)
        labels[0], labels[1] = 0, 1
        assert ev.auc(np.exp(scores), labels) == pytest.approx(ev.auc(scores, labels), abs=1e-12)


class TestScaledM:
    def test_matches_published_pairings(self):
        assert ev.scaled_m(30.0) == 20
        assert ev.scaled_m(60.0) == 40

    def test_desk_scale(self):
        assert ev.scaled_m(5.0) == 3
        assert ev.scaled_m(0.5) == 1  # floors at 1


class TestBuilders:
    def test_close_set_balanced_and_deterministic(self):
        a = ev.build_close_set(3, n_per_class=2, h_minutes=0.25)
        b = ev.build_close_set(3, n_per_class=2, h_minutes=0.25)
        labels = [s.label for s in a]
        assert labels.count(ev.LEAK) == labels.count(ev.NO_LEAK) == 2
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.recording.samples, sb.recording.samples)
            assert sa.label == sb.label

    def test_close_leak_segments_have_higher_power_centroid(self):
        segments = ev.build_close_set(4, n_per_class=3, h_minutes=0.25)

        def power_centroid(rec):
            power = np.abs(np.fft.rfft(rec.samples)) ** 2
            freqs = np.fft.rfftfreq(rec.samples.size, 1.0 / rec.rate)
            return (freqs * power).sum() / power.sum()

        leak_mean = np.mean([power_centroid(s.recording) for s in segments if s.label == ev.LEAK])
        clean_mean = np.mean([power_centroid(s.recording) for s in segments if s.label == ev.NO_LEAK])
        assert leak_mean > clean_mean

    def test_distant_set_achieved_snr(self):
        seed, n = 5, 3
        segments = ev.build_distant_set(seed, n_per_class=n, h_minutes=0.25)
        plan = ev.build_plan(seed, n, ev._DISTANT_STREAM)
        leaks = [s for s in segments if s.label == ev.LEAK]
        for segment, amb_seed in zip(leaks, plan.leak_ambient_seeds):
            ambient = ev.synth_ambient(0.25 * 60.0, amb_seed)
            noise_part = segment.recording.samples - ambient.samples
            achieved = 10 * np.log10(
                np.mean(ambient.samples**2) / np.mean(noise_part**2))
            assert achieved == pytest.approx(24.0, abs=0.05)

    def test_distant_set_balanced(self):
        segments = ev.build_distant_set(6, n_per_class=2, h_minutes=0.25)
        labels = [s.label for s in segments]
        assert labels.count(ev.LEAK) == labels.count(ev.NO_LEAK) == 2

    def test_sets_differ_between_seeds(self):
        a = ev.build_close_set(1, n_per_class=1, h_minutes=0.1)
        b = ev.build_close_set(2, n_per_class=1, h_minutes=0.1)
        assert not np.array_equal(a[0].recording.samples, b[0].recording.samples)


@pytest.fixture(scope="module")
def tiny_models():
    """One GMM per seed, trained on a small band-passed ambient pool."""
    seeds = (0, 1)
    return ev.train_models(["gmm"], 2.0, seeds, train_minutes=2.0,
                           configs={"gmm": models.GmmConfig(n_components=4)}), seeds


class TestGridAndSweep:
    def _build(self, seed, h_minutes):
        return ev.build_distant_set(seed, n_per_class=2, h_minutes=h_minutes)

    def test_grid_report_shape_and_std(self, tiny_models):
        trained, seeds = tiny_models
        report = ev.run_grid(trained, self._build, [0.5], [2.0], [2], "median", seeds)
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.model == "gmm" and row.m == 2 and len(row.aucs) == 2
        assert row.auc_std >= 0.0
        single = ev.run_grid(trained, self._build, [0.5], [2.0], [2], "median", [0])
        assert single.rows[0].auc_std == 0.0

    def test_constant_model_gives_half(self, tiny_models, monkeypatch):
        trained, seeds = tiny_models
        monkeypatch.setattr(ev, "detect", lambda rec, cfg, parallel=False: type(
            "R", (), {"aggregate": 7.0})())
        report = ev.run_grid(trained, self._build, [0.5], [2.0], [2], "median", seeds)
        assert all(a == 0.5 for a in report.rows[0].aucs)

    def test_single_class_error_names_cell(self, tiny_models):
        trained, seeds = tiny_models

        def one_class(seed, h_minutes):
            return [s for s in self._build(seed, h_minutes) if s.label == ev.LEAK]

        with pytest.raises(ValueError, match=r"grid cell \(model=gmm"):
            ev.run_grid(trained, one_class, [0.5], [2.0], [2], "median", seeds)

    def test_sweep_default_has_eleven_points(self):
        assert len(ev.DEFAULT_SWEEP_M) == 11
        assert ev.DEFAULT_SWEEP_M[0] == 5 and ev.DEFAULT_SWEEP_M[-1] == 105

    def test_sweep_rows_and_flat_curve_for_constant_scores(self, tiny_models, monkeypatch):
        trained, seeds = tiny_models
        by_seed = {seed: trained[("gmm", 2.0, seed)] for seed in seeds}
        monkeypatch.setattr(ev, "detect", lambda rec, cfg, parallel=False: type(
            "R", (), {"aggregate": 1.0})())
        report = ev.sweep_m("gmm", by_seed, self._build, 0.5, 2.0, "median",
                            m_values=(1, 2, 3), seeds=seeds)
        assert [row.m for row in report.rows] == [1, 2, 3]
        assert all(row.auc_mean == 0.5 for row in report.rows)

    def test_reports_reproducible(self, tiny_models):
        trained, seeds = tiny_models
        a = ev.run_grid(trained, self._build, [0.5], [2.0], [2], "median", seeds)
        b = ev.run_grid(trained, self._build, [0.5], [2.0], [2], "median", seeds)
        assert ev.grid_csv(a) == ev.grid_csv(b)

    def test_csv_formats(self, tiny_models):
        trained, seeds = tiny_models
        report = ev.run_grid(trained, self._build, [0.5], [2.0], [2], "median", seeds)
        grid_lines = ev.grid_csv(report, comments=["hello"]).splitlines()
        assert grid_lines[0] == "# hello"
        assert grid_lines[1] == "model,h_min,t_s,m,phi,seed_count,auc_mean,auc_std"
        assert grid_lines[2].startswith("gmm,0.5,2.0,2,median,2,")
        sweep_report = ev.ExperimentReport(report.rows, report.seeds)
        sweep_lines = ev.sweep_csv(sweep_report).splitlines()
        assert sweep_lines[0] == "model,h_min,t_s,m,auc_mean,auc_std"


def test_distant_not_easier_than_close_for_same_model(tiny_models):
    trained, _ = tiny_models
    model = trained[("gmm", 2.0, 0)]
    close = ev.evaluate_model(model, ev.build_close_set(0, 4, 1.0), 2.0, 3, "median")
    distant = ev.evaluate_model(model, ev.build_distant_set(0, 4, 1.0), 2.0, 3, "median")
    assert distant <= close


def test_evaluate_model_value_in_range(tiny_models):
    trained, _ = tiny_models
    value = ev.evaluate_model(trained[("gmm", 2.0, 0)],
                              ev.build_close_set(0, 2, 0.5), 2.0, 2, "median")
    assert 0.0 <= value <= 1.0
