import math
import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railbot.anatloc import (
    CSV_COLUMNS,
    LOCATION_LABELS,
    MEDIAN_WIDTH,
    BadWidthError,
    CalibrationSweep,
    DegenerateDataError,
    FeatureWindow,
    LocationClassifier,
    PcaModel,
    SweepRow,
    TooShortError,
    UnfittedError,
    calibration_run,
    classify,
    classify_features,
    collect_trials,
    dataset_features,
    differentials,
    evaluate_holdout,
    feature_rows,
    fit,
    fit_classifier,
    median_filter,
    pca_fit,
    project,
    read_csv,
    sweep_route,
    to_dataset,
    write_csv,
)
from railbot.layout import generalized_layout
from railbot.simcore import Simulator


@pytest.fixture(scope="module")
def layout():
    return generalized_layout()


@pytest.fixture(scope="module")
def clean_dataset(layout):
    return to_dataset(collect_trials(layout, trials=2, seed=5, imu_noise_g=0.0))


@pytest.fixture(scope="module")
def noisy_dataset(layout):
    return to_dataset(collect_trials(layout, trials=5, seed=0))


# ---------------------------------------------------------------------------
# median filter

class TestMedianFilter:
    def test_kills_single_sample_spike(self):
        assert median_filter([1.0, 100.0, 1.0], 3) == [1.0, 1.0, 1.0]

    def test_hand_computed_width_5(self):
        out = median_filter([3, 1, 4, 1, 5, 9, 2], 5)
        assert out == [3, 3, 3, 4, 4, 5, 2]

    def test_width_1_is_identity(self):
        series = [0.3, -2.0, 5.5, 5.5, 0.0]
        assert median_filter(series, 1) == series

    def test_constant_series_is_fixed_point(self):
        series = [4.2] * 9
        once = median_filter(series, MEDIAN_WIDTH)
        assert once == series
        assert median_filter(once, MEDIAN_WIDTH) == once

    def test_even_width_rejected(self):
        with pytest.raises(BadWidthError):
            median_filter([1.0, 2.0, 3.0, 4.0], 2)

    def test_zero_width_rejected(self):
        with pytest.raises(BadWidthError):
            median_filter([1.0], 0)

    def test_width_beyond_series_rejected(self):
        with pytest.raises(BadWidthError):
            median_filter([1.0, 2.0, 3.0], 5)

    @given(st.lists(st.floats(-100, 100), min_size=5, max_size=40),
           st.sampled_from([1, 3, 5]))
    @settings(max_examples=60, deadline=None)
    def test_matches_sorted_window_brute_force(self, series, width):
        out = median_filter(series, width)
        for i, got in enumerate(out):
            r = min(width // 2, i, len(series) - 1 - i)
            window = sorted(series[i - r : i + r + 1])
            assert got == window[len(window) // 2]

    def test_default_width_is_5(self):
        assert MEDIAN_WIDTH == 5


# ---------------------------------------------------------------------------
# differentials and feature rows

class _S:
    def __init__(self, accel):
        self.accel = accel


class TestDifferentials:
    def test_scaled_by_rate(self):
        assert differentials([0.0, 1.0, 3.0], rate_hz=15.0) == [15.0, 30.0]

    def test_constant_series_gives_zeros(self):
        assert differentials([2.5, 2.5, 2.5]) == [0.0, 0.0]

    def test_single_sample_rejected(self):
        with pytest.raises(TooShortError):
            differentials([1.0])


class TestFeatureRows:
    def test_one_row_per_sample_after_the_first(self):
        samples = [_S((0.1 * k, 0.0, 1.0)) for k in range(9)]
        rows = feature_rows(samples, width=3)
        assert len(rows) == 8
        assert all(len(r) == 6 for r in rows)

    def test_settled_samples_reproduce_their_accel(self):
        samples = [_S((0.4, -0.3, 0.86))] * 8
        rows = feature_rows(samples, width=5)
        for r in rows:
            assert r[:3] == pytest.approx((0.4, -0.3, 0.86))
            assert r[3:] == pytest.approx((0.0, 0.0, 0.0))

    def test_needs_width_plus_one_samples(self):
        samples = [_S((0.0, 0.0, 1.0))] * 5
        with pytest.raises(TooShortError):
            feature_rows(samples, width=5)

    def test_window_validates_on_construction(self):
        with pytest.raises(BadWidthError):
            FeatureWindow(tuple([_S((0, 0, 1))] * 8), width=4)
        with pytest.raises(TooShortError):
            FeatureWindow(tuple([_S((0, 0, 1))] * 4), width=5)


# ---------------------------------------------------------------------------
# PCA against a hand-rolled Jacobi eigensolver

def jacobi_eigh(a):
    """Cyclic Jacobi rotations on a symmetric matrix; returns (eigvals,
    eigvecs-as-columns) like the heavyweight routines, built from scratch
    so the production path has an independent check.
    """
    n = len(a)
    a = [list(row) for row in a]
    v = [[float(i == j) for j in range(n)] for i in range(n)]
    for _sweep in range(60):
        off = math.sqrt(sum(a[i][j] ** 2
                            for i in range(n) for j in range(n) if i != j))
        if off < 1e-15:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p][q]) < 1e-18:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q])
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    return [a[i][i] for i in range(n)], v


def sample_covariance(rows):
    n, d = len(rows), len(rows[0])
    mean = [sum(r[k] for r in rows) / n for k in range(d)]
    cov = [[0.0] * d for _ in range(d)]
    for r in rows:
        c = [r[k] - mean[k] for k in range(d)]
        for i in range(d):
            for j in range(d):
                cov[i][j] += c[i] * c[j]
    return [[cov[i][j] / (n - 1) for j in range(d)] for i in range(d)]


def random_rows(seed, n=40, d=6):
    rng = random.Random(seed)
    # anisotropic spread so the top-2 subspace is well separated
    scales = [3.0, 2.0, 0.6, 0.3, 0.2, 0.1]
    return [tuple(rng.gauss(0.0, scales[k]) for k in range(d))
            for _ in range(n)]


class TestPca:
    def test_matches_jacobi_oracle(self):
        rows = random_rows(3)
        model = pca_fit(rows)
        eigvals, eigvecs = jacobi_eigh(sample_covariance(rows))
        order = sorted(range(6), key=lambda i: eigvals[i], reverse=True)
        top = [[eigvecs[i][order[j]] for i in range(6)] for j in range(2)]
        for j, comp in enumerate(model.components):
            assert model.explained_variance[j] == pytest.approx(
                eigvals[order[j]], rel=1e-8)
            # component lies in the oracle's top-2 span: full-length projection
            proj = sum(sum(comp[i] * top[k][i] for i in range(6)) ** 2
                       for k in range(2))
            assert math.sqrt(proj) == pytest.approx(1.0, abs=1e-8)

    def test_components_orthonormal(self):
        model = pca_fit(random_rows(7))
        c0, c1 = model.components
        assert sum(x * x for x in c0) == pytest.approx(1.0, abs=1e-10)
        assert sum(x * x for x in c1) == pytest.approx(1.0, abs=1e-10)
        assert sum(a * b for a, b in zip(c0, c1)) == pytest.approx(0.0, abs=1e-10)

    def test_variance_nonincreasing_and_nonnegative(self):
        model = pca_fit(random_rows(11))
        v1, v2 = model.explained_variance
        assert v1 >= v2 >= 0.0

    def test_collinear_rows_recover_the_line(self):
        d = (3.0, 1.0, 0.0, 0.0, 0.0, -1.0)
        norm = math.sqrt(sum(x * x for x in d))
        rows = [tuple(t * x for x in d) for t in (-2.0, -0.5, 0.1, 1.0, 2.5)]
        model = pca_fit(rows)
        c0 = model.components[0]
        # sign convention puts the largest-magnitude entry positive
        assert c0 == pytest.approx(tuple(x / norm for x in d), abs=1e-9)
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)

    def test_sign_convention_is_stable_under_row_shuffle(self):
        rows = random_rows(19)
        shuffled = list(rows)
        random.Random(1).shuffle(shuffled)
        a = pca_fit(rows).components
        b = pca_fit(shuffled).components
        for ca, cb in zip(a, b):
            assert ca == pytest.approx(cb, abs=1e-9)

    def test_identical_rows_rejected(self):
        with pytest.raises(DegenerateDataError):
            pca_fit([(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)] * 5)

    def test_too_few_rows_rejected(self):
        with pytest.raises(TooShortError):
            pca_fit([(1.0, 2.0), (3.0, 4.0)])

    def test_non_finite_rejected(self):
        rows = [list(r) for r in random_rows(2, n=5)]
        rows[2][3] = float("nan")
        with pytest.raises(ValueError):
            pca_fit(rows)

    def test_rank_2_data_reconstructs_losslessly(self):
        rng = random.Random(23)
        e1 = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        e2 = (0.0, 1.0, 0.0, 0.0, 0.0, 0.0)
        rows = [tuple(rng.gauss(0, 4.0) * a + rng.gauss(0, 2.0) * b
                      for a, b in zip(e1, e2))
                for _ in range(30)]
        model = pca_fit(rows)
        # planar data: the two components span the plane, so projecting and
        # rebuilding loses nothing
        for row in rows:
            px, py = project(model, row)
            rebuilt = [m + px * c0 + py * c1 for m, c0, c1 in
                       zip(model.mean, *model.components)]
            assert rebuilt == pytest.approx(row, abs=1e-8)


# ---------------------------------------------------------------------------
# nearest-centroid classifier

def toy_model():
    return PcaModel(
        mean=(0.0,) * 6,
        components=((1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
                    (0.0, 1.0, 0.0, 0.0, 0.0, 0.0)),
        explained_variance=(1.0, 0.5),
    )


def toy_classifier(**overrides):
    far = {lab: (100.0 + 10.0 * i, 100.0)
           for i, lab in enumerate(LOCATION_LABELS)}
    far.update(overrides)
    return LocationClassifier(far)


class TestClassifier:
    def test_exact_centroid_hit(self):
        clf = toy_classifier(shoulder=(2.0, -1.0))
        row = (2.0, -1.0, 0.0, 0.0, 0.0, 0.0)
        assert classify_features(clf, toy_model(), row) == "shoulder"

    def test_tie_goes_to_earlier_label(self):
        clf = toy_classifier(elbow=(1.0, 0.0), wrist=(-1.0, 0.0))
        row = (0.0,) * 6
        assert classify_features(clf, toy_model(), row) == "elbow"

    def test_unfitted_classifier_raises(self):
        with pytest.raises(UnfittedError):
            classify_features(LocationClassifier(), toy_model(), (0.0,) * 6)
        partial = LocationClassifier({"wrist": (0.0, 0.0)})
        with pytest.raises(UnfittedError):
            classify_features(partial, toy_model(), (0.0,) * 6)

    def test_fit_classifier_needs_every_class(self):
        pts = [(float(i), 0.0) for i in range(5)]
        labs = list(LOCATION_LABELS[:5])
        with pytest.raises(DegenerateDataError):
            fit_classifier(pts, labs)

    def test_window_vote_majority(self):
        clf = toy_classifier(elbow=(1.0, 0.0), wrist=(-1.0, 0.0))
        mk = lambda x: _S((x, 0.0, 0.0))
        samples = tuple([mk(1.0)] * 5 + [mk(-1.0)] * 2)
        window = FeatureWindow(samples, width=3)
        assert classify(clf, toy_model(), window) == "elbow"

    def test_isotropic_scaling_leaves_labels_unchanged(self):
        rng = random.Random(31)
        rows, labs = [], []
        for i, lab in enumerate(LOCATION_LABELS):
            base = [0.0] * 6
            base[i % 6] = 2.0 * (i + 1)
            for _ in range(6):
                rows.append(tuple(b + rng.gauss(0, 0.05) for b in base))
                labs.append(lab)
        model, clf = _fit_rows(rows, labs)
        scaled = [tuple(7.3 * v for v in r) for r in rows]
        model_s, clf_s = _fit_rows(scaled, labs)
        for r, rs in zip(rows, scaled):
            assert (classify_features(clf, model, r)
                    == classify_features(clf_s, model_s, rs))


def _fit_rows(rows, labels):
    model = pca_fit(rows)
    pts = [project(model, r) for r in rows]
    return model, fit_classifier(pts, labels)


# ---------------------------------------------------------------------------
# calibration sweeps on the generalized layout

class TestSweep:
    def test_route_touches_every_class_region(self, layout):
        path = sweep_route(layout)
        names = [layout.vertices[v].label for v in path.vertices]
        assert names[0] == "left_wrist" and names[-1] == "tailbone"
        for anchor in ("left_elbow", "left_shoulder", "upper_back"):
            assert anchor in names

    def test_magnet_count_and_full_labelling(self, layout):
        sim = Simulator(layout, seed=5, imu_noise_g=0.0)
        sweep = calibration_run(sim)
        assert sweep.magnet_count == 9
        assert len(sweep.rows) > 150
        assert all(r.label for r in sweep.rows)
        classes = {r.label for r in sweep.rows if r.label in LOCATION_LABELS}
        assert classes == set(LOCATION_LABELS)

    def test_rows_are_time_ordered_at_stream_rate(self, layout):
        sim = Simulator(layout, seed=5, imu_noise_g=0.0)
        rows = calibration_run(sim).rows
        dts = [b.t - a.t for a, b in zip(rows, rows[1:])]
        assert all(dt == pytest.approx(1.0 / 15.0, abs=1e-9) for dt in dts)

    def test_class_labels_only_while_parked(self, layout):
        sim = Simulator(layout, seed=5, imu_noise_g=0.0)
        rows = calibration_run(sim).rows
        # settled samples sit at the exact anchor orientation, so each class
        # (turntable aside) shows exactly one accel value under zero noise
        for lab in ("wrist", "elbow", "shoulder", "upper_back", "tailbone"):
            accels = {r.accel for r in rows if r.label == lab}
            assert len(accels) == 1, lab

    def test_trial_tags_and_reseeding(self, layout):
        sweeps = collect_trials(layout, trials=2, seed=9)
        assert [s.trial for s in sweeps] == [0, 1]
        a = [r.accel for r in sweeps[0].rows]
        b = [r.accel for r in sweeps[1].rows]
        assert a != b  # different noise draws per trial


# ---------------------------------------------------------------------------
# end-to-end localization accuracy

class TestLocalization:
    def test_noiseless_classes_are_exact(self, clean_dataset):
        model, clf = fit(clean_dataset)
        feats, labels, _trials = dataset_features(clean_dataset)
        per = {lab: [0, 0] for lab in LOCATION_LABELS}
        for f, lab in zip(feats, labels):
            if lab in per:
                per[lab][0] += classify_features(clf, model, f) == lab
                per[lab][1] += 1
        for lab in ("tailbone", "upper_back", "turntable", "shoulder"):
            hit, n = per[lab]
            assert n > 0 and hit == n, f"{lab}: {hit}/{n}"
        # the full six separate cleanly too
        for lab, (hit, n) in per.items():
            assert n > 0 and hit == n, f"{lab}: {hit}/{n}"

    def test_synthetic_turntable_window_classifies(self, clean_dataset, layout):
        model, clf = fit(clean_dataset)
        docked = next(r.accel for r in clean_dataset[0]
                      if r.label == "turntable")
        window = FeatureWindow(tuple([_S(docked)] * 8))
        assert classify(clf, model, window) == "turntable"

    def test_leave_one_trial_out_beats_90_percent(self, noisy_dataset):
        for holdout in sorted(noisy_dataset):
            accuracy, confusion = evaluate_holdout(noisy_dataset, holdout)
            assert accuracy >= 0.90, (holdout, accuracy, confusion)

    def test_confusion_keys_are_truth_predicted(self, noisy_dataset):
        _accuracy, confusion = evaluate_holdout(noisy_dataset, 0)
        assert confusion
        for (truth, predicted), count in confusion.items():
            assert truth in LOCATION_LABELS
            assert predicted in LOCATION_LABELS
            assert count >= 1

    def test_loose_sway_no_worse_than_tight(self, layout, noisy_dataset):
        loose = to_dataset(collect_trials(layout, trials=5, seed=0,
                                          cloth_sway_mm=15.0))
        tight_acc = statistics.mean(
            evaluate_holdout(noisy_dataset, h)[0] for h in sorted(noisy_dataset))
        loose_acc = statistics.mean(
            evaluate_holdout(loose, h)[0] for h in sorted(loose))
        assert loose_acc <= tight_acc + 1e-9

    def test_holdout_must_exist(self, noisy_dataset):
        with pytest.raises(ValueError):
            evaluate_holdout(noisy_dataset, 99)


# ---------------------------------------------------------------------------
# dataset files

class TestCsv:
    def test_round_trip(self, tmp_path, layout):
        sweeps = collect_trials(layout, trials=2, seed=3)
        path = tmp_path / "sweeps.csv"
        write_csv(path, sweeps)
        header = path.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        dataset = read_csv(path)
        assert dataset == to_dataset(sweeps)

    def test_wrong_header_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,ax,ay,az,label,trial\n0.0,0,0,1,wrist,0\n")
        with pytest.raises(ValueError):
            read_csv(bad)

    def test_fit_from_file_matches_fit_from_memory(self, tmp_path, layout):
        sweeps = collect_trials(layout, trials=2, seed=3)
        path = tmp_path / "sweeps.csv"
        write_csv(path, sweeps)
        m_file, c_file = fit(read_csv(path))
        m_mem, c_mem = fit(to_dataset(sweeps))
        assert m_file.mean == pytest.approx(m_mem.mean)
        for a, b in zip(m_file.components, m_mem.components):
            assert a == pytest.approx(b)
        for lab in LOCATION_LABELS:
            assert c_file.centroids[lab] == pytest.approx(c_mem.centroids[lab])
