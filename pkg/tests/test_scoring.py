import math

import numpy as np
import pytest

from openmax import (
    ActivationSample,
    CalibrationError,
    ClassModel,
    ConfigError,
    Dataset,
    Hyperparams,
    ModelCoverageError,
    OpenMaxModel,
    WeibullModel,
    calibrate,
    openmax_multichannel,
    openmax_scores,
    predict,
    softmax,
    softmax_multichannel,
    softmax_threshold_predict,
)

LN2 = math.log(2.0)


def far_weibull():
    # shift far beyond any probe: CDF identically zero
    return WeibullModel(shift=1e6, shape=2.0, scale=1.0)


def build_model(mavs, weibulls, metric="euclidean", eta=5):
    n_classes = len(mavs)
    n_channels = np.asarray(mavs[0]).shape[0]
    class_models = tuple(
        ClassModel(j, mavs[j], weibulls[j], eta) for j in range(n_classes)
    )
    return OpenMaxModel(
        n_classes=n_classes,
        n_channels=n_channels,
        eta=eta,
        metric=metric,
        eucos_weight=1.0 / 200.0,
        class_models=class_models,
    )


def random_model(rng, n_classes, n_channels=1, metric="euclidean"):
    mavs = [rng.normal(size=(n_channels, n_classes)) * 2 for _ in range(n_classes)]
    weibulls = [
        tuple(
            WeibullModel(
                shift=float(rng.uniform(0.0, 3.0)),
                shape=float(rng.uniform(0.5, 5.0)),
                scale=float(rng.uniform(0.1, 3.0)),
            )
            for _ in range(n_channels)
        )
        for _ in range(n_classes)
    ]
    return build_model(mavs, weibulls, metric=metric)


def openmax_oracle(activations, model, alpha):
    """Pure-scalar reference: per-channel revision, channel-averaged
    probabilities, written independently of the library paths."""
    n, c = model.n_classes, model.n_channels
    per_channel = []
    for ch in range(c):
        av = [float(x) for x in activations[ch]]
        order = sorted(range(n), key=lambda j: (-av[j], j))
        omega = [1.0] * n
        for rank, j in enumerate(order[:alpha], start=1):
            cm = model.model_for(j)
            mav = [float(x) for x in cm.mav[ch]]
            d = math.sqrt(sum((a - b) ** 2 for a, b in zip(av, mav)))
            if model.metric in ("cosine", "eucos"):
                dot = sum(a * b for a, b in zip(av, mav))
                na = math.sqrt(sum(a * a for a in av))
                nb = math.sqrt(sum(b * b for b in mav))
                cos = max(0.0, 1.0 - dot / (na * nb))
                d = cos if model.metric == "cosine" else model.eucos_weight * d + cos
            wb = cm.weibull[ch]
            z = max(0.0, d - wb.shift) / wb.scale
            cdf = -math.expm1(-(z**wb.shape))
            omega[j] = 1.0 - ((alpha - rank) / alpha) * cdf
        revised = [v * w for v, w in zip(av, omega)]
        unknown = sum(v * (1.0 - w) for v, w in zip(av, omega))
        scores = [unknown] + revised
        peak = max(scores)
        exps = [math.exp(s - peak) for s in scores]
        total = sum(exps)
        per_channel.append([e / total for e in exps])
    averaged = [sum(col) / c for col in zip(*per_channel)]
    total = sum(averaged)
    return np.array([p / total for p in averaged])


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)

    def test_closed_form(self):
        e = math.e
        np.testing.assert_allclose(
            softmax([1.0, 0.0]), [e / (e + 1), 1 / (e + 1)], rtol=1e-12
        )

    def test_shift_invariance(self):
        rng = np.random.default_rng(30)
        v = rng.normal(size=10)
        for c in (-5.0, 1e3):
            np.testing.assert_allclose(softmax(v + c), softmax(v), rtol=1e-12)

    def test_overflow_safety_and_normalization(self):
        p = softmax([1000.0, 999.0, 300.0])
        assert np.all(np.isfinite(p)) and np.all(p > 0)
        assert abs(p.sum() - 1.0) < 1e-12
        # gaps beyond the exp range underflow to zero but stay normalized
        p = softmax([1000.0, -1000.0])
        assert np.all(np.isfinite(p)) and abs(p.sum() - 1.0) < 1e-12


class TestHyperparams:
    def test_validation(self):
        with pytest.raises(ConfigError):
            Hyperparams(alpha=0)
        with pytest.raises(ConfigError):
            Hyperparams(epsilon=1.5)
        with pytest.raises(ConfigError):
            Hyperparams(omega_mode="nope")


class TestOpenmaxScores:
    def test_zero_outlier_probability_reduces_to_padded_softmax(self):
        rng = np.random.default_rng(31)
        n = 6
        model = build_model(
            [rng.normal(size=(1, n)) for _ in range(n)],
            [(far_weibull(),) for _ in range(n)],
        )
        av = rng.normal(size=n) * 3
        scores = openmax_scores(av, model, 0, Hyperparams(alpha=4))
        np.testing.assert_array_equal(scores.revised_av, av)
        assert scores.unknown_activation == 0.0
        np.testing.assert_array_equal(scores.probs, softmax(np.concatenate(([0.0], av))))

    def test_hand_worked_revision(self):
        # v=(3,1,0), alpha=2, CDF(top1)=0.5, CDF(top2)=0.2:
        # rank 1 weight (2-1)/2 halves the CDF, rank 2 weight is 0, so
        # omega=(0.75,1,1), revised=(2.25,1,0), unknown=0.75
        av = np.array([3.0, 1.0, 0.0])
        mav0 = (av - np.array([2.0, 0.0, 0.0]))[None, :]
        mav1 = (av - np.array([0.0, 2.0, 0.0]))[None, :]
        mav2 = np.array([[0.0, 0.0, 5.0]])
        w0 = WeibullModel(shift=1.0, shape=1.0, scale=1.0 / LN2)  # CDF(2)=0.5
        w1 = WeibullModel(shift=1.0, shape=1.0, scale=-1.0 / math.log(0.8))  # CDF(2)=0.2
        model = build_model([mav0, mav1, mav2], [(w0,), (w1,), (far_weibull(),)])
        scores = openmax_scores(av, model, 0, Hyperparams(alpha=2))
        np.testing.assert_allclose(scores.revised_av, [2.25, 1.0, 0.0], atol=1e-12)
        assert scores.unknown_activation == pytest.approx(0.75, abs=1e-12)
        # independent scalar evaluation of softmax(0.75, 2.25, 1, 0)
        exps = [math.exp(x) for x in (0.75, 2.25, 1.0, 0.0)]
        expected = np.array(exps) / sum(exps)
        np.testing.assert_allclose(scores.probs, expected, rtol=1e-12)
        np.testing.assert_allclose(
            scores.probs,
            [0.138158165749, 0.619181941417, 0.177398596345, 0.065261296488],
            atol=1e-9,
        )

    def test_rank_tie_breaks_to_lowest_index(self):
        # classes 0 and 1 tie; with alpha=1 only class 0 may be revised
        av = np.array([2.0, 2.0, 0.0])
        near0 = WeibullModel(shift=0.0, shape=1.0, scale=0.1)  # CDF(d)~1
        model = build_model(
            [np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 3))],
            [(near0,), (near0,), (near0,)],
        )
        scores = openmax_scores(av, model, 0, Hyperparams(alpha=1))
        # alpha=1 means rank 1 gets factor (1-1)/1 = 0: nothing changes,
        # but coverage of the tied top class is still required
        np.testing.assert_array_equal(scores.revised_av, av)

        scores = openmax_scores(av, model, 0, Hyperparams(alpha=2))
        # rank 1 = class 0 (tie to lowest index) gets factor 1/2
        assert scores.revised_av[0] < av[0]
        assert scores.revised_av[1] == av[1]

    def test_omega_bounds_and_last_rank_untouched(self):
        rng = np.random.default_rng(32)
        for _ in range(50):
            n = int(rng.integers(3, 9))
            model = random_model(rng, n)
            av = rng.normal(size=n) * 4
            av[np.abs(av) < 1e-3] = 1.0
            alpha = int(rng.integers(1, n + 1))
            scores = openmax_scores(av, model, 0, Hyperparams(alpha=alpha))
            omega = scores.revised_av / av
            order = np.argsort(-av, kind="stable")
            revised = order[:alpha]
            rest = order[alpha:]
            assert np.all(omega[revised] >= 1.0 / alpha - 1e-12)
            assert np.all(omega[revised] <= 1.0 + 1e-12)
            assert omega[order[alpha - 1]] == 1.0  # factor (alpha-alpha)/alpha
            np.testing.assert_array_equal(scores.revised_av[rest], av[rest])

    def test_survival_mode_flips_the_penalty_direction(self):
        # far inputs: cdf mode penalizes, survival mode does not
        n = 3
        near0 = WeibullModel(shift=0.0, shape=1.0, scale=0.1)
        model = build_model(
            [np.zeros((1, n)) for _ in range(n)], [(near0,)] * n
        )
        av = np.array([5.0, 1.0, 0.0])
        cdf_scores = openmax_scores(av, model, 0, Hyperparams(alpha=2, omega_mode="cdf"))
        surv_scores = openmax_scores(av, model, 0, Hyperparams(alpha=2, omega_mode="survival"))
        assert cdf_scores.revised_av[0] < av[0]
        assert surv_scores.revised_av[0] == pytest.approx(av[0], rel=1e-9)

    def test_probability_law_on_random_inputs(self):
        rng = np.random.default_rng(33)
        for _ in range(500):
            n = int(rng.integers(2, 12))
            metric = str(rng.choice(["euclidean", "eucos"]))
            model = random_model(rng, n, metric=metric)
            av = rng.normal(size=n) * 5
            alpha = int(rng.integers(1, n + 1))
            scores = openmax_scores(av, model, 0, Hyperparams(alpha=alpha))
            assert abs(scores.probs.sum() - 1.0) < 1e-9
            assert np.all(scores.probs >= 0.0) and np.all(scores.probs <= 1.0)

    def test_missing_class_model(self):
        rng = np.random.default_rng(34)
        model = random_model(rng, 4)
        partial = OpenMaxModel(
            n_classes=4,
            n_channels=1,
            eta=model.eta,
            metric=model.metric,
            eucos_weight=model.eucos_weight,
            class_models=model.class_models[:2],
        )
        av = np.array([0.0, 0.0, 9.0, 0.0])  # top class has no model
        with pytest.raises(ModelCoverageError):
            openmax_scores(av, partial, 0, Hyperparams(alpha=1))

    def test_alpha_and_dimension_guards(self):
        rng = np.random.default_rng(35)
        model = random_model(rng, 3)
        with pytest.raises(ConfigError):
            openmax_scores(np.zeros(3), model, 0, Hyperparams(alpha=4))
        with pytest.raises(Exception):
            openmax_scores(np.zeros(5), model, 0, Hyperparams(alpha=2))

    def test_rank_revision_can_change_the_winner(self):
        # top activation heavily penalized, runner-up close to its model:
        # revised ranking differs from the softmax ranking
        av = np.array([5.0, 4.9, 0.0])
        near = WeibullModel(shift=0.0, shape=1.0, scale=0.1)
        mav1 = av[None, :]  # class 1 model sits exactly at the probe // CDF 0
        model = build_model(
            [np.zeros((1, 3)), mav1, np.zeros((1, 3))],
            [(near,), (far_weibull(),), (near,)],
        )
        scores = openmax_scores(av, model, 0, Hyperparams(alpha=2))
        softmax_winner = int(np.argmax(softmax(av)))
        openmax_winner = int(np.argmax(scores.revised_av))
        assert softmax_winner == 0
        assert openmax_winner == 1


class TestMultichannel:
    def test_single_channel_equals_plain_scores(self):
        rng = np.random.default_rng(36)
        model = random_model(rng, 5)
        acts = rng.normal(size=(1, 5)).astype(np.float32)
        sample = ActivationSample(0, acts)
        hp = Hyperparams(alpha=3)
        multi = openmax_multichannel(sample, model, hp)
        single = openmax_scores(acts[0], model, 0, hp)
        np.testing.assert_allclose(multi.probs, single.probs, rtol=1e-13, atol=0)
        np.testing.assert_array_equal(multi.revised_av, single.revised_av)

    def test_duplicated_channels_equal_single_channel(self):
        rng = np.random.default_rng(37)
        n = 5
        row_mavs = [rng.normal(size=(1, n)) for _ in range(n)]
        weibulls = [
            (WeibullModel(shift=0.2, shape=2.0, scale=1.0),) for _ in range(n)
        ]
        single_model = build_model(row_mavs, weibulls)
        double_model = build_model(
            [np.vstack([m, m]) for m in row_mavs],
            [(w[0], w[0]) for w in weibulls],
        )
        row = rng.normal(size=n).astype(np.float32)
        hp = Hyperparams(alpha=3)
        single = openmax_multichannel(ActivationSample(0, row[None, :]), single_model, hp)
        double = openmax_multichannel(
            ActivationSample(0, np.vstack([row, row])), double_model, hp
        )
        np.testing.assert_array_equal(single.probs, double.probs)

    def test_matches_scalar_oracle_on_random_channels(self):
        rng = np.random.default_rng(38)
        n, c = 8, 10
        mavs = [rng.normal(size=(c, n)) * 2 for _ in range(n)]
        weibulls = [
            tuple(
                WeibullModel(
                    shift=float(rng.uniform(0, 2)),
                    shape=float(rng.uniform(0.5, 4)),
                    scale=float(rng.uniform(0.2, 2)),
                )
                for _ in range(c)
            )
            for _ in range(n)
        ]
        model = build_model(mavs, weibulls, metric="eucos")
        hp = Hyperparams(alpha=4)
        for _ in range(40):
            acts = (rng.normal(size=(c, n)) * 3).astype(np.float32)
            sample = ActivationSample(0, acts)
            got = openmax_multichannel(sample, model, hp).probs
            want = openmax_oracle(acts.astype(np.float64), model, hp.alpha)
            np.testing.assert_allclose(got, want, atol=1e-12, rtol=1e-12)


class TestPredictions:
    def test_unknown_wins_argmax(self):
        near = WeibullModel(shift=0.0, shape=1.0, scale=0.05)
        n = 3
        model = build_model([np.zeros((1, n))] * n, [(near,)] * n)
        sample = ActivationSample(0, np.array([[8.0, 1.0, 0.0]], dtype=np.float32))
        result = predict(sample, model, Hyperparams(alpha=3))
        assert result.verdict == "unknown"
        assert result.class_id is None

    def test_epsilon_zero_returns_class(self):
        rng = np.random.default_rng(39)
        model = build_model(
            [rng.normal(size=(1, 4)) for _ in range(4)], [(far_weibull(),)] * 4
        )
        sample = ActivationSample(0, np.array([[0.4, 0.1, 0.0, 0.2]], dtype=np.float32))
        result = predict(sample, model, Hyperparams(alpha=2, epsilon=0.0))
        assert result.verdict == "known"
        assert result.class_id == 0

    def test_uncertain_below_threshold(self):
        rng = np.random.default_rng(40)
        model = build_model(
            [rng.normal(size=(1, 4)) for _ in range(4)], [(far_weibull(),)] * 4
        )
        sample = ActivationSample(0, np.array([[0.4, 0.1, 0.0, 0.2]], dtype=np.float32))
        result = predict(sample, model, Hyperparams(alpha=2, epsilon=0.5))
        assert result.verdict == "uncertain"
        assert result.score < 0.5

    def test_softmax_threshold_baseline(self):
        flat = ActivationSample(0, np.zeros((1, 1000), dtype=np.float32))
        assert softmax_threshold_predict(flat, 0.0).verdict == "known"
        result = softmax_threshold_predict(flat, 0.01)
        assert result.verdict == "uncertain"
        assert result.score == pytest.approx(1e-3, rel=1e-9)

    def test_softmax_threshold_zero_matches_base_argmax(self, small_benchmark):
        for sample in small_benchmark.validation.samples[:100]:
            probs = softmax_multichannel(sample)
            result = softmax_threshold_predict(sample, 0.0)
            assert result.verdict == "known"
            assert result.class_id == int(np.argmax(probs))


class TestCalibrate:
    def test_deterministic_and_valid(self, small_benchmark, small_model):
        again = calibrate(small_benchmark.train, 10)
        assert len(again.class_models) == len(small_model.class_models)
        for a, b in zip(again.class_models, small_model.class_models):
            np.testing.assert_array_equal(a.mav, b.mav)
            assert a.weibull == b.weibull
            assert a.n_support >= 10
            assert all(w.shape > 0 and w.scale > 0 for w in a.weibull)

    def test_insufficient_support_is_skipped(self):
        rng = np.random.default_rng(41)
        n = 4
        rows = []
        for j in range(n):
            count = 12 if j != 2 else 3  # class 2 below the tail size
            for _ in range(count):
                row = rng.normal(size=n)
                row[j] = 10.0
                rows.append(ActivationSample(j, row[None, :]))
        ds = Dataset(n, 1, tuple(rows), "train")
        model = calibrate(ds, 8)
        assert {cm.class_id for cm in model.class_models} == {0, 1, 3}
        assert model.skipped == ((2, "insufficient_support"),)
        av = np.zeros(n)
        av[2] = 9.0
        with pytest.raises(ModelCoverageError):
            openmax_scores(av, model, 0, Hyperparams(alpha=1))

    def test_degenerate_class_skipped_and_all_skipped_raises(self):
        n = 3
        rows = []
        for j in range(n):
            row = np.zeros(n)
            row[j] = 5.0
            rows.extend(ActivationSample(j, row[None, :]) for _ in range(4))
        ds = Dataset(n, 1, tuple(rows), "train")
        with pytest.raises(CalibrationError):
            calibrate(ds, 3)
