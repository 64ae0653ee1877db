import numpy as np
import pytest

from varmia.attack import (SSIM_C1, AttackRecord, LearnedDistance, LpDistance, SsimDistance,
                           classify_membership, dist_lp, dist_ssim, loss_baseline_score,
                           make_distance, reconstruct, rediffuse_plus_score, rediffuse_score,
                           repeat_seeds, score_samples, train_distance_classifier)
from varmia.data import Dataset, MembershipSplit
from varmia.denoiser import TrainConfig, train_denoiser
from varmia.diffusion import MemorizedDenoiser, forward_noise
from varmia.theory import ErrorLawDenoiser, error_law_endpoint
from varmia.variation import LocalEndpoint

from .helpers import ZeroModel


# ---- distances ------------------------------------------------------------

def test_lp_examples():
    a = np.random.default_rng(0).random(10)
    assert dist_lp(a, a, 3) == 0.0
    assert dist_lp([0.0, 1.0], [1.0, 1.0], 2) == 0.5


@pytest.mark.parametrize("p", [1, 2, 3, 4, 8])
def test_lp_symmetric(p):
    rng = np.random.default_rng(p)
    for _ in range(20):
        a, b = rng.random((2, 1, 4, 4))
        assert dist_lp(a, b, p) == dist_lp(b, a, p)


def test_lp_errors():
    with pytest.raises(ValueError):
        dist_lp(np.zeros(3), np.zeros(4))
    for p in (0, 9, 1.5):
        with pytest.raises(ValueError):
            dist_lp(np.zeros(3), np.zeros(3), p)


@pytest.mark.parametrize("side", [16, 8])  # windowed and global fallback
def test_ssim_constant_images(side):
    a, b = np.zeros((side, side)), np.ones((side, side))
    assert 1 - dist_ssim(a, b) == pytest.approx(SSIM_C1 / (1 + SSIM_C1), abs=1e-8)
    assert dist_ssim(a, a) == 0.0


def test_ssim_identity_and_symmetry():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = rng.random((2, 16, 16))
        assert dist_ssim(a, a) == pytest.approx(0.0, abs=1e-12)
        assert abs(dist_ssim(a, b) - dist_ssim(b, a)) <= 1e-7


def test_ssim_known_value():
    # one global window: mu_a = 0.5, mu_b = 0.25, var_a = 0.25, var_b = 0.0625,
    # cov = 0.125 for the two-column images below
    a = np.tile([0.0, 1.0], (8, 4))
    b = a / 2
    mu_a, mu_b, va, vb, cov = 0.5, 0.25, 0.25, 0.0625, 0.125
    c1, c2 = 1e-4, 9e-4
    want = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)
            / ((mu_a ** 2 + mu_b ** 2 + c1) * (va + vb + c2)))
    assert 1 - dist_ssim(a, b) == pytest.approx(want, rel=1e-12)


def test_ssim_errors():
    with pytest.raises(ValueError):
        dist_ssim(np.zeros((2, 8, 8)), np.zeros((2, 8, 8)))
    with pytest.raises(ValueError):
        dist_ssim(np.full((8, 8), 1.1), np.zeros((8, 8)))
    dist_ssim(np.full((8, 8), 1.0 + 1e-7), np.zeros((8, 8)))  # within slack


def test_distance_factory():
    assert make_distance("lp", 3).name == "l3"
    assert isinstance(make_distance("ssim"), SsimDistance)
    with pytest.raises(ValueError):
        make_distance("learned")
    with pytest.raises(ValueError):
        make_distance("cosine")


# ---- learned distance -----------------------------------------------------

def _separable_pairs(n=200, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        member = i % 2 == 0
        x = rng.random(16)
        scale = 0.05 if member else 0.3
        pairs.append((x, x + scale * rng.choice([-1, 1], 16) * rng.uniform(0.5, 1, 16),
                      member))
    return pairs


def test_classifier_separable_data():
    pairs = _separable_pairs()
    clf = train_distance_classifier(pairs, 0.2, seed=1)
    held = np.setdiff1d(np.arange(len(pairs)), clf.train_index)
    assert len(clf.train_index) == 40
    pred = [clf(pairs[i][0], pairs[i][1]) > 0.5 for i in held]
    acc = np.mean([p == pairs[i][2] for p, i in zip(pred, held)])
    assert acc >= 0.99
    probs = clf.prob(np.random.default_rng(0).uniform(-5, 5, (100, 16)))
    assert np.all((probs >= 0) & (probs <= 1))
    d = LearnedDistance(clf)
    assert d(pairs[0][0], pairs[0][1]) == -clf(pairs[0][0], pairs[0][1])


def test_classifier_same_seed_same_weights():
    pairs = _separable_pairs(60)
    a = train_distance_classifier(pairs, 0.5, seed=3, steps=200)
    b = train_distance_classifier(pairs, 0.5, seed=3, steps=200)
    assert all(pa.tobytes() == pb.tobytes() for pa, pb in zip(a.net.params, b.net.params))


def test_classifier_single_class_rejected():
    pairs = [(np.zeros(4), np.zeros(4), True)] * 10
    with pytest.raises(ValueError, match="single class"):
        train_distance_classifier(pairs, 0.5)
    with pytest.raises(ValueError):
        train_distance_classifier(_separable_pairs(10), 1.0)


# ---- scores ---------------------------------------------------------------

@pytest.fixture
def member(sched):
    x = np.random.default_rng(3).uniform(0.1, 0.9, (1, 6, 6))
    return x, LocalEndpoint(MemorizedDenoiser(x[None], sched), sched)


def test_rediffuse_single_variation(member):
    x, ep = member
    want = -dist_lp(x, ep.vary(x, 200, 42), 1)
    assert rediffuse_score(ep, x, 200, 1, LpDistance(1), [42]) == want


def test_rediffuse_oracle_member_near_zero(member):
    x, ep = member
    assert rediffuse_score(ep, x, 200, 10, LpDistance(1), repeat_seeds(0, 1, 10)) >= -1e-3


def test_rediffuse_argument_checks(member):
    x, ep = member
    with pytest.raises(ValueError):
        rediffuse_score(ep, x, 200, 0, LpDistance(1), [])
    with pytest.raises(ValueError):
        rediffuse_score(ep, x, 200, 2, LpDistance(1), [1])


def _mean_l1_error(sched, n, trials, x):
    ep = error_law_endpoint(x, sched, "gaussian", scale=0.5)
    errs = [dist_lp(x, reconstruct(ep, x, 100, repeat_seeds(trial, 0, n)), 1)
            for trial in range(trials)]
    return float(np.mean(errs))


def test_averaging_rate_and_monotonicity(sched):
    x = np.full(16, 0.5)
    ns = [1, 4, 16, 64]
    errs = [_mean_l1_error(sched, n, 200, x) for n in ns]
    assert all(a >= b for a, b in zip(errs, errs[1:]))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert abs(slope + 0.5) <= 0.15


def test_rediffuse_plus_examples(member):
    x, ep = member
    d = LpDistance(2)
    s = rediffuse_plus_score(ep, x, 200, d, (5, 6))
    assert s >= -1e-3
    model_ep = error_law_endpoint(x, ep.sched, "gaussian", scale=0.3)
    a = rediffuse_plus_score(model_ep, x, 200, d, (5, 6))
    assert a == rediffuse_plus_score(model_ep, x, 200, d, (5, 6))
    assert a == rediffuse_plus_score(model_ep, x, 200, d, (6, 5))
    assert a < -1e-4
    with pytest.raises(ValueError):
        rediffuse_plus_score(ep, x, 200, d, (5, 5))


def test_loss_baseline_examples(sched):
    x = np.random.default_rng(1).random(9)
    assert loss_baseline_score(MemorizedDenoiser(x[None], sched), sched, x, 200, 7) == \
        pytest.approx(0.0, abs=1e-20)
    eps = np.random.default_rng(7).standard_normal(9)
    assert loss_baseline_score(ZeroModel(), sched, x, 200, 7) == pytest.approx(-eps @ eps,
                                                                             rel=1e-12)
    mean = np.mean([loss_baseline_score(ZeroModel(), sched, x, 200, s) for s in range(4000)])
    assert mean == pytest.approx(-9, abs=3 * np.sqrt(2 * 9 / 4000))
    b = np.linspace(-0.2, 0.3, 9)
    biased = ErrorLawDenoiser(x, sched, "bias", bias=b)
    assert loss_baseline_score(biased, sched, x, 200, 7) == pytest.approx(-b @ b, rel=1e-9)


def test_classify_membership_rule():
    assert classify_membership(-0.1, 0.5) is True
    assert classify_membership(-0.9, 0.5) is False
    assert classify_membership(-0.5, 0.5) is False


def test_record_validation():
    p = {"n": 1, "t": 2, "k": 1, "distance": "l1"}
    AttackRecord(0, True, "rediffuse", -0.2, p)
    with pytest.raises(ValueError):
        AttackRecord(0, True, "rediffuse", float("nan"), p)
    with pytest.raises(ValueError):
        AttackRecord(0, True, "secmi", -0.2, p)
    with pytest.raises(ValueError):
        AttackRecord(0, True, "rediffuse", -0.2, {"n": 1})


# ---- overfit toy model: orientation and replay ------------------------------

@pytest.fixture(scope="module")
def overfit(sched):
    x_star = np.array([0.2, 0.8, 0.35, 0.6, 0.5, 0.1])
    ds = Dataset(np.tile(x_star, (32, 1)))
    cfg = TrainConfig(hidden=(64, 64), lr=2e-3, epochs=10_000, max_steps=3000,
                      batch_size=32, gaussian_skip=False, cosine_decay=True)
    model = train_denoiser(ds, MembershipSplit(np.arange(32), np.array([], np.int64)),
                           sched, cfg)
    rng = np.random.default_rng(0)
    others = rng.uniform(0, 1, (8, 6))
    samples = np.concatenate([np.tile(x_star, (8, 1)), others])
    flags = np.array([True] * 8 + [False] * 8)
    return model, samples, flags


@pytest.mark.parametrize("method", ["rediffuse", "rediffuse_plus", "loss_baseline"])
def test_member_scores_exceed_nonmember_scores(overfit, sched, method):
    model, samples, flags = overfit
    recs = score_samples(samples, np.arange(16), flags, method=method, t=200, n=10, k=100,
                         endpoint=LocalEndpoint(model, sched, 100), model=model, sched=sched)
    s = np.array([r.score for r in recs])
    assert s[flags].mean() > s[~flags].mean()


def test_replay_is_identical_across_thread_counts(overfit, sched):
    model, samples, flags = overfit
    kw = dict(method="rediffuse", t=200, n=4, k=50, endpoint=LocalEndpoint(model, sched, 50),
              experiment_seed=11)
    one = score_samples(samples, np.arange(16), flags, workers=1, **kw)
    many = score_samples(samples, np.arange(16), flags, workers=6, **kw)
    assert [r.score for r in one] == [r.score for r in many]
    assert [r.score for r in one] == [r.score for r in
                                      score_samples(samples, np.arange(16), flags, **kw)]
    assert one[0].params == {"n": 4, "t": 200, "k": 50, "distance": "l1"}
