import numpy as np
import pytest

from varmia.data import (Dataset, MembershipSplit, gen_gmm_dataset, gen_shape_dataset,
                         load_dataset, make_texture, render_shape, save_dataset,
                         split_members, style_shift)


# ---- point clouds ---------------------------------------------------------

def test_gmm_is_deterministic():
    a, b = gen_gmm_dataset(200, 3, 5, seed=11), gen_gmm_dataset(200, 3, 5, seed=11)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert gen_gmm_dataset(200, 3, 5, seed=12).samples.tobytes() != a.samples.tobytes()


def test_gmm_degenerate_single_component():
    ds = gen_gmm_dataset(50, 4, 1, seed=0, sigma=0.0)
    assert np.all(ds.samples == ds.samples[0])
    np.testing.assert_allclose(ds.samples[0], ds.meta["means"][0], rtol=1e-6)


def test_gmm_component_proportions_within_three_sigma():
    n, K = 10_000, 4
    ds = gen_gmm_dataset(n, 2, K, seed=3)
    counts = np.bincount([lab["component"] for lab in ds.labels], minlength=K)
    sd = np.sqrt(n * (1 / K) * (1 - 1 / K))
    assert np.all(np.abs(counts - n / K) <= 3 * sd)


def test_gmm_values_in_unit_cube():
    ds = gen_gmm_dataset(500, 2, 9, seed=1, sigma=0.3)
    assert ds.samples.min() >= 0.0 and ds.samples.max() <= 1.0


def test_gmm_rejects_zero_counts():
    for args in [(0, 2, 2), (5, 0, 2), (5, 2, 0)]:
        with pytest.raises(ValueError):
            gen_gmm_dataset(*args, seed=0)


# ---- shapes ---------------------------------------------------------------

def test_shapes_deterministic_and_in_range():
    a, b = gen_shape_dataset(30, 16, seed=5), gen_shape_dataset(30, 16, seed=5)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert a.samples.dtype == np.float32 and a.samples.shape == (30, 1, 16, 16)
    assert a.samples.min() >= 0.0 and a.samples.max() <= 1.0


def test_shapes_rerender_from_descriptor():
    ds = gen_shape_dataset(40, 16, seed=9)
    for img, desc in zip(ds.samples, ds.labels):
        assert render_shape(desc, 16).tobytes() == img.tobytes()


def _lattice_disc(r):
    return sum(1 for y in range(-r, r + 1) for x in range(-r, r + 1) if x * x + y * y <= r * r)


def test_shapes_background_fraction_matches_area_distribution():
    side = 16
    # sizes drawn uniformly from {2, 3, 4}; cross arm half-width from [0, a // 2)
    sizes = [2, 3, 4]
    rect = np.mean([(2 * a + 1) * (2 * b + 1) for a in sizes for b in sizes])
    disc = np.mean([_lattice_disc(a) for a in sizes])
    cross = np.mean([np.mean([2 * (2 * a + 1) * (2 * b + 1) - (2 * b + 1) ** 2
                              for b in range(max(1, a // 2))]) for a in sizes])
    expected_bg = 1 - np.mean([rect, disc, cross]) / side ** 2
    ds = gen_shape_dataset(1000, side, seed=2)
    bg = float(np.mean(ds.samples == 0))
    assert bg >= 0.5
    assert bg == pytest.approx(expected_bg, abs=0.01)


def test_shapes_side_too_small():
    with pytest.raises(ValueError):
        gen_shape_dataset(3, 7, seed=0)


# ---- style shift ----------------------------------------------------------

def test_style_shift_preserves_geometry_and_changes_style():
    ds = gen_shape_dataset(60, 16, seed=4)
    sh = style_shift(ds, seed=8)
    for a, b in zip(ds.samples, sh.samples):
        ma, mb = a > 0, b > 0
        assert np.sum(ma & mb) / np.sum(ma | mb) == 1.0
        assert np.mean(np.abs(a - b)) > 0


@pytest.mark.parametrize("width", [1, 2, 3])
@pytest.mark.parametrize("axis", [0, 1])
def test_texture_period_from_autocorrelation(width, axis):
    tex = make_texture("stripes", 24, width, 0.2, 0.9, axis=axis)
    profile = tex[0] if axis == 1 else tex[:, 0]
    z = profile - profile.mean()
    lags = np.arange(1, len(z) // 2)
    ac = [np.dot(z[:-lag], z[lag:]) / (len(z) - lag) for lag in lags]
    ac = np.array(ac)
    # the fundamental period is the first lag reaching the peak
    period = lags[np.flatnonzero(ac >= ac.max() - 1e-12)[0]]
    assert period == 2 * width


def test_style_shift_records_configured_width():
    sh = style_shift(gen_shape_dataset(10, 16, seed=1), seed=2, stripe_width=3)
    assert all(d["style"]["width"] == 3 for d in sh.labels)


def test_style_shift_needs_descriptors():
    with pytest.raises(ValueError):
        style_shift(gen_gmm_dataset(5, 2, 2, seed=0), seed=1)
    with pytest.raises(ValueError):
        style_shift(Dataset(np.zeros((2, 1, 8, 8))), seed=1)


# ---- splits ---------------------------------------------------------------

def test_split_sizes_and_determinism():
    sp = split_members(10, seed=3)
    assert len(sp.members) == 5 and len(sp.nonmembers) == 5
    again = split_members(10, seed=3)
    assert np.array_equal(sp.members, again.members)
    assert set(sp.members) | set(sp.nonmembers) == set(range(10))
    odd = split_members(11, seed=0)
    assert abs(len(odd.members) - len(odd.nonmembers)) <= 1


def test_split_is_uniform_over_reseeds():
    n = 10
    freq = np.zeros(n)
    for s in range(1000):
        freq[split_members(n, s).members] += 1
    assert np.all(np.abs(freq / 1000 - 0.5) <= 0.05)


def test_split_rejects_empty_and_overlap():
    with pytest.raises(ValueError):
        split_members(0, seed=0)
    with pytest.raises(ValueError):
        MembershipSplit(np.array([0, 1]), np.array([1, 2]))


def test_is_member_mask():
    sp = split_members(8, seed=0)
    mask = sp.is_member(8)
    assert mask.sum() == 4 and np.all(mask[sp.members])


# ---- persistence ----------------------------------------------------------

def test_dataset_round_trip(tmp_path):
    ds = gen_shape_dataset(12, 16, seed=1)
    sp = split_members(ds, seed=1)
    save_dataset(ds, tmp_path / "d", sp)
    back, sp2 = load_dataset(tmp_path / "d")
    assert back.samples.tobytes() == ds.samples.tobytes()
    assert back.labels == ds.labels
    assert np.array_equal(sp2.members, sp.members)


def test_access_counter_counts_reads():
    ds = gen_gmm_dataset(6, 2, 2, seed=0)
    ds.take([0, 2, 2])
    assert ds.access_counts.tolist() == [1, 0, 2, 0, 0, 0]
