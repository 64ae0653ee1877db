from varmia.seeding import derive_seed, rng_for


def test_same_triple_same_seed():
    assert derive_seed(7, 123, 4) == derive_seed(7, 123, 4)


def test_repeat_index_changes_seed():
    assert derive_seed(7, 123, 0) != derive_seed(7, 123, 1)


def test_frozen_values():
    # stable across runs and platforms; pinned so accidental changes show up
    assert derive_seed(0, 0, 0) == 1708342812237233546
    assert derive_seed(1, 2, 3) == 5166230300279398556
    assert 0 <= derive_seed(2**64 - 1, 2**64 - 1, 2**32 - 1) < 2**64


def test_no_collisions_over_1e5_triples():
    seeds = {derive_seed(e, s, r) for e in range(10) for s in range(1000) for r in range(10)}
    assert len(seeds) == 100_000


def test_rng_for_is_reproducible():
    assert rng_for(1, 2).integers(0, 2**31) == rng_for(1, 2).integers(0, 2**31)
