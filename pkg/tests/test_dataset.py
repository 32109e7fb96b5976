import numpy as np
import pytest

from driftgate.dataset import (
    Dataset,
    EllipticSchema,
    Label,
    SynthSpec,
    default_blocks,
    describe_blocks,
    generate_synthetic,
    illicit_share_by_step,
    ingest_elliptic,
    read_canonical,
    write_canonical,
)
from driftgate.errors import InputError


def write_elliptic(tmp_path, feats, classes):
    f = tmp_path / "features.csv"
    c = tmp_path / "classes.csv"
    f.write_text("\n".join(",".join(str(v) for v in row) for row in feats) + "\n")
    c.write_text("txId,class\n" + "\n".join(f"{a},{b}" for a, b in classes) + "\n")
    return f, c


def test_ingest_drops_unknown(tmp_path):
    f, c = write_elliptic(
        tmp_path,
        [[11, 2, 0.5, 1.5], [10, 1, -0.25, 3.0], [12, 1, 0.0, 0.1]],
        [(10, 1), (11, 2), (12, "unknown")],
    )
    ds = ingest_elliptic(f, c)
    assert len(ds) == 2
    assert list(ds.tx_ids) == ["10", "11"]
    assert list(ds.labels) == [Label.ILLICIT, Label.LICIT]
    np.testing.assert_array_equal(ds.features[0], [-0.25, 3.0])
    assert ds.feature_dim == 2


def test_ingest_missing_class_policy(tmp_path):
    f, c = write_elliptic(tmp_path, [[1, 1, 0.1], [2, 1, 0.2]], [(1, 1)])
    assert len(ingest_elliptic(f, c)) == 1
    with pytest.raises(InputError, match="2"):
        ingest_elliptic(f, c, EllipticSchema(missing_class="error"))


def test_ingest_errors(tmp_path):
    f, c = write_elliptic(tmp_path, [[1, 1, 0.1], [2, 1, 0.2, 0.3]], [(1, 1), (2, 2)])
    with pytest.raises(InputError, match="row 2"):
        ingest_elliptic(f, c)
    f, c = write_elliptic(tmp_path, [[1, 1, 0.1], [2, 1, "abc"]], [(1, 1), (2, 2)])
    with pytest.raises(InputError, match="row 2"):
        ingest_elliptic(f, c)
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        ingest_elliptic(f, tmp_path / "nope.csv")


def test_dataset_sorted_and_frozen():
    ds = Dataset.from_arrays(["b", "a", "c"], [2, 2, 1], [0, 1, 0], np.zeros((3, 2)))
    assert list(ds.tx_ids) == ["c", "a", "b"]
    assert list(ds.time_steps) == [1, 2, 2]
    with pytest.raises(ValueError):
        ds.labels[0] = 1
    assert ds.illicit_share(2) == 0.5
    assert ds.time_range == (1, 2)
    rec = ds.record(1)
    assert rec.tx_id == "a" and rec.label == Label.ILLICIT


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset.from_arrays(["a"], [0], [0], np.zeros((1, 2)))
    with pytest.raises(InputError):
        Dataset.from_arrays(["a"], [1], [-1], np.zeros((1, 2)))


def test_canonical_round_trip(tmp_path, small_synth):
    p = write_canonical(small_synth, tmp_path / "ds.csv", {"k": 1})
    back = read_canonical(p)
    np.testing.assert_array_equal(back.features, small_synth.features)
    np.testing.assert_array_equal(back.labels, small_synth.labels)
    np.testing.assert_array_equal(back.tx_ids, small_synth.tx_ids)


def test_describe_blocks_matches_tallies(small_synth):
    blocks = describe_blocks(small_synth, default_blocks(small_synth))
    assert [(b.lo, b.hi) for b in blocks] == [(1, 10), (11, 20), (21, 24)]
    cum_n = cum_i = 0
    for b in blocks:
        m = (small_synth.time_steps >= b.lo) & (small_synth.time_steps <= b.hi)
        assert b.count == m.sum()
        assert b.illicit == small_synth.labels[m].sum()
        cum_n += b.count
        cum_i += b.illicit
        assert b.cumulative_illicit_share == cum_i / cum_n


def test_describe_blocks_errors(small_synth):
    with pytest.raises(InputError):
        describe_blocks(small_synth, [(1, 5), (5, 9)])
    with pytest.raises(InputError):
        describe_blocks(small_synth, [(1, 50)])


def test_zero_illicit_blocks():
    ds = generate_synthetic(SynthSpec.linear(4, 50, 2, (0.0, 0.0), seed=1))
    assert ds.labels.sum() == 0
    assert all(b.illicit_share == 0 for b in describe_blocks(ds, [(1, 2), (3, 4)]))


def test_two_period_generator_tally():
    spec = SynthSpec(2, 100, 3, (0.5, 0.0), (2.0, 2.0), seed=9)
    ds = generate_synthetic(spec)
    shares = [b.illicit_share for b in describe_blocks(ds, [(1, 1), (2, 2)])]
    # replay the generator's draws
    rng = np.random.default_rng(9)
    y1 = rng.random(100) < 0.5
    assert shares == [y1.sum() / 100, 0.0]


def test_generator_prevalence_and_determinism():
    spec = SynthSpec.linear(20, 500, 3, (0.15, 0.05), seed=4)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    np.testing.assert_array_equal(a.features, b.features)
    assert abs(a.illicit_share() - 0.10) < 0.02
    assert len(illicit_share_by_step(a)) == 20


def test_generator_class_means():
    ds = generate_synthetic(SynthSpec(1, 20000, 2, (0.5,), ((3.0, -1.0),), seed=2))
    ill = ds.features[ds.labels == 1].mean(axis=0)
    lic = ds.features[ds.labels == 0].mean(axis=0)
    np.testing.assert_allclose(ill, [3.0, -1.0], atol=0.05)
    np.testing.assert_allclose(lic, [0.0, 0.0], atol=0.05)


def test_synth_spec_validation():
    with pytest.raises(InputError):
        SynthSpec(0, 10, 2, (), ())
    with pytest.raises(InputError):
        SynthSpec(2, 10, 2, (0.1,), (1.0, 1.0))
    with pytest.raises(InputError):
        SynthSpec(1, 10, 2, (1.5,), (1.0,))
