from pathlib import Path

import numpy as np
import pytest

from mhmm import (
    ConfigError,
    DatasetError,
    SequenceDataset,
    load_dataset,
    load_libras,
    load_sequences_csv,
    sample_mixture,
    save_dataset,
    stationary_distribution,
    write_sequences_csv,
)
from mhmm.datasets import LIBRAS_PAIRS, count_generator

LIBRAS = Path(__file__).resolve().parents[1] / "data" / "movement_libras.data"


def test_row_layout(tmp_path):
    p = tmp_path / "seqs.csv"
    p.write_text("1,2,1\n2,2,2\n")
    ds = load_sequences_csv(p)
    assert len(ds) == 2 and ds.lengths.tolist() == [3, 3]
    assert ds.sequences[0].tolist() == [1, 2, 1]
    assert ds.num_symbols == 3


def test_row_layout_with_labels_and_dims(tmp_path):
    p = tmp_path / "seqs.csv"
    p.write_text("a,0.5,1.0,0.25,2.0\nb,1.5,1.0,0.5,0.5\n")
    ds = load_sequences_csv(p, element_type="real", label_column=0, dims=2)
    assert ds.dim == 2 and ds.lengths.tolist() == [2, 2]
    assert ds.labels.tolist() == ["a", "b"]
    np.testing.assert_array_equal(ds.sequences[0], [[0.5, 1.0], [0.25, 2.0]])


def test_long_layout(tmp_path):
    rows = ["seq_id,label,value"]
    rows += [f"s1,0,{v}" for v in (0, 1, 1)]
    rows += [f"s2,1,{v}" for v in (2, 2, 0, 1, 0)]
    p = tmp_path / "long.csv"
    p.write_text("\n".join(rows) + "\n")
    ds = load_sequences_csv(p, layout="long-format", label_column="label")
    assert ds.lengths.tolist() == [3, 5]
    assert ds.labels.tolist() == [0, 1]


def test_header_comment_sets_defaults(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("# mhmm-dataset element_type=count\n1,2,3\n4,5,6\n")
    ds = load_sequences_csv(p)
    assert ds.element_type == "count" and ds.family == "poisson"


def test_bad_token_is_located(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2,1\n2,x,2\n")
    with pytest.raises(DatasetError, match=r"bad\.csv:2.*column 2"):
        load_sequences_csv(p)


def test_negative_symbol_rejected(tmp_path):
    p = tmp_path / "neg.csv"
    p.write_text("1,-1\n")
    with pytest.raises(DatasetError):
        load_sequences_csv(p)


@pytest.mark.parametrize("layout", ["row-per-sequence", "long-format"])
def test_csv_round_trip(tmp_path, rng, layout):
    ds = SequenceDataset((rng.normal(size=(4, 2)), rng.normal(size=(6, 2))), labels=[1, 2],
                         element_type="real")
    p = tmp_path / "out.csv"
    write_sequences_csv(ds, p, layout)
    back = load_sequences_csv(p)
    assert back.lengths.tolist() == [4, 6]
    assert back.labels.tolist() == [1, 2]
    for a, b in zip(ds.sequences, back.sequences):
        np.testing.assert_array_equal(a, b)


def test_json_round_trip(tmp_path, rng):
    ds = SequenceDataset((rng.integers(0, 4, 5), rng.integers(0, 4, 3)), labels=[0, 1], name="toy")
    p = tmp_path / "ds.json"
    save_dataset(ds, p)
    back = load_dataset(p)
    assert back.to_dict() == ds.to_dict()


def test_length_groups_cover_everything(rng):
    ds = SequenceDataset(tuple(rng.integers(0, 3, n) for n in (4, 7, 4, 2, 7)))
    seen = sorted(i for idx, stacked in ds.length_groups for i in idx)
    assert seen == list(range(5))
    for idx, stacked in ds.length_groups:
        for row, i in zip(stacked, idx):
            np.testing.assert_array_equal(row, ds.sequences[i])


def test_dataset_validation():
    with pytest.raises(DatasetError):
        SequenceDataset(())
    with pytest.raises(DatasetError):
        SequenceDataset((np.zeros((3, 2)), np.zeros((3, 3))), element_type="real")
    with pytest.raises(DatasetError):
        SequenceDataset((np.array([0, 1]),), labels=[0, 1])


def test_standardized_has_zero_mean_unit_variance(rng):
    ds = SequenceDataset(tuple(rng.normal(5, 3, size=(3, 20, 2))), element_type="real").standardized()
    flat = ds.concatenated
    np.testing.assert_allclose(flat.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(flat.std(axis=0), 1.0, atol=1e-12)


def test_libras_pair():
    ds = load_libras(LIBRAS, (1, 8))
    assert len(ds) == 48 and ds.dim == 2
    assert set(ds.lengths.tolist()) == {45}
    assert sorted(set(ds.labels.tolist())) == [1, 8]
    assert np.all((ds.concatenated >= 0) & (ds.concatenated <= 1))


@pytest.mark.parametrize("pair", LIBRAS_PAIRS)
def test_all_libras_pairs_load(pair):
    assert len(load_libras(LIBRAS, pair)) == 48


def test_libras_rejects_bad_pairs(tmp_path):
    with pytest.raises(ConfigError):
        load_libras(LIBRAS, (1, 1))
    with pytest.raises(ConfigError):
        load_libras(LIBRAS, (0, 16))
    short = tmp_path / "short.data"
    short.write_text("0.1,0.2,1\n")
    with pytest.raises(DatasetError, match="columns"):
        load_libras(short, (1, 2))


def test_sampler_is_deterministic(separated_model):
    a = sample_mixture(separated_model, 5, 30, seed=11)
    b = sample_mixture(separated_model, 5, 30, seed=11)
    assert a.to_dict() == b.to_dict()
    assert a.labels.tolist() == [0] * 5 + [1] * 5
    assert a.lengths.tolist() == [30] * 10


def test_sampled_symbol_frequencies(separated_model):
    data = sample_mixture(separated_model, 100, 400, seed=0)
    for k, comp in enumerate(separated_model.components):
        seqs = np.concatenate([s for s, lab in zip(data.sequences, data.labels) if lab == k])
        freq = np.bincount(seqs, minlength=3) / seqs.size
        mu = stationary_distribution(comp.transition).mu
        np.testing.assert_allclose(freq, mu @ comp.emission.probs, atol=0.03)


def test_count_preset_samples_counts():
    data = sample_mixture(count_generator(), 3, 20, seed=1)
    assert data.element_type == "count"
    assert data.concatenated.min() >= 0
