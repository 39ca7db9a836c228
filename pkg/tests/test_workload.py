import math

import pytest
from hypothesis import given, strategies as st

from habf.errors import InputError
from habf.workload import (
    Dataset, gen_keys, gen_zipf_costs, gen_zipf_rounds, generate, load_dataset, save_dataset,
)


def test_keys_are_distinct_and_shaped():
    keys = gen_keys(5000, 1)
    assert len(set(keys)) == 5000
    assert all(len(k) == 12 and k.startswith(b"YCSB") for k in keys)
    assert gen_keys(10, 1) == keys[:10]
    assert gen_keys(10, 2) != keys[:10]


def test_keys_respect_exclusion():
    taken = set(gen_keys(100, 3))
    assert not taken.intersection(gen_keys(100, 3, exclude=taken))


def test_zipf_values():
    costs = gen_zipf_costs(100, 1.0, 0)
    assert sorted(costs, reverse=True) == [1 / r for r in range(1, 101)]
    assert gen_zipf_costs(50, 0.0, 0) == [1.0] * 50
    assert gen_zipf_costs(100, 1.0, 0) == costs
    assert gen_zipf_costs(100, 1.0, 0, shuffle_round=1) != costs
    rounds = gen_zipf_rounds(20, 2.0, 5, 3)
    assert len(rounds) == 3 and all(sorted(r) == sorted(rounds[0]) for r in rounds)


@pytest.mark.parametrize("skew", [-1.0, math.inf, math.nan])
def test_zipf_bad_skew(skew):
    with pytest.raises(InputError):
        gen_zipf_costs(10, skew, 0)


def test_generate_is_disjoint_and_seeded():
    ds = generate(1000, 1500, 1.0, 7)
    assert len(ds.positives) == 1000 and len(ds.negatives) == 1500
    assert not set(ds.positives) & set(ds.negative_keys)
    assert generate(1000, 1500, 1.0, 7).negatives == ds.negatives
    assert ds.provenance["seed"] == 7


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset([b"a"], [(b"a", 1.0)])
    with pytest.raises(InputError):
        Dataset([b"a"], [(b"b", -2.0)])
    with pytest.raises(InputError):
        Dataset([b""], [])
    ds = Dataset([b"a"], [(b"b", 1.0)])
    assert ds.with_costs([5.0]).costs == [5.0]
    with pytest.raises(InputError):
        ds.with_costs([1.0, 2.0])


def test_file_round_trip(tmp_path):
    ds = generate(50, 60, 1.2, 4)
    ds = Dataset([k.hex().encode() for k in ds.positives], [(k.hex().encode(), c) for k, c in ds.negatives])
    p, n = tmp_path / "p.txt", tmp_path / "n.csv"
    save_dataset(ds, p, n)
    back = load_dataset(p, n)
    assert back.positives == ds.positives
    assert back.negatives == ds.negatives


@given(st.lists(st.floats(0, 1e9), min_size=1, max_size=20))
def test_costs_survive_files(tmp_path_factory, costs):
    d = tmp_path_factory.mktemp("c")
    ds = Dataset([b"pos"], [(b"n%d" % i, c) for i, c in enumerate(costs)])
    save_dataset(ds, d / "p", d / "n")
    assert load_dataset(d / "p", d / "n").costs == costs


def test_load_without_cost_column(tmp_path):
    (tmp_path / "p").write_text("a\nb\n")
    (tmp_path / "n").write_text("key\nc\nd\n")
    assert load_dataset(tmp_path / "p", tmp_path / "n").negatives == [(b"c", 1.0), (b"d", 1.0)]


@pytest.mark.parametrize("body,fragment", [
    ("", "missing header"),
    ("name,cost\nx,1\n", "'key' column"),
    ("key,cost\nc,1\nd\n", ":3:"),
    ("key,cost\nc,abc\n", "bad cost"),
    ("key,cost\nc,-1\n", ":2:"),
    ("key,cost\nc,1\nb,2\n", "p:2"),
])
def test_load_errors(tmp_path, body, fragment):
    (tmp_path / "p").write_text("a\nb\n")
    (tmp_path / "n").write_text(body)
    with pytest.raises(InputError) as exc:
        load_dataset(tmp_path / "p", tmp_path / "n")
    assert fragment in str(exc.value)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_dataset(tmp_path / "none", tmp_path / "none2")
