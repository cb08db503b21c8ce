import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadgehring.examples import HaircombSpec, haircomb_space, two_value_weight, unit_interval_space
from dyadgehring.io import (FormatError, atomic_write, format_lattice, format_report, format_space,
                            format_tree, manifest, read_lattice, read_space, read_weight,
                            to_jsonable, write_csv, write_lattice, write_space, write_weight)
from dyadgehring.lattice import build_lattice, verify_lattice
from dyadgehring.space import FiniteSpace
from dyadgehring.stopping import decay_constant, stopping_tree
from dyadgehring.weights import Weight


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 40), dim=st.integers(1, 3),
       metric=st.sampled_from(["euclidean", "linf", "snowflake:0.5"]))
def test_space_round_trip_is_exact(tmp_path_factory, seed, n, dim, metric):
    rng = np.random.default_rng(seed)
    space = FiniteSpace(rng.normal(size=(n, dim)), rng.random(n) + 1e-3, metric=metric)
    path = tmp_path_factory.mktemp("s") / "space.txt"
    write_space(path, space, meta={"seed": seed})
    back, meta = read_space(path)
    assert back.metric == metric and meta == {"seed": str(seed)}
    assert np.array_equal(back.coords, space.coords) and np.array_equal(back.mass, space.mass)
    assert format_space(back, meta) == format_space(space, {"seed": seed})


def test_explicit_matrix_round_trip(tmp_path):
    m = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    space = FiniteSpace(np.zeros((3, 0)), np.array([1.0, 2.0, 3.0]), "explicit-matrix", m)
    write_space(tmp_path / "m.txt", space)
    back, _ = read_space(tmp_path / "m.txt")
    assert np.array_equal(back.matrix, m) and back.distance(0, 2) == 5.0


def test_tags_round_trip(tmp_path):
    spec = HaircombSpec(teeth=2, resolution=0.02)
    space = haircomb_space(spec)
    write_space(tmp_path / "h.txt", space, meta={"builtin": "haircomb", "teeth": 2})
    back, meta = read_space(tmp_path / "h.txt")
    assert meta["builtin"] == "haircomb"
    for key in ("segment", "tooth"):
        assert back.tags[key].dtype.kind == "i"
        assert np.array_equal(back.tags[key], space.tags[key])
    assert np.array_equal(back.tags["param"], space.tags["param"])


def test_weight_round_trip(tmp_path):
    w = Weight(np.array([0.1, 1 / 3, 7.0]), "w")
    write_weight(tmp_path / "w.txt", w)
    back = read_weight(tmp_path / "w.txt", n=3)
    assert np.array_equal(back.values, w.values)
    with pytest.raises(FormatError):
        read_weight(tmp_path / "w.txt", n=4)


def test_lattice_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    space = FiniteSpace(rng.random((150, 2)), rng.random(150) + 0.1)
    L = build_lattice(space, seed=4)
    write_lattice(tmp_path / "l.txt", L)
    back = read_lattice(tmp_path / "l.txt", space.n)
    assert format_lattice(back) == format_lattice(L)
    assert verify_lattice(back, space).ok
    assert [c.children for c in back.cubes] == [tuple(c.children) for c in L.cubes]
    assert back.seed == 4
    _, std = unit_interval_space(16)
    write_lattice(tmp_path / "u.txt", std)
    assert read_lattice(tmp_path / "u.txt").seed is None


@pytest.mark.parametrize("text,where", [
    ("# wrong header\n", 1),
    ("# dyadgehring space v1\npoints 2\ndim 1\nmetric euclidean\n0 0.0 1.0\n", 5),
    ("# dyadgehring space v1\npoints 1\ndim 1\nmetric euclidean\n0 zero 1.0\n", 5),
    ("# dyadgehring space v1\npoints 1\ndim 1\nmetric euclidean\n0 0.0\n", 5),
    ("# dyadgehring space v1\npoints 2\ndim 1\nmetric euclidean\n1 0.0 1.0\n0 1.0 1.0\n", 5),
    ("# dyadgehring space v1\ndim 1\nmetric euclidean\n", 1),
])
def test_space_format_errors(tmp_path, text, where):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(FormatError) as info:
        read_space(path)
    assert info.value.line == where
    assert str(path) in str(info.value)


def test_lattice_format_errors(tmp_path):
    head = "# dyadgehring lattice v1\ndelta 0.5\nr0 0.5\nR0 1.0\nseed none\nk_min 0\n"
    cases = [
        head + "0 0 -1 0 2 0 1\n1 2 0 0 1 0\n",        # non-consecutive id
        head + "0 0 1 0 2 0 1\n",                       # parent after child
        head + "0 0 -1 0 3 0 1\n",                      # wrong member count
        head,                                           # no cubes
        head.replace("seed none\n", "") + "0 0 -1 0 1 0\n",
    ]
    for i, text in enumerate(cases):
        path = tmp_path / f"l{i}.txt"
        path.write_text(text)
        with pytest.raises(FormatError):
            read_lattice(path)


def test_missing_file_is_format_error(tmp_path):
    with pytest.raises(FormatError):
        read_space(tmp_path / "nope.txt")


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "a.txt"
    atomic_write(p, "one\n")
    atomic_write(p, "two\n")
    assert p.read_text() == "two\n"
    assert sorted(x.name for x in tmp_path.iterdir()) == ["a.txt"]


def test_tree_dump():
    space, L = unit_interval_space(64)
    tree = stopping_tree(L, two_value_weight(space), L.roots()[0], 2.0, space=space)
    text = format_tree(tree, decay_constant(tree, L, space))
    lines = text.splitlines()
    assert lines[1].split()[:3] == ["0", str(L.roots()[0]), "root"]
    gen, cube, kind, mean, ratio = lines[2].split()
    assert (gen, kind, float(mean)) == ("1", "high", 4.0)
    assert float(ratio) == pytest.approx(4 / 1.75)
    assert lines[-1].startswith("# summary c_measured 0.25 generation_masses")


def test_reports_are_deterministic_json():
    rep = {"b": np.float64(1.5), "a": [np.int64(2), math.inf, math.nan], "ok": np.bool_(True)}
    m = manifest("gehring certificate", {"space": "x.txt"}, {"p": 2.0})
    text = format_report(rep, m)
    assert text == format_report(rep, m)
    body = json.loads(text)
    assert body["a"] == [2, "inf", "nan"] and body["ok"] is True
    assert body["manifest"]["version"] and "time" not in json.dumps(body["manifest"])
    assert to_jsonable({1: (1.0,)}) == {"1": [1.0]}


def test_csv_writer(tmp_path):
    write_csv(tmp_path / "t.csv", ["depth", "value"], [(8, 0.1), (9, 1 / 3)])
    assert (tmp_path / "t.csv").read_text() == "depth,value\n8,0.1\n9,0.3333333333333333\n"
