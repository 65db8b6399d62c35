import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbmflow import formats
from rbmflow.flow import FlowTrajectory
from rbmflow.rbm import RbmModel
from rbmflow.sampler import generate_dataset


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 70), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_spin_packing_round_trip(n_sites, n_rows, seed):
    spins = np.random.default_rng(seed).choice(np.array([-1, 1], np.int8), (n_rows, n_sites))
    packed = formats.pack_spins(spins)
    assert packed.shape == (n_rows, (n_sites + 7) // 8)
    np.testing.assert_array_equal(formats.unpack_spins(packed, n_sites), spins)


def test_bit_order_is_site_zero_first():
    spins = -np.ones(9, np.int8)
    spins[0] = 1
    spins[8] = 1
    np.testing.assert_array_equal(formats.pack_spins(spins), [0b00000001, 0b00000001])


def test_dataset_round_trip_and_header(tmp_path):
    ds = generate_dataset(3, 4, base_seed=77, n_conf=6, sweeps=3)
    p = tmp_path / "d.irbm"
    formats.write_dataset(p, ds)
    raw = p.read_bytes()
    assert raw[:4] == b"IRBM"
    assert struct.unpack_from("<IIIIQ", raw, 4) == (1, 3, 4, 6, 77)
    back = formats.read_dataset(p)
    np.testing.assert_array_equal(back.configs, ds.configs)
    assert back.prng == ds.prng and back.base_seed == 77
    np.testing.assert_array_equal(back.temperatures, ds.temperatures)


def test_dataset_rejects_corrupt_files(tmp_path):
    p = tmp_path / "bad.irbm"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(formats.FormatError):
        formats.read_dataset(p)
    ds = generate_dataset(2, 2, base_seed=1, n_conf=2, sweeps=1)
    p.write_bytes(formats.dataset_bytes(ds)[:-1])
    with pytest.raises(formats.FormatError):
        formats.read_dataset(p)


def test_model_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    m = RbmModel(rng.normal(size=(9, 4)), rng.normal(size=9), rng.normal(size=4))
    p = tmp_path / "m.rbmw"
    formats.write_model(p, m)
    assert p.stat().st_size == 16 + 8 * (36 + 9 + 4)
    assert formats.read_model(p) == m
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(formats.FormatError):
        formats.read_model(p)


def test_csv_formatting(tmp_path):
    p = tmp_path / "x.csv"
    formats.write_csv(p, ("a", "b", "c"), [(0.1, float("nan"), True), (3, 2.5, False)])
    assert p.read_text() == "a,b,c\n0.1,,true\n3,2.5,false\n"
    assert formats.read_csv(p)[1] == {"a": "3", "b": "2.5", "c": "false"}


def test_trajectory_round_trip_preserves_floats(tmp_path):
    rng = np.random.default_rng(4)
    t = FlowTrajectory(*rng.normal(size=(4, 7)), ensemble_size=3, seed=9)
    p = tmp_path / "t.csv"
    formats.write_trajectory(p, t)
    assert p.read_text().splitlines()[0] == "iter,mean_E,std_E,T_est,T_spread"
    assert formats.read_trajectory(p, 3, 9) == t


def test_pgm_layout():
    img = np.array([[0.0, 1.0], [0.5, 1.0]])
    raw = formats.pgm_bytes(img)
    assert raw.startswith(b"P5\n2 2\n255\n")
    assert list(raw[-4:]) == [0, 255, 128, 255]
    assert list(formats.pgm_bytes(np.ones((2, 2)))[-4:]) == [0, 0, 0, 0]


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "sub" / "f.bin"
    formats.atomic_write(target, b"abc")
    assert target.read_bytes() == b"abc"
    formats.atomic_write(target, "xyz")
    assert target.read_text() == "xyz"
    assert sorted(p.name for p in target.parent.iterdir()) == ["f.bin"]
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        formats.atomic_write(blocker / "f.bin", b"x")
