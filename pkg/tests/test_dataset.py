import math

import numpy as np
import pytest

from gnmcal.dataset import (CSVFormatError, ModelDataset, PhysicalDataset, generate_synthetic,
                            load_model, load_physical, sd1_truth, sd2_truth, write_csv)
from gnmcal.rng import SplitMix64, stream


def test_sd1_closed_forms():
    t = sd1_truth()
    assert t.true_theta(math.pi) == pytest.approx(math.pi / 2)
    assert t.model_response(4.0, 2.0) - t.physical_response(4.0) == 0.0
    assert abs(t.physical_response(2 * math.pi)) < 1e-15


def test_sd1_rejects_zero_theta():
    with pytest.raises(ValueError):
        sd1_truth().model_response(1.0, 0.0)


def test_sd2_closed_forms():
    t = sd2_truth()
    assert t.true_theta(2.0) == 1.0
    assert t.model_response(1.5, t.true_theta(1.5)) == pytest.approx(t.physical_response(1.5), abs=1e-15)
    assert t.physical_response(math.pi) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("truth", [sd1_truth(), sd2_truth()], ids=["sd1", "sd2"])
def test_truth_consistency(truth):
    x = np.random.default_rng(0).uniform(*truth.x_range, size=1000)
    diff = truth.model_response(x, truth.true_theta(x)) - truth.physical_response(x)
    assert np.max(np.abs(diff)) <= 1e-12


def test_splitmix_reference_values():
    # first outputs for seed 0 from the published SplitMix64 reference
    out = SplitMix64(0).next_u64(3)
    assert [hex(int(v)) for v in out] == ["0xe220a8397b1dcdaf", "0x6e789e6aa1b965f4", "0x6c45d188009454f"]


def test_uniform_range_and_streams():
    u = stream(7, 1).random(10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02
    assert not np.array_equal(stream(7, 1).random(5), stream(7, 2).random(5))
    assert np.array_equal(stream(7, 1).random(5), stream(7, 1).random(5))


def test_generate_sd1_default_sizes():
    truth = sd1_truth()
    p, m = generate_synthetic(truth, 15, 450, (9 * math.pi / 8, 5 * math.pi / 2),
                              (math.pi / 4, 3 * math.pi / 2), seed=1)
    assert len(p) == 15 and len(m) == 450
    assert set(p.x.tolist()) <= set(m.x.tolist())
    assert np.all(np.diff(p.x) > 0) and np.all(np.diff(m.x) >= 0)
    assert np.all((m.theta >= math.pi / 4) & (m.theta < 3 * math.pi / 2))
    np.testing.assert_array_equal(m.y, truth.model_response(m.x, m.theta))
    np.testing.assert_array_equal(p.y, truth.physical_response(p.x))


def test_generate_sd2_test_sizes():
    p, m = generate_synthetic(sd2_truth(), 30, 900, seed=2)
    assert (len(p), len(m)) == (30, 900)


def test_generate_deterministic():
    a = generate_synthetic(sd2_truth(), 10, 100, seed=5)
    b = generate_synthetic(sd2_truth(), 10, 100, seed=5)
    c = generate_synthetic(sd2_truth(), 10, 100, seed=6)
    assert a[0] == b[0] and a[1] == b[1]
    assert not a[0] == c[0]


@pytest.mark.parametrize("m,n", [(1, 10), (5, 4)])
def test_generate_rejects_bad_sizes(m, n):
    with pytest.raises(ValueError):
        generate_synthetic(sd1_truth(), m, n, seed=0)


def test_generate_rejects_theta_range_touching_zero():
    with pytest.raises(ValueError):
        generate_synthetic(sd1_truth(), 5, 50, theta_range=(0.0, 1.0), seed=0)


def test_physical_dataset_validation():
    d = PhysicalDataset([3.0, 1.0], [0.3, 0.1])
    assert d.x.tolist() == [1.0, 3.0] and d.y.tolist() == [0.1, 0.3]
    with pytest.raises(ValueError):
        PhysicalDataset([1.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        PhysicalDataset([1.0], [0.0])
    with pytest.raises(ValueError):
        PhysicalDataset([1.0, np.inf], [0.0, 1.0])


def test_model_dataset_allows_ties_and_is_stable():
    d = ModelDataset([2.0, 1.0, 2.0], [0.5, 0.1, 0.7], [5.0, 1.0, 7.0])
    assert d.x.tolist() == [1.0, 2.0, 2.0]
    assert d.theta.tolist() == [0.1, 0.5, 0.7]


def test_load_physical_schema_example(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("x,y\n0.5,1.2\n1.0,0.7\n")
    d = load_physical(f)
    assert len(d) == 2 and d.y.tolist() == [1.2, 0.7]


def test_load_rejects_nan_with_line(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("x,y\n0.5,NaN\n1.0,0.7\n")
    with pytest.raises(CSVFormatError) as err:
        load_physical(f)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


@pytest.mark.parametrize("body,line", [
    ("x,y\n0.5,1\n0.5,2\n", 3),
    ("x,y\n0.5,1\nabc,2\n", 3),
    ("x,y\n0.5,1,3\n1,2\n", 2),
    ("x,theta\n0.5,1\n1,2\n", 1),
])
def test_load_physical_errors(tmp_path, body, line):
    f = tmp_path / "p.csv"
    f.write_text(body)
    with pytest.raises(CSVFormatError) as err:
        load_physical(f)
    assert err.value.line == line


def test_csv_round_trip(tmp_path):
    p, m = generate_synthetic(sd1_truth(), 8, 64, seed=3)
    write_csv(p, tmp_path / "p.csv")
    write_csv(m, tmp_path / "m.csv")
    assert load_physical(tmp_path / "p.csv") == p
    assert load_model(tmp_path / "m.csv") == m
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "x,theta,y"


def test_csv_round_trip_awkward_doubles(tmp_path):
    x = np.array([1e-300, 0.1, 1 / 3, 2.0 ** 0.5, 1e300])
    y = np.array([-0.0, 5e-324, -1.7976931348623157e308, np.nextafter(1.0, 2.0), 7.0])
    write_csv(PhysicalDataset(x, y), tmp_path / "p.csv")
    back = load_physical(tmp_path / "p.csv")
    assert back.x.tobytes() == x.tobytes()
    np.testing.assert_array_equal(back.y, y)
