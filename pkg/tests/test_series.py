import numpy as np
import pytest

from lisa.series import TimeSeries, as_array, export_series, write_csv


def test_values_are_2d_and_read_only():
    ts = TimeSeries([1.0, 2.0, 3.0], dt=0.5)
    assert ts.values.shape == (3, 1)
    assert ts.names == ("x0",)
    with pytest.raises(ValueError):
        ts.values[0, 0] = 9.0


def test_source_array_is_copied():
    a = np.zeros((4, 2))
    ts = TimeSeries(a)
    a[0, 0] = 5.0
    assert ts.values[0, 0] == 0.0


def test_time_axis_slice_and_resample():
    ts = TimeSeries(np.arange(10.0), dt=0.1, t0=1.0)
    assert np.allclose(ts.t, 1.0 + 0.1 * np.arange(10))
    s = ts.slice(2, 5)
    assert len(s) == 3 and s.t0 == pytest.approx(1.2)
    r = ts.resample(3)
    assert r.values[:, 0].tolist() == [0.0, 3.0, 6.0, 9.0]
    assert r.dt == pytest.approx(0.3)


@pytest.mark.parametrize("bad", [dict(values=np.zeros((2, 2, 2))), dict(values=[1.0], dt=0.0),
                                 dict(values=np.zeros((3, 2)), names=("a",))])
def test_invalid_construction(bad):
    with pytest.raises(ValueError):
        TimeSeries(**bad)


def test_as_array_promotes_1d():
    assert as_array([1, 2]).shape == (2, 1)


def test_csv_uses_dot_and_17_digits(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["i", "v", "flag"], [[1, 1 / 3, True]])
    line = p.read_text().splitlines()[1]
    assert line == "1,0.33333333333333331,True"
    assert float(line.split(",")[1]) == 1 / 3


def test_export_header(tmp_path):
    ts = TimeSeries(np.ones((2, 2)), dt=0.5, names=("a", "b"))
    text = export_series(ts, tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "t,a,b"
    assert text[2] == "0.5,1,1"
