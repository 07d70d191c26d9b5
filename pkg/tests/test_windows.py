"""Window extraction, normalization, stitching, and the windows file format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdenoise.exceptions import (
    BadParams,
    EmptyInput,
    IoError,
    MalformedRow,
    Misalignment,
    SeriesTooShort,
    ShapeMismatch,
    VersionMismatch,
)
from tsdenoise.timeseries import SineParams, generate_synthetic
from tsdenoise.windows import (
    NormParams,
    Split,
    Window,
    WindowSet,
    denormalize,
    load_windows,
    normalize_values,
    rolling_windows,
    save_windows,
    stitch_windows,
    windows_at_origins,
)


# hand-computed: mean=2, population std=sqrt(2/3), normalized = +/- sqrt(3/2)
def test_normalize_oracle():
    values, norm = normalize_values([1.0, 2.0, 3.0])
    root32 = 1.2247448713915892
    assert np.allclose(values, [-root32, 0.0, root32], atol=1e-15)
    assert norm.shift == 2.0
    assert norm.scale == pytest.approx(0.816496580927726, rel=1e-14)
    assert not norm.degenerate


def test_normalize_degenerate_window():
    values, norm = normalize_values([5.0, 5.0, 5.0])
    assert np.array_equal(values, [0.0, 0.0, 0.0])
    assert norm.degenerate
    assert norm.shift == 5.0
    assert norm.scale == 1e-12
    # round trip restores the constant window
    assert np.allclose(denormalize(values, norm), [5.0, 5.0, 5.0])


def test_denormalize_inverts_normalize():
    rng = np.random.default_rng(2)
    raw = rng.normal(10.0, 3.0, size=17)
    values, norm = normalize_values(raw)
    assert np.allclose(denormalize(values, norm), raw, rtol=1e-12)


def test_norm_params_validation():
    with pytest.raises(BadParams):
        NormParams(shift=0.0, scale=0.0)
    with pytest.raises(BadParams):
        NormParams(shift=float("nan"), scale=1.0)


def test_rolling_windows_origins_and_count():
    ws = rolling_windows(np.arange(10, dtype=float) + 1.0, length=4, stride=2)
    assert len(ws) == 4  # floor((10-4)/2)+1
    assert [w.origin_index for w in ws] == [0, 2, 4, 6]
    assert ws.length == 4 and ws.stride == 2
    # each window denormalizes back to its slice of the source
    src = np.arange(10, dtype=float) + 1.0
    for w in ws:
        assert np.allclose(w.denormalized(), src[w.origin_index:w.origin_index + 4])


def test_rolling_windows_from_price_series_carries_ticker():
    s = generate_synthetic("sine", SineParams(n_points=30), ticker="SINE0")
    ws = rolling_windows(s, length=10, stride=5, split=Split.TRAIN)
    assert all(w.source_ticker == "SINE0" for w in ws)
    assert ws.split is Split.TRAIN


def test_rolling_windows_too_short():
    with pytest.raises(SeriesTooShort):
        rolling_windows(np.ones(3), length=4, stride=1)


def test_rolling_windows_rejects_bad_dims():
    with pytest.raises(BadParams):
        rolling_windows(np.arange(10.0), length=1, stride=1)
    with pytest.raises(BadParams):
        rolling_windows(np.arange(10.0), length=4, stride=0)


def test_windows_at_origins_skips_out_of_range():
    out = windows_at_origins(np.arange(10.0) + 1.0, [-1, 0, 6, 7, 100], length=4)
    assert sorted(out) == [0, 6]
    assert np.allclose(out[6].denormalized(), [7.0, 8.0, 9.0, 10.0])


def test_matrix_stacks_and_filters_degenerate():
    flat = Window(np.zeros(3), "T", 0, NormParams(0.0, 1e-12, degenerate=True))
    live_vals, live_norm = normalize_values([1.0, 2.0, 3.0])
    live = Window(live_vals, "T", 3, live_norm)
    ws = WindowSet([flat, live], length=3, stride=3)
    assert ws.matrix().shape == (2, 3)
    assert ws.matrix(include_degenerate=False).shape == (1, 3)
    with pytest.raises(EmptyInput):
        WindowSet([flat], length=3, stride=3).matrix(include_degenerate=False)


def test_window_set_rejects_mixed_lengths():
    a = Window(np.zeros(3), "T", 0, NormParams(0.0, 1.0))
    b = Window(np.zeros(4), "T", 3, NormParams(0.0, 1.0))
    with pytest.raises(ShapeMismatch):
        WindowSet([a, b], length=3, stride=3)


def test_stitch_reconstructs_source_exactly():
    src = np.cumsum(np.random.default_rng(5).normal(size=50)) + 100.0
    ws = rolling_windows(src, length=8, stride=3)
    start, rebuilt = stitch_windows(ws.windows)
    assert start == 0
    covered = 8 + 3 * (len(ws) - 1)
    assert np.allclose(rebuilt, src[:covered], rtol=1e-12)


def test_stitch_single_window_and_errors():
    src = np.arange(12, dtype=float) + 1.0
    one = windows_at_origins(src, [4], length=5)[4]
    start, vals = stitch_windows([one])
    assert start == 4
    assert np.allclose(vals, src[4:9])
    with pytest.raises(EmptyInput):
        stitch_windows([])
    uneven = windows_at_origins(src, [0, 2, 5], length=5)
    with pytest.raises(Misalignment):
        stitch_windows(list(uneven.values()))
    gap = windows_at_origins(src, [0, 6], length=5)  # stride 6 > length 5
    with pytest.raises(Misalignment):
        stitch_windows(list(gap.values()))


@given(st.integers(min_value=2, max_value=12), st.integers(min_value=1, max_value=12),
       st.integers(min_value=0, max_value=30))
@settings(max_examples=60, deadline=None)
def test_stitch_round_trip_property(length, stride, extra):
    stride = min(stride, length)
    n = length + 3 * stride + extra
    src = np.linspace(1.0, 9.0, n) + np.sin(np.arange(n))
    ws = rolling_windows(src, length=length, stride=stride)
    start, rebuilt = stitch_windows(ws.windows)
    assert start == 0
    assert np.allclose(rebuilt, src[:len(rebuilt)], atol=1e-10)


def test_save_load_round_trip(tmp_path):
    src = np.random.default_rng(9).normal(50.0, 4.0, size=40)
    ws = rolling_windows(src, length=6, stride=2, split=Split.TEST, ticker="RT")
    path = tmp_path / "w.csv"
    save_windows(path, ws, provenance={"source": "unit"})
    back, prov = load_windows(path)
    assert prov == {"source": "unit"}
    assert back.split is Split.TEST
    assert back.length == 6 and back.stride == 2
    assert len(back) == len(ws)
    for a, b in zip(ws, back):
        assert a.source_ticker == b.source_ticker
        assert a.origin_index == b.origin_index
        assert np.array_equal(a.values, b.values)  # repr round trip is exact
        assert a.norm == b.norm


def test_load_windows_error_cases(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("ticker,origin\n")
    with pytest.raises(IoError):
        load_windows(p)
    p.write_text('# {"format": "other", "version": 1}\nh\n')
    with pytest.raises(IoError):
        load_windows(p)
    p.write_text('# {"format": "tsdenoise-windows", "version": 2, "length": 2, "stride": 1}\nh\n')
    with pytest.raises(VersionMismatch):
        load_windows(p)
    head = '# {"format": "tsdenoise-windows", "version": 1, "length": 2, "stride": 1}\n'
    head += "ticker,origin_index,split,degenerate,shift,scale,v0,v1\n"
    p.write_text(head + "T,0,train,0,0.0,1.0,0.5\n")  # one value short
    with pytest.raises(MalformedRow) as exc:
        load_windows(p)
    assert exc.value.line_no == 3
    p.write_text(head + "T,0,train,0,0.0,1.0,0.5,oops\n")
    with pytest.raises(MalformedRow):
        load_windows(p)
