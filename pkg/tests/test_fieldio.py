import csv
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ch6opt import build_grid
from ch6opt.fieldio import (
    FieldFormatError,
    FieldKindError,
    atomic_write_text,
    read_field,
    read_raw,
    write_csv,
    write_field,
)
from ch6opt.spectral import GridField, SpectralField


def header(version=1, dim=1, kind=0, counts=(4,)):
    return b"CH6F" + struct.pack("<HBB", version, dim, kind) + struct.pack(f"<{len(counts)}I", *counts)


class TestRoundtrip:
    @given(arrays(np.float64, st.sampled_from([(7,), (3, 5), (2, 3, 4)]),
                  elements=st.floats(allow_nan=False, allow_infinity=True)),
           st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_bit_identical(self, tmp_path_factory, values, spectral):
        g = build_grid(values.ndim, [1.0] * values.ndim, list(values.shape))
        f = SpectralField(g, values) if spectral else GridField(g, values)
        path = tmp_path_factory.mktemp("rt") / "f.ch6f"
        write_field(path, f)
        back = read_field(path, g)
        assert type(back) is type(f)
        data = back.coeffs if spectral else back.values
        assert data.tobytes() == values.tobytes()

    def test_layout(self, tmp_path):
        g = build_grid(2, [1.0, 1.0], [2, 3])
        write_field(tmp_path / "a.ch6f", GridField(g, np.arange(6.0).reshape(2, 3)))
        buf = (tmp_path / "a.ch6f").read_bytes()
        assert buf[:16] == header(dim=2, kind=0, counts=(2, 3))
        assert np.frombuffer(buf[16:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]

    def test_no_temp_files_left(self, tmp_path, grid1d):
        write_field(tmp_path / "x.ch6f", grid1d.constant(1.0))
        write_field(tmp_path / "x.ch6f", grid1d.constant(2.0))
        assert sorted(p.name for p in tmp_path.iterdir()) == ["x.ch6f"]

    def test_wrong_type(self, tmp_path):
        with pytest.raises(TypeError):
            write_field(tmp_path / "x.ch6f", np.zeros(3))


class TestCorruption:
    @pytest.mark.parametrize("blob, msg", [
        (b"CH6", "truncated header"),
        (b"XXXX" + header()[4:] + bytes(32), "bad magic"),
        (header(version=2) + bytes(32), "unknown format version"),
        (header(dim=0, counts=()), "invalid dimension"),
        (header(dim=4, counts=(1, 1, 1, 1)) + bytes(8), "invalid dimension"),
        (header(kind=5) + bytes(32), "invalid kind"),
        (header(dim=2, counts=(4,)), "truncated header"),
        (header() + bytes(31), "truncated payload"),
        (header() + bytes(40), "trailing bytes"),
    ])
    def test_rejected(self, tmp_path, blob, msg):
        path = tmp_path / "bad.ch6f"
        path.write_bytes(blob)
        with pytest.raises(FieldFormatError, match=msg):
            read_raw(path)

    def test_kind_mismatch(self, tmp_path, grid1d):
        write_field(tmp_path / "n.ch6f", grid1d.constant(0.5))
        with pytest.raises(FieldKindError):
            read_field(tmp_path / "n.ch6f", grid1d, kind="nodal")
        assert isinstance(read_field(tmp_path / "n.ch6f", grid1d, kind="spectral"), SpectralField)

    def test_shape_mismatch(self, tmp_path, grid1d):
        write_field(tmp_path / "n.ch6f", build_grid(1, [1.0], 16).constant(0.5))
        with pytest.raises(FieldFormatError, match="do not match"):
            read_field(tmp_path / "n.ch6f", grid1d)


class TestCSV:
    def test_full_precision(self, tmp_path):
        vals = [np.pi, 1 / 3, 1e-300, -2.5e17, np.nan]
        write_csv(tmp_path / "t.csv", ["k", "x", "tag"], [(i, v, "a") for i, v in enumerate(vals)])
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["k", "x", "tag"]
        back = [float(r[1]) for r in rows[1:]]
        np.testing.assert_array_equal(back, vals)
        assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4"]

    def test_atomic_text(self, tmp_path):
        atomic_write_text(tmp_path / "sub" / "m.ini", "a = 1\n")
        assert (tmp_path / "sub" / "m.ini").read_text() == "a = 1\n"
        assert len(list((tmp_path / "sub").iterdir())) == 1
