"""File format tests: the byte layout of DTF v1 is normative."""

import json
import struct

import numpy as np
import pytest

from stpca.dtf import read_dataset, read_dtf, write_dataset, write_dtf
from stpca.synthdata import ArraySignalSpec, OrbitSpec, gen_array_signal, gen_orbit
from stpca.tensor import DenseTensor


class TestDtfBytes:
    def test_header_line_golden(self, tmp_path):
        t = DenseTensor(np.zeros((2, 3)))
        path = tmp_path / "t.dtf"
        write_dtf(path, t)
        header = path.read_bytes().split(b"\n", 1)[0]
        assert header == b'{"order": 2, "shape": [2, 3], "dtype": "c128", "layout": "mode1-fastest"}'

    def test_payload_little_endian_interleaved_mode1_fastest(self, tmp_path):
        # independent byte-level check: parse with struct, compare elements
        arr = np.array([[1 + 2j, 3 + 4j, 5 + 6j],
                        [7 + 8j, 9 + 10j, 11 + 12j]])
        path = tmp_path / "t.dtf"
        write_dtf(path, DenseTensor(arr))
        raw = path.read_bytes()
        payload = raw.split(b"\n", 1)[1]
        assert len(payload) == 6 * 16
        values = struct.unpack("<12d", payload)
        # mode-1-fastest: (0,0), (1,0), (0,1), (1,1), (0,2), (1,2)
        expected = [1, 2, 7, 8, 3, 4, 9, 10, 5, 6, 11, 12]
        assert list(values) == expected

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        t = DenseTensor(rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5)))
        path = tmp_path / "t.dtf"
        write_dtf(path, t)
        back = read_dtf(path)
        np.testing.assert_array_equal(back.data, t.data)

    def test_truncated_payload_rejected(self, tmp_path):
        t = DenseTensor(np.zeros((2, 2)))
        path = tmp_path / "t.dtf"
        write_dtf(path, t)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_dtf(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "t.dtf"
        path.write_bytes(b'{"order": 1, "shape": [1]}\n' + b"\x00" * 16)
        with pytest.raises(ValueError, match="missing key"):
            read_dtf(path)


class TestDatasetSerialization:
    def test_sidecar_schema(self, tmp_path):
        ds = gen_orbit(OrbitSpec(ambient_dim=3, seed=3))
        _, side_path = write_dataset(tmp_path / "orb", ds)
        side = json.loads(side_path.read_text())
        assert set(side) == {"labels", "true_features", "scenario", "spec", "seed"}
        assert side["scenario"] == "slice-wise"
        assert side["seed"] == 3
        assert side["true_features"] == [0, 1, 2]

    def test_round_trip_dataset(self, tmp_path):
        ds = gen_array_signal(ArraySignalSpec(case=2, error_pattern="random", seed=4))
        write_dataset(tmp_path / "arr", ds)
        back = read_dataset(tmp_path / "arr")
        np.testing.assert_array_equal(back.tensor.data, ds.tensor.data)
        np.testing.assert_array_equal(back.labels, ds.labels)
        np.testing.assert_array_equal(back.true_features, ds.true_features)
        assert back.scenario == ds.scenario

    def test_rewrite_is_byte_identical(self, tmp_path):
        ds = gen_orbit(OrbitSpec(ambient_dim=4, seed=5))
        p1, s1 = write_dataset(tmp_path / "a", ds)
        blob1 = p1.read_bytes() + s1.read_bytes()
        ds2 = gen_orbit(OrbitSpec(ambient_dim=4, seed=5))
        p2, s2 = write_dataset(tmp_path / "b", ds2)
        blob2 = p2.read_bytes() + s2.read_bytes()
        assert blob1 == blob2
