import json

import numpy as np
import pytest

from semreg.errors import ParseError
from semreg.fileio import (
    ReportRow,
    read_label_map,
    read_labeled_cloud,
    read_semantickitti_pair,
    read_transforms,
    report_to_csv,
    report_to_json,
    write_labeled_cloud,
    write_semantickitti_pair,
    write_transform,
)
from semreg.geometry import (LabelAlphabet, LabeledPointCloud, RigidTransform,
                             random_rigid_transform)


@pytest.fixture
def small_cloud():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-5, 5, size=(20, 3)).astype(np.float32).astype(np.float64)
    labels = rng.integers(0, 3, size=20)
    return LabeledPointCloud(pts, labels, LabelAlphabet(("ground", "pole", "car")))


class TestPlyRoundTrip:
    @pytest.mark.parametrize("binary", [False, True])
    def test_byte_stable(self, tmp_path, small_cloud, binary):
        p1 = tmp_path / "a.ply"
        p2 = tmp_path / "b.ply"
        write_labeled_cloud(p1, small_cloud, binary=binary)
        again = read_labeled_cloud(p1)
        write_labeled_cloud(p2, again, binary=binary)
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "a.labels").read_bytes() == (tmp_path / "b.labels").read_bytes()
        assert np.array_equal(again.labels, small_cloud.labels)
        assert again.alphabet == small_cloud.alphabet

    def test_binary_preserves_exact_coordinates(self, tmp_path, small_cloud):
        p = tmp_path / "a.ply"
        write_labeled_cloud(p, small_cloud, binary=True)
        # float32-valued input survives the f4 encoding bit for bit
        assert np.array_equal(read_labeled_cloud(p).points, small_cloud.points)

    def test_missing_sidecar(self, tmp_path, small_cloud):
        p = tmp_path / "a.ply"
        write_labeled_cloud(p, small_cloud)
        (tmp_path / "a.labels").unlink()
        with pytest.raises(ParseError, match="sidecar"):
            read_labeled_cloud(p)

    def test_explicit_alphabet_overrides_sidecar(self, tmp_path, small_cloud):
        p = tmp_path / "a.ply"
        write_labeled_cloud(p, small_cloud)
        (tmp_path / "a.labels").unlink()
        out = read_labeled_cloud(p, alphabet=small_cloud.alphabet)
        assert np.array_equal(out.labels, small_cloud.labels)


class TestPlyErrors:
    def _write(self, tmp_path, text):
        p = tmp_path / "bad.ply"
        p.write_text(text)
        (tmp_path / "bad.labels").write_text("a\nb\n")
        return p

    def test_not_a_ply(self, tmp_path):
        p = self._write(tmp_path, "hello world\n")
        with pytest.raises(ParseError, match="missing magic"):
            read_labeled_cloud(p)

    def test_missing_label_property(self, tmp_path):
        p = self._write(tmp_path, "ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\nproperty float z\n"
                        "end_header\n0 0 0\n")
        with pytest.raises(ParseError, match="label"):
            read_labeled_cloud(p)

    def test_trailing_garbage_ascii(self, tmp_path):
        p = self._write(tmp_path, "ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\nproperty float z\n"
                        "property uint label\nend_header\n0 0 0 1\n0 0 0 1\n")
        with pytest.raises(ParseError, match="trailing garbage"):
            read_labeled_cloud(p)

    def test_truncated_binary(self, tmp_path, small_cloud):
        p = tmp_path / "a.ply"
        write_labeled_cloud(p, small_cloud, binary=True)
        data = p.read_bytes()
        p.write_bytes(data[:-4])
        with pytest.raises(ParseError, match="truncated at byte"):
            read_labeled_cloud(p)

    def test_label_outside_alphabet(self, tmp_path):
        p = self._write(tmp_path, "ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\nproperty float z\n"
                        "property uint label\nend_header\n0 0 0 9\n")
        with pytest.raises(ParseError, match="outside alphabet"):
            read_labeled_cloud(p)

    def test_non_numeric_row(self, tmp_path):
        p = self._write(tmp_path, "ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\nproperty float z\n"
                        "property uint label\nend_header\nx y z w\n")
        with pytest.raises(ParseError, match="non-numeric"):
            read_labeled_cloud(p)


class TestSemanticKitti:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(30, 3)).astype(np.float32)
        raw = rng.choice([40, 50, 80], size=30).astype(np.uint32)
        bin_p, lab_p = tmp_path / "s.bin", tmp_path / "s.label"
        write_semantickitti_pair(bin_p, lab_p, pts, raw)
        (tmp_path / "map.txt").write_text("40 ground\n50 building\n80 pole\n")
        label_map = read_label_map(tmp_path / "map.txt")
        cloud = read_semantickitti_pair(bin_p, lab_p, label_map)
        assert np.array_equal(cloud.points, pts.astype(np.float64))
        names = [cloud.alphabet.names[l] for l in cloud.labels]
        expected = [label_map[r] for r in raw.tolist()]
        assert names == expected

    def test_unmapped_goes_to_unlabeled(self, tmp_path):
        pts = np.zeros((2, 3), dtype=np.float32)
        raw = np.array([40, 999], dtype=np.uint32)
        write_semantickitti_pair(tmp_path / "s.bin", tmp_path / "s.label", pts, raw)
        cloud = read_semantickitti_pair(tmp_path / "s.bin", tmp_path / "s.label",
                                        {40: "ground"})
        assert cloud.alphabet.names[cloud.labels[1]] == "unlabeled"

    def test_byte_stable_rewrite(self, tmp_path):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(10, 3)).astype(np.float32)
        raw = np.full(10, 40, dtype=np.uint32)
        write_semantickitti_pair(tmp_path / "a.bin", tmp_path / "a.label", pts, raw)
        cloud = read_semantickitti_pair(tmp_path / "a.bin", tmp_path / "a.label",
                                        {40: "ground"})
        write_semantickitti_pair(tmp_path / "b.bin", tmp_path / "b.label",
                                 cloud.points, raw)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert (tmp_path / "a.label").read_bytes() == (tmp_path / "b.label").read_bytes()

    def test_length_mismatch(self, tmp_path):
        write_semantickitti_pair(tmp_path / "s.bin", tmp_path / "s.label",
                                 np.zeros((3, 3), dtype=np.float32),
                                 np.zeros(3, dtype=np.uint32))
        (tmp_path / "s.label").write_bytes(b"\x00" * 8)
        with pytest.raises(ParseError, match="labels for"):
            read_semantickitti_pair(tmp_path / "s.bin", tmp_path / "s.label", {})

    def test_bad_label_map_line(self, tmp_path):
        (tmp_path / "map.txt").write_text("40 ground extra\n")
        with pytest.raises(ParseError):
            read_label_map(tmp_path / "map.txt")


class TestTransforms:
    def test_round_trip_exact(self, tmp_path):
        T = random_rigid_transform(np.random.default_rng(3))
        write_transform(tmp_path / "gt.txt", T)
        got = read_transforms(tmp_path / "gt.txt")
        assert len(got) == 1
        assert np.array_equal(got[0].rotation, T.rotation)
        assert np.array_equal(got[0].translation, T.translation)

    def test_wrong_field_count(self, tmp_path):
        (tmp_path / "gt.txt").write_text("1 0 0\n")
        with pytest.raises(ParseError, match="12 numbers"):
            read_transforms(tmp_path / "gt.txt")


class TestReports:
    def _rows(self):
        return [
            ReportRow("b", "nn", 10, 0.5, 1.0, 0.1, True, 12.0),
            ReportRow("a", "nn", 5, 0.25, 20.0, 2.0, False, 8.0),
        ]

    def test_csv_sorted_and_deterministic(self):
        text = report_to_csv(self._rows())
        lines = text.splitlines()
        assert lines[0] == "pair_id,matcher,IN,IR,RE_deg,TE_m,registered,time_ms"
        assert lines[1].startswith("a,") and lines[2].startswith("b,")
        assert text == report_to_csv(self._rows())

    def test_json_aggregates(self):
        payload = json.loads(report_to_json(self._rows()))
        agg = payload["aggregates"]
        assert agg["registration_recall"] == pytest.approx(0.5)
        assert agg["mean_re_deg"] == pytest.approx(1.0)
        assert payload["pairs"][0]["pair_id"] == "a"

    def test_json_empty_aggregates(self):
        payload = json.loads(report_to_json([]))
        assert payload["aggregates"]["mean_re_deg"] is None
