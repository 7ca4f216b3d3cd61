"""File formats: labeled PLY (+sidecar alphabet), SemanticKITTI bin/label,
pose text files, and CSV/JSON reports."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import LabelAlphabet, LabeledPointCloud, RigidTransform

_PLY_FLOAT = {"float", "float32", "double", "float64"}
_PLY_INT = {"uchar": "u1", "uint8": "u1", "ushort": "u2", "uint16": "u2",
            "uint": "u4", "uint32": "u4", "int": "i4", "int32": "i4"}
_TYPE_NP = {"float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
            **_PLY_INT}


def alphabet_sidecar_path(ply_path) -> Path:
    return Path(ply_path).with_suffix(".labels")


def write_alphabet(path, alphabet: LabelAlphabet) -> None:
    Path(path).write_text("".join(f"{n}\n" for n in alphabet.names))


def read_alphabet(path) -> LabelAlphabet:
    names = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not names:
        raise ParseError(f"{path}: empty alphabet file")
    return LabelAlphabet(tuple(names))


def write_labeled_cloud(path, cloud: LabeledPointCloud, binary: bool = False) -> None:
    """PLY with float x,y,z and uint label, plus the sidecar alphabet file."""
    path = Path(path)
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uint label\n"
        "end_header\n"
    )
    if binary:
        rec = np.zeros(len(cloud), dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                                          ("label", "<u4")])
        rec["x"], rec["y"], rec["z"] = cloud.points.astype(np.float32).T
        rec["label"] = cloud.labels.astype(np.uint32)
        path.write_bytes(header.encode("ascii") + rec.tobytes())
    else:
        lines = [f"{x:.9g} {y:.9g} {z:.9g} {l}"
                 for (x, y, z), l in zip(cloud.points, cloud.labels)]
        path.write_text(header + "".join(f"{ln}\n" for ln in lines))
    write_alphabet(alphabet_sidecar_path(path), cloud.alphabet)


def _parse_ply_header(data: bytes, path):
    """Returns (format, vertex_count, properties, header_end_offset)."""
    end = data.find(b"end_header\n")
    if end < 0 or not data.startswith(b"ply"):
        raise ParseError(f"{path}: not a PLY file (missing magic or end_header)")
    header_end = end + len(b"end_header\n")
    lines = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok or tok[0] == "comment":
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"{path}:{lineno}: unsupported format {line!r}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(f"{path}:{lineno}: malformed element line {line!r}")
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                try:
                    count = int(tok[2])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad vertex count {tok[2]!r}")
        elif tok[0] == "property" and in_vertex:
            if len(tok) != 3:
                raise ParseError(f"{path}:{lineno}: malformed property line {line!r}")
            props.append((tok[1], tok[2]))
    if fmt is None or count is None:
        raise ParseError(f"{path}: header missing format or vertex element")
    names = [n for _, n in props]
    for required in ("x", "y", "z", "label"):
        if required not in names:
            raise ParseError(f"{path}: missing required property {required!r}")
    for typ, name in props:
        if name == "label" and typ not in _PLY_INT:
            raise ParseError(f"{path}: label property must be an unsigned integer type, got {typ!r}")
        if name in ("x", "y", "z") and typ not in _PLY_FLOAT:
            raise ParseError(f"{path}: coordinate property {name!r} must be float, got {typ!r}")
    return fmt, count, props, header_end


def read_labeled_cloud(path, alphabet: LabelAlphabet | None = None) -> LabeledPointCloud:
    """Parse ASCII or binary-little-endian PLY with x,y,z and ``label``.

    The alphabet comes from the sidecar file next to the PLY unless supplied.
    """
    path = Path(path)
    data = path.read_bytes()
    fmt, count, props, header_end = _parse_ply_header(data, path)
    if alphabet is None:
        sidecar = alphabet_sidecar_path(path)
        if not sidecar.exists():
            raise ParseError(f"{path}: missing sidecar alphabet file {sidecar}")
        alphabet = read_alphabet(sidecar)

    names = [n for _, n in props]
    if fmt == "ascii":
        text = data[header_end:].decode("ascii", errors="replace")
        rows = [ln for ln in text.splitlines() if ln.strip()]
        if len(rows) < count:
            raise ParseError(f"{path}: expected {count} data rows, found {len(rows)}")
        if len(rows) > count:
            raise ParseError(f"{path}: trailing garbage after row {count}")
        values = np.empty((count, len(props)))
        for i, row in enumerate(rows):
            tok = row.split()
            if len(tok) != len(props):
                raise ParseError(f"{path}: data row {i + 1}: expected "
                                 f"{len(props)} fields, got {len(tok)}")
            try:
                values[i] = [float(t) for t in tok]
            except ValueError:
                raise ParseError(f"{path}: data row {i + 1}: non-numeric field in {row!r}")
        cols = {n: values[:, j] for j, n in enumerate(names)}
    else:
        dtype = np.dtype([(n, "<" + _TYPE_NP[t]) for t, n in props])
        expected = header_end + dtype.itemsize * count
        if len(data) < expected:
            raise ParseError(f"{path}: truncated at byte {len(data)}, expected {expected}")
        if len(data) > expected:
            raise ParseError(f"{path}: trailing garbage at byte {expected}")
        rec = np.frombuffer(data, dtype=dtype, count=count, offset=header_end)
        cols = {n: rec[n] for n in names}

    labels = np.asarray(cols["label"])
    if np.any(labels != np.floor(labels)) or (len(labels) and labels.min() < 0):
        raise ParseError(f"{path}: label column must hold non-negative integers")
    labels = labels.astype(np.int64)
    if len(labels) and labels.max() >= len(alphabet):
        bad = int(np.argmax(labels >= len(alphabet)))
        raise ParseError(f"{path}: data row {bad + 1}: label id {labels[bad]} "
                         f"outside alphabet of size {len(alphabet)}")
    points = np.column_stack([cols["x"], cols["y"], cols["z"]]).astype(np.float64)
    return LabeledPointCloud(points, labels, alphabet)


def write_semantickitti_pair(bin_path, label_path, points: np.ndarray,
                             raw_labels: np.ndarray,
                             intensity: np.ndarray | None = None) -> None:
    points = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    raw_labels = np.asarray(raw_labels, dtype=np.uint32).reshape(-1)
    if len(points) != len(raw_labels):
        raise ValueError("points and labels must have equal length")
    if intensity is None:
        intensity = np.zeros(len(points), dtype=np.float32)
    quad = np.column_stack([points, np.asarray(intensity, dtype=np.float32)])
    Path(bin_path).write_bytes(quad.astype("<f4").tobytes())
    Path(label_path).write_bytes(raw_labels.astype("<u4").tobytes())


def read_label_map(path) -> dict[int, str]:
    """Lines of ``<raw-id> <name>``; unmapped ids fall back to 'unlabeled'."""
    mapping: dict[int, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 2:
            raise ParseError(f"{path}:{lineno}: expected '<raw-id> <name>', got {raw!r}")
        try:
            mapping[int(tok[0])] = tok[1]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad raw id {tok[0]!r}")
    return mapping


def read_semantickitti_pair(bin_path, label_path,
                            label_map: dict[int, str]) -> LabeledPointCloud:
    """SemanticKITTI scan: float32 (x,y,z,intensity) quadruples plus uint32
    label words whose low 16 bits are the semantic id, remapped through the
    user map. Unmapped ids become the 'unlabeled' catch-all."""
    bin_data = Path(bin_path).read_bytes()
    if len(bin_data) % 16 != 0:
        raise ParseError(f"{bin_path}: length {len(bin_data)} not divisible by 16")
    lab_data = Path(label_path).read_bytes()
    if len(lab_data) % 4 != 0:
        raise ParseError(f"{label_path}: length {len(lab_data)} not divisible by 4")
    n = len(bin_data) // 16
    if len(lab_data) // 4 != n:
        raise ParseError(f"{label_path}: {len(lab_data) // 4} labels for {n} points")
    quad = np.frombuffer(bin_data, dtype="<f4").reshape(-1, 4)
    raw = np.frombuffer(lab_data, dtype="<u4") & 0xFFFF

    names = []
    for name in label_map.values():
        if name not in names:
            names.append(name)
    if "unlabeled" not in names:
        names.append("unlabeled")
    alphabet = LabelAlphabet(tuple(names))
    unlabeled = names.index("unlabeled")
    lut = np.full(int(raw.max()) + 1 if len(raw) else 1, unlabeled, dtype=np.int64)
    for raw_id, name in label_map.items():
        if raw_id < len(lut):
            lut[raw_id] = names.index(name)
    return LabeledPointCloud(quad[:, :3].astype(np.float64), lut[raw], alphabet)


def write_transform(path, transform: RigidTransform) -> None:
    """One row-major 3x4 [R|t] transform per line (12 numbers)."""
    M = np.column_stack([transform.rotation, transform.translation])
    Path(path).write_text(" ".join(f"{v:.17g}" for v in M.reshape(-1)) + "\n")


def read_transforms(path) -> list[RigidTransform]:
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        if not raw.strip():
            continue
        tok = raw.split()
        if len(tok) != 12:
            raise ParseError(f"{path}:{lineno}: expected 12 numbers, got {len(tok)}")
        try:
            vals = np.array([float(t) for t in tok]).reshape(3, 4)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric entry")
        out.append(RigidTransform(vals[:, :3], vals[:, 3]))
    if not out:
        raise ParseError(f"{path}: no transforms found")
    return out


@dataclass
class ReportRow:
    pair_id: str
    matcher: str
    inlier_count: int
    inlier_ratio: float
    rotation_error_deg: float
    translation_error: float
    registered: bool
    time_ms: float


_CSV_COLUMNS = ("pair_id", "matcher", "IN", "IR", "RE_deg", "TE_m",
                "registered", "time_ms")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def report_to_csv(rows: list[ReportRow]) -> str:
    lines = [",".join(_CSV_COLUMNS)]
    for r in sorted(rows, key=lambda r: r.pair_id):
        lines.append(",".join(_fmt(v) for v in (
            r.pair_id, r.matcher, r.inlier_count, r.inlier_ratio,
            r.rotation_error_deg, r.translation_error, r.registered, r.time_ms)))
    return "\n".join(lines) + "\n"


def report_to_json(rows: list[ReportRow], config_echo: str | None = None) -> str:
    registered = [r for r in rows if r.registered]
    payload = {
        "pairs": [{
            "pair_id": r.pair_id, "matcher": r.matcher,
            "IN": r.inlier_count, "IR": r.inlier_ratio,
            "RE_deg": r.rotation_error_deg, "TE_m": r.translation_error,
            "registered": r.registered, "time_ms": r.time_ms,
        } for r in sorted(rows, key=lambda r: r.pair_id)],
        "aggregates": {
            "registration_recall": len(registered) / len(rows) if rows else 0.0,
            "mean_re_deg": float(np.mean([r.rotation_error_deg for r in registered]))
            if registered else None,
            "mean_te_m": float(np.mean([r.translation_error for r in registered]))
            if registered else None,
        },
    }
    if config_echo is not None:
        payload["config"] = config_echo
    return json.dumps(payload, indent=2) + "\n"
