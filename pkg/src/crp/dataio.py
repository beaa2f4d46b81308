"""Dataset ingestion (matrix CSV, PGM directories), block downsampling and
synthetic data generation.

Matrix CSV format
-----------------
Line 1 is ``l1,l2``. Every following line is ``label,e11,e12,...,e_{l1,l2}``
with the entries of one sample in row-major order. Labels are nonnegative
integers. Note that in-memory vectorization elsewhere in the package is
column-stacked; the row-major order only applies to the file.
"""
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyDatasetError, ParseError
from .stats import Dataset

__all__ = [
    "SynthSpec",
    "load_matrix_csv",
    "write_matrix_csv",
    "read_pgm",
    "write_pgm",
    "load_pgm_dir",
    "block_downsample",
    "downsample_dataset",
    "synth_dataset",
    "load_dataset",
]


def _parse_float(token, path, line):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", path, line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {token!r}", path, line)
    return value


def load_matrix_csv(path, n_classes=None):
    """Read a matrix CSV file; samples keep file order."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("missing header line", path, 1)
    header = lines[0].strip().split(",")
    try:
        l1, l2 = (int(t) for t in header)
    except ValueError:
        raise ParseError(f"malformed header {lines[0]!r}, expected 'l1,l2'", path, 1) from None
    if l1 < 1 or l2 < 1:
        raise ParseError(f"non-positive dimensions in header {lines[0]!r}", path, 1)
    width = l1 * l2 + 1
    data, labels = [], []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        tokens = text.split(",")
        if len(tokens) != width:
            raise ParseError(f"expected {width} fields, got {len(tokens)}", path, lineno)
        label = tokens[0].strip()
        if not label.isdigit():
            raise ParseError(f"label {label!r} is not a nonnegative integer", path, lineno)
        labels.append(int(label))
        data.append([_parse_float(t, path, lineno) for t in tokens[1:]])
    if not data:
        raise EmptyDatasetError(f"{path}: no samples")
    X = np.array(data, dtype=np.float64).reshape(-1, l1, l2)
    y = np.array(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return Dataset(X, y, n_classes)


def write_matrix_csv(d, path):
    """Write ``d`` in matrix CSV format with 17 significant digits."""
    path = Path(path)
    l1, l2 = d.shape
    rows = [f"{l1},{l2}"]
    for x, label in zip(d.X, d.y):
        rows.append(",".join([str(int(label))] + [format(v, ".17g") for v in x.ravel()]))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(rows) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _pgm_tokens(buf, path):
    # header tokens with '#' comments; returns tokens and offset past the
    # single whitespace byte that ends the header
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise ParseError("truncated PGM header", path)
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(buf[start:pos])
    return tokens, pos + 1


def read_pgm(path):
    """Read a binary (P5) or ASCII (P2) PGM file scaled to ``[0, 1]``."""
    path = Path(path)
    buf = path.read_bytes()
    tokens, offset = _pgm_tokens(buf, path)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"unsupported image format {magic[:2]!r} (need P2 or P5)", path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ParseError("malformed PGM header", path) from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise ParseError(f"invalid PGM header values {width}x{height} max {maxval}", path)
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = np.frombuffer(buf, dtype=dtype, count=count, offset=offset) \
            if len(buf) - offset >= count * dtype.itemsize else None
        if raw is None:
            raise ParseError("truncated PGM pixel data", path)
        pixels = raw.astype(np.float64)
    else:
        body = buf[offset:].split()
        if len(body) < count:
            raise ParseError("truncated PGM pixel data", path)
        try:
            pixels = np.array([int(t) for t in body[:count]], dtype=np.float64)
        except ValueError:
            raise ParseError("non-integer pixel value", path) from None
    if pixels.max(initial=0) > maxval:
        raise ParseError("pixel value exceeds maxval", path)
    return pixels.reshape(height, width) / maxval


def write_pgm(path, image, maxval=255, binary=True):
    """Write an array with entries in ``[0, 1]`` as PGM."""
    image = np.asarray(image, dtype=np.float64)
    pixels = np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(np.int64)
    height, width = pixels.shape
    header = f"{'P5' if binary else 'P2'}\n{width} {height}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(pixels.astype(dtype).tobytes())
        else:
            fh.write("\n".join(" ".join(str(v) for v in row) for row in pixels).encode())
            fh.write(b"\n")


def load_pgm_dir(root):
    """One subdirectory per class, labels by sorted subdirectory name; files
    within a class are read in sorted order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    classes = sorted(p for p in root.iterdir() if p.is_dir())
    images, labels, shape = [], [], None
    for label, cdir in enumerate(classes):
        for f in sorted(p for p in cdir.iterdir() if p.is_file() and not p.name.startswith(".")):
            img = read_pgm(f)
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise DimensionError(f"{f}: image is {img.shape}, expected {shape}")
            images.append(img)
            labels.append(label)
    if not images:
        raise EmptyDatasetError(f"{root}: no images found")
    return Dataset(np.stack(images), np.array(labels), len(classes))


def block_downsample(x, r1, r2):
    """Average non-overlapping ``r1 x r2`` blocks."""
    x = np.asarray(x, dtype=np.float64)
    rows, cols = x.shape
    if r1 < 1 or r2 < 1 or rows % r1 or cols % r2:
        raise DimensionError(f"{rows}x{cols} is not divisible into {r1}x{r2} blocks")
    return x.reshape(rows // r1, r1, cols // r2, r2).mean(axis=(1, 3))


def downsample_dataset(d, r1, r2):
    return d.with_data(np.stack([block_downsample(x, r1, r2) for x in d.X]))


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic matrix data: class means are unit-Frobenius-norm matrices of
    rank ``pattern_rank``; samples add i.i.d. Gaussian noise."""

    c: int
    per_class: int
    l1: int
    l2: int
    pattern_rank: int = 1
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if min(self.c, self.per_class, self.l1, self.l2, self.pattern_rank) < 1:
            raise ValueError("synthetic dataset counts must be positive")
        if self.pattern_rank > min(self.l1, self.l2):
            raise ValueError("pattern_rank exceeds min(l1, l2)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


def synth_dataset(spec):
    X = np.empty((spec.c * spec.per_class, spec.l1, spec.l2))
    for i in range(spec.c):
        rng = np.random.default_rng([int(spec.seed), i, 0])
        mean = rng.standard_normal((spec.l1, spec.pattern_rank)) @ \
            rng.standard_normal((spec.pattern_rank, spec.l2))
        mean /= np.linalg.norm(mean)
        noise_rng = np.random.default_rng([int(spec.seed), i, 1])
        noise = noise_rng.standard_normal((spec.per_class, spec.l1, spec.l2))
        X[i * spec.per_class:(i + 1) * spec.per_class] = mean + spec.noise_sigma * noise
    y = np.repeat(np.arange(spec.c), spec.per_class)
    return Dataset(X, y, spec.c)


def load_dataset(path, fmt=None):
    """Dispatch on ``fmt`` (``"csv"`` or ``"pgm"``) or on the path itself."""
    path = Path(os.fspath(path))
    if fmt is None:
        fmt = "pgm" if path.is_dir() else "csv"
    if fmt == "csv":
        return load_matrix_csv(path)
    if fmt == "pgm":
        return load_pgm_dir(path)
    raise ValueError(f"unknown dataset format {fmt!r}")
