"""CSV, Matrix Market and report file handling shared by the CLI."""

from __future__ import annotations

import csv
import hashlib
import json
import warnings

import numpy as np

from .distributions import DiscreteDistribution, MomentVector, PLAIN


class CsvFormatError(ValueError):
    """A malformed row; carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def _float_repr(value):
    return "%.17g" % value


def save_distribution_csv(dist, path):
    """Header x,weight (or x1,x2[,x3],weight); 17-digit decimal floats."""
    d = dist.d
    header = ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]
    header.append("weight")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        support = dist.support if d > 1 else dist.support[:, None]
        for row, weight in zip(support, dist.weights):
            writer.writerow([_float_repr(v) for v in row] + [_float_repr(weight)])


def load_distribution_csv(path):
    """Inverse of save_distribution_csv; renormalizes with a warning when
    the weights sum more than 1e-6 away from 1."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(path, 1, "empty file")
        expected = {1: ["x", "weight"], 2: ["x1", "x2", "weight"], 3: ["x1", "x2", "x3", "weight"]}
        header = [h.strip() for h in header]
        d = len(header) - 1
        if expected.get(d) != header:
            raise CsvFormatError(path, 1, f"unexpected header {header!r}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise CsvFormatError(path, line_no, "wrong number of fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise CsvFormatError(path, line_no, "non-numeric field")
    if not rows:
        raise CsvFormatError(path, 2, "no data rows")
    data = np.asarray(rows)
    support = data[:, 0] if d == 1 else data[:, :d]
    weights = data[:, -1]
    total = weights.sum()
    if abs(total - 1.0) > 1e-6:
        warnings.warn(f"{path}: weights sum to {total:.9g}; renormalizing")
    if total <= 0:
        raise CsvFormatError(path, 2, "weights sum to zero")
    return DiscreteDistribution(support, weights / total)


def load_dataset_csv(path):
    """Rows of one value per dimension; an optional non-numeric first row is
    treated as a header."""
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row or all(not field.strip() for field in row):
                continue
            try:
                values = [float(v) for v in row]
            except ValueError:
                if line_no == 1:
                    continue  # header
                raise CsvFormatError(path, line_no, "non-numeric field")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CsvFormatError(path, line_no, "inconsistent row width")
            rows.append(values)
    if not rows:
        raise CsvFormatError(path, 1, "no data rows")
    data = np.asarray(rows)
    return data[:, 0] if data.shape[1] == 1 else data


def save_moments_csv(moments, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "m"])
        for j, value in enumerate(moments.values, start=1):
            writer.writerow([j, _float_repr(value)])


def load_moments_csv(path):
    """Header j,m with contiguous indices 1..k; plain convention."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(path, 1, "empty file")
        if header != ["j", "m"]:
            raise CsvFormatError(path, 1, f"unexpected header {header!r}")
        pairs = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise CsvFormatError(path, line_no, "wrong number of fields")
            try:
                pairs.append((int(row[0]), float(row[1])))
            except ValueError:
                raise CsvFormatError(path, line_no, "non-numeric field")
    if not pairs:
        raise CsvFormatError(path, 2, "no data rows")
    indices = [j for j, _ in pairs]
    if indices != list(range(1, len(pairs) + 1)):
        raise ValueError(f"{path}: moment indices must be contiguous from 1")
    return MomentVector(np.array([m for _, m in pairs]), PLAIN)


def load_matrix(path):
    """Dense symmetric matrix from Matrix Market (.mtx, `symmetric`
    qualifier honored) or a dense CSV of rows."""
    text = str(path)
    if text.endswith(".mtx"):
        import scipy.io

        mat = scipy.io.mmread(text)
        dense = np.asarray(mat.todense() if hasattr(mat, "todense") else mat, dtype=float)
    else:
        rows = []
        with open(text, newline="") as fh:
            reader = csv.reader(fh)
            for line_no, row in enumerate(reader, start=1):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise CsvFormatError(text, line_no, "non-numeric field")
        dense = np.asarray(rows)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise ValueError(f"{path}: matrix is not square")
    return dense


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json_report(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
