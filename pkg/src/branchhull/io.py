"""File formats: problem/solution containers, PGM images, manifests, CSV."""

from __future__ import annotations

import csv
import json
import re

import numpy as np

from .model import BilinearProblem, GroundTruth

__all__ = [
    "save_arrays",
    "load_arrays",
    "save_problem",
    "load_problem",
    "read_pgm",
    "write_pgm",
    "write_manifest",
    "read_manifest",
    "write_csv",
]

FORMAT_TAG = "branchhull-container-1"


def save_arrays(path, header, **arrays):
    """Write named little-endian float64 arrays plus a JSON text header.

    The container is an uncompressed ``.npz``; the header is stored as the
    UTF-8 bytes of a JSON document under the key ``header`` so it can be
    read without unpickling.
    """
    header = dict(header, format=FORMAT_TAG)
    payload = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in arrays.items()}
    payload["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_arrays(path):
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != FORMAT_TAG:
            raise ValueError(f"{path}: not a {FORMAT_TAG} file")
        arrays = {k: data[k] for k in data.files if k != "header"}
    return header, arrays


def save_problem(path, problem, truth=None, header=None):
    header = dict(header or {})
    header.update(kind="problem", L=problem.L, K=problem.K, N=problem.N)
    B = problem.B.toarray() if hasattr(problem.B, "toarray") else problem.B
    C = problem.C.toarray() if hasattr(problem.C, "toarray") else problem.C
    arrays = dict(B=B, C=C, y=problem.y, s=problem.s, t=problem.t)
    if truth is not None:
        header.update(S1=int(truth.S1), S2=int(truth.S2))
        arrays.update(h_nat=truth.h_nat, m_nat=truth.m_nat, xi=truth.xi)
    save_arrays(path, header, **arrays)


def load_problem(path):
    """Return ``(problem, truth_or_None, header)``."""
    header, a = load_arrays(path)
    if header.get("kind") != "problem":
        raise ValueError(f"{path}: not a problem file")
    problem = BilinearProblem(a["B"], a["C"], a["y"], a["s"], a["t"])
    truth = None
    if "h_nat" in a:
        truth = GroundTruth(a["h_nat"], a["m_nat"], a["xi"], header["S1"], header["S2"], one_sided=False)
    return problem, truth, header


def _pgm_tokens(data, count, pos):
    out = []
    while len(out) < count:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)").match(data, pos)
        if m is None:
            raise ValueError("truncated PGM header")
        out.append(m.group(2))
        pos = m.end()
    return out, pos


def read_pgm(path):
    """Read a P2 or P5 PGM file; returns ``(image, maxval)`` with image as int array."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: unsupported image format (need PGM P2/P5)")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        n = w * h * np.dtype(dtype).itemsize
        raw = data[pos:pos + n]
        if len(raw) != n:
            raise ValueError(f"{path}: truncated pixel data")
        img = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    else:
        vals = data[pos:].split()
        if len(vals) < w * h:
            raise ValueError(f"{path}: truncated pixel data")
        img = np.array([int(v) for v in vals[:w * h]], dtype=np.int64)
    return img.reshape(h, w), maxval


def write_pgm(path, image, maxval=255, binary=True):
    image = np.asarray(image)
    h, w = image.shape
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
            fh.write(image.astype(dtype).tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(f"P2\n{w} {h}\n{maxval}\n")
            for row in image:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_manifest(path, entries):
    """Flat ``key = value`` text document, keys in insertion order."""
    with open(path, "w") as fh:
        for k, v in entries.items():
            fh.write(f"{k} = {_fmt(v)}\n")


def read_manifest(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition(" = ")
            out[k] = v
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)
