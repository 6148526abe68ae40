"""Binary persistence for classifier models.

Format: magic bytes ``TMAP``, a version byte, the class count, then one
length-prefixed section per class holding its autoencoder bank. All integers
are little-endian unsigned; all floats are little-endian IEEE-754 doubles,
so a model round-trips bit-identically.
"""

from __future__ import annotations

import struct

import numpy as np

from .deep_models import CdmmaModel, ClassifierModel, WideCdmmaModel
from .mm_core import KernelParams, MembershipMappingModel

MAGIC = b"TMAP"
VERSION = 1


class ModelFormatError(ValueError):
    """The file is not a well-formed model archive."""


class ModelVersionError(ModelFormatError):
    """The archive uses a format version this reader does not support."""


def _pack_doubles(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _pack_mm(model: MembershipMappingModel) -> bytes:
    m, p = model.alpha.shape
    n = model.aux_points.shape[1]
    parts = [
        struct.pack("<III", m, n, p),
        struct.pack("<dd", model.kernel.sigma2, model.kernel.nu),
        struct.pack("<d", model.beta),
        _pack_doubles(model.kernel.w),
        _pack_doubles(model.alpha),
        _pack_doubles(model.aux_points),
    ]
    return b"".join(parts)


def _pack_cdmma(model: CdmmaModel) -> bytes:
    parts = [struct.pack("<II", model.depth, model.dim)]
    for proj, layer in zip(model.projections, model.layers):
        parts.append(struct.pack("<I", proj.shape[0]))
        parts.append(_pack_doubles(proj))
        parts.append(_pack_mm(layer))
    payload = b"".join(parts)
    return struct.pack("<Q", len(payload)) + payload


def _pack_wide(model: WideCdmmaModel) -> bytes:
    payload = struct.pack("<I", len(model.members)) + b"".join(
        _pack_cdmma(member) for member in model.members
    )
    return struct.pack("<Q", len(payload)) + payload


def save_classifier(model: ClassifierModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<I", model.num_classes))
        for wide in model.per_class:
            fh.write(_pack_wide(wide))


class _Cursor:
    def __init__(self, data: bytes, path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, count: int) -> bytes:
        end = self.offset + count
        if end > len(self.data):
            raise ModelFormatError(f"{self.path}: truncated model file")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def doubles(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(float)


def _read_mm(cur: _Cursor) -> MembershipMappingModel:
    m, n, p = cur.unpack("<III")
    sigma2, nu = cur.unpack("<dd")
    (beta,) = cur.unpack("<d")
    w = cur.doubles(n)
    alpha = cur.doubles(m * p).reshape(m, p)
    aux = cur.doubles(m * n).reshape(m, n)
    return MembershipMappingModel(
        alpha=alpha, aux_points=aux, kernel=KernelParams(sigma2, w, nu), beta=beta
    )


def _read_cdmma(cur: _Cursor) -> CdmmaModel:
    (length,) = cur.unpack("<Q")
    end = cur.offset + length
    depth, dim = cur.unpack("<II")
    layers = []
    projections = []
    for _ in range(depth):
        (n_l,) = cur.unpack("<I")
        projections.append(cur.doubles(n_l * dim).reshape(n_l, dim))
        layers.append(_read_mm(cur))
    if cur.offset != end:
        raise ModelFormatError(f"{cur.path}: autoencoder section length mismatch")
    return CdmmaModel(tuple(layers), tuple(projections))


def _read_wide(cur: _Cursor) -> WideCdmmaModel:
    (length,) = cur.unpack("<Q")
    end = cur.offset + length
    (count,) = cur.unpack("<I")
    members = tuple(_read_cdmma(cur) for _ in range(count))
    if cur.offset != end:
        raise ModelFormatError(f"{cur.path}: bank section length mismatch")
    return WideCdmmaModel(members)


def load_classifier(path) -> ClassifierModel:
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data, path)
    if cur.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError(f"{path}: not a model archive (bad magic)")
    (version,) = cur.unpack("<B")
    if version != VERSION:
        raise ModelVersionError(
            f"{path}: format version {version} unsupported (expected {VERSION})"
        )
    (num_classes,) = cur.unpack("<I")
    per_class = tuple(_read_wide(cur) for _ in range(num_classes))
    if cur.offset != len(data):
        raise ModelFormatError(f"{path}: trailing bytes after model data")
    return ClassifierModel(per_class)
