"""On-disk artifact formats and the domain types they carry.

Binary containers are little-endian with a four-byte magic and a u32
version. Numeric payloads are IEEE-754 float32 so that a file read back and
rewritten is byte-identical. Masks travel as 8-bit binary PGM (nonzero
pixels binarize to 1); grounding payloads and metric reports are UTF-8 JSON.

Readers validate every type invariant before returning a value; nothing
partially constructed escapes this module.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    NonBinaryMask,
    TruncatedFile,
    UnsupportedVersion,
)
from .params import IccdParams

MAGIC_GRID = b"SRFG"
MAGIC_BANK = b"SRBK"
MAGIC_COVERAGE = b"SRCV"
FORMAT_VERSION = 1

UNIT_NORM_TOL = 1e-4


def f32(x: float) -> float:
    """Round a scalar to the nearest float32 value, returned as a float."""
    return float(np.float32(x))


def _unit_norms_ok(vectors: np.ndarray) -> bool:
    norms = np.linalg.norm(vectors.astype(np.float64), axis=-1)
    return bool(np.all(np.abs(norms - 1.0) <= UNIT_NORM_TOL))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class FeatureGrid:
    """Dense grid of patch descriptors, stored row-major as (n_patches, dim).

    When ``normalized`` is set every patch vector must be unit length
    within ``UNIT_NORM_TOL``; zero vectors are rejected outright.
    """

    grid_h: int
    grid_w: int
    dim: int
    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if self.grid_h < 1 or self.grid_w < 1 or self.dim < 1:
            raise DimMismatch(
                f"grid dims must be >= 1, got {self.grid_h}x{self.grid_w}x{self.dim}"
            )
        expected = (self.grid_h * self.grid_w, self.dim)
        if self.data.shape != expected:
            raise DimMismatch(f"data shape {self.data.shape} != {expected}")
        if self.data.dtype != np.float32:
            raise DimMismatch(f"data dtype must be float32, got {self.data.dtype}")
        if not self.data.flags.c_contiguous:
            object.__setattr__(self, "data", np.ascontiguousarray(self.data))
        if self.normalized and not _unit_norms_ok(self.data):
            raise DimMismatch("normalized flag set but patch norms deviate from 1.0")

    @property
    def n_patches(self) -> int:
        return self.grid_h * self.grid_w

    def patch(self, p: int) -> np.ndarray:
        return self.data[p]


@dataclass(frozen=True)
class AnnotationMask:
    """Binary pixel mask for one class, values strictly in {0, 1}."""

    height: int
    width: int
    data: np.ndarray
    class_name: str = ""

    def __post_init__(self):
        if self.data.shape != (self.height, self.width):
            raise DimMismatch(
                f"mask shape {self.data.shape} != ({self.height}, {self.width})"
            )
        if self.data.dtype != np.uint8:
            raise DimMismatch(f"mask dtype must be uint8, got {self.data.dtype}")
        if self.data.size and int(self.data.max()) > 1:
            raise NonBinaryMask("mask values must be 0 or 1")


@dataclass(frozen=True)
class PatchCoverage:
    """Per-patch fraction of foreground pixels, aligned to a feature grid."""

    grid_h: int
    grid_w: int
    coverage: np.ndarray

    def __post_init__(self):
        if self.coverage.shape != (self.grid_h, self.grid_w):
            raise DimMismatch(
                f"coverage shape {self.coverage.shape} != ({self.grid_h}, {self.grid_w})"
            )
        if self.coverage.dtype != np.float64:
            raise DimMismatch("coverage dtype must be float64")
        if self.coverage.size and (
            float(self.coverage.min()) < 0.0 or float(self.coverage.max()) > 1.0
        ):
            raise DimMismatch("coverage values must lie in [0, 1]")


@dataclass(frozen=True)
class BankVector:
    """One retained prototype with provenance back to its source patch."""

    vector: np.ndarray
    source_image_id: str
    patch_flat_index: int
    score: float = -1.0

    def __post_init__(self):
        if self.vector.ndim != 1 or self.vector.dtype != np.float32:
            raise DimMismatch("bank vector must be a 1-D float32 array")
        if not _unit_norms_ok(self.vector[None, :]):
            raise DimMismatch("bank vector norm deviates from 1.0")
        if not -1.0 <= self.score <= 1.0:
            raise DimMismatch(f"score must lie in [-1, 1], got {self.score}")
        if self.patch_flat_index < 0:
            raise DimMismatch("patch_flat_index must be non-negative")


@dataclass(frozen=True)
class ClassBankFile:
    """Refined per-class prototype bank plus the parameters that built it."""

    class_name: str
    dim: int
    entries: tuple[BankVector, ...]
    params: IccdParams
    fallback_used: bool
    kappa_c: float

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.dim < 1:
            raise DimMismatch(f"dim must be >= 1, got {self.dim}")
        for e in self.entries:
            if e.vector.shape[0] != self.dim:
                raise DimMismatch(
                    f"entry dim {e.vector.shape[0]} != bank dim {self.dim}"
                )
        if len(self.entries) > self.params.k:
            raise DimMismatch(
                f"{len(self.entries)} entries exceed cap k={self.params.k}"
            )
        # compare at float32 resolution so disk round-trips stay valid
        lo, hi = np.float32(self.params.kappa_lo), np.float32(self.params.kappa_hi)
        if not lo <= np.float32(self.kappa_c) <= hi:
            raise DimMismatch(
                f"kappa_c={self.kappa_c} outside [{self.params.kappa_lo}, {self.params.kappa_hi}]"
            )

    def vectors(self) -> np.ndarray:
        """Stack entry vectors into an (n, dim) float32 matrix."""
        if not self.entries:
            return np.empty((0, self.dim), dtype=np.float32)
        return np.stack([e.vector for e in self.entries])


@dataclass(frozen=True)
class PayloadPoint:
    x_norm: float
    y_norm: float
    label: int
    score: float

    def __post_init__(self):
        if self.label != 1:
            raise DimMismatch(f"point labels must all be 1, got {self.label}")
        if not (0.0 <= self.x_norm <= 1.0 and 0.0 <= self.y_norm <= 1.0):
            raise DimMismatch("point coordinates must lie in [0, 1]")
        if not -1.0 <= self.score <= 1.0:
            raise DimMismatch(f"point score must lie in [-1, 1], got {self.score}")


@dataclass(frozen=True)
class GroundingPayload:
    """Joint text+point prompt bundle handed to the downstream segmenter."""

    class_name: str
    text_prompt: str
    points: tuple[PayloadPoint, ...] = field(default_factory=tuple)
    image_w: int = 0
    image_h: int = 0
    degraded_to_text_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if self.image_w < 1 or self.image_h < 1:
            raise DimMismatch("image dimensions must be positive")
        scores = [p.score for p in self.points]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise DimMismatch("points must be sorted by score descending")
        if self.degraded_to_text_only != (len(self.points) == 0):
            raise DimMismatch("degraded_to_text_only must mirror an empty point list")


# ---------------------------------------------------------------------------
# binary helpers


def _read_file(path) -> bytes:
    return Path(path).read_bytes()


def _check_header(blob: bytes, magic: bytes) -> None:
    if len(blob) < 8:
        raise TruncatedFile(f"file shorter than header ({len(blob)} bytes)")
    if blob[:4] != magic:
        raise BadMagic(f"expected magic {magic!r}, found {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported version {version}")


class _Reader:
    """Cursor over a byte blob with truncation checking."""

    def __init__(self, blob: bytes, offset: int = 0):
        self.blob = blob
        self.pos = offset

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFile(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.blob)}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def string(self) -> str:
        n = self.u32()
        return self.take(n).decode("utf-8")

    def f32_array(self, n: int) -> np.ndarray:
        raw = self.take(4 * n)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32, copy=True)

    def expect_end(self) -> None:
        if self.pos != len(self.blob):
            raise DimMismatch(
                f"{len(self.blob) - self.pos} trailing bytes after payload"
            )


def _pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


# ---------------------------------------------------------------------------
# feature grids (SRFG)


def write_feature_grid(grid: FeatureGrid, path) -> None:
    header = struct.pack(
        "<4sIIIII",
        MAGIC_GRID,
        FORMAT_VERSION,
        grid.grid_h,
        grid.grid_w,
        grid.dim,
        1 if grid.normalized else 0,
    )
    payload = np.ascontiguousarray(grid.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_feature_grid(path) -> FeatureGrid:
    blob = _read_file(path)
    _check_header(blob, MAGIC_GRID)
    r = _Reader(blob, 8)
    grid_h, grid_w, dim, flag = r.u32(), r.u32(), r.u32(), r.u32()
    if grid_h < 1 or grid_w < 1 or dim < 1:
        raise DimMismatch(f"invalid header dims {grid_h}x{grid_w}x{dim}")
    if flag not in (0, 1):
        raise DimMismatch(f"normalized flag must be 0 or 1, got {flag}")
    data = r.f32_array(grid_h * grid_w * dim).reshape(grid_h * grid_w, dim)
    r.expect_end()
    return FeatureGrid(grid_h, grid_w, dim, data, normalized=bool(flag))


# ---------------------------------------------------------------------------
# coverage grids (SRCV)


def write_coverage(cov: PatchCoverage, path) -> None:
    header = struct.pack(
        "<4sIII", MAGIC_COVERAGE, FORMAT_VERSION, cov.grid_h, cov.grid_w
    )
    payload = cov.coverage.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_coverage(path) -> PatchCoverage:
    blob = _read_file(path)
    _check_header(blob, MAGIC_COVERAGE)
    r = _Reader(blob, 8)
    grid_h, grid_w = r.u32(), r.u32()
    if grid_h < 1 or grid_w < 1:
        raise DimMismatch(f"invalid coverage dims {grid_h}x{grid_w}")
    values = r.f32_array(grid_h * grid_w).astype(np.float64).reshape(grid_h, grid_w)
    r.expect_end()
    return PatchCoverage(grid_h, grid_w, values)


# ---------------------------------------------------------------------------
# class banks (SRBK)


def write_bank(bank: ClassBankFile, path) -> None:
    p = bank.params
    parts = [
        struct.pack("<4sI", MAGIC_BANK, FORMAT_VERSION),
        _pack_string(bank.class_name),
        struct.pack("<I", bank.dim),
        struct.pack(
            "<fffIIIfff",
            p.tau_b,
            p.tau_t,
            p.xi,
            p.eta_min,
            p.n_s,
            p.k,
            p.kappa_lo,
            p.kappa_hi,
            p.scale,
        ),
        struct.pack("<Bf", 1 if bank.fallback_used else 0, bank.kappa_c),
        struct.pack("<I", len(bank.entries)),
    ]
    for e in bank.entries:
        parts.append(_pack_string(e.source_image_id))
        parts.append(struct.pack("<If", e.patch_flat_index, e.score))
        parts.append(e.vector.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_bank(path) -> ClassBankFile:
    blob = _read_file(path)
    _check_header(blob, MAGIC_BANK)
    r = _Reader(blob, 8)
    class_name = r.string()
    dim = r.u32()
    if dim < 1:
        raise DimMismatch(f"invalid bank dim {dim}")
    tau_b, tau_t, xi = r.f32(), r.f32(), r.f32()
    eta_min, n_s, k = r.u32(), r.u32(), r.u32()
    kappa_lo, kappa_hi, scale = r.f32(), r.f32(), r.f32()
    fallback_flag = r.u8()
    if fallback_flag not in (0, 1):
        raise DimMismatch(f"fallback flag must be 0 or 1, got {fallback_flag}")
    kappa_c = r.f32()
    try:
        params = IccdParams(
            tau_b=tau_b,
            tau_t=tau_t,
            xi=xi,
            eta_min=eta_min,
            n_s=n_s,
            k=k,
            kappa_lo=kappa_lo,
            kappa_hi=kappa_hi,
            scale=scale,
        )
    except ValueError as exc:
        raise DimMismatch(f"invalid stored parameters: {exc}") from exc
    n_entries = r.u32()
    entries = []
    for _ in range(n_entries):
        source = r.string()
        idx = r.u32()
        score = r.f32()
        vec = r.f32_array(dim)
        entries.append(BankVector(vec, source, idx, score))
    r.expect_end()
    return ClassBankFile(
        class_name=class_name,
        dim=dim,
        entries=tuple(entries),
        params=params,
        fallback_used=bool(fallback_flag),
        kappa_c=kappa_c,
    )


# ---------------------------------------------------------------------------
# masks (PGM)


def write_mask(mask: AnnotationMask, path) -> None:
    """Write in canonical form: P5, maxval 255, foreground stored as 255."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + (mask.data * np.uint8(255)).tobytes())


def write_gray_pgm(values: np.ndarray, path) -> None:
    """Write an 8-bit grayscale PGM (used for landscape renders)."""
    if values.dtype != np.uint8 or values.ndim != 2:
        raise DimMismatch("grayscale PGM values must be a 2-D uint8 array")
    h, w = values.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + values.tobytes())


def _parse_pgm_tokens(blob: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` ASCII integers after the magic, skipping comments."""
    tokens: list[int] = []
    pos = 2  # past "P5"
    current = b""
    while len(tokens) < count:
        if pos >= len(blob):
            raise TruncatedFile("PGM header ended before raster data")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        if ch.isspace():
            if current:
                tokens.append(int(current))
                current = b""
            pos += 1
            continue
        if not ch.isdigit():
            raise NonBinaryMask(f"unexpected byte {ch!r} in PGM header")
        current += ch
        pos += 1
    return tokens, pos


def read_mask(path, class_name: str = "") -> AnnotationMask:
    blob = _read_file(path)
    if len(blob) < 2:
        raise TruncatedFile("file too short for a PGM magic")
    if blob[:2] != b"P5":
        raise BadMagic(f"expected PGM magic b'P5', found {blob[:2]!r}")
    (width, height, maxval), pos = _parse_pgm_tokens(blob, 3)
    if width < 1 or height < 1:
        raise DimMismatch(f"invalid PGM dims {width}x{height}")
    if maxval < 1:
        raise NonBinaryMask(f"invalid PGM maxval {maxval}")
    if maxval > 255:
        raise NonBinaryMask(f"16-bit PGM (maxval {maxval}) not supported")
    n = width * height
    raster = blob[pos : pos + n]
    if len(raster) < n:
        raise TruncatedFile(f"PGM raster has {len(raster)} of {n} bytes")
    if len(blob) > pos + n:
        raise DimMismatch(f"{len(blob) - pos - n} trailing bytes after raster")
    data = (np.frombuffer(raster, dtype=np.uint8) != 0).astype(np.uint8)
    return AnnotationMask(height, width, data.reshape(height, width), class_name)


# ---------------------------------------------------------------------------
# grounding payloads (JSON)


def payload_to_dict(payload: GroundingPayload) -> dict:
    return {
        "class_name": payload.class_name,
        "text_prompt": payload.text_prompt,
        "points": [
            {
                "x_norm": f32(p.x_norm),
                "y_norm": f32(p.y_norm),
                "label": p.label,
                "score": f32(p.score),
            }
            for p in payload.points
        ],
        "image_w": payload.image_w,
        "image_h": payload.image_h,
        "degraded_to_text_only": payload.degraded_to_text_only,
    }


def write_payload(payload: GroundingPayload, path) -> str:
    """Serialize to JSON, returning the text that was written."""
    text = json.dumps(payload_to_dict(payload), indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return text


def read_payload(path) -> GroundingPayload:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BadMagic(f"payload is not valid JSON: {exc}") from exc
    try:
        points = tuple(
            PayloadPoint(p["x_norm"], p["y_norm"], p["label"], p["score"])
            for p in obj["points"]
        )
        return GroundingPayload(
            class_name=obj["class_name"],
            text_prompt=obj["text_prompt"],
            points=points,
            image_w=obj["image_w"],
            image_h=obj["image_h"],
            degraded_to_text_only=obj["degraded_to_text_only"],
        )
    except (KeyError, TypeError) as exc:
        raise DimMismatch(f"payload is missing required fields: {exc}") from exc
