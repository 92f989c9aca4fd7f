"""Landmark-based face alignment: similarity transforms, warping, occlusion.

The canonical 5-point template (left eye, right eye, nose tip, left mouth
corner, right mouth corner) is defined for 112x112 chips and scaled linearly
per axis for other chip sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEGENERATE_SPREAD = 1e-6

# Canonical frontal landmark positions for a 112x112 chip.
BASE_TEMPLATE_SIZE = (112, 112)
BASE_TEMPLATE_POINTS = (
    (38.30, 51.69),
    (73.53, 51.50),
    (56.03, 71.74),
    (41.55, 92.37),
    (70.73, 92.20),
)


class GeometryError(ValueError):
    """Landmark configuration admits no usable transform."""


@dataclass(frozen=True)
class Landmarks5:
    """Five facial points: left eye, right eye, nose, left mouth, right mouth."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) != 5:
            raise GeometryError(f"expected 5 landmarks, got {len(self.points)}")
        if not all(math.isfinite(c) for p in self.points for c in p):
            raise GeometryError("landmarks must be finite")

    @classmethod
    def from_array(cls, arr) -> "Landmarks5":
        return cls(tuple((float(x), float(y)) for x, y in arr))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)

    @property
    def left_eye(self) -> tuple[float, float]:
        return self.points[0]

    @property
    def right_eye(self) -> tuple[float, float]:
        return self.points[1]

    @property
    def nose(self) -> tuple[float, float]:
        return self.points[2]


@dataclass(frozen=True)
class SimilarityTransform:
    """2-D scale + rotation + translation, reflection excluded."""

    scale: float
    rotation: float
    translation: tuple[float, float]

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise GeometryError(f"scale must be positive, got {self.scale}")

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, 0.0, (0.0, 0.0))

    def as_matrix(self) -> np.ndarray:
        c = self.scale * math.cos(self.rotation)
        s = self.scale * math.sin(self.rotation)
        return np.array(
            [[c, -s, self.translation[0]], [s, c, self.translation[1]]],
            dtype=np.float64,
        )

    @classmethod
    def from_matrix(cls, matrix) -> "SimilarityTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise GeometryError(f"expected 2x3 matrix, got {m.shape}")
        a = m[:, :2]
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if det <= 0:
            raise GeometryError("matrix is not an orientation-preserving similarity")
        scale = math.sqrt(det)
        rotation = math.atan2(a[1, 0], a[0, 0])
        return cls(scale, rotation, (float(m[0, 2]), float(m[1, 2])))

    def apply(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        m = self.as_matrix()
        return pts @ m[:, :2].T + m[:, 2]

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        c = inv_scale * math.cos(-self.rotation)
        s = inv_scale * math.sin(-self.rotation)
        tx, ty = self.translation
        return SimilarityTransform(
            inv_scale, -self.rotation, (-(c * tx - s * ty), -(s * tx + c * ty))
        )


@dataclass(frozen=True)
class AlignmentTemplate:
    """Canonical landmark coordinates for a chip of the given size."""

    width: int
    height: int
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) != 5:
            raise GeometryError(f"template needs 5 points, got {len(self.points)}")
        for x, y in self.points:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise GeometryError(f"template point ({x}, {y}) outside chip")
        if not self.points[0][0] < self.points[1][0]:
            raise GeometryError("left eye must be left of right eye")

    @classmethod
    def standard(cls, width: int = 112, height: int = 112) -> "AlignmentTemplate":
        base_w, base_h = BASE_TEMPLATE_SIZE
        sx, sy = width / base_w, height / base_h
        return cls(
            width, height, tuple((x * sx, y * sy) for x, y in BASE_TEMPLATE_POINTS)
        )

    def scaled_to(self, width: int, height: int) -> "AlignmentTemplate":
        sx, sy = width / self.width, height / self.height
        return AlignmentTemplate(
            width, height, tuple((x * sx, y * sy) for x, y in self.points)
        )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)


def load_template(path: Path | str) -> AlignmentTemplate:
    """Template override hook: JSON {"width", "height", "points": [[x,y]x5]}."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return AlignmentTemplate(
        int(obj["width"]),
        int(obj["height"]),
        tuple((float(x), float(y)) for x, y in obj["points"]),
    )


@dataclass(frozen=True)
class ChipProvenance:
    frame_id: str
    detection_index: int
    transform: SimilarityTransform


@dataclass(frozen=True)
class FaceChip:
    pixels: np.ndarray  # HxWx3 uint8
    provenance: ChipProvenance | None = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def estimate_similarity(
    src: Landmarks5, template: AlignmentTemplate
) -> SimilarityTransform:
    """Least-squares similarity mapping the source landmarks onto the template.

    Closed-form Umeyama solution: the returned transform globally minimizes
    sum_i ||s R p_i + t - q_i||^2 over the similarity class, with the
    rotation forced orientation-preserving (no reflection).
    """
    p = src.as_array()
    q = template.as_array()
    mu_p = p.mean(axis=0)
    if np.max(np.linalg.norm(p - mu_p, axis=1)) < DEGENERATE_SPREAD:
        raise GeometryError("landmarks collapse to a single point")

    mu_q = q.mean(axis=0)
    pc = p - mu_p
    qc = q - mu_q
    var_p = (pc**2).sum() / len(p)
    cov = qc.T @ pc / len(p)
    u, d, vt = np.linalg.svd(cov)
    sign = np.ones(2)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[1] = -1.0
    rot = u @ np.diag(sign) @ vt
    scale = float((d * sign).sum() / var_p)
    if scale <= 0:
        raise GeometryError("degenerate landmark configuration (non-positive scale)")
    trans = mu_q - scale * (rot @ mu_p)
    return SimilarityTransform(
        scale, math.atan2(rot[1, 0], rot[0, 0]), (float(trans[0]), float(trans[1]))
    )


def estimate_similarity_eyes(
    left_eye: tuple[float, float],
    right_eye: tuple[float, float],
    template: AlignmentTemplate,
) -> SimilarityTransform:
    """Exact similarity taking the two eye points onto the template eye points.

    Two correspondences pin down all four parameters; the eye points are
    interpolated, not regressed.
    """
    p1 = complex(*left_eye)
    p2 = complex(*right_eye)
    if abs(p2 - p1) <= DEGENERATE_SPREAD:
        raise GeometryError("eye points coincide")
    q1 = complex(*template.points[0])
    q2 = complex(*template.points[1])
    a = (q2 - q1) / (p2 - p1)
    b = q1 - a * p1
    return SimilarityTransform(abs(a), math.atan2(a.imag, a.real), (b.real, b.imag))


def residual(
    transform: SimilarityTransform, src: Landmarks5, template: AlignmentTemplate
) -> float:
    """Sum of squared distances between mapped source points and the template."""
    mapped = transform.apply(src.as_array())
    return float(((mapped - template.as_array()) ** 2).sum())


def warp_crop(
    image: np.ndarray,
    transform: SimilarityTransform,
    out_size: tuple[int, int],
    *,
    provenance: ChipProvenance | None = None,
) -> FaceChip:
    """Warp the source image into a chip of out_size (width, height).

    Output pixel (x, y) is sampled from the source at transform^-1 (x, y)
    with bilinear interpolation; samples outside the source are black.
    """
    out_w, out_h = out_size
    if out_w <= 0 or out_h <= 0:
        raise ValueError(f"output size must be positive, got {out_size}")
    src = np.asarray(image)
    if src.ndim != 3 or src.shape[2] != 3:
        raise ValueError(f"expected HxWx3 image, got shape {src.shape}")
    h, w = src.shape[:2]

    inv = transform.inverse().as_matrix()
    xs, ys = np.meshgrid(
        np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64)
    )
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    def gather(xi, yi):
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        values = np.zeros((out_h, out_w, 3), dtype=np.float64)
        values[inside] = src[yi[inside], xi[inside]].astype(np.float64)
        return values

    p00 = gather(x0, y0)
    p01 = gather(x0 + 1, y0)
    p10 = gather(x0, y0 + 1)
    p11 = gather(x0 + 1, y0 + 1)

    fx3 = fx[..., None]
    fy3 = fy[..., None]
    top = (1.0 - fx3) * p00 + fx3 * p01
    bottom = (1.0 - fx3) * p10 + fx3 * p11
    blended = (1.0 - fy3) * top + fy3 * bottom
    pixels = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return FaceChip(pixels=pixels, provenance=provenance)


def mask_upper_half(
    chip: FaceChip, nose_y: int, mode: str, seed: int
) -> FaceChip:
    """Replace chip rows above nose_y with noise or zeros.

    Rows [0, nose_y) are overwritten; rows at and below nose_y are untouched.
    Noise is per-pixel per-channel uniform over [0, 255] from a generator
    seeded with `seed`, so identical inputs give identical outputs.
    """
    height, width = chip.pixels.shape[:2]
    if not 0 <= nose_y <= height:
        raise ValueError(f"nose_y {nose_y} outside [0, {height}]")
    if mode not in ("noise", "zeros"):
        raise ValueError(f"mode must be 'noise' or 'zeros', got {mode!r}")
    pixels = chip.pixels.copy()
    if mode == "zeros":
        pixels[:nose_y] = 0
    else:
        rng = np.random.default_rng(seed)
        pixels[:nose_y] = rng.integers(0, 256, size=(nose_y, width, 3), dtype=np.uint8)
    return FaceChip(pixels=pixels, provenance=chip.provenance)
