"""Shoebox room geometry and the image source method.

Synthesizes single-frequency complex pressure fields as sums of mirrored
monopoles.  Wall reflections are modeled by a single frequency-independent
amplitude coefficient derived from the reverberation time via Sabine's
formula, so each image carries a gain of beta**order where order counts the
wall bounces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_SOUND = 343.0  # m/s, air at 20 C

# Tile sizes for chunked point-x-image distance evaluation, chosen to keep
# temporaries well under 100 MB.
_POINT_CHUNK = 512
_IMAGE_CHUNK = 8192


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room with uniform walls.

    ``target_center`` locates the center of the cubic target region inside
    the room; it defaults to the room's geometric center.
    """

    dims: tuple[float, float, float]
    t60: float
    speed_of_sound: float = SPEED_OF_SOUND
    target_center: tuple[float, float, float] | None = None

    def __post_init__(self):
        d = np.asarray(self.dims, dtype=float)
        if d.shape != (3,) or not np.all(d > 0):
            raise ValueError(f"room dims must be three positive lengths, got {self.dims}")
        if not self.t60 > 0:
            raise ValueError(f"t60 must be positive, got {self.t60}")
        if not self.speed_of_sound > 0:
            raise ValueError("speed_of_sound must be positive")

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=float) / 2.0

    @property
    def region_center(self) -> np.ndarray:
        if self.target_center is None:
            return self.center
        return np.asarray(self.target_center, dtype=float)

    def region_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of the unit-cube target region."""
        c = self.region_center
        return c - 0.5, c + 0.5

    def contains(self, point: np.ndarray, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        d = np.asarray(self.dims, dtype=float)
        return bool(np.all(p >= margin) and np.all(p <= d - margin))

    def wavenumber(self, frequency_hz: float) -> float:
        if not frequency_hz > 0:
            raise ValueError(f"frequency must be positive, got {frequency_hz}")
        return 2.0 * math.pi * frequency_hz / self.speed_of_sound


@dataclass(frozen=True)
class SourceSpec:
    """Point source: position in room coordinates, complex strength."""

    position: tuple[float, float, float]
    amplitude: complex = 1.0 + 0.0j

    def pos(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class ImageSource:
    position: np.ndarray
    gain: float
    order: int


def reflection_coeff_from_t60(room: RoomSpec) -> float:
    """Uniform wall amplitude reflection coefficient via Sabine inversion.

    alpha = 24 ln(10) V / (c S T60), beta = sqrt(1 - alpha).
    """
    lx, ly, lz = (float(v) for v in room.dims)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 24.0 * math.log(10.0) * volume / (room.speed_of_sound * surface * room.t60)
    if alpha >= 1.0:
        raise ValueError(
            f"room too absorbent for Sabine inversion (alpha = {alpha:.4f} >= 1)"
        )
    return math.sqrt(1.0 - alpha)


def _axis_image_coords(coord: float, length: float, indices: np.ndarray) -> np.ndarray:
    """Mirror positions along one axis for integer mirror indices.

    Even index i: i*L + x.  Odd index i: i*L + (L - x).  |i| equals the
    number of wall bounces along this axis.
    """
    odd = indices % 2 != 0
    return indices * length + np.where(odd, length - coord, coord)


def enumerate_images(room: RoomSpec, src: SourceSpec, max_order: int) -> list[ImageSource]:
    """All image sources with total reflection order up to ``max_order``.

    Mirror indices (ix, iy, iz) range over the integer L1 ball of radius
    ``max_order``; the gain of an image is beta**(|ix|+|iy|+|iz|).
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    pos = src.pos()
    if not room.contains(pos):
        raise ValueError(f"source at {pos} lies outside the room")
    beta = reflection_coeff_from_t60(room) if max_order > 0 else 1.0

    n = max_order
    idx = np.arange(-n, n + 1)
    ax = [_axis_image_coords(pos[a], float(room.dims[a]), idx) for a in range(3)]
    images: list[ImageSource] = []
    for i, ix in enumerate(idx):
        for j, iy in enumerate(idx):
            rem = n - abs(ix) - abs(iy)
            if rem < 0:
                continue
            for l, iz in enumerate(idx):
                order = abs(ix) + abs(iy) + abs(iz)
                if order > n:
                    continue
                p = np.array([ax[0][i], ax[1][j], ax[2][l]])
                images.append(ImageSource(p, beta**order, int(order)))
    return images


def _image_arrays(images: list[ImageSource]) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([im.position for im in images], dtype=float)
    gains = np.array([im.gain for im in images], dtype=float)
    return pos, gains


def greens_sum(x: np.ndarray, images: list[ImageSource], k: float) -> np.ndarray:
    """Complex pressure of an image set at points ``x``.

    Sum over images of gain * exp(-i k r) / (4 pi r).  Accepts a single
    point of shape (3,) or a batch (N, 3); returns complex of shape () or
    (N,).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    pos, gains = _image_arrays(images)
    out = _greens_sum_arrays(pts, pos, gains, k)
    return out[0] if single else out


def _greens_sum_arrays(pts: np.ndarray, pos: np.ndarray, gains: np.ndarray,
                       k: float) -> np.ndarray:
    """Chunked evaluation of the monopole sum; O(N*J) distances."""
    n = pts.shape[0]
    out = np.zeros(n, dtype=complex)
    pts_sq = np.sum(pts**2, axis=1)
    pos_sq = np.sum(pos**2, axis=1)
    for i0 in range(0, n, _POINT_CHUNK):
        i1 = min(i0 + _POINT_CHUNK, n)
        p = pts[i0:i1]
        acc = np.zeros(i1 - i0, dtype=complex)
        for j0 in range(0, pos.shape[0], _IMAGE_CHUNK):
            j1 = min(j0 + _IMAGE_CHUNK, pos.shape[0])
            r_sq = pts_sq[i0:i1, None] + pos_sq[None, j0:j1] - 2.0 * (p @ pos[j0:j1].T)
            r = np.sqrt(np.maximum(r_sq, 0.0))
            if r.min() < 1e-9:
                raise ValueError("evaluation point coincides with a source")
            acc += (gains[None, j0:j1] / (4.0 * math.pi * r) * np.exp(-1j * k * r)).sum(axis=1)
        out[i0:i1] = acc
    return out


def synthesize_field(room: RoomSpec, sources: list[SourceSpec], points: np.ndarray,
                     frequency_hz: float, max_order: int) -> np.ndarray:
    """Total complex pressure at ``points`` from all sources and their images."""
    k = room.wavenumber(frequency_hz)
    total = np.zeros(points.shape[0], dtype=complex)
    for src in sources:
        pos, gains = _image_arrays(enumerate_images(room, src, max_order))
        total += src.amplitude * _greens_sum_arrays(points, pos, gains, k)
    return total


def random_source(room: RoomSpec, rng: np.random.Generator,
                  wall_margin: float = 0.1) -> SourceSpec:
    """Draw a unit-magnitude source inside the room but outside the target region."""
    lo, hi = room.region_bounds()
    dims = np.asarray(room.dims, dtype=float)
    for _ in range(10_000):
        p = rng.uniform(wall_margin, dims - wall_margin)
        if np.any(p < lo) or np.any(p > hi):
            phase = rng.uniform(0.0, 2.0 * math.pi)
            return SourceSpec(tuple(p), complex(math.cos(phase), math.sin(phase)))
    raise ValueError("could not place a source outside the target region")
