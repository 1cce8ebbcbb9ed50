"""Multiply-connected planar domains with circular boundaries.

A domain is one outer circle minus k disjoint circular holes.  Each of the
m = k + 1 boundary components carries a sign-split local boundary condition
(n_y - i n_x) u_1 = B u_2 with B a nonzero real constant on that component;
the components with B > 0 form the distinguished set that contributes to the
topological spectral-flow prediction.

Orientation convention: every component is traversed with the domain on the
left (outer circle counterclockwise, hole circles clockwise).

Only circular geometry is supported: the flow prediction is topological, so
circles cover every (m, winding, sign) test case while keeping normals and
angle functions exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    InvalidBoundaryDataError,
    InvalidGeometryError,
    ResolutionError,
)

Vec2 = tuple[float, float]


@dataclass(frozen=True)
class BoundaryComponent:
    """One oriented boundary circle with its B data.

    kind is "outer" or "hole"; hole_index is 0 for the outer component and
    the 1-based hole index otherwise.  orientation is +1 (counterclockwise)
    for the outer circle and -1 (clockwise) for holes: the domain stays to
    the left in both cases.
    """

    id: str
    kind: str
    hole_index: int
    center: Vec2
    radius: float
    b_sign: int
    b_magnitude: float
    orientation: int

    @property
    def b_value(self) -> float:
        return self.b_sign * self.b_magnitude

    def point(self, s: float) -> np.ndarray:
        """Point at arc parameter s in [0, 1), domain-left orientation."""
        theta = 2.0 * np.pi * s * self.orientation
        return np.array(
            [
                self.center[0] + self.radius * np.cos(theta),
                self.center[1] + self.radius * np.sin(theta),
            ]
        )


def _as_b_pair(b) -> tuple[int, float]:
    """Split a signed B value (or (sign, magnitude) pair) into (sign, magnitude)."""
    if isinstance(b, tuple):
        sign, mag = int(b[0]), float(b[1])
    else:
        val = float(b)
        if val == 0.0:
            raise InvalidBoundaryDataError("B must be nonzero on every boundary component")
        sign, mag = (1 if val > 0 else -1), abs(val)
    if sign not in (-1, 1):
        raise InvalidBoundaryDataError(f"b_sign must be +1 or -1, got {sign}")
    if mag <= 0:
        raise InvalidBoundaryDataError(f"b_magnitude must be positive, got {mag}")
    return sign, mag


@dataclass(frozen=True)
class DomainSpec:
    """Outer circle, holes, and per-component B data.

    b_data is ordered [outer, hole 1, ..., hole k] as (sign, magnitude) pairs.
    Geometry invariants (holes strictly inside, pairwise disjoint with positive
    clearance) are enforced at construction.
    """

    outer_center: Vec2
    outer_radius: float
    holes: tuple[tuple[Vec2, float], ...]
    b_data: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if self.outer_radius <= 0:
            raise InvalidGeometryError(f"outer radius must be positive, got {self.outer_radius}")
        if len(self.b_data) != 1 + len(self.holes):
            raise InvalidBoundaryDataError(
                f"need B data for {1 + len(self.holes)} components, got {len(self.b_data)}"
            )
        for sign, mag in self.b_data:
            if sign not in (-1, 1) or mag <= 0:
                raise InvalidBoundaryDataError(f"bad B data ({sign}, {mag})")
        cx, cy = self.outer_center
        for idx, ((hx, hy), hr) in enumerate(self.holes, start=1):
            if hr <= 0:
                raise InvalidGeometryError(f"hole {idx} radius must be positive, got {hr}")
            d = np.hypot(hx - cx, hy - cy)
            if d + hr >= self.outer_radius:
                raise InvalidGeometryError(
                    f"hole {idx} not strictly inside the outer circle "
                    f"(|c-c0|+r = {d + hr:.6g} >= R = {self.outer_radius:.6g})"
                )
        for i in range(len(self.holes)):
            for j in range(i + 1, len(self.holes)):
                (xi, yi), ri = self.holes[i]
                (xj, yj), rj = self.holes[j]
                d = np.hypot(xi - xj, yi - yj)
                if d <= ri + rj:
                    raise InvalidGeometryError(
                        f"holes {i + 1} and {j + 1} overlap or touch "
                        f"(center distance {d:.6g} <= r_i + r_j = {ri + rj:.6g})"
                    )

    @property
    def m(self) -> int:
        """Number of boundary components (1 + number of holes)."""
        return 1 + len(self.holes)

    @property
    def hole_centers(self) -> tuple[Vec2, ...]:
        return tuple(c for c, _ in self.holes)

    def clearances(self) -> list[float]:
        """Separations the rasterizer must resolve: outer-hole gaps, hole-hole
        gaps, hole diameters, and the outer diameter."""
        out = [2.0 * self.outer_radius]
        cx, cy = self.outer_center
        for (hx, hy), hr in self.holes:
            out.append(self.outer_radius - np.hypot(hx - cx, hy - cy) - hr)
            out.append(2.0 * hr)
        for i in range(len(self.holes)):
            for j in range(i + 1, len(self.holes)):
                (xi, yi), ri = self.holes[i]
                (xj, yj), rj = self.holes[j]
                out.append(np.hypot(xi - xj, yi - yj) - ri - rj)
        return out

    def area(self) -> float:
        a = np.pi * self.outer_radius**2
        for _, hr in self.holes:
            a -= np.pi * hr**2
        return a

    def is_concentric_annulus(self, tol: float = 1e-12) -> bool:
        if len(self.holes) != 1:
            return False
        (hx, hy), _ = self.holes[0]
        cx, cy = self.outer_center
        return np.hypot(hx - cx, hy - cy) <= tol


def build_annulus(r_inner: float, r_outer: float, b_in, b_out) -> DomainSpec:
    """Concentric annulus centered at the origin.

    b_in / b_out are signed B values (sign * magnitude) or (sign, magnitude)
    pairs for the inner (hole) and outer components.
    """
    if r_inner <= 0 or r_outer <= 0 or r_inner >= r_outer:
        raise InvalidGeometryError(
            f"need 0 < r_inner < r_outer, got r_inner={r_inner}, r_outer={r_outer}"
        )
    return DomainSpec(
        outer_center=(0.0, 0.0),
        outer_radius=float(r_outer),
        holes=((((0.0, 0.0)), float(r_inner)),),
        b_data=(_as_b_pair(b_out), _as_b_pair(b_in)),
    )


def build_disk_with_holes(
    outer_center: Vec2,
    outer_radius: float,
    holes: list[tuple[Vec2, float]],
    b_values: list,
) -> DomainSpec:
    """General multiply-connected domain.  b_values ordered [outer, hole 1, ...]."""
    return DomainSpec(
        outer_center=(float(outer_center[0]), float(outer_center[1])),
        outer_radius=float(outer_radius),
        holes=tuple(((float(c[0]), float(c[1])), float(r)) for c, r in holes),
        b_data=tuple(_as_b_pair(b) for b in b_values),
    )


def boundary_components(d: DomainSpec) -> list[BoundaryComponent]:
    """All m components, outer first; the b_sign = +1 subsequence is the
    distinguished positive part of the boundary."""
    comps = [
        BoundaryComponent(
            id="outer",
            kind="outer",
            hole_index=0,
            center=d.outer_center,
            radius=d.outer_radius,
            b_sign=d.b_data[0][0],
            b_magnitude=d.b_data[0][1],
            orientation=+1,
        )
    ]
    for k, ((hx, hy), hr) in enumerate(d.holes, start=1):
        comps.append(
            BoundaryComponent(
                id=f"hole{k}",
                kind="hole",
                hole_index=k,
                center=(hx, hy),
                radius=hr,
                b_sign=d.b_data[k][0],
                b_magnitude=d.b_data[k][1],
                orientation=-1,
            )
        )
    return comps


# Region tags in a GridMask.
TAG_INTERIOR = 0
TAG_EXTERIOR = -1
# Hole k is tagged k (k >= 1).


@dataclass(frozen=True)
class GridMask:
    """Cell-center rasterization of a DomainSpec on a uniform square grid.

    tags[i, j] gives the region containing the center of cell (i, j):
    0 interior, -1 exterior, k >= 1 hole k.  Cell center (i, j) sits at
    (x0 + i*h, y0 + j*h).  The bounding box covers the outer circle plus
    margin_cells of exterior on every side.
    """

    h: float
    x0: float
    y0: float
    nx: int
    ny: int
    tags: np.ndarray = field(repr=False)
    margin_cells: int

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.x0 + self.h * np.arange(self.nx)
        ys = self.y0 + self.h * np.arange(self.ny)
        return xs, ys

    def interior_count(self) -> int:
        return int(np.count_nonzero(self.tags == TAG_INTERIOR))


def _tag_points(d: DomainSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    cx, cy = d.outer_center
    tags = np.full(X.shape, TAG_EXTERIOR, dtype=np.int8)
    inside = (X - cx) ** 2 + (Y - cy) ** 2 < d.outer_radius**2
    tags[inside] = TAG_INTERIOR
    for k, ((hx, hy), hr) in enumerate(d.holes, start=1):
        in_hole = (X - hx) ** 2 + (Y - hy) ** 2 < hr**2
        tags[in_hole] = k
    return tags


def rasterize(d: DomainSpec, h: float, margin_cells: int = 6) -> GridMask:
    """Cell-center rasterization at spacing h.

    Requires h < min(clearances)/4 so distinct regions stay separated on the
    grid; the interior must come out edge-connected.
    """
    if h <= 0:
        raise ResolutionError(f"spacing must be positive, got {h}")
    min_clear = min(d.clearances())
    if h >= min_clear / 4.0:
        raise ResolutionError(
            f"h = {h:.6g} too coarse: need h < min(clearance)/4 = {min_clear / 4.0:.6g}"
        )
    cx, cy = d.outer_center
    half = d.outer_radius + margin_cells * h
    n = int(np.ceil(2.0 * half / h))
    # Symmetric box: first cell center at cx - (n-1)/2 * h.
    x0 = cx - 0.5 * (n - 1) * h
    y0 = cy - 0.5 * (n - 1) * h
    xs = x0 + h * np.arange(n)
    ys = y0 + h * np.arange(n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    tags = _tag_points(d, X, Y)
    interior = tags == TAG_INTERIOR
    if not interior.any():
        raise ResolutionError(f"no interior cells at h = {h:.6g}")
    _, n_blobs = ndimage.label(interior)
    if n_blobs != 1:
        raise ResolutionError(
            f"interior not edge-connected at h = {h:.6g} ({n_blobs} pieces)"
        )
    for k in range(1, d.m):
        if not (tags == k).any():
            raise ResolutionError(f"hole {k} unresolved at h = {h:.6g}")
    return GridMask(h=h, x0=x0, y0=y0, nx=n, ny=n, tags=tags, margin_cells=margin_cells)


def check_admissibility(n: np.ndarray, b: float) -> float:
    """Orthogonality defect |<v, sigma(n) v>| for the boundary subspace.

    The boundary condition selects the subspace spanned by
    v = (1, (n_y - i n_x)/B) at a boundary point with unit normal n; for the
    boundary condition to define a self-adjoint restriction this subspace must
    be isotropic for the principal symbol sigma(n) = n_x sigma_x + n_y sigma_y.
    The defect vanishes identically for every unit n and nonzero real B.
    """
    n = np.asarray(n, dtype=float)
    if abs(float(np.hypot(n[0], n[1])) - 1.0) > 1e-9:
        raise InvalidGeometryError(f"normal must be a unit vector, got |n| = {np.hypot(n[0], n[1])}")
    if b == 0:
        raise InvalidBoundaryDataError("B must be nonzero")
    nx, ny = float(n[0]), float(n[1])
    v = np.array([1.0, (ny - 1j * nx) / b])
    sigma = np.array([[0.0, nx - 1j * ny], [nx + 1j * ny, 0.0]])
    return float(abs(np.vdot(v, sigma @ v)))
