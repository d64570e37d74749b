"""Simplified tactile sensing model of one finger.

The elongated skin is charted by arclength s (0 at the base, L at the tip)
and circumferential coordinate u (0 on the centerline).  One camera sees
the whole skin through three piecewise-affine regions (proximal / middle /
distal), standing in for the real mirror optics: each region maps (s, u)
linearly into a disjoint band of the image, with exact continuity at the
region boundaries.

Frames are depth maps in mm over the image grid (no photometric shading);
contacts render as the indenter's penetration height field clipped to the
skin and the gel thickness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SKIN_LENGTH_MM = 85.0
DEFAULT_SKIN_WIDTH_MM = 22.0
DEFAULT_GEL_THICKNESS_MM = 2.0
DEFAULT_IMAGE_WIDTH = 320
DEFAULT_IMAGE_HEIGHT = 240

# image-band layout of the three regions (fractions of the usable width);
# the middle view is slightly compressed like the direct camera view between
# the two mirrored end views
_BAND_FRACTIONS = (104.0 / 304.0, 96.0 / 304.0, 104.0 / 304.0)
_X_MARGIN_FRACTION = 0.025
_Y_MARGIN_FRACTION = 1.0 / 24.0

BOUNDARY_CONTINUITY_PX = 1.0


class DomainError(ValueError):
    """Surface coordinate outside the skin, or pixel outside the image."""


@dataclass(frozen=True)
class SurfaceCoord:
    s: float
    u: float


@dataclass(frozen=True)
class SkinDimensions:
    length: float = DEFAULT_SKIN_LENGTH_MM
    width: float = DEFAULT_SKIN_WIDTH_MM
    gel_thickness: float = DEFAULT_GEL_THICKNESS_MM

    def contains(self, s: float, u: float) -> bool:
        return 0.0 <= s <= self.length and abs(u) <= self.width / 2.0


@dataclass(frozen=True)
class OpticsRegion:
    """Affine map pixel = A @ (s, u) + b over one s-interval."""

    s_min: float
    s_max: float
    a11: float
    a12: float
    a21: float
    a22: float
    bx: float
    by: float

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def apply(self, s, u):
        return (self.a11 * s + self.a12 * u + self.bx,
                self.a21 * s + self.a22 * u + self.by)

    def invert(self, x, y):
        d = self.det
        px = x - self.bx
        py = y - self.by
        return ((self.a22 * px - self.a12 * py) / d,
                (-self.a21 * px + self.a11 * py) / d)


@dataclass(frozen=True)
class OpticsMap:
    regions: tuple[OpticsRegion, ...]
    image_width: int = DEFAULT_IMAGE_WIDTH
    image_height: int = DEFAULT_IMAGE_HEIGHT
    skin: SkinDimensions = field(default_factory=SkinDimensions)

    def __post_init__(self):
        if len(self.regions) != 3:
            raise ValueError("expected exactly three optics regions")
        regs = self.regions
        if regs[0].s_min != 0.0 or not math.isclose(regs[-1].s_max, self.skin.length):
            raise ValueError("region s-intervals must span [0, skin length]")
        for a, b in zip(regs, regs[1:]):
            if not math.isclose(a.s_max, b.s_min):
                raise ValueError("region s-intervals must partition without overlap")
        for r in regs:
            if abs(r.det) < 1e-12:
                raise ValueError("optics region affine map is singular")
        # continuity: adjacent maps agree at the shared boundary
        half_w = self.skin.width / 2.0
        for a, b in zip(regs, regs[1:]):
            for u in (-half_w, 0.0, half_w):
                xa, ya = a.apply(a.s_max, u)
                xb, yb = b.apply(a.s_max, u)
                if math.hypot(xa - xb, ya - yb) > BOUNDARY_CONTINUITY_PX:
                    raise ValueError(
                        f"region maps disagree by more than "
                        f"{BOUNDARY_CONTINUITY_PX} px at s={a.s_max}"
                    )
        # coverage: a 1 mm grid over the skin must land inside the image
        for s, u, x, y in self.grid_pixels(step_mm=1.0):
            if not (0.0 <= x <= self.image_width - 1 and 0.0 <= y <= self.image_height - 1):
                raise ValueError(
                    f"skin point (s={s:.1f}, u={u:.1f}) maps outside the image"
                )

    def region_for_s(self, s: float) -> OpticsRegion:
        if not (0.0 <= s <= self.skin.length):
            raise DomainError(f"s={s} outside [0, {self.skin.length}]")
        for r in self.regions[:-1]:
            if s < r.s_max:
                return r
        return self.regions[-1]

    def region_for_pixel(self, x: float, y: float) -> OpticsRegion | None:
        for r in self.regions:
            xs = [r.apply(r.s_min, -self.skin.width / 2)[0],
                  r.apply(r.s_min, self.skin.width / 2)[0],
                  r.apply(r.s_max, -self.skin.width / 2)[0],
                  r.apply(r.s_max, self.skin.width / 2)[0]]
            if min(xs) - 1e-9 <= x <= max(xs) + 1e-9:
                return r
        return None

    def grid_pixels(self, step_mm: float = 1.0):
        skin = self.skin
        s_vals = np.arange(0.0, skin.length + step_mm / 2, step_mm)
        u_vals = np.arange(-skin.width / 2, skin.width / 2 + step_mm / 2, step_mm)
        for s in s_vals:
            r = self.region_for_s(float(s))
            for u in u_vals:
                x, y = r.apply(float(s), float(u))
                yield float(s), float(u), x, y


def surface_to_pixel(coord: SurfaceCoord, optics: OpticsMap) -> tuple[float, float]:
    skin = optics.skin
    if not skin.contains(coord.s, coord.u):
        raise DomainError(f"surface coordinate ({coord.s}, {coord.u}) off the skin")
    region = optics.region_for_s(coord.s)
    return region.apply(coord.s, coord.u)


def pixel_to_surface(x: float, y: float, optics: OpticsMap) -> SurfaceCoord:
    if not (0.0 <= x <= optics.image_width - 1 and 0.0 <= y <= optics.image_height - 1):
        raise DomainError(f"pixel ({x}, {y}) outside the image")
    region = optics.region_for_pixel(x, y)
    if region is None:
        raise DomainError(f"pixel ({x}, {y}) sees no skin")
    s, u = region.invert(x, y)
    return SurfaceCoord(s=s, u=u)


def default_optics_map(
    skin: SkinDimensions | None = None,
    image_width: int = DEFAULT_IMAGE_WIDTH,
    image_height: int = DEFAULT_IMAGE_HEIGHT,
) -> OpticsMap:
    skin = skin if skin is not None else SkinDimensions()
    w, h = float(image_width), float(image_height)
    x_margin = w * _X_MARGIN_FRACTION
    usable = w - 2.0 * x_margin
    y_margin = h * _Y_MARGIN_FRACTION
    ky = (h - 2.0 * y_margin) / skin.width
    by = h / 2.0

    regions = []
    s0 = 0.0
    x0 = x_margin
    for frac in _BAND_FRACTIONS:
        s1 = s0 + skin.length / 3.0
        band = usable * frac
        kx = band / (s1 - s0)
        regions.append(
            OpticsRegion(
                s_min=s0, s_max=s1,
                a11=kx, a12=0.0, a21=0.0, a22=ky,
                bx=x0 - kx * s0, by=by,
            )
        )
        s0 = s1
        x0 += band
    # make the final interval end exactly at the skin length
    last = regions[-1]
    regions[-1] = OpticsRegion(
        s_min=last.s_min, s_max=skin.length,
        a11=last.a11, a12=last.a12, a21=last.a21, a22=last.a22,
        bx=last.bx, by=last.by,
    )
    return OpticsMap(
        regions=tuple(regions),
        image_width=image_width,
        image_height=image_height,
        skin=skin,
    )


@dataclass(frozen=True)
class SphereIndenter:
    radius: float

    @property
    def footprint_radius_at(self):
        return lambda depth: math.sqrt(max(2.0 * self.radius * depth - depth * depth, 0.0))

    def penetration(self, ds, du, depth):
        rho_sq = ds * ds + du * du
        h = depth - self.radius + np.sqrt(np.maximum(self.radius**2 - rho_sq, 0.0))
        h = np.where(rho_sq <= self.radius**2, h, 0.0)
        return np.maximum(h, 0.0)

    @property
    def reach(self) -> float:
        return self.radius


@dataclass(frozen=True)
class HexIndenter:
    """Flat screw-head hexagon, across-flats width, one flat pair parallel
    to the s axis."""

    across_flats: float

    def penetration(self, ds, du, depth):
        half = self.across_flats / 2.0
        c30, s30 = math.cos(math.pi / 6.0), math.sin(math.pi / 6.0)
        inside = (
            (np.abs(du) <= half)
            & (np.abs(ds * c30 + du * s30) <= half)
            & (np.abs(-ds * c30 + du * s30) <= half)
        )
        return np.where(inside, depth, 0.0)

    @property
    def reach(self) -> float:
        # circumradius of the hexagon
        return self.across_flats / math.sqrt(3.0)


@dataclass
class TactileFrame:
    """Indentation depth map (mm) over the camera image grid."""

    depth: np.ndarray          # (H, W) float, >= 0, <= gel thickness
    finger: int = 1
    tick: int = 0
    clamped: bool = False

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=float)

    @property
    def is_blank(self) -> bool:
        return not bool(np.any(self.depth > 0.0))


def render_contact(
    indenter,
    center: SurfaceCoord,
    depth: float,
    optics: OpticsMap,
    finger: int = 1,
    tick: int = 0,
) -> TactileFrame:
    """Render one indenter contact to a depth frame.

    depth must be positive; depths beyond the gel thickness clamp and set
    the frame's clamped flag.
    """
    skin = optics.skin
    if not skin.contains(center.s, center.u):
        raise DomainError(f"contact center ({center.s}, {center.u}) off the skin")
    if depth <= 0.0:
        raise ValueError("contact depth must be positive")
    clamped = depth > skin.gel_thickness
    depth_eff = min(depth, skin.gel_thickness)

    h_img = optics.image_height
    w_img = optics.image_width
    frame = np.zeros((h_img, w_img))
    ys = np.arange(h_img, dtype=float)
    for region in optics.regions:
        xs_bounds = sorted(
            (region.apply(region.s_min, 0.0)[0], region.apply(region.s_max, 0.0)[0])
        )
        x_lo = max(0, math.floor(xs_bounds[0]))
        x_hi = min(w_img - 1, math.ceil(xs_bounds[1]))
        if x_hi < x_lo:
            continue
        xs = np.arange(x_lo, x_hi + 1, dtype=float)
        xg, yg = np.meshgrid(xs, ys)
        sg, ug = region.invert(xg, yg)
        on_skin = (
            (sg >= region.s_min) & (sg <= region.s_max)
            & (np.abs(ug) <= skin.width / 2.0)
            & (sg >= 0.0) & (sg <= skin.length)
        )
        h = indenter.penetration(sg - center.s, ug - center.u, depth_eff)
        h = np.where(on_skin, h, 0.0)
        patch = frame[:, x_lo:x_hi + 1]
        np.maximum(patch, np.minimum(h, skin.gel_thickness), out=patch)
    return TactileFrame(depth=frame, finger=finger, tick=tick, clamped=clamped)


@dataclass(frozen=True)
class FrameMetrics:
    contact_area_mm2: float
    centroid: SurfaceCoord | None   # None when the frame is blank
    max_depth_mm: float


def frame_metrics(frame: TactileFrame, optics: OpticsMap) -> FrameMetrics:
    """Contact area (via the inverse-map Jacobian), support centroid in
    surface coordinates, and peak depth."""
    mask = frame.depth > 0.0
    if not np.any(mask):
        return FrameMetrics(0.0, None, 0.0)
    area = 0.0
    s_sum = 0.0
    u_sum = 0.0
    count = 0
    ys, xs = np.nonzero(mask)
    for region in optics.regions:
        x_bounds = sorted(
            (region.apply(region.s_min, 0.0)[0], region.apply(region.s_max, 0.0)[0])
        )
        sel = (xs >= x_bounds[0] - 0.5) & (xs < x_bounds[1] + 0.5)
        n = int(np.count_nonzero(sel))
        if n == 0:
            continue
        pixel_area = 1.0 / abs(region.det)
        area += n * pixel_area
        sg, ug = region.invert(xs[sel].astype(float), ys[sel].astype(float))
        s_sum += float(np.sum(sg))
        u_sum += float(np.sum(ug))
        count += n
    centroid = SurfaceCoord(s=s_sum / count, u=u_sum / count)
    return FrameMetrics(
        contact_area_mm2=area,
        centroid=centroid,
        max_depth_mm=float(frame.depth.max()),
    )


# -- PGM export --------------------------------------------------------------

def pgm_bytes(frame: TactileFrame, gel_thickness: float | None = None) -> bytes:
    """16-bit P5 with the depth scale declared in a header comment."""
    gel = gel_thickness if gel_thickness is not None else DEFAULT_GEL_THICKNESS_MM
    mm_per_count = gel / 65535.0
    counts = np.clip(np.round(frame.depth / mm_per_count), 0, 65535).astype(">u2")
    h, w = counts.shape
    header = (
        f"P5\n# mm_per_count {mm_per_count:.12e}\n"
        f"# finger {frame.finger} tick {frame.tick}\n{w} {h}\n65535\n"
    )
    return header.encode("ascii") + counts.tobytes()


def write_pgm(frame: TactileFrame, path, gel_thickness: float | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(frame, gel_thickness))


def read_pgm(data: bytes) -> tuple[np.ndarray, float]:
    """Parse a frame written by pgm_bytes; returns (depth mm, mm_per_count)."""
    if not data.startswith(b"P5"):
        raise ValueError("not a P5 PGM")
    mm_per_count = None
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        if data[pos:pos + 1].isspace():
            pos += 1
            continue
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comment = data[pos + 1:end].split()
            if comment and comment[0] == b"mm_per_count":
                mm_per_count = float(comment[1])
            pos = end + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(int(data[pos:end]))
        pos = end
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != 65535:
        raise ValueError("expected 16-bit PGM")
    if mm_per_count is None:
        raise ValueError("missing mm_per_count header comment")
    counts = np.frombuffer(data, dtype=">u2", count=width * height, offset=pos)
    return counts.reshape(height, width).astype(float) * mm_per_count, mm_per_count
