"""Tactile simulator: mapping coverage, inverses, rendering, metrics, PGM."""

import math

import numpy as np
import pytest

from svelte_hand.tactile import (
    DomainError,
    FrameMetrics,
    HexIndenter,
    OpticsMap,
    OpticsRegion,
    SphereIndenter,
    SurfaceCoord,
    default_optics_map,
    frame_metrics,
    pgm_bytes,
    pixel_to_surface,
    read_pgm,
    render_contact,
    surface_to_pixel,
    write_pgm,
)


@pytest.fixture(scope="module")
def optics():
    return default_optics_map()


def test_full_skin_grid_maps_inside_image(optics):
    for s, u, x, y in optics.grid_pixels(step_mm=1.0):
        assert 0.0 <= x <= optics.image_width - 1
        assert 0.0 <= y <= optics.image_height - 1


def test_base_maps_strictly_inside(optics):
    x, y = surface_to_pixel(SurfaceCoord(0.0, 0.0), optics)
    assert 0.0 < x < optics.image_width - 1
    assert 0.0 < y < optics.image_height - 1


def test_boundary_continuity_within_one_pixel(optics):
    L = optics.skin.length
    for s_boundary in (L / 3.0, 2.0 * L / 3.0):
        left = optics.regions[0 if s_boundary == L / 3.0 else 1]
        right = optics.regions[1 if s_boundary == L / 3.0 else 2]
        for u in (-11.0, 0.0, 11.0):
            xa, ya = left.apply(s_boundary, u)
            xb, yb = right.apply(s_boundary, u)
            assert math.hypot(xa - xb, ya - yb) <= 1.0


def test_discontinuous_map_rejected():
    good = default_optics_map()
    regions = list(good.regions)
    r = regions[1]
    regions[1] = OpticsRegion(r.s_min, r.s_max, r.a11, r.a12, r.a21, r.a22,
                              r.bx + 5.0, r.by)
    with pytest.raises(ValueError, match="disagree"):
        OpticsMap(regions=tuple(regions), skin=good.skin)


def test_singular_map_rejected():
    good = default_optics_map()
    regions = list(good.regions)
    r = regions[0]
    regions[0] = OpticsRegion(r.s_min, r.s_max, 0.0, 0.0, r.a21, r.a22, r.bx, r.by)
    with pytest.raises(ValueError, match="singular"):
        OpticsMap(regions=tuple(regions), skin=good.skin)


def test_surface_pixel_round_trip_em6(optics):
    skin = optics.skin
    for s in np.arange(0.0, skin.length + 0.5, 1.0):
        for u in np.arange(-skin.width / 2, skin.width / 2 + 0.25, 1.0):
            c = SurfaceCoord(float(s), float(u))
            x, y = surface_to_pixel(c, optics)
            back = pixel_to_surface(x, y, optics)
            assert abs(back.s - c.s) <= 1e-6
            assert abs(back.u - c.u) <= 1e-6


def test_out_of_bounds_surface_rejected(optics):
    with pytest.raises(DomainError):
        surface_to_pixel(SurfaceCoord(-0.1, 0.0), optics)
    with pytest.raises(DomainError):
        surface_to_pixel(SurfaceCoord(10.0, 12.0), optics)
    with pytest.raises(DomainError):
        pixel_to_surface(-1.0, 10.0, optics)


def test_sphere_contact_area_matches_closed_form(optics):
    r, depth = 6.0, 1.5
    center = SurfaceCoord(optics.skin.length / 2.0, 0.0)
    frame = render_contact(SphereIndenter(r), center, depth, optics)
    metrics = frame_metrics(frame, optics)
    expected = math.pi * (2.0 * r * depth - depth * depth)
    assert metrics.contact_area_mm2 == pytest.approx(expected, rel=0.05)


def test_sphere_centroid_near_commanded_center(optics):
    center = SurfaceCoord(40.0, 2.0)
    frame = render_contact(SphereIndenter(5.0), center, 1.0, optics)
    metrics = frame_metrics(frame, optics)
    assert metrics.centroid is not None
    assert abs(metrics.centroid.s - center.s) < 0.5
    assert abs(metrics.centroid.u - center.u) < 0.5


def test_hex_contact_support_in_middle_region(optics):
    # M8 screw head pressed against the middle section
    center = SurfaceCoord(optics.skin.length / 2.0, 0.0)
    frame = render_contact(HexIndenter(13.0), center, 1.0, optics)
    ys, xs = np.nonzero(frame.depth)
    assert len(xs) > 0
    mid = optics.regions[1]
    x_lo = mid.apply(mid.s_min, 0.0)[0]
    x_hi = mid.apply(mid.s_max, 0.0)[0]
    assert xs.min() >= x_lo - 1 and xs.max() <= x_hi + 1
    # flat punch: uniform depth on the support
    assert np.all(frame.depth[ys, xs] == pytest.approx(1.0))
    # hexagon area = (sqrt(3)/2) * a^2
    metrics = frame_metrics(frame, optics)
    expected = math.sqrt(3.0) / 2.0 * 13.0**2
    assert metrics.contact_area_mm2 == pytest.approx(expected, rel=0.05)


def test_rendering_locality(optics):
    center = SurfaceCoord(30.0, -3.0)
    indenter = SphereIndenter(4.0)
    frame = render_contact(indenter, center, 1.0, optics)
    ys, xs = np.nonzero(frame.depth)
    for x, y in zip(xs, ys):
        c = pixel_to_surface(float(x), float(y), optics)
        dist = math.hypot(c.s - center.s, c.u - center.u)
        assert dist <= indenter.reach + 0.5


def test_depth_monotonicity(optics):
    center = SurfaceCoord(50.0, 0.0)
    f1 = render_contact(SphereIndenter(6.0), center, 0.8, optics)
    f2 = render_contact(SphereIndenter(6.0), center, 1.4, optics)
    assert np.all(f2.depth >= f1.depth - 1e-12)


def test_zero_depth_limit_rejected_but_tiny_blank(optics):
    with pytest.raises(ValueError):
        render_contact(SphereIndenter(5.0), SurfaceCoord(40.0, 0.0), 0.0, optics)
    frame = render_contact(SphereIndenter(5.0), SurfaceCoord(40.0, 0.0), 1e-9, optics)
    assert frame.depth.max() <= 1e-8


def test_excess_depth_clamps_with_flag(optics):
    frame = render_contact(SphereIndenter(6.0), SurfaceCoord(40.0, 0.0), 5.0, optics)
    assert frame.clamped
    assert frame.depth.max() <= optics.skin.gel_thickness + 1e-12


def test_off_skin_center_rejected(optics):
    with pytest.raises(DomainError):
        render_contact(SphereIndenter(5.0), SurfaceCoord(200.0, 0.0), 1.0, optics)


def test_blank_frame_metrics(optics):
    from svelte_hand.tactile import TactileFrame

    frame = TactileFrame(depth=np.zeros((optics.image_height, optics.image_width)))
    metrics = frame_metrics(frame, optics)
    assert metrics == FrameMetrics(0.0, None, 0.0)


def test_single_pixel_max_depth(optics):
    from svelte_hand.tactile import TactileFrame

    depth = np.zeros((optics.image_height, optics.image_width))
    depth[100, 150] = 0.7
    metrics = frame_metrics(TactileFrame(depth=depth), optics)
    assert metrics.max_depth_mm == pytest.approx(0.7)


def test_pgm_round_trip(tmp_path, optics):
    frame = render_contact(SphereIndenter(6.0), SurfaceCoord(42.0, 1.0), 1.2, optics)
    data = pgm_bytes(frame, optics.skin.gel_thickness)
    assert data.startswith(b"P5\n# mm_per_count ")
    depth, mm_per_count = read_pgm(data)
    assert depth.shape == frame.depth.shape
    assert np.max(np.abs(depth - frame.depth)) <= mm_per_count + 1e-12

    path = tmp_path / "frame.pgm"
    write_pgm(frame, path, optics.skin.gel_thickness)
    depth2, _ = read_pgm(path.read_bytes())
    assert np.array_equal(depth, depth2)
