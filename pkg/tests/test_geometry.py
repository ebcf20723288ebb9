import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import zbuffer_warp_oracle
from spectracube.core import ArrayGeometry, DepthMap, HyperCube, SpectralGrid
from spectracube.exceptions import (
    DimensionMismatchError,
    QuadOutOfBoundsError,
    SingularConfigurationError,
    ZeroBaselineError,
)
from spectracube.geometry import (
    Homography,
    Quad,
    TextureExtractor,
    depth_to_disparity,
    destination_corners,
    estimate_homography,
    extract_texture,
    warp_cube,
    warp_view,
)
from spectracube.synth import generate, random_scene_spec

GEOM = ArrayGeometry(baseline_mm=40.0)


def random_homography(rng):
    m = np.eye(3)
    m[:2, :2] += rng.uniform(-0.2, 0.2, (2, 2))
    m[:2, 2] = rng.uniform(-10, 10, 2)
    m[2, :2] = rng.uniform(-1e-3, 1e-3, 2)
    return m


def test_identity_quad_gives_identity():
    h = estimate_homography(Quad(destination_corners(40, 30)), 40, 30)
    assert np.allclose(h.matrix, np.eye(3), atol=1e-12)


def test_translated_quad_gives_translation():
    h = estimate_homography(Quad(destination_corners(40, 30) + [5, 7]), 40, 30).matrix
    want = np.array([[1, 0, 5], [0, 1, 7], [0, 0, 1.0]])
    assert np.allclose(h, want, atol=1e-12)
    assert h[2, 2] == 1.0


def test_random_homographies_recovered(rng):
    for _ in range(50):
        W, H = rng.integers(8, 200, 2)
        true = Homography(random_homography(rng))
        quad = Quad(true.apply(destination_corners(W, H)))
        est = estimate_homography(quad, W, H)
        assert np.linalg.norm(est.matrix - true.matrix) / np.linalg.norm(true.matrix) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_corners_map_onto_quad(seed):
    rng = np.random.default_rng(seed)
    W, H = rng.integers(1, 300, 2)
    quad = Quad(Homography(random_homography(rng)).apply(destination_corners(W, H)))
    back = estimate_homography(quad, W, H).apply(destination_corners(W, H))
    assert np.max(np.abs(back - quad.points)) < 1e-6


@pytest.mark.parametrize("pts", [
    [(0, 0), (0, 5), (0, 10), (10, 0)],
    [(0, 0), (0, 0), (10, 10), (10, 0)],
    [(0, 0), (5, 5), (10, 10), (3, 8)],
])
def test_degenerate_quads_rejected(pts):
    with pytest.raises(SingularConfigurationError):
        estimate_homography(Quad(pts), 10, 10)


def test_homography_must_be_invertible():
    with pytest.raises(SingularConfigurationError):
        Homography(np.array([[1, 2, 0], [2, 4, 0], [0, 0, 1.0]]))


def _gradient_cube(h, w, grid=SpectralGrid((500.0, 600.0))):
    ys, xs = np.mgrid[0:h, 0:w]
    return HyperCube(np.stack([xs / (2 * w) + ys / (2 * h), 0.25 + 0 * xs]), grid)


def test_identity_crop_is_exact(rng):
    cube = HyperCube(rng.random((31, 10, 12)))
    tex = extract_texture(cube, Quad.rectangle(2, 3, 5, 4), 5, 4)
    assert np.array_equal(tex.samples, cube.samples[:, 3:7, 2:7])


def test_constant_channel_stays_constant():
    tex = extract_texture(_gradient_cube(20, 20), Quad([(1, 2), (3, 15), (18, 17), (16, 1)]), 9, 7)
    assert np.allclose(tex.samples[1], 0.25, atol=1e-15)


def test_rotated_quad_of_gradient():
    n = 16
    cube = _gradient_cube(n + 1, n + 1)
    # texture (u, v) reads the source at (x, y) = (v, n - u)
    tex = extract_texture(cube, Quad([(0, n), (n, n), (n, 0), (0, 0)]), n, n)
    vs, us = np.mgrid[0:n, 0:n]
    want = vs / (2 * (n + 1)) + (n - us) / (2 * (n + 1))
    assert np.max(np.abs(tex.samples[0] - want)) < 1e-6


def test_quad_out_of_bounds():
    with pytest.raises(QuadOutOfBoundsError):
        extract_texture(_gradient_cube(8, 8), Quad.rectangle(2, 2, 8, 3), 4, 4)


def test_texture_extractor_estimator(rng):
    cube = HyperCube(rng.random((31, 10, 12)))
    est = TextureExtractor(quad=Quad.rectangle(1, 1, 6, 5), width=6, height=5).fit()
    assert est.transform(cube) == extract_texture(cube, est.quad_, 6, 5)
    assert set(est.get_params()) == {"quad", "width", "height"}


def test_disparity_hand_value():
    d = depth_to_disparity(DepthMap(np.full((1, 1), 10.0)), GEOM, 4, 5)
    assert abs(abs(d.dx[0, 0]) - 240.0 / 45.0) < 1e-9
    assert d.dy[0, 0] == 0.0


def test_disparity_vanishes_at_infinity():
    d = depth_to_disparity(DepthMap(np.full((1, 1), 1e9)), GEOM, 4, 5)
    assert abs(d.dx[0, 0]) < 1e-3


def test_diagonal_neighbour_componentwise():
    depth = DepthMap(np.full((2, 2), 3.0))
    diag = depth_to_disparity(depth, GEOM, 4, 8)
    horiz = depth_to_disparity(depth, GEOM, 4, 5)
    assert np.array_equal(diag.dx, diag.dy)
    assert np.array_equal(diag.dx, horiz.dx)


def test_sign_convention():
    # camera 5 sits right of 4: the scene moves left in its image
    d = depth_to_disparity(DepthMap(np.full((1, 1), 2.0)), GEOM, 4, 5)
    assert d.dx[0, 0] < 0


def test_identical_cameras_have_no_disparity():
    with pytest.raises(ZeroBaselineError):
        depth_to_disparity(DepthMap(np.ones((1, 1))), GEOM, 3, 3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1e6))
def test_disparity_homogeneous(p):
    a = depth_to_disparity(DepthMap(np.full((1, 1), p)), GEOM, 0, 8)
    b = depth_to_disparity(DepthMap(np.full((1, 1), 2 * p)), GEOM, 0, 8)
    assert b.dx[0, 0] == a.dx[0, 0] / 2 and b.dy[0, 0] == a.dy[0, 0] / 2


@pytest.mark.parametrize("k", [1, 3, 6])
def test_constant_plane_shift(rng, k):
    p = 40.0 * 6.0 / (k * 1000.0 * 4.5e-3)
    img = rng.random((9, 14))
    out, mask = warp_view(img, DepthMap(np.full(img.shape, p)), GEOM, 4, 5)
    assert np.array_equal(out[:, :-k], img[:, k:])
    assert np.all(mask.valid[:, :-k]) and not np.any(mask.valid[:, -k:])


def test_same_camera_is_identity(rng):
    img = rng.random((5, 6))
    out, mask = warp_view(img, DepthMap(np.ones(img.shape)), GEOM, 5, 5)
    assert np.array_equal(out, img) and np.all(mask.valid)


def test_horizontal_neighbour_keeps_rows(rng):
    img = rng.random((6, 6))
    out, mask = warp_view(img, DepthMap(np.full(img.shape, 1e6)), GEOM, 4, 5)
    assert np.array_equal(out, img) and np.all(mask.valid)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        warp_view(np.zeros((3, 3)), DepthMap(np.ones((3, 4))), GEOM, 4, 5)


def _oracle_for(img, depth, geom, src, dst):
    (rs, cs), (rd, cd) = geom.position(src), geom.position(dst)
    intr = geom.intrinsics
    return zbuffer_warp_oracle(img, depth, geom.baseline_mm, intr.focal_mm, intr.pixel_pitch_mm, cd - cs, rd - rs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 8))
def test_warp_matches_zbuffer_oracle(seed, src):
    spec = random_scene_spec(seed, max_dim=64)
    video = generate(spec, cameras=[src])
    cube, depth = video.view(src, 0)
    img = cube.samples[7]
    out, mask = warp_view(img, depth, spec.geometry, src, spec.geometry.center)
    if src == spec.geometry.center:
        assert np.array_equal(out, img)
        return
    want, valid = _oracle_for(img, depth.depth, spec.geometry, src, spec.geometry.center)
    assert np.array_equal(mask.valid, valid)
    assert np.array_equal(out, want)


def test_collision_keeps_nearer_source():
    geom = ArrayGeometry(baseline_mm=40.0)
    k1 = 40.0 * 6.0 / (1 * 1000.0 * 4.5e-3)
    depth = np.full((1, 4), 1e6)
    depth[0, 1] = k1
    img = np.array([[0.1, 0.2, 0.3, 0.4]])
    # pixel 1 moves to 0 but pixel 0 (farther) stays: nearer wins
    out, mask = warp_view(img, DepthMap(depth), geom, 4, 5)
    assert out[0, 0] == 0.2 and not mask.valid[0, 1]
    depth[0, 1] = 1e6
    depth[0, 2] = k1 / 2  # moves by 2 onto pixel 0 as well, nearer still
    out, _ = warp_view(img, DepthMap(depth), geom, 4, 5)
    assert out[0, 0] == 0.3


def test_warp_cube_matches_per_channel(rng):
    cube = HyperCube(rng.random((31, 8, 8)))
    depth = DepthMap(rng.uniform(1.0, 5.0, (8, 8)))
    planes, mask = warp_cube(cube, depth, GEOM, 4, 0)
    for c in (0, 15, 30):
        out, m = warp_view(cube.samples[c], depth, GEOM, 4, 0)
        assert np.array_equal(planes[c], out) and m == mask
