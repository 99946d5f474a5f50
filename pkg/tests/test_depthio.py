"""Tests for depth image and point cloud files."""

import numpy as np
import pytest

from posevo import depthio
from posevo.errors import CloudFormatError, DepthFormatError, EmptyCloudError
from posevo.objective import PointCloud

INTRINSICS = depthio.Intrinsics(fx=100.0, fy=100.0, cx=2.0, cy=1.5)


@pytest.fixture
def depth_image():
    depth = np.array(
        [[0, 500, 1000, 1500, 2000], [300, 0, 65535, 4000, 10], [1, 2, 3, 4, 5], [9, 8, 7, 6, 0]],
        dtype=np.uint16,
    )
    return depthio.DepthImage(depth, INTRINSICS)


def test_depth_file_round_trip(tmp_path, depth_image):
    path = tmp_path / "frame.pgm"
    depthio.save_depth(depth_image, path)
    loaded = depthio.load_depth(path)
    np.testing.assert_array_equal(loaded.depth, depth_image.depth)
    assert loaded.intrinsics == INTRINSICS
    assert (tmp_path / "frame.intr").exists()


def test_depth_samples_are_big_endian(tmp_path, depth_image):
    path = tmp_path / "frame.pgm"
    depthio.save_depth(depth_image, path)
    data = path.read_bytes()
    assert data.startswith(b"P5")
    payload = data[-depth_image.depth.size * 2 :]
    assert payload[2:4] == b"\x01\xf4"  # 500


def test_written_header_declares_size_and_maxval(tmp_path, depth_image):
    path = tmp_path / "frame.pgm"
    depthio.save_depth(depth_image, path)
    header = path.read_bytes()[: -depth_image.depth.size * 2].split()
    assert header[0] == b"P5"
    assert [int(token) for token in header[-3:]] == [5, 4, 65535]


def test_header_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n65535\n" + b"\x00\x10\x00\x20")
    depthio.save_intrinsics(INTRINSICS, tmp_path / "c.intr")
    np.testing.assert_array_equal(depthio.load_depth(path).depth, [[16, 32]])


@pytest.mark.parametrize(
    "data, message",
    [
        (b"P2\n2 1\n65535\n\x00\x01\x00\x02", "bad magic"),
        (b"P5\n2 1\n255\n\x01\x02", "maxval 255"),
        (b"P5\n2 2\n65535\n\x00\x01\x00\x02", "truncated payload"),
        (b"P5\n2", "truncated PGM header"),
    ],
)
def test_malformed_depth_rejected(tmp_path, data, message):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    depthio.save_intrinsics(INTRINSICS, tmp_path / "bad.intr")
    with pytest.raises(DepthFormatError, match=message):
        depthio.load_depth(path)


def test_missing_sidecar_rejected(tmp_path, depth_image):
    path = tmp_path / "frame.pgm"
    depthio.save_depth(depth_image, path)
    (tmp_path / "frame.intr").unlink()
    with pytest.raises(DepthFormatError, match="missing intrinsics"):
        depthio.load_depth(path)


def test_background_subtraction(depth_image):
    mask = depthio.background_subtract(depth_image, 1500)
    assert mask[0].tolist() == [False, True, True, False, False]
    assert not mask[1, 2]
    assert mask[1, 4]


def test_back_projection_follows_pinhole(depth_image):
    mask = np.zeros(depth_image.depth.shape, dtype=bool)
    mask[0, 1] = True
    cloud = depthio.to_point_cloud(depth_image, mask)
    np.testing.assert_allclose(cloud.points, [[0.5 * (1 - 2.0) / 100, 0.5 * (0 - 1.5) / 100, 0.5]])


def test_projection_inverts_back_projection():
    uv = np.array([[0.0, 0.0], [10.5, 3.0], [40.0, 80.0]])
    points = depthio.back_project(uv, [0.7, 1.2, 3.3], INTRINSICS)
    np.testing.assert_allclose(depthio.project_points(points, INTRINSICS), uv, atol=1e-9)


def test_plane_back_projects_to_coplanar_points():
    """Test a fronto-parallel depth plane yields points with equal z."""
    image = depthio.DepthImage(np.full((6, 8), 1234, dtype=np.uint16), INTRINSICS)
    cloud = depthio.to_point_cloud(image, np.ones((6, 8), dtype=bool))
    assert len(cloud) == 48
    np.testing.assert_allclose(cloud.points[:, 2], 1.234, atol=1e-12)


def test_zero_depth_is_never_a_point(depth_image):
    cloud = depthio.to_point_cloud(depth_image, np.ones((4, 5), dtype=bool))
    assert len(cloud) == 17


def test_empty_mask_rejected(depth_image):
    with pytest.raises(EmptyCloudError):
        depthio.to_point_cloud(depth_image, np.zeros((4, 5), dtype=bool))


def test_xyz_round_trip(tmp_path):
    cloud = PointCloud([[0.1, -0.2, 1.5], [0.123456789, 2.0, 3.0]])
    path = tmp_path / "c.xyz"
    depthio.save_xyz(cloud, path)
    np.testing.assert_allclose(depthio.load_xyz(path).points, cloud.points, rtol=1e-8)


def test_xyz_skips_comments_and_blank_lines(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("# header\n\n1 2 3\n4 5 6  # trailing\n")
    assert len(depthio.load_xyz(path)) == 2


def test_xyz_error_carries_line_number(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("1 2 3\n4 five 6\n")
    with pytest.raises(CloudFormatError, match="line 2") as exc_info:
        depthio.load_xyz(path)
    assert exc_info.value.line_number == 2
    assert "'five'" in str(exc_info.value)


def test_xyz_wrong_arity(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("1 2\n")
    with pytest.raises(CloudFormatError, match="expected 3 coordinates"):
        depthio.load_xyz(path)


def test_empty_xyz_rejected(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("# nothing\n")
    with pytest.raises(EmptyCloudError):
        depthio.load_xyz(path)


@pytest.mark.parametrize("token", ["nan", "inf", "-Infinity"])
def test_xyz_non_finite_token_carries_line_number(tmp_path, token):
    path = tmp_path / "c.xyz"
    path.write_text(f"1 2 3\n\n0.5 {token} 1\n")
    with pytest.raises(CloudFormatError, match="line 3") as exc_info:
        depthio.load_xyz(path)
    assert exc_info.value.line_number == 3
    assert repr(token) in str(exc_info.value)


def test_opencv_decoded_depth_must_be_sixteen_bit(tmp_path, monkeypatch):
    path = tmp_path / "frame.pgm"
    path.write_bytes(b"P5\n2 1\n65535\n\x00\x10\x00\x20")
    depthio.save_intrinsics(INTRINSICS, tmp_path / "frame.intr")
    monkeypatch.setattr(depthio.cv2, "imread", lambda *args: None)
    with pytest.raises(DepthFormatError, match="not a 16-bit depth image"):
        depthio.load_depth(path)
