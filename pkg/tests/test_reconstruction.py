import numpy as np
import pytest
from common import crack, make_scene, mask_from_rows

from crackkit.common import NoReconstructionError, wrap_angle
from crackkit.geometry import Point2Px, Point3mm, RigidTransform, SensorModel
from crackkit.planner import ContactPose
from crackkit.raster import RasterImage
from crackkit.reconstruction import (
    ReconstructedProfile,
    ReconstructionMethod,
    boundary_mask,
    extract_boundary_pixels,
    load_profile,
    passive_raster_plan,
    reconstruct_aligned_vision,
    reconstruct_frame,
    reconstruct_tactile,
    reconstruct_vision,
    save_ply,
    save_profile,
)
from crackkit.tactile import TactileFrame, press

DEPTH = np.array([[8.0, 9.0, 9.0], [9.0, 9.0, 7.5]])


def centre_frame(edge_id=None) -> TactileFrame:
    data = np.zeros((5, 5), dtype=bool)
    data[2, 2] = True
    pose = ContactPose(position=Point3mm(x=0, y=0, z=0), source_edge=edge_id)
    return TactileFrame.from_image(pose, RasterImage.binary(data), edge_id=edge_id)


def lifted(frame: TactileFrame, sensor: SensorModel) -> np.ndarray:
    return np.array([p.as_array() for p in reconstruct_frame(frame, sensor)])


@pytest.fixture
def tiny_sensor():
    return SensorModel(view_width=5.0, view_height=5.0, image_width=5, image_height=5)


class TestBoundary:
    def test_solid_block(self):
        mask = mask_from_rows(
            [
                ".......",
                ".......",
                "..###..",
                "..###..",
                "..###..",
                ".......",
                ".......",
            ]
        )
        pixels = extract_boundary_pixels(mask)
        assert len(pixels) == 8
        assert Point2Px(u=3, v=3) not in pixels

    def test_line(self):
        mask = mask_from_rows([".....", ".###.", "....."])
        assert len(extract_boundary_pixels(mask)) == 3

    def test_empty(self):
        assert extract_boundary_pixels(mask_from_rows(["...", "..."])) == []

    def test_image_border(self):
        mask = RasterImage.binary(np.ones((4, 4), dtype=bool))
        assert np.count_nonzero(boundary_mask(mask)) == 12
        assert not boundary_mask(mask, include_image_border=False).any()

    def test_rejects_grayscale(self):
        with pytest.raises(ValueError):
            boundary_mask(RasterImage.grayscale(np.zeros((2, 2))))


class TestReconstructFrame:
    def test_principal_point_identity_chain(self, tiny_sensor):
        points = reconstruct_frame(
            centre_frame(), tiny_sensor, tce=RigidTransform(), tew=RigidTransform()
        )
        assert len(points) == 1
        assert points[0].as_array() == pytest.approx([0.0, 0.0, tiny_sensor.standoff])

    def test_pose_places_point_on_plate(self, tiny_sensor):
        frame = centre_frame()
        frame = frame.model_copy(
            update={"pose": ContactPose(position=Point3mm(x=40, y=30, z=10))}
        )
        points = reconstruct_frame(frame, tiny_sensor)
        assert points[0].as_array() == pytest.approx([40.0, 30.0, 10.0], abs=1e-12)

    def test_blank_frame(self, tiny_sensor):
        pose = ContactPose(position=Point3mm(x=0, y=0, z=0))
        blank = TactileFrame.from_image(
            pose, RasterImage.binary(np.zeros((5, 5), dtype=bool))
        )
        assert reconstruct_frame(blank, tiny_sensor) == []

    def test_commutes_with_planar_motion(self, tiny_sensor):
        rng = np.random.default_rng(3)
        data = np.zeros((5, 5), dtype=bool)
        data[1:4, 2] = True
        data[2, 1:4] = True
        data[1, 1] = True
        image = RasterImage.binary(data)
        for _ in range(20):
            position = rng.uniform(0, 100, size=3)
            yaw = wrap_angle(rng.uniform(-np.pi, np.pi))
            theta = rng.uniform(-np.pi, np.pi)
            shift = np.array([*rng.uniform(-30, 30, size=2), 0.0])
            motion = RigidTransform.about_z(theta)

            pose = ContactPose(position=Point3mm.from_array(position), yaw=yaw)
            moved_pose = ContactPose(
                position=Point3mm.from_array(motion.apply(position) + shift),
                yaw=wrap_angle(yaw + theta),
            )
            before = lifted(TactileFrame.from_image(pose, image), tiny_sensor)
            after = lifted(TactileFrame.from_image(moved_pose, image), tiny_sensor)
            assert before.shape[0] > 0
            expected = motion.apply(before) + shift
            assert np.abs(after - expected).max() < 1e-9

    def test_boundary_lands_half_width_from_crack(self):
        sensor = SensorModel()
        c = crack([(20.0, 50.0), (120.0, 50.0)], width=2.0)
        contact = ContactPose(position=Point3mm(x=70, y=50, z=10))
        frame = press(make_scene(c), contact, sensor)
        points = np.array([p.as_array() for p in reconstruct_frame(frame, sensor)])
        assert points.shape[0] > 0
        assert np.all(points[:, 2] == pytest.approx(10.0))
        assert np.abs(np.abs(points[:, 1] - 50.0) - 1.0).max() <= sensor.pixel_pitch_y


class TestReconstructTactile:
    def test_merges_in_frame_order(self, tiny_sensor):
        frames = [centre_frame(edge_id=0), centre_frame(edge_id=1)]
        profile = reconstruct_tactile(frames, tiny_sensor)
        assert profile.method == ReconstructionMethod.active_tactile
        assert profile.frame_ids.tolist() == [0, 1]
        assert profile.pixels.tolist() == [[2.0, 2.0], [2.0, 2.0]]

    def test_skips_rejected_edges(self, tiny_sensor):
        frames = [centre_frame(edge_id=0), centre_frame(edge_id=1)]
        profile = reconstruct_tactile(frames, tiny_sensor, skip_edges={0})
        assert profile.frame_ids.tolist() == [1]

    def test_empty(self, tiny_sensor):
        profile = reconstruct_tactile([], tiny_sensor)
        assert len(profile) == 0


class TestVision:
    def test_vision_uses_depth(self):
        mask = mask_from_rows(["#..", "..#"], scale=0.5)
        depth = RasterImage.grayscale(DEPTH, scale=0.5)
        profile = reconstruct_vision(mask, depth)
        assert profile.points.tolist() == [[0.0, 0.0, 8.0], [1.0, 0.5, 7.5]]
        assert profile.frame_ids.tolist() == [-1, -1]

    def test_aligned_vision_flattens(self):
        mask = mask_from_rows(["#..", "..#"], scale=0.5)
        depth = RasterImage.grayscale(DEPTH, scale=0.5)
        aligned = reconstruct_aligned_vision(mask, table_z=10.0)
        vision = reconstruct_vision(mask, depth)
        assert np.all(aligned.points[:, 2] == 10.0)
        assert np.array_equal(aligned.points[:, :2], vision.points[:, :2])
        assert aligned.method == ReconstructionMethod.aligned_vision

    def test_provenance_lengths_checked(self):
        with pytest.raises(ValueError):
            ReconstructedProfile(
                method=ReconstructionMethod.vision,
                points=np.zeros((2, 3)),
                frame_ids=np.zeros(1),
                pixels=np.zeros((2, 2)),
            )


class TestPassivePlan:
    def test_default_plate(self):
        plan = passive_raster_plan(140.0, 105.0, SensorModel())
        assert plan.n_touches == 100
        pos = plan.positions()
        assert pos[:, 0].min() == pytest.approx(7.0)
        assert pos[:, 0].max() == pytest.approx(133.0)
        # serpentine: the second row starts where the first one ended
        assert pos[10, 0] == pytest.approx(pos[9, 0])

    def test_small_plate(self):
        plan = passive_raster_plan(10.0, 8.0, SensorModel())
        assert plan.n_touches == 1
        assert plan.contacts[0].position.x == 5.0

    def test_overlap_is_monotonic(self):
        counts = [
            passive_raster_plan(140.0, 105.0, SensorModel(), overlap=o).n_touches
            for o in (0.0, 0.1, 0.3, 0.5)
        ]
        assert counts == sorted(counts)

    @pytest.mark.parametrize("overlap", [0.1, 0.3, 0.5])
    def test_overlap_positions_distinct(self, overlap):
        sensor = SensorModel()
        plan = passive_raster_plan(140.0, 105.0, sensor, overlap=overlap)
        pos = plan.positions()[:, :2]
        assert len({tuple(p) for p in np.round(pos, 6)}) == plan.n_touches
        xs, ys = np.unique(pos[:, 0]), np.unique(pos[:, 1])
        assert xs.min() == pytest.approx(7.0) and xs.max() == pytest.approx(133.0)
        assert ys.max() == pytest.approx(105.0 - sensor.view_height / 2)
        # neighbouring footprints never leave a gap
        assert np.diff(xs).max() <= sensor.view_width * (1 - overlap) + 1e-9
        assert np.diff(ys).max() <= sensor.view_height * (1 - overlap) + 1e-9

    def test_half_overlap_count(self):
        plan = passive_raster_plan(140.0, 105.0, SensorModel(), overlap=0.5)
        assert plan.n_touches == 19 * 19

    def test_rotations(self):
        plan = passive_raster_plan(140.0, 105.0, SensorModel(), n_rotations=2)
        assert plan.n_touches == 200
        assert [c.yaw for c in plan.contacts[:2]] == [0.0, pytest.approx(np.pi / 2)]

    def test_bad_overlap(self):
        with pytest.raises(ValueError):
            passive_raster_plan(140.0, 105.0, SensorModel(), overlap=1.0)


class TestProfileIO:
    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        profile = ReconstructedProfile(
            method=ReconstructionMethod.passive_tactile,
            points=rng.uniform(0, 100, size=(20, 3)),
            frame_ids=np.arange(20),
            pixels=np.zeros((20, 2)),
        )
        path = str(tmp_path / "profile.csv")
        save_profile(profile, path)
        loaded = load_profile(path)
        assert loaded.method == ReconstructionMethod.passive_tactile
        assert np.array_equal(loaded.points, profile.points)
        assert np.array_equal(loaded.frame_ids, profile.frame_ids)

    def test_empty_profile(self, tmp_path):
        path = str(tmp_path / "empty.csv")
        save_profile(ReconstructedProfile.empty(ReconstructionMethod.vision), path)
        with pytest.raises(NoReconstructionError):
            load_profile(path)
        loaded = load_profile(path, method=ReconstructionMethod.vision)
        assert len(loaded) == 0

    def test_ply(self, tmp_path):
        profile = ReconstructedProfile(
            method=ReconstructionMethod.vision,
            points=np.array([[1.0, 2.0, 3.0], [0.5, 0.25, 10.0]]),
            frame_ids=np.array([-1, -1]),
            pixels=np.zeros((2, 2)),
        )
        path = str(tmp_path / "profile.ply")
        save_ply(profile, path)
        with open(path, "r", encoding="utf-8") as fp:
            lines = fp.read().splitlines()
        assert "element vertex 2" in lines
        assert lines[-2:] == ["1.0 2.0 3.0", "0.5 0.25 10.0"]
