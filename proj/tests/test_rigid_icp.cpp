#include "support.hpp"

#include <gtest/gtest.h>

using namespace facetrack;

namespace {

double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

RigidPose perturbed(const RigidPose& truth, double deg, const Vec3& axis, const Vec3& shift)
{
	// Rotate about the head's own origin, then shift.
	const RigidPose local = RigidPose::from_axis_angle(axis, deg * std::numbers::pi / 180.0, Vec3::Zero());
	const RigidPose p = truth * local;
	return RigidPose(p.rotation(), p.translation() + shift);
}

} // namespace

TEST(IcpConfig, Validation)
{
	IcpConfig cfg;
	EXPECT_NO_THROW(cfg.validate());
	cfg.min_correspondences = 5;
	EXPECT_THROW(cfg.validate(), Error);
	cfg = IcpConfig{};
	cfg.max_iterations = 0;
	EXPECT_THROW(cfg.validate(), Error);
	cfg = IcpConfig{};
	cfg.rotation_epsilon = 0.0;
	EXPECT_THROW(cfg.validate(), Error);
}

TEST(AlignRigid, FixedPointAtGeneratingPose)
{
	// Depth sampled around a mesh vertex always straddles triangle creases, so the
	// residuals at the true pose are sampling error that shrinks with the pixel
	// footprint. A 4x finer camera than the default brings it below the epsilons.
	const auto& rig = test::face_rig();
	const RigidPose truth = default_head_pose();
	const CameraIntrinsics cam(1600, 1600, 640, 480, 1280, 960);
	const DepthFrame frame = render_depth(rig.model.neutral(), truth, cam);
	const IcpConfig cfg;
	const auto res = align_rigid(rig.model.neutral(), frame, cam, truth, cfg);
	EXPECT_TRUE(res.converged);
	EXPECT_EQ(res.iterations.size(), 1u);
	EXPECT_LT(degrees(rotation_distance(res.pose, truth)), cfg.rotation_epsilon);
	EXPECT_LT((res.pose.translation() - truth.translation()).norm(), cfg.translation_epsilon);
}

TEST(AlignRigid, FixedPointDriftShrinksWithResolution)
{
	const auto& rig = test::face_rig();
	const RigidPose truth = default_head_pose();
	double previous = std::numeric_limits<double>::infinity();
	for (int scale : {1, 2, 4}) {
		const CameraIntrinsics cam(400.0 * scale, 400.0 * scale, 160.0 * scale, 120.0 * scale, 320 * scale, 240 * scale);
		const auto res = align_rigid(rig.model.neutral(), render_depth(rig.model.neutral(), truth, cam), cam, truth, IcpConfig{});
		const double drift = degrees(rotation_distance(res.pose, truth));
		EXPECT_LT(drift, previous) << scale;
		EXPECT_LT((res.pose.translation() - truth.translation()).norm(), IcpConfig{}.translation_epsilon) << scale;
		previous = drift;
	}
}

TEST(AlignRigid, RecoversFiveDegreesAndTwoCentimetres)
{
	const auto& rig = test::face_rig();
	const RigidPose truth = default_head_pose();
	const DepthFrame frame = render_depth(rig.model.neutral(), truth, default_camera());
	const Vec3 axes[] = {Vec3(1, 1, 0), Vec3(0, 1, 0), Vec3(1, 0, 0), Vec3(1, -1, 1)};
	const Vec3 shifts[] = {Vec3(0.02, 0, 0), Vec3(0, 0.02, 0), Vec3(0, 0, 0.02), Vec3(0.0115, -0.0115, 0.0115)};
	for (int i = 0; i < 4; ++i) {
		const RigidPose init = perturbed(truth, 5.0, axes[i], shifts[i]);
		const auto res = align_rigid(rig.model.neutral(), frame, default_camera(), init, IcpConfig{});
		EXPECT_LT(degrees(rotation_distance(res.pose, truth)), 0.5) << i;
		EXPECT_LT((res.pose.translation() - truth.translation()).norm(), 0.002) << i;
		EXPECT_NEAR(res.pose.rotation().norm(), 1.0, 1e-9);
	}
}

TEST(AlignRigid, MeanErrorNonIncreasingOverAcceptedIterations)
{
	const auto& rig = test::face_rig();
	const RigidPose truth = default_head_pose();
	const DepthFrame frame =
	    add_depth_noise(render_depth(rig.model.neutral(), truth, default_camera()), 0.002, 17);
	const auto res = align_rigid(rig.model.neutral(), frame, default_camera(),
	                             perturbed(truth, 4.0, Vec3(0, 1, 1), Vec3(0.01, 0.0, -0.01)), IcpConfig{});
	double previous = std::numeric_limits<double>::infinity();
	std::size_t accepted = 0;
	for (const auto& it : res.iterations) {
		if (it.accepted) {
			EXPECT_LE(it.mean_error, previous);
			previous = it.mean_error;
			++accepted;
		}
		EXPECT_GT(it.correspondences, 0u);
	}
	EXPECT_GT(accepted, 0u);
}

TEST(AlignRigid, AllInvalidDepthIsInsufficientData)
{
	const auto& rig = test::face_rig();
	const DepthFrame frame = DepthFrame::empty(320, 240);
	try {
		align_rigid(rig.model.neutral(), frame, default_camera(), default_head_pose(), IcpConfig{});
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
	}
}

TEST(AlignRigid, FlatTargetIsDegenerate)
{
	const BlendshapeModel plate = test::plate_model();
	const RigidPose pose = default_head_pose();
	const DepthFrame frame = render_depth(plate.neutral(), pose, default_camera());
	try {
		align_rigid(plate.neutral(), frame, default_camera(), pose, IcpConfig{});
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::degenerate_geometry);
	}
}

TEST(AlignRigid, IndependentOfVertexOrder)
{
	const auto& rig = test::face_rig();
	const Mesh& mesh = rig.model.neutral();
	const RigidPose truth = default_head_pose();
	const DepthFrame frame = render_depth(mesh, truth, default_camera());

	std::vector<int> perm(mesh.vertex_count());
	std::iota(perm.begin(), perm.end(), 0);
	std::mt19937_64 rng(21);
	std::shuffle(perm.begin(), perm.end(), rng);
	std::vector<Vec3> vertices(mesh.vertex_count());
	for (std::size_t i = 0; i < perm.size(); ++i) {
		vertices[static_cast<std::size_t>(perm[i])] = mesh.vertices()[i];
	}
	std::vector<Triangle> faces = mesh.faces();
	for (auto& f : faces) {
		for (auto& idx : f) {
			idx = perm[static_cast<std::size_t>(idx)];
		}
	}
	const Mesh shuffled(std::move(vertices), std::move(faces));

	const RigidPose init = perturbed(truth, 3.0, Vec3(1, 2, 0), Vec3(0.005, -0.01, 0.01));
	const auto a = align_rigid(mesh, frame, default_camera(), init, IcpConfig{});
	const auto b = align_rigid(shuffled, frame, default_camera(), init, IcpConfig{});
	EXPECT_LT(rotation_distance(a.pose, b.pose), 1e-6);
	EXPECT_LT((a.pose.translation() - b.pose.translation()).norm(), 1e-6);
}

TEST(AlignRigid, ThreadCountDoesNotChangeResult)
{
	const auto& rig = test::face_rig();
	const RigidPose truth = default_head_pose();
	const DepthFrame frame = render_depth(rig.model.neutral(), truth, default_camera());
	const RigidPose init = perturbed(truth, 3.0, Vec3(0, 1, 0), Vec3(0.01, 0, 0));
	IcpConfig one;
	IcpConfig four;
	four.threads = 4;
	const auto a = align_rigid(rig.model.neutral(), frame, default_camera(), init, one);
	const auto b = align_rigid(rig.model.neutral(), frame, default_camera(), init, four);
	EXPECT_EQ(a.pose.rotation().coeffs(), b.pose.rotation().coeffs());
	EXPECT_EQ(a.pose.translation(), b.pose.translation());
}

TEST(AlignRigid, LandmarkRowsDoNotDisturbExactData)
{
	const auto& rig = test::face_rig();
	const RigidPose truth = default_head_pose();
	const DepthFrame frame = render_depth(rig.model.neutral(), truth, default_camera());
	const auto lms = project_landmarks(rig.model.neutral(), truth, default_camera(), rig.landmarks, NoiseConfig{}).landmarks;
	IcpConfig cfg;
	cfg.landmark_weight = 2e-5;
	const auto res = align_rigid(rig.model.neutral(), frame, default_camera(),
	                             perturbed(truth, 5.0, Vec3(0, 1, 0), Vec3(0.02, 0, 0)), cfg, &lms);
	EXPECT_LT(degrees(rotation_distance(res.pose, truth)), 0.5);
	EXPECT_LT((res.pose.translation() - truth.translation()).norm(), 0.002);
}
