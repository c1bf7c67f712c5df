#pragma once

#ifndef FACETRACK_TESTS_SUPPORT_HPP_
#define FACETRACK_TESTS_SUPPORT_HPP_

#include "facetrack/facetrack.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <string>

namespace facetrack::test {

/// Möller-Trumbore ray/triangle intersection; returns the ray parameter t.
inline std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c)
{
	const Vec3 e1 = b - a;
	const Vec3 e2 = c - a;
	const Vec3 p = dir.cross(e2);
	const double det = e1.dot(p);
	if (std::abs(det) < 1e-14) {
		return std::nullopt;
	}
	const double inv = 1.0 / det;
	const Vec3 s = origin - a;
	const double u = s.dot(p) * inv;
	if (u < 0.0 || u > 1.0) {
		return std::nullopt;
	}
	const Vec3 q = s.cross(e1);
	const double v = dir.dot(q) * inv;
	if (v < 0.0 || u + v > 1.0) {
		return std::nullopt;
	}
	const double t = e2.dot(q) * inv;
	if (t <= 0.0) {
		return std::nullopt;
	}
	return t;
}

/// Random small model: jittered grid neutral, dense random basis.
inline BlendshapeModel random_model(std::mt19937_64& rng, int grid = 4, int n = 5)
{
	std::uniform_real_distribution<double> jitter(-0.1, 0.1);
	std::normal_distribution<double> gauss(0.0, 0.05);
	std::vector<Vec3> vertices;
	for (int r = 0; r < grid; ++r) {
		for (int c = 0; c < grid; ++c) {
			vertices.emplace_back(c + jitter(rng), r + jitter(rng), jitter(rng));
		}
	}
	std::vector<Triangle> faces;
	for (int r = 0; r + 1 < grid; ++r) {
		for (int c = 0; c + 1 < grid; ++c) {
			const int a = r * grid + c;
			faces.push_back({a, a + 1, a + grid});
			faces.push_back({a + 1, a + grid + 1, a + grid});
		}
	}
	Eigen::MatrixXd basis(3 * grid * grid, n);
	for (Eigen::Index i = 0; i < basis.size(); ++i) {
		basis.data()[i] = gauss(rng);
	}
	std::vector<std::string> names;
	for (int k = 0; k < n; ++k) {
		names.push_back("shape_" + std::to_string(k));
	}
	return BlendshapeModel(Mesh(std::move(vertices), std::move(faces)), std::move(basis), std::move(names));
}

inline BscVector random_bsc(std::mt19937_64& rng, std::size_t n)
{
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	Eigen::VectorXd x(static_cast<Eigen::Index>(n));
	for (auto& v : x) {
		v = unit(rng);
	}
	return BscVector(x);
}

inline RigidPose random_pose(std::mt19937_64& rng)
{
	std::normal_distribution<double> gauss(0.0, 1.0);
	const Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
	return RigidPose::from_unnormalized(q, Vec3(gauss(rng), gauss(rng), gauss(rng)));
}

/**
 * Flat plate facing the camera (normal -z). Its blendshapes are affine fields, so every
 * expression stays exactly planar and renders without discretization error:
 * a push along -z, tilts about y and x, and an in-plane shift seen only by landmarks.
 */
inline BlendshapeModel plate_model(int grid = 25, double half = 0.08)
{
	std::vector<Vec3> vertices;
	for (int r = 0; r < grid; ++r) {
		for (int c = 0; c < grid; ++c) {
			vertices.emplace_back(-half + 2.0 * half * c / (grid - 1), -half + 2.0 * half * r / (grid - 1), 0.0);
		}
	}
	std::vector<Triangle> faces;
	for (int r = 0; r + 1 < grid; ++r) {
		for (int c = 0; c + 1 < grid; ++c) {
			const int a = r * grid + c;
			faces.push_back({a, a + grid, a + 1});
			faces.push_back({a + 1, a + grid, a + grid + 1});
		}
	}
	Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(3 * grid * grid, 4);
	for (std::size_t i = 0; i < vertices.size(); ++i) {
		const auto row = static_cast<Eigen::Index>(3 * i);
		basis(row + 2, 0) = -0.01;
		basis(row + 2, 1) = -0.01 * vertices[i].x() / half;
		basis(row + 2, 2) = -0.01 * vertices[i].y() / half;
		basis(row + 0, 3) = 0.005;
	}
	return BlendshapeModel(Mesh(std::move(vertices), std::move(faces)), std::move(basis),
	                       {"push", "tilt_x", "tilt_y", "shift"});
}

/// Every k-th plate vertex as a landmark.
inline std::vector<LandmarkDefinition> plate_landmarks(const BlendshapeModel& plate, std::size_t every = 37)
{
	std::vector<LandmarkDefinition> out;
	for (std::size_t i = 0; i < plate.vertex_count(); i += every) {
		out.push_back({"p" + std::to_string(i), i});
	}
	return out;
}

/// Single quad at depth z spanning [-h,h]^2, wound to face the camera.
inline Mesh wall(double z, double h)
{
	return Mesh({Vec3(-h, -h, z), Vec3(h, -h, z), Vec3(h, h, z), Vec3(-h, h, z)}, {{0, 3, 1}, {1, 3, 2}});
}

inline const FaceRig& face_rig()
{
	static const FaceRig rig = make_face_rig();
	return rig;
}

/// Fresh, empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name)
{
	const auto dir = std::filesystem::temp_directory_path() / ("facetrack_test_" + name);
	std::filesystem::remove_all(dir);
	std::filesystem::create_directories(dir);
	return dir;
}

/// Sparse scripted coefficients: `active` distinct coordinates with values in [0.3, 1].
inline BscVector sparse_bsc(std::mt19937_64& rng, std::size_t n, int active)
{
	std::vector<std::size_t> order(n);
	for (std::size_t k = 0; k < n; ++k) {
		order[k] = k;
	}
	std::shuffle(order.begin(), order.end(), rng);
	std::uniform_real_distribution<double> value(0.3, 1.0);
	Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
	for (int a = 0; a < active; ++a) {
		x[static_cast<Eigen::Index>(order[static_cast<std::size_t>(a)])] = value(rng);
	}
	return BscVector(x);
}

} // namespace facetrack::test

#endif // FACETRACK_TESTS_SUPPORT_HPP_
