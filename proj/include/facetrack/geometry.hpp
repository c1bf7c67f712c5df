/*
 * facetrack - blendshape coefficient and head pose estimation from RGB-D data.
 *
 * Copyright 2026 The facetrack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef FACETRACK_GEOMETRY_HPP_
#define FACETRACK_GEOMETRY_HPP_

#include "facetrack/error.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace facetrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Triangle = std::array<int, 3>;

/**
 * Triangle mesh in metres. Construction checks index validity only; zero-area faces
 * are a load-time concern (see require_nondegenerate) because an expression can
 * legitimately squash a triangle.
 */
class Mesh
{
public:
	Mesh() = default;

	Mesh(std::vector<Vec3> vertices, std::vector<Triangle> faces)
	    : vertices_(std::move(vertices)), faces_(std::move(faces))
	{
		const auto count = static_cast<int>(vertices_.size());
		for (std::size_t f = 0; f < faces_.size(); ++f) {
			const auto& t = faces_[f];
			for (int idx : t) {
				if (idx < 0 || idx >= count) {
					throw Error(ErrorCode::validation, "face " + std::to_string(f) + " references vertex " +
					                                       std::to_string(idx) + " but the mesh has " +
					                                       std::to_string(count) + " vertices");
				}
			}
			if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
				throw Error(ErrorCode::validation, "face " + std::to_string(f) + " repeats a vertex");
			}
		}
	}

	const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
	const std::vector<Triangle>& faces() const noexcept { return faces_; }
	std::size_t vertex_count() const noexcept { return vertices_.size(); }
	bool empty() const noexcept { return vertices_.empty(); }

	/// Same connectivity, new positions.
	Mesh with_vertices(std::vector<Vec3> vertices) const
	{
		if (vertices.size() != vertices_.size()) {
			throw Error(ErrorCode::dimension, "vertex count changed from " + std::to_string(vertices_.size()) +
			                                      " to " + std::to_string(vertices.size()));
		}
		Mesh out;
		out.vertices_ = std::move(vertices);
		out.faces_ = faces_;
		return out;
	}

private:
	std::vector<Vec3> vertices_;
	std::vector<Triangle> faces_;
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c)
{
	return 0.5 * (b - a).cross(c - a).norm();
}

/// Rejects meshes containing zero-area faces.
inline void require_nondegenerate(const Mesh& mesh, double min_area = 1e-16)
{
	const auto& v = mesh.vertices();
	for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
		const auto& t = mesh.faces()[f];
		if (!(triangle_area(v[t[0]], v[t[1]], v[t[2]]) > min_area)) {
			throw Error(ErrorCode::validation, "face " + std::to_string(f) + " is degenerate (zero area)");
		}
	}
}

/**
 * Per-frame blendshape coefficients. Every entry lies in [0, 1].
 */
class BscVector
{
public:
	BscVector() = default;

	explicit BscVector(Eigen::VectorXd values) : values_(std::move(values))
	{
		for (Eigen::Index k = 0; k < values_.size(); ++k) {
			const double v = values_[k];
			if (!(v >= 0.0 && v <= 1.0)) {
				throw Error(ErrorCode::validation,
				            "coefficient " + std::to_string(k) + " = " + std::to_string(v) + " is outside [0,1]");
			}
		}
	}

	explicit BscVector(const std::vector<double>& values)
	    : BscVector(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())))
	{
	}

	static BscVector zeros(std::size_t n) { return BscVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))); }

	static BscVector unit(std::size_t n, std::size_t k)
	{
		Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
		v[static_cast<Eigen::Index>(k)] = 1.0;
		return BscVector(std::move(v));
	}

	const Eigen::VectorXd& values() const noexcept { return values_; }
	std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
	double operator[](std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }

	friend bool operator==(const BscVector& a, const BscVector& b)
	{
		return a.values_.size() == b.values_.size() && a.values_ == b.values_;
	}

private:
	Eigen::VectorXd values_;
};

/**
 * Rigid transform p -> R p + t with R stored as a unit quaternion.
 */
class RigidPose
{
public:
	RigidPose() : rotation_(Eigen::Quaterniond::Identity()), translation_(Vec3::Zero()) {}

	RigidPose(const Eigen::Quaterniond& rotation, const Vec3& translation)
	    : rotation_(rotation), translation_(translation)
	{
		if (!(std::abs(rotation_.norm() - 1.0) <= 1e-9)) {
			throw Error(ErrorCode::validation, "pose quaternion is not unit length (norm " +
			                                       std::to_string(rotation_.norm()) + ")");
		}
		if (!translation_.allFinite()) {
			throw Error(ErrorCode::validation, "pose translation is not finite");
		}
	}

	/// Normalizes the quaternion before validating.
	static RigidPose from_unnormalized(const Eigen::Quaterniond& q, const Vec3& t)
	{
		return RigidPose(q.normalized(), t);
	}

	static RigidPose from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t)
	{
		return RigidPose(Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())), t);
	}

	static RigidPose identity() { return RigidPose(); }

	const Eigen::Quaterniond& rotation() const noexcept { return rotation_; }
	const Vec3& translation() const noexcept { return translation_; }
	Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

	Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

	RigidPose inverse() const
	{
		const Eigen::Quaterniond qi = rotation_.conjugate();
		return RigidPose(qi, -(qi * translation_));
	}

	/// (a * b).apply(p) == a.apply(b.apply(p))
	friend RigidPose operator*(const RigidPose& a, const RigidPose& b)
	{
		return from_unnormalized(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_);
	}

private:
	Eigen::Quaterniond rotation_;
	Vec3 translation_;
};

inline Vec3 transform_point(const RigidPose& pose, const Vec3& p) { return pose.apply(p); }

/// Angle of the relative rotation between two poses, in radians.
inline double rotation_distance(const RigidPose& a, const RigidPose& b)
{
	return a.rotation().angularDistance(b.rotation());
}

/**
 * Undistorted pinhole camera. Pixel (col,row) covers [col,col+1) x [row,row+1) in
 * continuous image coordinates, so its centre is at (col + 0.5, row + 0.5).
 */
class CameraIntrinsics
{
public:
	CameraIntrinsics() = default;

	CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height)
	    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height)
	{
		if (!(fx > 0.0 && fy > 0.0)) {
			throw Error(ErrorCode::validation, "focal lengths must be positive");
		}
		if (width <= 0 || height <= 0) {
			throw Error(ErrorCode::validation, "image size must be positive");
		}
		if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
			throw Error(ErrorCode::validation, "principal point lies outside the image");
		}
	}

	/// Principal point at the image centre.
	static CameraIntrinsics centered(double fx, double fy, int width, int height)
	{
		return CameraIntrinsics(fx, fy, 0.5 * width, 0.5 * height, width, height);
	}

	double fx() const noexcept { return fx_; }
	double fy() const noexcept { return fy_; }
	double cx() const noexcept { return cx_; }
	double cy() const noexcept { return cy_; }
	int width() const noexcept { return width_; }
	int height() const noexcept { return height_; }

	bool contains(double u, double v) const noexcept
	{
		return u >= 0.0 && v >= 0.0 && u < width_ && v < height_;
	}

private:
	double fx_ = 1.0;
	double fy_ = 1.0;
	double cx_ = 0.0;
	double cy_ = 0.0;
	int width_ = 1;
	int height_ = 1;
};

inline Vec2 project(const CameraIntrinsics& intr, const Vec3& p_cam)
{
	if (!(p_cam.z() > 0.0)) {
		throw Error(ErrorCode::behind_camera, "cannot project a point with z <= 0");
	}
	return {intr.fx() * p_cam.x() / p_cam.z() + intr.cx(), intr.fy() * p_cam.y() / p_cam.z() + intr.cy()};
}

inline Vec3 backproject(const CameraIntrinsics& intr, double u, double v, double depth)
{
	if (!(depth > 0.0)) {
		throw Error(ErrorCode::invalid_depth, "depth must be positive");
	}
	return {(u - intr.cx()) * depth / intr.fx(), (v - intr.cy()) * depth / intr.fy(), depth};
}

/**
 * Linear blendshape model: vertex positions are neutral + basis * x, with the
 * basis holding additive displacements from the neutral (not absolute targets).
 *
 * The basis is a 3V x n matrix. Column k is the full displacement field of
 * blendshape k; rows 3i..3i+2 belong to vertex i.
 */
class BlendshapeModel
{
public:
	BlendshapeModel() = default;

	BlendshapeModel(Mesh neutral, Eigen::MatrixXd basis, std::vector<std::string> names)
	    : neutral_(std::move(neutral)), basis_(std::move(basis)), names_(std::move(names))
	{
		const auto rows = static_cast<Eigen::Index>(3 * neutral_.vertex_count());
		if (basis_.cols() < 1) {
			throw Error(ErrorCode::validation, "a blendshape model needs at least one blendshape");
		}
		if (basis_.rows() != rows) {
			throw Error(ErrorCode::dimension, "basis has " + std::to_string(basis_.rows()) + " rows, expected " +
			                                      std::to_string(rows));
		}
		if (static_cast<Eigen::Index>(names_.size()) != basis_.cols()) {
			throw Error(ErrorCode::dimension, "got " + std::to_string(names_.size()) + " names for " +
			                                      std::to_string(basis_.cols()) + " blendshapes");
		}
		std::unordered_set<std::string> seen;
		for (const auto& name : names_) {
			if (name.empty() || !seen.insert(name).second) {
				throw Error(ErrorCode::validation, "blendshape names must be unique and non-empty: '" + name + "'");
			}
		}
		if (!basis_.allFinite()) {
			throw Error(ErrorCode::validation, "basis contains non-finite values");
		}
	}

	const Mesh& neutral() const noexcept { return neutral_; }
	const Eigen::MatrixXd& basis() const noexcept { return basis_; }
	const std::vector<std::string>& names() const noexcept { return names_; }
	std::size_t size() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
	std::size_t vertex_count() const noexcept { return neutral_.vertex_count(); }

	/// 3 x n block of displacements for one vertex.
	auto vertex_basis(std::size_t i) const { return basis_.middleRows(static_cast<Eigen::Index>(3 * i), 3); }

	Vec3 displacement(std::size_t k, std::size_t i) const
	{
		return basis_.block<3, 1>(static_cast<Eigen::Index>(3 * i), static_cast<Eigen::Index>(k));
	}

	Vec3 vertex(std::size_t i, const Eigen::VectorXd& x) const
	{
		return neutral_.vertices()[i] + vertex_basis(i) * x;
	}

private:
	Mesh neutral_;
	Eigen::MatrixXd basis_;
	std::vector<std::string> names_;
};

inline void require_size(const BlendshapeModel& model, const BscVector& x)
{
	if (x.size() != model.size()) {
		throw Error(ErrorCode::dimension, "coefficient vector has " + std::to_string(x.size()) +
		                                      " entries, model has " + std::to_string(model.size()));
	}
}

/// v(x) = b0 + B x
inline Mesh evaluate_mesh(const BlendshapeModel& model, const BscVector& x)
{
	require_size(model, x);
	const auto& neutral = model.neutral().vertices();
	const Eigen::VectorXd offsets = model.basis() * x.values();
	std::vector<Vec3> out(neutral.size());
	for (std::size_t i = 0; i < neutral.size(); ++i) {
		out[i] = neutral[i] + offsets.segment<3>(static_cast<Eigen::Index>(3 * i));
	}
	return model.neutral().with_vertices(std::move(out));
}

inline Mesh transform_mesh(const Mesh& mesh, const RigidPose& pose)
{
	std::vector<Vec3> out;
	out.reserve(mesh.vertex_count());
	for (const auto& v : mesh.vertices()) {
		out.push_back(pose.apply(v));
	}
	return mesh.with_vertices(std::move(out));
}

struct VertexNormals
{
	std::vector<Vec3> normals;
	/// Vertices with no non-degenerate incident face; their normal is zero.
	std::vector<std::size_t> isolated;
	bool ok() const noexcept { return isolated.empty(); }
};

/**
 * Area-weighted vertex normals. Faces follow the right-hand rule, so counter-clockwise
 * winding seen from +z yields +z normals.
 */
inline VertexNormals vertex_normals(const Mesh& mesh)
{
	const auto& v = mesh.vertices();
	VertexNormals result;
	result.normals.assign(v.size(), Vec3::Zero());
	for (const auto& t : mesh.faces()) {
		// The unnormalized cross product is already twice the area times the unit normal.
		const Vec3 n = (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]);
		for (int idx : t) {
			result.normals[static_cast<std::size_t>(idx)] += n;
		}
	}
	for (std::size_t i = 0; i < v.size(); ++i) {
		const double len = result.normals[i].norm();
		if (len > 0.0 && std::isfinite(len)) {
			result.normals[i] /= len;
		} else {
			result.normals[i].setZero();
			result.isolated.push_back(i);
		}
	}
	return result;
}

} // namespace facetrack

#endif // FACETRACK_GEOMETRY_HPP_
