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

#ifndef FACETRACK_CORRESPONDENCE_HPP_
#define FACETRACK_CORRESPONDENCE_HPP_

#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"

#include "Eigen/Core"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace facetrack {

/**
 * Metric depth image, row-major, one value per pixel. A value of exactly 0 marks an
 * invalid pixel.
 */
class DepthFrame
{
public:
	DepthFrame() = default;

	DepthFrame(int width, int height, std::vector<float> depth, int frame_index = 0, double timestamp = 0.0)
	    : width_(width), height_(height), depth_(std::move(depth)), frame_index_(frame_index), timestamp_(timestamp)
	{
		if (width < 0 || height < 0) {
			throw Error(ErrorCode::validation, "negative frame size");
		}
		if (depth_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
			throw Error(ErrorCode::dimension, "depth frame " + std::to_string(width) + "x" + std::to_string(height) +
			                                      " holds " + std::to_string(depth_.size()) + " values");
		}
		for (std::size_t i = 0; i < depth_.size(); ++i) {
			if (!(std::isfinite(depth_[i]) && depth_[i] >= 0.0f)) {
				throw Error(ErrorCode::validation, "depth value " + std::to_string(i) + " is negative or not finite");
			}
		}
	}

	/// All pixels invalid.
	static DepthFrame empty(int width, int height, int frame_index = 0, double timestamp = 0.0)
	{
		return DepthFrame(width, height,
		                  std::vector<float>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0f),
		                  frame_index, timestamp);
	}

	int width() const noexcept { return width_; }
	int height() const noexcept { return height_; }
	int frame_index() const noexcept { return frame_index_; }
	double timestamp() const noexcept { return timestamp_; }
	const std::vector<float>& values() const noexcept { return depth_; }

	float at(int col, int row) const
	{
		return depth_[static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)];
	}

	bool inside(int col, int row) const noexcept { return col >= 0 && row >= 0 && col < width_ && row < height_; }

	std::size_t valid_count() const noexcept
	{
		std::size_t count = 0;
		for (float d : depth_) {
			count += d > 0.0f ? 1 : 0;
		}
		return count;
	}

private:
	int width_ = 0;
	int height_ = 0;
	std::vector<float> depth_;
	int frame_index_ = 0;
	double timestamp_ = 0.0;
};

/// A mesh vertex matched to a point on the observed surface and that surface's normal.
struct DepthCorrespondence
{
	std::size_t vertex_index = 0;
	Vec3 target_point = Vec3::Zero();
	Vec3 target_normal = Vec3::UnitZ();
};

struct Landmark
{
	std::string id;
	std::size_t vertex_index = 0;
	double u = 0.0;
	double v = 0.0;
	double confidence = 1.0;
};

/**
 * Detected 2D landmarks for one image, each tied to a model vertex.
 */
class LandmarkSet
{
public:
	LandmarkSet() = default;

	LandmarkSet(int width, int height, std::vector<Landmark> entries)
	    : width_(width), height_(height), entries_(std::move(entries))
	{
		for (const auto& e : entries_) {
			if (!(e.u >= 0.0 && e.v >= 0.0 && e.u < width_ && e.v < height_)) {
				throw Error(ErrorCode::validation, "landmark '" + e.id + "' lies outside the " + std::to_string(width_) +
				                                       "x" + std::to_string(height_) + " image");
			}
			if (!(e.confidence >= 0.0 && e.confidence <= 1.0)) {
				throw Error(ErrorCode::validation, "landmark '" + e.id + "' confidence outside [0,1]");
			}
		}
	}

	int width() const noexcept { return width_; }
	int height() const noexcept { return height_; }
	const std::vector<Landmark>& entries() const noexcept { return entries_; }
	std::size_t size() const noexcept { return entries_.size(); }
	bool empty() const noexcept { return entries_.empty(); }

	void require_vertices(std::size_t vertex_count) const
	{
		for (const auto& e : entries_) {
			if (e.vertex_index >= vertex_count) {
				throw Error(ErrorCode::validation, "landmark '" + e.id + "' references vertex " +
				                                       std::to_string(e.vertex_index) + " of " +
				                                       std::to_string(vertex_count));
			}
		}
	}

private:
	int width_ = 0;
	int height_ = 0;
	std::vector<Landmark> entries_;
};

/// Robustness gates for projective data association.
struct GateConfig
{
	double max_point_distance = 0.02; ///< metres
	double max_normal_angle = 60.0;   ///< degrees
	int depth_window = 1;             ///< pixels, half-width of the normal stencil

	void validate() const
	{
		if (!(max_point_distance > 0.0 && max_normal_angle > 0.0 && depth_window > 0)) {
			throw Error(ErrorCode::validation, "gate parameters must be positive");
		}
	}
};

namespace detail {

inline std::optional<Vec3> pixel_point(const DepthFrame& frame, const CameraIntrinsics& intr, int col, int row)
{
	if (!frame.inside(col, row)) {
		return std::nullopt;
	}
	const float d = frame.at(col, row);
	if (!(d > 0.0f)) {
		return std::nullopt;
	}
	return backproject(intr, col + 0.5, row + 0.5, d);
}

/// Inverse depth interpolated bilinearly between pixel centres; exact on planes.
inline std::optional<double> interpolated_depth(const DepthFrame& frame, double u, double v)
{
	const double fu = u - 0.5;
	const double fv = v - 0.5;
	const int c0 = static_cast<int>(std::floor(fu));
	const int r0 = static_cast<int>(std::floor(fv));
	if (!frame.inside(c0, r0) || !frame.inside(c0 + 1, r0 + 1)) {
		return std::nullopt;
	}
	const double d00 = frame.at(c0, r0);
	const double d10 = frame.at(c0 + 1, r0);
	const double d01 = frame.at(c0, r0 + 1);
	const double d11 = frame.at(c0 + 1, r0 + 1);
	if (!(d00 > 0.0 && d10 > 0.0 && d01 > 0.0 && d11 > 0.0)) {
		return std::nullopt;
	}
	const double a = fu - c0;
	const double b = fv - r0;
	const double inv = (1 - a) * (1 - b) / d00 + a * (1 - b) / d10 + (1 - a) * b / d01 + a * b / d11;
	return 1.0 / inv;
}

} // namespace detail

/**
 * Projective association: the vertex (camera coordinates) is projected into the depth
 * map and the observed surface point is read back along the same pixel ray. Inverse
 * depth is interpolated between the four surrounding pixel centres when all are valid,
 * otherwise the containing pixel's own back-projected centre is the target. The normal comes from central
 * differences of back-projected neighbours at the containing pixel and is oriented
 * towards the camera.
 *
 * The angle gate compares against vertex_normal when given, otherwise against the
 * direction back to the camera.
 */
inline std::optional<DepthCorrespondence> find_correspondence(std::size_t vertex_index, const Vec3& vertex_cam,
                                                              const DepthFrame& frame, const CameraIntrinsics& intr,
                                                              const GateConfig& gates,
                                                              const std::optional<Vec3>& vertex_normal = std::nullopt)
{
	if (!(vertex_cam.z() > 0.0)) {
		return std::nullopt;
	}
	const Vec2 uv = project(intr, vertex_cam);
	if (!intr.contains(uv.x(), uv.y()) || !(uv.x() < frame.width() && uv.y() < frame.height())) {
		return std::nullopt;
	}
	const int col = static_cast<int>(std::floor(uv.x()));
	const int row = static_cast<int>(std::floor(uv.y()));
	const float raw = frame.at(col, row);
	if (!(raw > 0.0f)) {
		return std::nullopt;
	}
	const auto depth = detail::interpolated_depth(frame, uv.x(), uv.y());
	const Vec3 target = depth ? backproject(intr, uv.x(), uv.y(), *depth) : backproject(intr, col + 0.5, row + 0.5, raw);
	if ((vertex_cam - target).norm() > gates.max_point_distance) {
		return std::nullopt;
	}

	const int w = gates.depth_window;
	const auto left = detail::pixel_point(frame, intr, col - w, row);
	const auto right = detail::pixel_point(frame, intr, col + w, row);
	const auto up = detail::pixel_point(frame, intr, col, row - w);
	const auto down = detail::pixel_point(frame, intr, col, row + w);
	if (!left || !right || !up || !down) {
		return std::nullopt;
	}
	Vec3 normal = (*right - *left).cross(*down - *up);
	const double len = normal.norm();
	if (!(len > 0.0)) {
		return std::nullopt;
	}
	normal /= len;
	if (normal.dot(target) > 0.0) {
		normal = -normal;
	}

	const Vec3 reference = vertex_normal ? vertex_normal->normalized() : Vec3(-target.normalized());
	const double cos_limit = std::cos(gates.max_normal_angle * std::numbers::pi / 180.0);
	if (normal.dot(reference) < cos_limit) {
		return std::nullopt;
	}
	return DepthCorrespondence{vertex_index, target, normal};
}

/// (n^T (v - v_bar))^2, in square metres.
inline double depth_residual(const Vec3& vertex, const DepthCorrespondence& corr)
{
	const double r = corr.target_normal.dot(vertex - corr.target_point);
	return r * r;
}

/// Squared pixel distance between the projected vertex and the detection.
inline double landmark_residual(const Vec3& vertex_cam, const CameraIntrinsics& intr, const Vec2& detection)
{
	return (project(intr, vertex_cam) - detection).squaredNorm();
}

/// Jacobian of the pinhole projection with respect to the camera-frame point.
inline Eigen::Matrix<double, 2, 3> landmark_jacobian(const Vec3& p, const CameraIntrinsics& intr)
{
	if (!(p.z() > 0.0)) {
		throw Error(ErrorCode::behind_camera, "projection Jacobian undefined for z <= 0");
	}
	const double iz = 1.0 / p.z();
	Eigen::Matrix<double, 2, 3> J;
	J << intr.fx() * iz, 0.0, -intr.fx() * p.x() * iz * iz,
	     0.0, intr.fy() * iz, -intr.fy() * p.y() * iz * iz;
	return J;
}

} // namespace facetrack

#endif // FACETRACK_CORRESPONDENCE_HPP_
