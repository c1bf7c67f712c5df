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

#ifndef FACETRACK_RIGID_ICP_HPP_
#define FACETRACK_RIGID_ICP_HPP_

#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/parallel.hpp"

#include "Eigen/Core"
#include "Eigen/Eigenvalues"

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace facetrack {

struct IcpConfig
{
	int max_iterations = 30;
	double translation_epsilon = 1e-5; ///< metres
	double rotation_epsilon = 1e-3;    ///< degrees
	GateConfig gates;
	int min_correspondences = 10;
	int max_step_halvings = 4;
	/// Weight of squared landmark pixel errors relative to squared point-to-plane metres.
	/// Zero gives pure depth ICP.
	double landmark_weight = 0.0;
	int threads = 1;

	void validate() const
	{
		if (max_iterations < 1 || !(translation_epsilon > 0.0) || !(rotation_epsilon > 0.0) ||
		    min_correspondences < 6 || max_step_halvings < 0 || !(landmark_weight >= 0.0)) {
			throw Error(ErrorCode::validation, "invalid ICP configuration");
		}
		gates.validate();
	}
};

struct IcpIteration
{
	std::size_t correspondences = 0;
	double mean_error = 0.0; ///< mean squared point-to-plane distance at the accepted pose, m^2
	double landmark_error = 0.0; ///< sum of squared landmark pixel errors, px^2
	int halvings = 0;
	bool accepted = false;
};

struct IcpResult
{
	RigidPose pose;
	std::vector<IcpIteration> iterations;
	bool converged = false;
	std::size_t final_correspondences = 0;
	double final_mean_error = 0.0;
};

/// Projective correspondences for every vertex of the model-space mesh under pose.
inline std::vector<DepthCorrespondence> gather_correspondences(const Mesh& mesh, const std::vector<Vec3>& normals,
                                                               const RigidPose& pose, const DepthFrame& frame,
                                                               const CameraIntrinsics& intr, const GateConfig& gates,
                                                               int threads = 1)
{
	const Mat3 R = pose.rotation_matrix();
	const auto& verts = mesh.vertices();
	std::vector<std::optional<DepthCorrespondence>> slots(verts.size());
	parallel_for(verts.size(), threads, [&](std::size_t begin, std::size_t end) {
		for (std::size_t i = begin; i < end; ++i) {
			std::optional<Vec3> n;
			if (normals[i].squaredNorm() > 0.0) {
				n = R * normals[i];
			}
			slots[i] = find_correspondence(i, R * verts[i] + pose.translation(), frame, intr, gates, n);
		}
	});
	std::vector<DepthCorrespondence> out;
	for (auto& s : slots) {
		if (s) {
			out.push_back(*s);
		}
	}
	return out;
}

namespace detail {

inline double mean_point_to_plane(const Mesh& mesh, const RigidPose& pose,
                                  const std::vector<DepthCorrespondence>& corrs)
{
	if (corrs.empty()) {
		return 0.0;
	}
	double sum = 0.0;
	for (const auto& c : corrs) {
		sum += depth_residual(pose.apply(mesh.vertices()[c.vertex_index]), c);
	}
	return sum / static_cast<double>(corrs.size());
}

inline double landmark_sum(const Mesh& mesh, const RigidPose& pose, const LandmarkSet* landmarks,
                           const CameraIntrinsics& intr)
{
	double sum = 0.0;
	if (landmarks != nullptr) {
		for (const auto& lm : landmarks->entries()) {
			const Vec3 p = pose.apply(mesh.vertices()[lm.vertex_index]);
			if (!(p.z() > 0.0)) {
				return std::numeric_limits<double>::infinity();
			}
			sum += landmark_residual(p, intr, Vec2(lm.u, lm.v));
		}
	}
	return sum;
}

/// Left-multiplies pose by the rigid motion with rotation vector omega and translation tau.
inline RigidPose apply_twist(const RigidPose& pose, const Vec3& omega, const Vec3& tau)
{
	const double angle = omega.norm();
	const Eigen::Quaterniond dq = angle > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle))
	                                          : Eigen::Quaterniond::Identity();
	const Eigen::Quaterniond q = (dq * pose.rotation()).normalized();
	return RigidPose(q, dq * pose.translation() + tau);
}

} // namespace detail

/**
 * Point-to-plane ICP against a single depth frame.
 *
 * Each iteration associates vertices projectively, then solves the small-angle
 * linearization r_i + (p_i x n_i) . omega + n_i . tau = 0 in the least-squares sense
 * (6x6 normal equations). A step that raises the mean point-to-plane error is halved
 * up to cfg.max_step_halvings times; if it still does not descend, iteration stops at
 * the last accepted pose.
 *
 * When landmarks are given and cfg.landmark_weight > 0, the squared landmark
 * reprojection errors join the normal equations and the acceptance test, which then
 * compares mean_error + landmark_weight * landmark_error / correspondences.
 *
 * @param[in] mesh Mesh in model coordinates.
 * @param[in] init Initial model-to-camera pose.
 * @throws Error insufficient_data when fewer than cfg.min_correspondences matches are
 *         found at an accepted pose, degenerate_geometry when the normal equations are
 *         singular.
 */
inline IcpResult align_rigid(const Mesh& mesh, const DepthFrame& frame, const CameraIntrinsics& intr,
                             const RigidPose& init, const IcpConfig& cfg, const LandmarkSet* landmarks = nullptr)
{
	cfg.validate();
	if (mesh.empty()) {
		throw Error(ErrorCode::validation, "cannot align an empty mesh");
	}
	const auto normals = vertex_normals(mesh).normals;
	const auto min_corr = static_cast<std::size_t>(cfg.min_correspondences);
	const LandmarkSet* lms = cfg.landmark_weight > 0.0 ? landmarks : nullptr;
	if (lms != nullptr) {
		lms->require_vertices(mesh.vertex_count());
	}
	const auto rigid_error = [&](double mean_depth, double lm_sum, std::size_t count) {
		return mean_depth + cfg.landmark_weight * lm_sum / static_cast<double>(std::max<std::size_t>(count, 1));
	};

	IcpResult result;
	RigidPose pose = init;
	auto corrs = gather_correspondences(mesh, normals, pose, frame, intr, cfg.gates, cfg.threads);
	if (corrs.size() < min_corr) {
		throw Error(ErrorCode::insufficient_data, "ICP found " + std::to_string(corrs.size()) +
		                                              " correspondences, needs " + std::to_string(min_corr));
	}
	double error = detail::mean_point_to_plane(mesh, pose, corrs);
	double lm_error = detail::landmark_sum(mesh, pose, lms, intr);

	for (int it = 0; it < cfg.max_iterations; ++it) {
		Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
		Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
		for (const auto& c : corrs) {
			const Vec3 p = pose.apply(mesh.vertices()[c.vertex_index]);
			const Vec3& n = c.target_normal;
			Eigen::Matrix<double, 6, 1> row;
			row << p.cross(n), n;
			const double r = n.dot(p - c.target_point);
			A.selfadjointView<Eigen::Lower>().rankUpdate(row);
			b -= row * r;
		}
		if (lms != nullptr) {
			for (const auto& lm : lms->entries()) {
				const Vec3 p = pose.apply(mesh.vertices()[lm.vertex_index]);
				Eigen::Matrix<double, 3, 6> dp;
				dp << -(Mat3() << 0.0, -p.z(), p.y(), p.z(), 0.0, -p.x(), -p.y(), p.x(), 0.0).finished(),
				    Mat3::Identity();
				const Eigen::Matrix<double, 2, 6> Jt = landmark_jacobian(p, intr) * dp;
				const Vec2 r = project(intr, p) - Vec2(lm.u, lm.v);
				A.selfadjointView<Eigen::Lower>().rankUpdate(Jt.transpose(), cfg.landmark_weight);
				b -= cfg.landmark_weight * Jt.transpose() * r;
			}
		}
		A.triangularView<Eigen::StrictlyUpper>() = A.transpose();

		const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(A);
		const double max_ev = eig.eigenvalues().maxCoeff();
		if (!(max_ev > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * max_ev) {
			throw Error(ErrorCode::degenerate_geometry, "point-to-plane normal equations are singular");
		}
		const Eigen::Matrix<double, 6, 1> step = A.ldlt().solve(b);

		IcpIteration diag;
		double scale = 1.0;
		bool accepted = false;
		RigidPose candidate = pose;
		std::vector<DepthCorrespondence> candidate_corrs;
		double candidate_error = error;
		double candidate_lm = lm_error;
		for (int h = 0; h <= cfg.max_step_halvings; ++h) {
			candidate = detail::apply_twist(pose, scale * step.head<3>(), scale * step.tail<3>());
			candidate_corrs = gather_correspondences(mesh, normals, candidate, frame, intr, cfg.gates, cfg.threads);
			if (candidate_corrs.size() >= min_corr) {
				candidate_error = detail::mean_point_to_plane(mesh, candidate, candidate_corrs);
				candidate_lm = detail::landmark_sum(mesh, candidate, lms, intr);
				if (rigid_error(candidate_error, candidate_lm, candidate_corrs.size()) <=
				    rigid_error(error, lm_error, corrs.size())) {
					accepted = true;
					diag.halvings = h;
					break;
				}
			}
			scale *= 0.5;
		}
		if (!accepted) {
			diag.correspondences = corrs.size();
			diag.mean_error = error;
			diag.landmark_error = lm_error;
			diag.halvings = cfg.max_step_halvings;
			result.iterations.push_back(diag);
			break;
		}

		pose = candidate;
		corrs = std::move(candidate_corrs);
		error = candidate_error;
		lm_error = candidate_lm;
		diag.accepted = true;
		diag.correspondences = corrs.size();
		diag.mean_error = error;
		diag.landmark_error = lm_error;
		result.iterations.push_back(diag);

		const double dt = scale * step.tail<3>().norm();
		const double dr = scale * step.head<3>().norm() * 180.0 / std::numbers::pi;
		if (dt < cfg.translation_epsilon && dr < cfg.rotation_epsilon) {
			result.converged = true;
			break;
		}
	}

	result.pose = pose;
	result.final_correspondences = corrs.size();
	result.final_mean_error = error;
	return result;
}

} // namespace facetrack

#endif // FACETRACK_RIGID_ICP_HPP_
