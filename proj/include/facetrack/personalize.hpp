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

#ifndef FACETRACK_PERSONALIZE_HPP_
#define FACETRACK_PERSONALIZE_HPP_

#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/parallel.hpp"

#include "Eigen/Cholesky"
#include "Eigen/Core"
#include "Eigen/QR"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace facetrack {

/// 2D landmark observations of one example, with the camera and head pose that produced them.
struct ExampleLandmarks
{
	LandmarkSet landmarks;
	CameraIntrinsics intrinsics;
	RigidPose pose;
};

/**
 * A subject scan in model topology together with the prototype activation it shows
 * (for instance e_k for a pure "mouth open" blendshape; all zeros for neutral).
 */
struct ExampleExpression
{
	Mesh scan;
	BscVector activation;
	std::optional<ExampleLandmarks> landmarks;
};

struct PersonalizeConfig
{
	double basis_regularization = 1e-3; ///< lambda_B, pull towards the generic basis
	double landmark_weight = 10.0;      ///< per squared pixel
	int max_gn_iterations = 5;
	int threads = 1;

	void validate() const
	{
		if (!(basis_regularization >= 0.0 && landmark_weight >= 0.0) || max_gn_iterations < 1) {
			throw Error(ErrorCode::validation, "invalid personalization configuration");
		}
	}
};

namespace detail {

inline std::size_t find_neutral(const std::vector<ExampleExpression>& examples)
{
	for (std::size_t e = 0; e < examples.size(); ++e) {
		if (examples[e].activation.values().isZero(0.0)) {
			return e;
		}
	}
	throw Error(ErrorCode::validation, "personalization needs a neutral example (all-zero activation)");
}

inline void check_examples(const BlendshapeModel& generic, const std::vector<ExampleExpression>& examples)
{
	if (examples.empty()) {
		throw Error(ErrorCode::validation, "personalization needs at least one example");
	}
	for (std::size_t e = 0; e < examples.size(); ++e) {
		const auto& ex = examples[e];
		if (ex.scan.vertex_count() != generic.vertex_count()) {
			throw Error(ErrorCode::dimension, "example " + std::to_string(e) + " has " +
			                                      std::to_string(ex.scan.vertex_count()) + " vertices, model has " +
			                                      std::to_string(generic.vertex_count()));
		}
		if (ex.activation.size() != generic.size()) {
			throw Error(ErrorCode::dimension, "example " + std::to_string(e) + " activation has the wrong length");
		}
		if (ex.landmarks) {
			ex.landmarks->landmarks.require_vertices(generic.vertex_count());
		}
	}
}

} // namespace detail

/**
 * Value of the personalization objective
 *
 *   sum_e |b0 + B x_e - s_e|^2 + lambda_B |B - B_generic|_F^2
 *     + landmark_weight sum_e sum_j |pi(R_e (b0 + B x_e)_j + t_e) - u_ej|^2
 *
 * for a candidate neutral b0 and basis B.
 */
inline double personalize_objective(const Mesh& neutral, const Eigen::MatrixXd& basis,
                                    const BlendshapeModel& generic, const std::vector<ExampleExpression>& examples,
                                    const PersonalizeConfig& cfg)
{
	const std::size_t V = neutral.vertex_count();
	double total = cfg.basis_regularization * (basis - generic.basis()).squaredNorm();
	for (const auto& ex : examples) {
		const Eigen::VectorXd offsets = basis * ex.activation.values();
		for (std::size_t i = 0; i < V; ++i) {
			const Vec3 v = neutral.vertices()[i] + offsets.segment<3>(static_cast<Eigen::Index>(3 * i));
			total += (v - ex.scan.vertices()[i]).squaredNorm();
		}
		if (ex.landmarks && cfg.landmark_weight > 0.0) {
			for (const auto& lm : ex.landmarks->landmarks.entries()) {
				const Vec3 v = neutral.vertices()[lm.vertex_index] +
				               offsets.segment<3>(static_cast<Eigen::Index>(3 * lm.vertex_index));
				total += cfg.landmark_weight * landmark_residual(ex.landmarks->pose.apply(v),
				                                                 ex.landmarks->intrinsics, Vec2(lm.u, lm.v));
			}
		}
	}
	return total;
}

/**
 * Adapts a generic blendshape basis to a subject from example scans with known
 * activations.
 *
 * The neutral example's scan becomes the new neutral. Every vertex then gets its own
 * regularized least-squares problem in its 3 x n block of the basis. Vertices without
 * landmark observations share the n x n normal matrix X^T X + lambda_B I, which is
 * factored once. Vertices with landmarks solve the coupled 3n system with the
 * linearized reprojection rows added, relinearized up to cfg.max_gn_iterations times.
 *
 * @throws Error rank_deficiency when lambda_B is zero and the activations do not span
 *         all n blendshapes.
 */
inline BlendshapeModel personalize(const BlendshapeModel& generic, const std::vector<ExampleExpression>& examples,
                                   const PersonalizeConfig& cfg = {})
{
	cfg.validate();
	detail::check_examples(generic, examples);
	const std::size_t neutral_index = detail::find_neutral(examples);
	const Mesh& neutral = examples[neutral_index].scan;
	require_nondegenerate(neutral);

	const auto n = static_cast<Eigen::Index>(generic.size());
	const auto E = static_cast<Eigen::Index>(examples.size());
	const std::size_t V = generic.vertex_count();
	const auto rows3 = static_cast<Eigen::Index>(3 * V);
	const double lambda = cfg.basis_regularization;

	Eigen::MatrixXd X(E, n);
	Eigen::MatrixXd offsets(E, rows3); // s_e - b0, one row per example
	for (Eigen::Index e = 0; e < E; ++e) {
		const auto& ex = examples[static_cast<std::size_t>(e)];
		X.row(e) = ex.activation.values().transpose();
		for (std::size_t i = 0; i < V; ++i) {
			offsets.block<1, 3>(e, static_cast<Eigen::Index>(3 * i)) =
			    (ex.scan.vertices()[i] - neutral.vertices()[i]).transpose();
		}
	}

	const Eigen::MatrixXd gram = X.transpose() * X + lambda * Eigen::MatrixXd::Identity(n, n);
	if (lambda == 0.0) {
		const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
		if (qr.rank() < n) {
			throw Error(ErrorCode::rank_deficiency, "example activations span " + std::to_string(qr.rank()) + " of " +
			                                            std::to_string(n) +
			                                            " blendshapes; add examples or set lambda_B > 0");
		}
	}
	const Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);

	// Data-only solution for every vertex: B^T = gram^-1 (X^T offsets + lambda B_generic^T).
	const Eigen::MatrixXd rhs = X.transpose() * offsets + lambda * generic.basis().transpose();
	Eigen::MatrixXd basis = gram_ldlt.solve(rhs).transpose();

	if (cfg.landmark_weight > 0.0) {
		// Landmark observations grouped by vertex: (example, landmark).
		std::vector<std::vector<std::pair<std::size_t, std::size_t>>> observed(V);
		for (std::size_t e = 0; e < examples.size(); ++e) {
			if (!examples[e].landmarks) {
				continue;
			}
			const auto& entries = examples[e].landmarks->landmarks.entries();
			for (std::size_t j = 0; j < entries.size(); ++j) {
				observed[entries[j].vertex_index].emplace_back(e, j);
			}
		}
		std::vector<std::size_t> constrained;
		for (std::size_t i = 0; i < V; ++i) {
			if (!observed[i].empty()) {
				constrained.push_back(i);
			}
		}

		const Eigen::Index m = 3 * n;
		// gram (x) I3 in the vec ordering 3k + c of a 3 x n block.
		Eigen::MatrixXd base = Eigen::MatrixXd::Zero(m, m);
		for (Eigen::Index a = 0; a < n; ++a) {
			for (Eigen::Index b = 0; b < n; ++b) {
				base.block<3, 3>(3 * a, 3 * b) = gram(a, b) * Mat3::Identity();
			}
		}

		parallel_for(constrained.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
			for (std::size_t idx = begin; idx < end; ++idx) {
				const std::size_t i = constrained[idx];
				const auto row0 = static_cast<Eigen::Index>(3 * i);
				Eigen::VectorXd data_rhs(m);
				for (Eigen::Index k = 0; k < n; ++k) {
					data_rhs.segment<3>(3 * k) = rhs.block<1, 3>(k, row0).transpose();
				}
				Eigen::MatrixXd block = basis.middleRows(row0, 3);
				for (int it = 0; it < cfg.max_gn_iterations; ++it) {
					Eigen::MatrixXd normal = base;
					Eigen::VectorXd vec_rhs = data_rhs;
					for (const auto& [e, j] : observed[i]) {
						const auto& ex = examples[e];
						const auto& obs = *ex.landmarks;
						const auto& lm = obs.landmarks.entries()[j];
						const Eigen::VectorXd& x = ex.activation.values();
						const Vec3 p = obs.pose.apply(neutral.vertices()[i] + block * x);
						const Eigen::Matrix<double, 2, 3> JR =
						    landmark_jacobian(p, obs.intrinsics) * obs.pose.rotation_matrix();
						Eigen::MatrixXd D(2, m);
						for (Eigen::Index k = 0; k < n; ++k) {
							D.middleCols<3>(3 * k) = x[k] * JR;
						}
						Eigen::VectorXd current(m);
						for (Eigen::Index k = 0; k < n; ++k) {
							current.segment<3>(3 * k) = block.col(k);
						}
						const Vec2 target = Vec2(lm.u, lm.v) - project(obs.intrinsics, p) + D * current;
						normal.noalias() += cfg.landmark_weight * D.transpose() * D;
						vec_rhs.noalias() += cfg.landmark_weight * D.transpose() * target;
					}
					const Eigen::VectorXd solved = normal.ldlt().solve(vec_rhs);
					Eigen::MatrixXd next(3, n);
					for (Eigen::Index k = 0; k < n; ++k) {
						next.col(k) = solved.segment<3>(3 * k);
					}
					const double change = (next - block).norm();
					block = next;
					if (change <= 1e-12 * (1.0 + block.norm())) {
						break;
					}
				}
				basis.middleRows(row0, 3) = block;
			}
		});
	}

	return BlendshapeModel(neutral, std::move(basis), generic.names());
}

} // namespace facetrack

#endif // FACETRACK_PERSONALIZE_HPP_
