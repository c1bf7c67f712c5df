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

#ifndef FACETRACK_BSC_SOLVER_HPP_
#define FACETRACK_BSC_SOLVER_HPP_

#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/parallel.hpp"
#include "facetrack/rigid_icp.hpp"
#include "facetrack/sequence.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace facetrack {

/**
 * Weights and schedule for the per-frame solve
 *
 *   min_x  w_d sum_i D_i(x) + w_l sum_j L_j(x) + w_r |x|_1,   x in [0,1]^n
 *
 * with raw (unaveraged) sums. D_i is in square metres and L_j in square pixels, so
 * the weights carry the unit conversion.
 */
struct SolverConfig
{
	double w_d = 1e4;
	double w_l = 0.2;
	double w_r = 0.05;
	int outer_iterations = 100;
	int gs_sweeps = 50;
	double objective_rel_tol = 1e-6;
	int max_step_halvings = 4;
	GateConfig gates;
	IcpConfig icp;
	/// Pose used for a frame without a previous fit; when unset the head is assumed
	/// frontal and placed at the centroid of the valid depth.
	std::optional<RigidPose> initial_pose;
	int threads = 1;

	void validate() const
	{
		if (!(w_d >= 0.0 && w_l >= 0.0 && w_r >= 0.0)) {
			throw Error(ErrorCode::validation, "solver weights must be non-negative");
		}
		if (outer_iterations < 1 || gs_sweeps < 1 || !(objective_rel_tol > 0.0) || max_step_halvings < 0) {
			throw Error(ErrorCode::validation, "invalid solver iteration settings");
		}
		gates.validate();
		icp.validate();
	}
};

/// q(x) = 1/2 x^T H x + g^T x + c
struct QuadraticForm
{
	Eigen::MatrixXd H;
	Eigen::VectorXd g;
	double c = 0.0;

	double value(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x) + c; }
};

/**
 * Quadratic model of the data terms around x_lin.
 *
 * Each depth term is exactly quadratic in x since vertices are affine in x. Landmark
 * terms use their Gauss-Newton model, linearizing the projection at x_lin, so q(x_lin)
 * equals the true data objective there. Rows are formed per correspondence (optionally
 * in parallel) and reduced serially in a fixed order.
 */
inline QuadraticForm assemble_quadratic(const BlendshapeModel& model, const RigidPose& pose,
                                        const std::vector<DepthCorrespondence>& corrs, const LandmarkSet& landmarks,
                                        const CameraIntrinsics& intr, const BscVector& x_lin, const SolverConfig& cfg)
{
	require_size(model, x_lin);
	if (corrs.empty() && landmarks.empty()) {
		throw Error(ErrorCode::no_data, "no depth correspondences and no landmarks");
	}
	landmarks.require_vertices(model.vertex_count());
	const auto n = static_cast<Eigen::Index>(model.size());
	const Mat3 R = pose.rotation_matrix();
	const Vec3& t = pose.translation();
	const auto& b0 = model.neutral().vertices();

	QuadraticForm q{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};

	if (!corrs.empty() && cfg.w_d > 0.0) {
		const auto m = static_cast<Eigen::Index>(corrs.size());
		Eigen::MatrixXd rows(m, n);
		Eigen::VectorXd offsets(m);
		parallel_for(corrs.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
			for (std::size_t r = begin; r < end; ++r) {
				const auto& c = corrs[r];
				if (c.vertex_index >= b0.size()) {
					throw Error(ErrorCode::validation, "correspondence references a missing vertex");
				}
				const Vec3 n_model = R.transpose() * c.target_normal;
				rows.row(static_cast<Eigen::Index>(r)) = n_model.transpose() * model.vertex_basis(c.vertex_index);
				offsets[static_cast<Eigen::Index>(r)] =
				    c.target_normal.dot(R * b0[c.vertex_index] + t - c.target_point);
			}
		});
		q.H.noalias() += (2.0 * cfg.w_d) * rows.transpose() * rows;
		q.g.noalias() += (2.0 * cfg.w_d) * rows.transpose() * offsets;
		q.c += cfg.w_d * offsets.squaredNorm();
	}

	if (!landmarks.empty() && cfg.w_l > 0.0) {
		const auto m = static_cast<Eigen::Index>(2 * landmarks.size());
		Eigen::MatrixXd rows(m, n);
		Eigen::VectorXd offsets(m);
		for (std::size_t j = 0; j < landmarks.size(); ++j) {
			const auto& lm = landmarks.entries()[j];
			const auto vb = model.vertex_basis(lm.vertex_index);
			const Vec3 p = R * (b0[lm.vertex_index] + vb * x_lin.values()) + t;
			const Eigen::Matrix<double, 2, 3> J = landmark_jacobian(p, intr);
			const Eigen::Matrix<double, 2, Eigen::Dynamic> A = J * R * vb;
			const Vec2 r0 = project(intr, p) - Vec2(lm.u, lm.v);
			const auto row = static_cast<Eigen::Index>(2 * j);
			rows.middleRows(row, 2) = A;
			offsets.segment<2>(row) = r0 - A * x_lin.values();
		}
		q.H.noalias() += (2.0 * cfg.w_l) * rows.transpose() * rows;
		q.g.noalias() += (2.0 * cfg.w_l) * rows.transpose() * offsets;
		q.c += cfg.w_l * offsets.squaredNorm();
	}

	// Exact symmetry regardless of how the products above were blocked.
	q.H = 0.5 * (q.H + q.H.transpose()).eval();
	return q;
}

/// sign(r) max(|r| - threshold, 0); a tie at |r| == threshold gives 0.
inline double soft_threshold(double r, double threshold)
{
	if (r > threshold) {
		return r - threshold;
	}
	if (r < -threshold) {
		return r + threshold;
	}
	return 0.0;
}

inline double l1_box_objective(const QuadraticForm& q, double w_r, const Eigen::VectorXd& x)
{
	return q.value(x) + w_r * x.cwiseAbs().sum();
}

struct L1BoxResult
{
	BscVector x;
	/// Objective at x0 followed by the objective after every sweep.
	std::vector<double> objective_trace;
	/// Objective after every single coordinate update; filled only when requested.
	std::vector<double> update_trace;
	/// Coordinates with H_kk == 0, held at their starting value.
	std::vector<std::size_t> frozen;
	int sweeps = 0;
	bool converged = false;
};

/**
 * Minimizes q(x) + w_r |x|_1 over [0,1]^n by cyclic coordinate descent
 * (Gauss-Seidel). Each coordinate is set to its exact one-dimensional minimizer
 *
 *   x_k = clamp(soft_threshold(r_k, w_r) / H_kk, 0, 1),  r_k = -(g_k + sum_{j != k} H_kj x_j),
 *
 * so the objective never increases. Iteration stops when a sweep changes the
 * objective by less than tol relative to its previous value, or after `sweeps`
 * sweeps.
 */
inline L1BoxResult solve_l1_box(const QuadraticForm& q, double w_r, const BscVector& x0, int sweeps, double tol,
                                bool record_updates = false)
{
	const Eigen::Index n = q.g.size();
	if (q.H.rows() != n || q.H.cols() != n || static_cast<Eigen::Index>(x0.size()) != n) {
		throw Error(ErrorCode::dimension, "quadratic form and start vector sizes disagree");
	}
	if (!(w_r >= 0.0)) {
		throw Error(ErrorCode::validation, "w_r must be non-negative");
	}
	L1BoxResult out;
	Eigen::VectorXd x = x0.values();
	Eigen::VectorXd grad = q.H * x + q.g;
	for (Eigen::Index k = 0; k < n; ++k) {
		if (!(q.H(k, k) > 0.0)) {
			out.frozen.push_back(static_cast<std::size_t>(k));
		}
	}

	double f = l1_box_objective(q, w_r, x);
	out.objective_trace.push_back(f);
	for (int s = 0; s < sweeps; ++s) {
		for (Eigen::Index k = 0; k < n; ++k) {
			const double hkk = q.H(k, k);
			if (!(hkk > 0.0)) {
				continue;
			}
			const double old = x[k];
			const double r = -(grad[k] - hkk * old);
			const double updated = std::clamp(soft_threshold(r, w_r) / hkk, 0.0, 1.0);
			const double delta = updated - old;
			if (delta != 0.0) {
				x[k] = updated;
				grad.noalias() += q.H.col(k) * delta;
			}
			if (record_updates) {
				out.update_trace.push_back(l1_box_objective(q, w_r, x));
			}
		}
		out.sweeps = s + 1;
		const double f_new = l1_box_objective(q, w_r, x);
		out.objective_trace.push_back(f_new);
		const double change = std::abs(f - f_new);
		f = f_new;
		if (change <= tol * std::abs(f) || change == 0.0) {
			out.converged = true;
			break;
		}
	}
	out.x = BscVector(std::move(x));
	return out;
}

/// Result of fitting one frame.
struct FrameFit
{
	RigidPose pose;
	BscVector x;
	/// Full objective at the start state, then after every accepted outer iteration.
	std::vector<double> objective_trace;
	std::size_t correspondence_count = 0;
	std::size_t landmark_count = 0;
	int outer_iterations = 0;
	bool converged = false;
	bool rigid_skipped = false;
	std::vector<std::size_t> frozen;
};

namespace detail {

struct DataTerms
{
	double depth = 0.0;    ///< sum_i D_i, m^2
	double landmark = 0.0; ///< sum_j L_j, px^2
	std::size_t correspondences = 0;
};

inline DataTerms evaluate_data_terms(const Mesh& expression, const RigidPose& pose,
                                     const DepthFrame& frame, const LandmarkSet& landmarks,
                                     const CameraIntrinsics& intr, const SolverConfig& cfg,
                                     std::vector<DepthCorrespondence>* corrs_out = nullptr)
{
	DataTerms terms;
	const auto normals = vertex_normals(expression).normals;
	auto corrs = gather_correspondences(expression, normals, pose, frame, intr, cfg.gates, cfg.threads);
	for (const auto& c : corrs) {
		terms.depth += depth_residual(pose.apply(expression.vertices()[c.vertex_index]), c);
	}
	for (const auto& lm : landmarks.entries()) {
		const Vec3 p = pose.apply(expression.vertices()[lm.vertex_index]);
		terms.landmark += landmark_residual(p, intr, Vec2(lm.u, lm.v));
	}
	terms.correspondences = corrs.size();
	if (corrs_out != nullptr) {
		*corrs_out = std::move(corrs);
	}
	return terms;
}

inline double full_objective(const DataTerms& terms, const BscVector& x, const SolverConfig& cfg)
{
	return cfg.w_d * terms.depth + cfg.w_l * terms.landmark + cfg.w_r * x.values().cwiseAbs().sum();
}

/// Frontal pose that moves the neutral centroid onto the centroid of the valid depth.
inline std::optional<RigidPose> centroid_pose(const BlendshapeModel& model, const DepthFrame& frame,
                                              const CameraIntrinsics& intr)
{
	Vec3 sum = Vec3::Zero();
	std::size_t count = 0;
	for (int row = 0; row < frame.height(); ++row) {
		for (int col = 0; col < frame.width(); ++col) {
			const float d = frame.at(col, row);
			if (d > 0.0f) {
				sum += backproject(intr, col + 0.5, row + 0.5, d);
				++count;
			}
		}
	}
	if (count == 0) {
		return std::nullopt;
	}
	Vec3 model_centroid = Vec3::Zero();
	for (const auto& v : model.neutral().vertices()) {
		model_centroid += v;
	}
	model_centroid /= static_cast<double>(model.vertex_count());
	return RigidPose(Eigen::Quaterniond::Identity(), sum / static_cast<double>(count) - model_centroid);
}

} // namespace detail

/**
 * Fits pose and coefficients to one frame. Each outer iteration rigidly aligns the
 * current expression mesh (ICP), refreshes depth correspondences, builds the quadratic
 * model at the current x and solves it with solve_l1_box. The full objective is then
 * re-evaluated with fresh correspondences; a step that raises it is halved (in x) up to
 * cfg.max_step_halvings times before the loop stops at the last accepted state.
 *
 * Warm starts from prev when given. A frame without usable depth but with landmarks is
 * solved with the landmark term alone and the pose held fixed.
 */
inline FrameFit fit_frame(const BlendshapeModel& model, const DepthFrame& frame, const LandmarkSet& landmarks,
                          const CameraIntrinsics& intr, const std::optional<FrameFit>& prev, const SolverConfig& cfg)
{
	cfg.validate();
	if (frame.width() != intr.width() || frame.height() != intr.height()) {
		throw Error(ErrorCode::dimension, "depth frame size does not match the camera");
	}
	landmarks.require_vertices(model.vertex_count());

	BscVector x = prev ? prev->x : BscVector::zeros(model.size());
	require_size(model, x);
	RigidPose pose;
	if (prev) {
		pose = prev->pose;
	} else if (cfg.initial_pose) {
		pose = *cfg.initial_pose;
	} else if (auto guess = detail::centroid_pose(model, frame, intr)) {
		pose = *guess;
	} else {
		throw Error(ErrorCode::insufficient_data, "frame has no valid depth and no initial pose was given");
	}

	FrameFit fit;
	Mesh expression = evaluate_mesh(model, x);
	auto terms = detail::evaluate_data_terms(expression, pose, frame, landmarks, intr, cfg);
	double objective = detail::full_objective(terms, x, cfg);
	fit.objective_trace.push_back(objective);
	fit.correspondence_count = terms.correspondences;

	for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
		RigidPose aligned = pose;
		try {
			IcpConfig icp = cfg.icp;
			icp.threads = cfg.threads;
			if (cfg.w_d > 0.0) {
				icp.landmark_weight = cfg.w_l / cfg.w_d;
			}
			aligned = align_rigid(expression, frame, intr, pose, icp, &landmarks).pose;
		} catch (const Error& e) {
			// Without enough depth the landmarks alone carry the frame. An unobservable
			// rigid motion (for instance a flat target) keeps the current pose.
			const bool landmarks_only = e.code() == ErrorCode::insufficient_data && !landmarks.empty();
			if (!landmarks_only && e.code() != ErrorCode::degenerate_geometry) {
				throw;
			}
			fit.rigid_skipped = true;
		}

		// The rigid step only counts if it lowers the full objective at the current x.
		std::vector<DepthCorrespondence> corrs;
		const auto aligned_terms = detail::evaluate_data_terms(expression, aligned, frame, landmarks, intr, cfg, &corrs);
		if (detail::full_objective(aligned_terms, x, cfg) > objective) {
			aligned = pose;
			detail::evaluate_data_terms(expression, aligned, frame, landmarks, intr, cfg, &corrs);
		}
		const QuadraticForm q = assemble_quadratic(model, aligned, corrs, landmarks, intr, x, cfg);
		const L1BoxResult inner = solve_l1_box(q, cfg.w_r, x, cfg.gs_sweeps, cfg.objective_rel_tol);
		fit.frozen = inner.frozen;

		// Backtrack on x if the re-associated objective went up.
		bool accepted = false;
		double scale = 1.0;
		BscVector candidate = inner.x;
		Mesh candidate_mesh;
		detail::DataTerms candidate_terms;
		double candidate_objective = objective;
		for (int h = 0; h <= cfg.max_step_halvings; ++h) {
			candidate = BscVector(
			    (x.values() + scale * (inner.x.values() - x.values())).cwiseMax(0.0).cwiseMin(1.0).eval());
			candidate_mesh = evaluate_mesh(model, candidate);
			candidate_terms =
			    detail::evaluate_data_terms(candidate_mesh, aligned, frame, landmarks, intr, cfg);
			candidate_objective = detail::full_objective(candidate_terms, candidate, cfg);
			if (candidate_objective <= objective) {
				accepted = true;
				break;
			}
			scale *= 0.5;
		}
		if (!accepted) {
			break;
		}

		const double change = objective - candidate_objective;
		pose = aligned;
		x = candidate;
		expression = std::move(candidate_mesh);
		objective = candidate_objective;
		fit.objective_trace.push_back(objective);
		fit.correspondence_count = candidate_terms.correspondences;
		fit.outer_iterations = outer + 1;
		if (change <= cfg.objective_rel_tol * std::abs(objective) || change == 0.0) {
			fit.converged = true;
			break;
		}
	}

	fit.pose = pose;
	fit.x = x;
	fit.landmark_count = landmarks.size();
	return fit;
}

struct FrameStatus
{
	int frame_index = 0;
	bool ok = false;
	std::string message;
	std::optional<FrameFit> fit;
};

struct TrackResult
{
	/// Successfully fitted frames only; failed frames are gaps.
	BscSequence sequence;
	std::vector<FrameStatus> frames;
	std::size_t failed = 0;
};

/**
 * Fits every frame in order, warm-starting each from the last successful fit. A frame
 * that fails is recorded as a gap and tracking resumes from the last good state.
 *
 * @throws Error sequence_failed if no frame could be fitted.
 */
inline TrackResult track_sequence(const BlendshapeModel& model, const std::vector<DepthFrame>& frames,
                                  const std::vector<LandmarkSet>& landmarks, const CameraIntrinsics& intr,
                                  const SolverConfig& cfg)
{
	if (frames.empty()) {
		throw Error(ErrorCode::validation, "no frames to track");
	}
	if (landmarks.size() != frames.size()) {
		throw Error(ErrorCode::dimension, "got " + std::to_string(landmarks.size()) + " landmark sets for " +
		                                      std::to_string(frames.size()) + " frames");
	}
	TrackResult out;
	out.sequence = BscSequence(model.names(), {});
	std::optional<FrameFit> last;
	for (std::size_t t = 0; t < frames.size(); ++t) {
		FrameStatus status;
		status.frame_index = frames[t].frame_index();
		try {
			FrameFit fit = fit_frame(model, frames[t], landmarks[t], intr, last, cfg);
			out.sequence.push_back(BscFrame{frames[t].frame_index(), frames[t].timestamp(), fit.pose, fit.x});
			status.ok = true;
			status.fit = fit;
			last = std::move(fit);
		} catch (const Error& e) {
			status.message = e.what();
			++out.failed;
		}
		out.frames.push_back(std::move(status));
	}
	if (out.sequence.empty()) {
		throw Error(ErrorCode::sequence_failed, "every frame failed to fit");
	}
	return out;
}

} // namespace facetrack

#endif // FACETRACK_BSC_SOLVER_HPP_
