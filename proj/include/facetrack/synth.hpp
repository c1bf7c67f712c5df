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

#ifndef FACETRACK_SYNTH_HPP_
#define FACETRACK_SYNTH_HPP_

#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/parallel.hpp"
#include "facetrack/sequence.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace facetrack {

struct NoiseConfig
{
	double depth_sigma = 0.0;      ///< metres
	double landmark_sigma = 0.0;   ///< pixels
	double landmark_dropout = 0.0; ///< probability
	std::uint64_t seed = 0;

	void validate() const
	{
		if (!(depth_sigma >= 0.0 && landmark_sigma >= 0.0)) {
			throw Error(ErrorCode::validation, "noise sigmas must be non-negative");
		}
		if (!(landmark_dropout >= 0.0 && landmark_dropout <= 1.0)) {
			throw Error(ErrorCode::validation, "landmark dropout must lie in [0,1]");
		}
	}
};

/// Landmark identifier bound to a model vertex.
struct LandmarkDefinition
{
	std::string id;
	std::size_t vertex = 0;
};

/**
 * Z-buffer rasterization of the camera-facing triangles of mesh (posed by pose) into a
 * depth image. Pixels are sampled at their centres; 1/z is interpolated with screen-space
 * barycentrics, which is exact for planar triangles. Uncovered pixels are 0. Triangles
 * with any vertex at or behind the camera plane are skipped.
 */
inline DepthFrame render_depth(const Mesh& mesh, const RigidPose& pose, const CameraIntrinsics& intr,
                               int frame_index = 0, double timestamp = 0.0)
{
	const int width = intr.width();
	const int height = intr.height();
	std::vector<double> zbuf(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
	                         std::numeric_limits<double>::infinity());

	std::vector<Vec3> cam;
	cam.reserve(mesh.vertex_count());
	for (const auto& v : mesh.vertices()) {
		cam.push_back(pose.apply(v));
	}

	for (const auto& t : mesh.faces()) {
		const Vec3& a = cam[t[0]];
		const Vec3& b = cam[t[1]];
		const Vec3& c = cam[t[2]];
		if (!(a.z() > 0.0 && b.z() > 0.0 && c.z() > 0.0)) {
			continue;
		}
		// Back-face culling: keep triangles whose normal points towards the camera.
		if (!((b - a).cross(c - a).dot(a) < 0.0)) {
			continue;
		}
		const Vec2 pa = project(intr, a);
		const Vec2 pb = project(intr, b);
		const Vec2 pc = project(intr, c);
		const double area = (pb.x() - pa.x()) * (pc.y() - pa.y()) - (pb.y() - pa.y()) * (pc.x() - pa.x());
		if (area == 0.0) {
			continue;
		}
		const double min_u = std::min({pa.x(), pb.x(), pc.x()});
		const double max_u = std::max({pa.x(), pb.x(), pc.x()});
		const double min_v = std::min({pa.y(), pb.y(), pc.y()});
		const double max_v = std::max({pa.y(), pb.y(), pc.y()});
		const int col0 = std::max(0, static_cast<int>(std::ceil(min_u - 0.5)));
		const int col1 = std::min(width - 1, static_cast<int>(std::floor(max_u - 0.5)));
		const int row0 = std::max(0, static_cast<int>(std::ceil(min_v - 0.5)));
		const int row1 = std::min(height - 1, static_cast<int>(std::floor(max_v - 0.5)));
		for (int row = row0; row <= row1; ++row) {
			const double v = row + 0.5;
			for (int col = col0; col <= col1; ++col) {
				const double u = col + 0.5;
				double wa = (pb.x() - u) * (pc.y() - v) - (pb.y() - v) * (pc.x() - u);
				double wb = (pc.x() - u) * (pa.y() - v) - (pc.y() - v) * (pa.x() - u);
				double wc = (pa.x() - u) * (pb.y() - v) - (pa.y() - v) * (pb.x() - u);
				wa /= area;
				wb /= area;
				wc /= area;
				if (wa < 0.0 || wb < 0.0 || wc < 0.0) {
					continue;
				}
				const double inv_z = wa / a.z() + wb / b.z() + wc / c.z();
				const double z = 1.0 / inv_z;
				auto& slot = zbuf[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
				                  static_cast<std::size_t>(col)];
				if (z < slot) {
					slot = z;
				}
			}
		}
	}

	std::vector<float> depth(zbuf.size(), 0.0f);
	for (std::size_t i = 0; i < zbuf.size(); ++i) {
		if (std::isfinite(zbuf[i])) {
			depth[i] = static_cast<float>(zbuf[i]);
		}
	}
	return DepthFrame(width, height, std::move(depth), frame_index, timestamp);
}

/// Seed for one frame of a sequence, derived from the base seed only.
inline std::uint64_t frame_seed(std::uint64_t seed, std::uint64_t frame, std::uint64_t stream)
{
	// splitmix64 finalizer
	std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (frame * 2 + stream + 1);
	z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
	z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
	return z ^ (z >> 31);
}

struct LandmarkProjection
{
	LandmarkSet landmarks;
	std::vector<std::string> dropped_behind_camera;
	std::vector<std::string> dropped_outside_image;
	std::vector<std::string> dropped_random;
};

/**
 * Projects the listed vertices, adds isotropic Gaussian pixel noise and drops each
 * landmark with probability noise.landmark_dropout. Draws are made for every landmark
 * in a fixed order, so the result depends only on the inputs and the seed.
 */
inline LandmarkProjection project_landmarks(const Mesh& mesh, const RigidPose& pose, const CameraIntrinsics& intr,
                                            const std::vector<LandmarkDefinition>& ids, const NoiseConfig& noise)
{
	noise.validate();
	std::mt19937_64 rng(noise.seed);
	std::normal_distribution<double> gauss(0.0, 1.0);
	std::uniform_real_distribution<double> uniform(0.0, 1.0);

	LandmarkProjection out;
	std::vector<Landmark> entries;
	for (const auto& def : ids) {
		if (def.vertex >= mesh.vertex_count()) {
			throw Error(ErrorCode::validation, "landmark '" + def.id + "' references a missing vertex");
		}
		const double du = gauss(rng) * noise.landmark_sigma;
		const double dv = gauss(rng) * noise.landmark_sigma;
		const bool drop = uniform(rng) < noise.landmark_dropout;
		const Vec3 p = pose.apply(mesh.vertices()[def.vertex]);
		if (!(p.z() > 0.0)) {
			out.dropped_behind_camera.push_back(def.id);
			continue;
		}
		if (drop) {
			out.dropped_random.push_back(def.id);
			continue;
		}
		const Vec2 uv = project(intr, p) + Vec2(du, dv);
		if (!intr.contains(uv.x(), uv.y())) {
			out.dropped_outside_image.push_back(def.id);
			continue;
		}
		entries.push_back(Landmark{def.id, def.vertex, uv.x(), uv.y(), 1.0});
	}
	out.landmarks = LandmarkSet(intr.width(), intr.height(), std::move(entries));
	return out;
}

/// Adds Gaussian noise to valid pixels only. Noisy values stay strictly positive.
inline DepthFrame add_depth_noise(const DepthFrame& frame, double sigma, std::uint64_t seed)
{
	if (sigma <= 0.0) {
		return frame;
	}
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> gauss(0.0, sigma);
	std::vector<float> values = frame.values();
	for (auto& d : values) {
		if (d > 0.0f) {
			const double noisy = static_cast<double>(d) + gauss(rng);
			d = static_cast<float>(std::max(noisy, 1e-6));
		}
	}
	return DepthFrame(frame.width(), frame.height(), std::move(values), frame.frame_index(), frame.timestamp());
}

struct SyntheticDataset
{
	std::vector<DepthFrame> frames;
	std::vector<LandmarkSet> landmarks;
	BscSequence ground_truth;
};

/**
 * Renders every scripted frame: evaluate the expression, rasterize depth, add depth
 * noise, project landmarks. Frame t draws from seeds derived from (noise.seed, t), so
 * frames can be rendered in parallel without changing the output.
 */
inline SyntheticDataset generate_sequence(const BlendshapeModel& model, const BscSequence& script,
                                          const CameraIntrinsics& intr, const std::vector<LandmarkDefinition>& ids,
                                          const NoiseConfig& noise, int threads = 1)
{
	require_script(script);
	noise.validate();
	if (script.names().size() != model.size()) {
		throw Error(ErrorCode::dimension, "script coefficient count does not match the model");
	}
	SyntheticDataset out;
	out.frames.resize(script.size());
	out.landmarks.resize(script.size());
	parallel_for(script.size(), threads, [&](std::size_t begin, std::size_t end) {
		for (std::size_t t = begin; t < end; ++t) {
			const auto& f = script[t];
			const Mesh mesh = evaluate_mesh(model, f.x);
			const DepthFrame clean = render_depth(mesh, f.pose, intr, f.frame_index, f.timestamp);
			out.frames[t] = add_depth_noise(clean, noise.depth_sigma, frame_seed(noise.seed, t, 0));
			NoiseConfig lm_noise = noise;
			lm_noise.seed = frame_seed(noise.seed, t, 1);
			out.landmarks[t] = project_landmarks(mesh, f.pose, intr, ids, lm_noise).landmarks;
		}
	});
	out.ground_truth = script;
	return out;
}

struct FaceModelOptions
{
	int columns = 41;
	int rows = 49;
	double half_width = 0.075;  ///< metres
	double half_height = 0.095; ///< metres
	int blendshapes = 51;
	int landmarks = 40;
	double bump_sigma_min = 0.010;     ///< metres
	double bump_sigma_max = 0.0135;    ///< metres
	double bump_amplitude_min = 0.008; ///< metres
	double bump_amplitude_max = 0.016; ///< metres
	std::uint64_t seed = 7;
};

/// A generated test head together with its landmark vertices.
struct FaceRig
{
	BlendshapeModel model;
	std::vector<LandmarkDefinition> landmarks;
};

namespace detail {

inline double face_height(double s, double t)
{
	// Paraboloid forehead-to-chin profile with a nose ridge; the face looks down -z.
	const double bulge = 0.04 * (1.0 - 0.35 * s * s - 0.3 * t * t);
	const double nose = 0.012 * std::exp(-(s * s / 0.05 + (t - 0.05) * (t - 0.05) / 0.08));
	const double brow = 0.004 * std::exp(-((t + 0.35) * (t + 0.35)) / 0.01);
	return -(bulge + nose + brow);
}

} // namespace detail

/**
 * Procedural low-poly face-like height field (about 2k vertices) with smooth
 * localized bump blendshapes. Deterministic in options.seed.
 */
inline FaceRig make_face_rig(const FaceModelOptions& opt = {})
{
	if (opt.columns < 2 || opt.rows < 2 || opt.blendshapes < 1) {
		throw Error(ErrorCode::validation, "face model needs at least a 2x2 grid and one blendshape");
	}
	const int nc = opt.columns;
	const int nr = opt.rows;
	const auto index = [nc](int c, int r) { return r * nc + c; };

	std::vector<Vec3> vertices;
	std::vector<Eigen::Vector2d> params;
	vertices.reserve(static_cast<std::size_t>(nc * nr));
	for (int r = 0; r < nr; ++r) {
		for (int c = 0; c < nc; ++c) {
			const double s = -1.0 + 2.0 * c / (nc - 1);
			const double t = -1.0 + 2.0 * r / (nr - 1);
			params.emplace_back(s, t);
			vertices.emplace_back(s * opt.half_width, t * opt.half_height, detail::face_height(s, t));
		}
	}
	std::vector<Triangle> faces;
	faces.reserve(static_cast<std::size_t>(2 * (nc - 1) * (nr - 1)));
	for (int r = 0; r + 1 < nr; ++r) {
		for (int c = 0; c + 1 < nc; ++c) {
			const int a = index(c, r);
			const int b = index(c + 1, r);
			const int d = index(c, r + 1);
			const int e = index(c + 1, r + 1);
			// Wound so that normals point to -z, towards a camera looking down +z.
			faces.push_back({a, d, b});
			faces.push_back({b, d, e});
		}
	}
	Mesh neutral(std::move(vertices), std::move(faces));
	const auto normals = vertex_normals(neutral).normals;

	std::mt19937_64 rng(opt.seed);
	std::uniform_real_distribution<double> unit(0.0, 1.0);

	// Bump centres on a jittered lattice covering the face.
	const int n = opt.blendshapes;
	const int lattice_cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(n * 0.8))));
	const int lattice_rows = (n + lattice_cols - 1) / lattice_cols;
	const std::size_t vcount = neutral.vertex_count();
	Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * vcount), n);
	std::vector<std::string> names;
	for (int k = 0; k < n; ++k) {
		const int lc = k % lattice_cols;
		const int lr = k / lattice_cols;
		const double cs = -0.85 + 1.7 * (lc + 0.5 + 0.3 * (unit(rng) - 0.5)) / lattice_cols;
		const double ct = -0.85 + 1.7 * (lr + 0.5 + 0.3 * (unit(rng) - 0.5)) / lattice_rows;
		const Vec3 centre(cs * opt.half_width, ct * opt.half_height, 0.0);
		const double sigma = opt.bump_sigma_min + (opt.bump_sigma_max - opt.bump_sigma_min) * unit(rng);
		const double amplitude = (opt.bump_amplitude_min + (opt.bump_amplitude_max - opt.bump_amplitude_min) * unit(rng)) * (unit(rng) < 0.5 ? -1.0 : 1.0);
		const double heading = 2.0 * 3.14159265358979323846 * unit(rng);
		const Vec3 tangential(std::cos(heading), std::sin(heading), 0.0);
		for (std::size_t i = 0; i < vcount; ++i) {
			const Vec3& p = neutral.vertices()[i];
			const double r2 = (Vec3(p.x(), p.y(), 0.0) - centre).squaredNorm();
			const double w = std::exp(-r2 / (2.0 * sigma * sigma));
			if (w < 1e-6) {
				continue;
			}
			const Vec3 d = amplitude * w * (normals[i] + 0.2 * tangential);
			basis.block<3, 1>(static_cast<Eigen::Index>(3 * i), k) = d;
		}
		names.push_back("bump_" + std::string(k < 10 ? "0" : "") + std::to_string(k));
	}

	// Landmarks on rings around the eyes and mouth, along the nose and the jaw.
	std::vector<Eigen::Vector2d> spots;
	const auto ring = [&](double cs, double ct, double rs, double rt, int count) {
		for (int j = 0; j < count; ++j) {
			const double a = 2.0 * 3.14159265358979323846 * j / count;
			spots.emplace_back(cs + rs * std::cos(a), ct + rt * std::sin(a));
		}
	};
	ring(-0.4, -0.3, 0.18, 0.08, 8);
	ring(0.4, -0.3, 0.18, 0.08, 8);
	ring(0.0, 0.5, 0.35, 0.14, 12);
	for (int j = 0; j < 4; ++j) {
		spots.emplace_back(0.0, -0.15 + 0.12 * j);
	}
	for (int j = 0; j < 8; ++j) {
		const double a = 3.14159265358979323846 * (0.15 + 0.7 * j / 7.0);
		spots.emplace_back(0.85 * std::cos(a), 0.85 * std::sin(a));
	}
	std::vector<LandmarkDefinition> landmarks;
	for (std::size_t j = 0; j < spots.size() && static_cast<int>(landmarks.size()) < opt.landmarks; ++j) {
		const int c = std::clamp(static_cast<int>(std::lround((spots[j].x() + 1.0) * 0.5 * (nc - 1))), 0, nc - 1);
		const int r = std::clamp(static_cast<int>(std::lround((spots[j].y() + 1.0) * 0.5 * (nr - 1))), 0, nr - 1);
		landmarks.push_back(
		    {"lm_" + std::string(j < 10 ? "0" : "") + std::to_string(j), static_cast<std::size_t>(index(c, r))});
	}

	return {BlendshapeModel(std::move(neutral), std::move(basis), std::move(names)), std::move(landmarks)};
}

/// Default camera for the generated head: 320x240 with the face filling most of the height.
inline CameraIntrinsics default_camera() { return CameraIntrinsics(400.0, 400.0, 160.0, 120.0, 320, 240); }

inline RigidPose default_head_pose() { return RigidPose(Eigen::Quaterniond::Identity(), Vec3(0.0, 0.0, 0.5)); }

} // namespace facetrack

#endif // FACETRACK_SYNTH_HPP_
