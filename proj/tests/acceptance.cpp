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
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

// Prints one line per acceptance criterion and exits non-zero if a hard criterion fails.

using namespace facetrack;

namespace {

int hard_failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail, bool hard = true)
{
	const char* tag = pass ? "PASS" : (hard ? "FAIL" : "WARN");
	std::printf("[%s] %2d %-28s %s%s\n", tag, id, name.c_str(), detail.c_str(), hard ? "" : " (tracked, not gated)");
	std::fflush(stdout);
	if (!pass && hard) {
		++hard_failures;
	}
}

std::string fmt(const char* f, auto... args)
{
	char buf[512];
	std::snprintf(buf, sizeof buf, f, args...);
	return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
	return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct RecoveryStats
{
	double active_error = 0.0;   // max |x - x*| over active coefficients
	double inactive_value = 0.0; // max x over inactive coefficients
	double max_seconds = 0.0;
	bool monotone = true;
};

RecoveryStats recovery_trials(int trials, double depth_sigma, double landmark_sigma)
{
	const auto& rig = test::face_rig();
	const CameraIntrinsics cam = default_camera();
	const RigidPose pose = default_head_pose();
	RecoveryStats stats;
	for (int t = 0; t < trials; ++t) {
		std::mt19937_64 rng(1000 + t);
		const BscVector truth = test::sparse_bsc(rng, rig.model.size(), 8);
		const Mesh mesh = evaluate_mesh(rig.model, truth);
		const DepthFrame frame = add_depth_noise(render_depth(mesh, pose, cam), depth_sigma, 2000 + t);
		NoiseConfig noise;
		noise.landmark_sigma = landmark_sigma;
		noise.seed = 3000 + t;
		const auto lms = project_landmarks(mesh, pose, cam, rig.landmarks, noise).landmarks;
		SolverConfig cfg;
		cfg.w_r = 0.01;
		cfg.initial_pose = pose;
		const auto t0 = std::chrono::steady_clock::now();
		const FrameFit fit = fit_frame(rig.model, frame, lms, cam, std::nullopt, cfg);
		stats.max_seconds = std::max(stats.max_seconds, seconds_since(t0));
		for (std::size_t k = 0; k < rig.model.size(); ++k) {
			if (truth[k] > 0.0) {
				stats.active_error = std::max(stats.active_error, std::abs(fit.x[k] - truth[k]));
			} else {
				stats.inactive_value = std::max(stats.inactive_value, fit.x[k]);
			}
		}
		for (std::size_t s = 1; s < fit.objective_trace.size(); ++s) {
			stats.monotone = stats.monotone && fit.objective_trace[s] <= fit.objective_trace[s - 1];
		}
	}
	return stats;
}

void coefficient_recovery()
{
	constexpr int trials = 5;
	const auto s = recovery_trials(trials, 0.0, 0.0);
	report(1, s.active_error <= 0.05 && s.inactive_value < 0.02 && s.max_seconds < 5.0, "noise-free recovery",
	       fmt("%d frames: max active err %.4f (<= 0.05), max inactive %.4f (< 0.02), max %.2f s/frame (< 5)", trials,
	           s.active_error, s.inactive_value, s.max_seconds));
}

void rigid_recovery()
{
	const auto& rig = test::face_rig();
	const CameraIntrinsics cam = default_camera();
	const Mesh& mesh = rig.model.neutral();
	const RigidPose truth(Eigen::Quaterniond(Eigen::AngleAxisd(0.1, Vec3(0.3, 1.0, 0.2).normalized())), Vec3(0.01, -0.005, 0.52));
	const DepthFrame frame = render_depth(mesh, truth, cam);
	double worst_rot = 0.0, worst_trans = 0.0, worst_time = 0.0;
	const Vec3 axes[] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), Vec3(1, 1, 1).normalized()};
	for (const Vec3& axis : axes) {
		const Eigen::Quaterniond dq(Eigen::AngleAxisd(5.0 * std::numbers::pi / 180.0, axis));
		const Vec3 shift = 0.02 * Vec3(axis.y() + 0.3, -axis.x(), axis.z() - 0.5).normalized();
		const RigidPose init((truth.rotation() * dq).normalized(), truth.translation() + shift);
		const auto t0 = std::chrono::steady_clock::now();
		const IcpResult r = align_rigid(mesh, frame, cam, init, IcpConfig{});
		worst_time = std::max(worst_time, seconds_since(t0));
		const double angle = r.pose.rotation().angularDistance(truth.rotation()) * 180.0 / std::numbers::pi;
		worst_rot = std::max(worst_rot, angle);
		worst_trans = std::max(worst_trans, (r.pose.translation() - truth.translation()).norm());
	}
	report(2, worst_rot <= 0.5 && worst_trans <= 0.002 && worst_time < 1.0, "rigid recovery",
	       fmt("4 starts at 5 deg / 2 cm: rot %.4f deg (<= 0.5), trans %.5f m (<= 0.002), max %.3f s (< 1)", worst_rot,
	           worst_trans, worst_time));
}

QuadraticForm random_form(std::mt19937_64& rng, int n)
{
	std::normal_distribution<double> gauss(0.0, 1.0);
	std::uniform_real_distribution<double> scale(0.1, 2.0), lin(-2.0, 2.0);
	Eigen::MatrixXd A(n, n);
	for (Eigen::Index i = 0; i < A.size(); ++i) {
		A.data()[i] = gauss(rng);
	}
	Eigen::MatrixXd H = A.transpose() * A;
	H *= scale(rng) / Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
	Eigen::VectorXd g(n);
	for (auto& v : g) {
		v = lin(rng);
	}
	return QuadraticForm{H, g, 0.0};
}

void inner_solver_oracle()
{
	std::mt19937_64 rng(9001);
	std::uniform_real_distribution<double> reg(0.0, 0.5);
	int passed = 0;
	double worst = -std::numeric_limits<double>::infinity();
	for (int trial = 0; trial < 100; ++trial) {
		const QuadraticForm q = random_form(rng, 3);
		const double w_r = reg(rng);
		const auto r = solve_l1_box(q, w_r, BscVector::zeros(3), 5000, 1e-15);
		double grid = std::numeric_limits<double>::infinity();
		Eigen::VectorXd x(3);
		for (int i = 0; i <= 100; ++i) {
			for (int j = 0; j <= 100; ++j) {
				for (int k = 0; k <= 100; ++k) {
					x << i * 0.01, j * 0.01, k * 0.01;
					grid = std::min(grid, l1_box_objective(q, w_r, x));
				}
			}
		}
		// The grid cannot beat the continuous optimum, so only a solver excess counts.
		const double excess = l1_box_objective(q, w_r, r.x.values()) - grid;
		worst = std::max(worst, excess);
		passed += excess <= 1e-4 ? 1 : 0;
	}
	report(3, passed == 100, "inner-solver grid oracle",
	       fmt("%d/100 within 1e-4 of the 0.01-grid optimum, worst excess %.2e", passed, worst));
}

void monotone_descent()
{
	std::mt19937_64 rng(9002);
	std::uniform_real_distribution<double> reg(0.0, 1.0);
	std::size_t updates = 0, violations = 0;
	for (int trial = 0; trial < 500; ++trial) {
		const int n = 2 + trial % 50;
		const QuadraticForm q = random_form(rng, n);
		const auto r = solve_l1_box(q, reg(rng), test::random_bsc(rng, static_cast<std::size_t>(n)), 50, 1e-14, true);
		double previous = r.objective_trace.front();
		for (double f : r.update_trace) {
			// Allow only floating-point roundoff of the objective evaluation itself.
			violations += f > previous + 1e-12 * std::max(1.0, std::abs(previous)) ? 1 : 0;
			previous = f;
			++updates;
		}
	}
	const auto fits = recovery_trials(2, 0.0, 0.0);
	violations += fits.monotone ? 0 : 1;
	report(4, violations == 0, "monotone descent",
	       fmt("%zu coordinate updates plus 2 frame fits, %zu violations", updates, violations));
}

void jacobian_check()
{
	std::mt19937_64 rng(9003);
	std::uniform_real_distribution<double> f(100, 1000), c(100, 400), xy(-0.5, 0.5), z(0.2, 3.0);
	double worst = 0.0;
	for (int s = 0; s < 1000; ++s) {
		const CameraIntrinsics cam(f(rng), f(rng), c(rng), c(rng), 640, 480);
		const Vec3 p(xy(rng), xy(rng), z(rng));
		const auto J = landmark_jacobian(p, cam);
		Eigen::Matrix<double, 2, 3> fd;
		for (int a = 0; a < 3; ++a) {
			const double h = 1e-6 * std::max(1.0, std::abs(p[a]));
			Vec3 lo = p, hi = p;
			lo[a] -= h;
			hi[a] += h;
			fd.col(a) = (project(cam, hi) - project(cam, lo)) / (2.0 * h);
		}
		worst = std::max(worst, (J - fd).norm() / J.norm());
	}
	report(5, worst < 1e-4, "landmark Jacobian", fmt("1000 samples, worst relative error %.2e (< 1e-4)", worst));
}

void affinity_check()
{
	std::mt19937_64 rng(9004);
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	double worst = 0.0;
	for (int m = 0; m < 100; ++m) {
		const auto model = test::random_model(rng, 5, 6);
		const auto a = test::random_bsc(rng, 6);
		const auto b = test::random_bsc(rng, 6);
		const double lambda = unit(rng);
		const Mesh mixed = evaluate_mesh(model, BscVector(lambda * a.values() + (1.0 - lambda) * b.values()));
		const Mesh ma = evaluate_mesh(model, a);
		const Mesh mb = evaluate_mesh(model, b);
		for (std::size_t i = 0; i < mixed.vertex_count(); ++i) {
			const Vec3 expected = lambda * ma.vertices()[i] + (1.0 - lambda) * mb.vertices()[i];
			worst = std::max(worst, (mixed.vertices()[i] - expected).cwiseAbs().maxCoeff());
		}
	}
	report(6, worst <= 1e-9, "blendshape affinity", fmt("100 models, worst deviation %.2e (<= 1e-9)", worst));
}

void viseme_table_fidelity()
{
	const std::pair<const char*, double> expected[] = {{"P", 1.0},  {"F", 0.97},  {"SH", 0.75}, {"TH", 0.66}, {"Z", 0.66},
	                                                   {"V2", 0.6}, {"V1", 0.59}, {"V3", 0.58}, {"L", 0.5},   {"V4", 0.48},
	                                                   {"G", 0.46}, {"T", 0.36},  {"SIL", 0.0}};
	// Phoneme rows as printed in the published table.
	const std::pair<const char*, const char*> mapping[] = {
	    {"p", "P"}, {"b", "P"}, {"m", "P"},
	    {"f", "F"}, {"v", "F"},
	    {"sh", "SH"}, {"zh", "SH"}, {"ch", "SH"}, {"jh", "SH"},
	    {"th", "TH"}, {"dh", "TH"},
	    {"z", "Z"}, {"s", "Z"},
	    {"uw", "V2"}, {"uh", "V2"}, {"ow", "V2"}, {"w", "V2"},
	    {"aa", "V1"}, {"ah", "V1"}, {"ao", "V1"}, {"aw", "V1"}, {"er", "V1"}, {"oy", "V1"},
	    {"ae", "V3"}, {"eh", "V3"}, {"ey", "V3"}, {"ay", "V3"}, {"y", "V3"},
	    {"l", "L"}, {"el", "L"}, {"r", "L"},
	    {"ih", "V4"}, {"iy", "V4"},
	    {"g", "G"}, {"ng", "G"}, {"k", "G"}, {"hh", "G"},
	    {"t", "T"}, {"d", "T"}, {"n", "T"}, {"en", "T"},
	    {"sil", "SIL"}, {"sp", "SIL"},
	};
	std::size_t mismatches = 0;
	std::string first;
	try {
		const VisemeTable table = io::read_viseme_table(std::filesystem::path(FACETRACK_DATA_DIR) / "viseme_table.json");
		for (const auto& [v, w] : expected) {
			if (table.weight_of(v) != std::optional<double>(w)) {
				++mismatches;
				first = first.empty() ? std::string("weight ") + v : first;
			}
		}
		for (const auto& [p, v] : mapping) {
			if (phoneme_to_viseme(table, p).viseme != v) {
				++mismatches;
				first = first.empty() ? std::string("phoneme ") + p : first;
			}
		}
		if (table.classes().size() != std::size(expected) || table.phoneme_count() != std::size(mapping)) {
			++mismatches;
			first = first.empty() ? "inventory size" : first;
		}
	} catch (const std::exception& e) {
		++mismatches;
		first = e.what();
	}
	report(7, mismatches == 0, "viseme table fidelity",
	       fmt("13 weights, %zu phoneme mappings, %zu mismatches%s%s", std::size(mapping), mismatches,
	           first.empty() ? "" : ", first: ", first.c_str()));
}

void rig_recovery()
{
	const auto& generic = test::face_rig().model;
	std::mt19937_64 rng(9005);
	std::normal_distribution<double> gauss(0.0, 0.002);
	Eigen::MatrixXd truth = generic.basis();
	for (Eigen::Index i = 0; i < truth.size(); ++i) {
		truth.data()[i] += gauss(rng);
	}
	const std::size_t n = generic.size();
	const auto scan = [&](const BscVector& x) {
		const Eigen::VectorXd off = truth * x.values();
		std::vector<Vec3> v = generic.neutral().vertices();
		for (std::size_t i = 0; i < v.size(); ++i) {
			v[i] += off.segment<3>(static_cast<Eigen::Index>(3 * i));
		}
		return generic.neutral().with_vertices(std::move(v));
	};
	std::vector<ExampleExpression> examples{{generic.neutral(), BscVector::zeros(n), std::nullopt}};
	for (std::size_t k = 0; k < n; ++k) {
		examples.push_back({scan(BscVector::unit(n, k)), BscVector::unit(n, k), std::nullopt});
	}
	for (int extra = 0; extra < 5; ++extra) {
		const auto x = test::sparse_bsc(rng, n, 4);
		examples.push_back({scan(x), x, std::nullopt});
	}
	PersonalizeConfig cfg;
	cfg.basis_regularization = 1e-6;
	const auto out = personalize(generic, examples, cfg);
	const double rel = (out.basis() - truth).norm() / truth.norm();
	report(8, rel <= 1e-4, "rig recovery",
	       fmt("n=%zu, %zu spanning examples, relative Frobenius error %.2e (<= 1e-4)", n, examples.size(), rel));
}

void noise_robustness()
{
	constexpr int trials = 5;
	const auto s = recovery_trials(trials, 0.002, 1.0);
	report(9, s.active_error <= 0.12, "noise robustness",
	       fmt("%d frames at 2 mm / 1 px: max active err %.4f (<= 0.12), max inactive %.4f", trials, s.active_error,
	           s.inactive_value),
	       false);
}

int run(const std::string& args)
{
	const std::string cmd = std::string("\"") + FACETRACK_CLI + "\" " + args + " > /dev/null 2>&1";
	return std::system(cmd.c_str());
}

void cli_determinism()
{
	const auto dir = test::scratch_dir("acceptance_cli");
	const std::string d = dir.string();
	bool ok = run("make-model --out " + d + "/model.json") == 0 &&
	          run("make-script --model " + d + "/model.json --out " + d + "/script.csv --kind sparse --frames 3 --seed 5") == 0;
	std::vector<std::string> outputs;
	for (int threads : {1, 3, 1}) {
		const std::string tag = std::to_string(outputs.size());
		ok = ok &&
		     run("synth --model " + d + "/model.json --script " + d + "/script.csv --out-dir " + d + "/data" + tag +
		         " --noise-depth 0.002 --noise-landmark 1 --dropout 0.1 --seed 11 --threads " + std::to_string(threads)) == 0 &&
		     run("track --model " + d + "/model.json --dataset " + d + "/data" + tag + " --out " + d + "/seq" + tag +
		         ".csv --threads " + std::to_string(threads)) == 0;
		outputs.push_back(ok ? io::read_file(dir / ("seq" + tag + ".csv")) : std::string());
	}
	const bool same = ok && !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
	report(10, same, "CLI determinism",
	       ok ? fmt("synth + track with --threads 1, 3, 1: sequence files %s (%zu bytes)",
	                same ? "bit-identical" : "differ", outputs[0].size())
	          : std::string("CLI invocation failed"));
	std::filesystem::remove_all(dir);
}

} // namespace

int main()
{
	const std::pair<int, void (*)()> criteria[] = {{1, coefficient_recovery}, {2, rigid_recovery},   {3, inner_solver_oracle},
	                                              {4, monotone_descent},     {5, jacobian_check},   {6, affinity_check},
	                                              {7, viseme_table_fidelity}, {8, rig_recovery},     {9, noise_robustness},
	                                              {10, cli_determinism}};
	for (const auto& [id, criterion] : criteria) {
		try {
			criterion();
		} catch (const std::exception& e) {
			report(id, false, "error", e.what());
		}
	}
	std::printf("%d hard criteria failed\n", hard_failures);
	return hard_failures == 0 ? 0 : 1;
}
