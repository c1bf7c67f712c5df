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
#include "facetrack/facetrack.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>

namespace fs = std::filesystem;
using namespace facetrack;

namespace {

std::string frame_name(int index, const char* ext)
{
	char buf[32];
	std::snprintf(buf, sizeof(buf), "frame_%06d%s", index, ext);
	return buf;
}

int exit_code(ErrorCode code)
{
	switch (code) {
	case ErrorCode::validation:
	case ErrorCode::dimension:
	case ErrorCode::usage:
	case ErrorCode::parse:
	case ErrorCode::format:
	case ErrorCode::unsupported_face:
	case ErrorCode::unknown_phoneme: return 1;
	default: return 2;
	}
}

struct ModelOptions
{
	std::string out;
	FaceModelOptions face;
};

void run_make_model(const ModelOptions& o)
{
	const FaceRig rig = make_face_rig(o.face);
	io::write_model(o.out, rig.model, rig.landmarks);
	std::cout << "wrote " << o.out << ": " << rig.model.vertex_count() << " vertices, " << rig.model.size()
	          << " blendshapes, " << rig.landmarks.size() << " landmarks\n";
}

struct ScriptOptions
{
	std::string model;
	std::string out;
	std::string kind = "ramp";
	int frames = 10;
	double fps = 30.0;
	int active = 4;
	std::uint64_t seed = 1;
	double depth = 0.5;
};

/// Scripted coefficient sequences: all-neutral, smooth ramps, or random sparse poses.
void run_make_script(const ScriptOptions& o)
{
	const auto model = io::read_model(o.model).model;
	const std::size_t n = model.size();
	if (o.active < 0 || static_cast<std::size_t>(o.active) > n) {
		throw Error(ErrorCode::usage, "--active must lie in [0, " + std::to_string(n) + "]");
	}
	std::mt19937_64 rng(o.seed);
	std::uniform_real_distribution<double> unit(0.0, 1.0);
	std::vector<std::size_t> order(n);
	for (std::size_t k = 0; k < n; ++k) {
		order[k] = k;
	}
	std::shuffle(order.begin(), order.end(), rng);
	BscSequence script(model.names(), {});
	for (int t = 0; t < o.frames; ++t) {
		Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
		if (o.kind == "ramp") {
			// Each active blendshape rises and falls once, phase-shifted against the others.
			for (int a = 0; a < o.active; ++a) {
				const double phase = 2.0 * 3.14159265358979323846 * (static_cast<double>(t) / std::max(1, o.frames - 1) + static_cast<double>(a) / std::max(1, o.active));
				x[static_cast<Eigen::Index>(order[static_cast<std::size_t>(a)])] = 0.5 - 0.5 * std::cos(phase);
			}
		} else if (o.kind == "sparse") {
			std::shuffle(order.begin(), order.end(), rng);
			for (int a = 0; a < o.active; ++a) {
				x[static_cast<Eigen::Index>(order[static_cast<std::size_t>(a)])] = 0.3 + 0.7 * unit(rng);
			}
		} else if (o.kind != "neutral") {
			throw Error(ErrorCode::usage, "unknown script kind '" + o.kind + "'");
		}
		const RigidPose pose(Eigen::Quaterniond::Identity(), Vec3(0.0, 0.0, o.depth));
		script.push_back(BscFrame{t, t / o.fps, pose, BscVector(x)});
	}
	io::write_bsc_sequence(o.out, script);
	std::cout << "wrote " << o.out << ": " << script.size() << " frames\n";
}

struct SynthOptions
{
	std::string model;
	std::string script;
	std::string out_dir;
	NoiseConfig noise;
	int width = 320;
	int height = 240;
	double fx = 400.0;
	double fy = 400.0;
	int threads = 1;
};

void run_synth(const SynthOptions& o)
{
	const auto mf = io::read_model(o.model);
	const BscSequence script = io::read_bsc_sequence(o.script);
	if (script.names() != mf.model.names()) {
		throw Error(ErrorCode::validation, "script blendshape names do not match the model");
	}
	const CameraIntrinsics intr = CameraIntrinsics::centered(o.fx, o.fy, o.width, o.height);
	const SyntheticDataset data = generate_sequence(mf.model, script, intr, mf.landmarks, o.noise, o.threads);

	const fs::path dir(o.out_dir);
	io::DatasetManifest manifest;
	manifest.intrinsics = intr;
	manifest.noise = o.noise;
	manifest.ground_truth = "ground_truth.csv";
	for (std::size_t t = 0; t < data.frames.size(); ++t) {
		const auto& f = data.frames[t];
		io::ManifestFrame entry{f.frame_index(), f.timestamp(), "frames/" + frame_name(f.frame_index(), ".bsdf"),
		                        "landmarks/" + frame_name(f.frame_index(), ".json")};
		io::write_depth(dir / entry.depth, f, intr);
		io::write_landmarks(dir / entry.landmarks, data.landmarks[t]);
		manifest.frames.push_back(std::move(entry));
	}
	io::write_bsc_sequence(dir / *manifest.ground_truth, data.ground_truth);
	io::write_manifest(dir / "manifest.json", manifest);
	std::cout << "wrote " << data.frames.size() << " frames to " << dir.string() << "\n";
}

struct TrackOptions
{
	std::string model;
	std::string dataset;
	std::string out;
	std::string diagnostics;
	SolverConfig solver;
};

void run_track(TrackOptions o)
{
	const auto model = io::read_model(o.model).model;
	fs::path manifest_path(o.dataset);
	if (fs::is_directory(manifest_path)) {
		manifest_path /= "manifest.json";
	}
	if (!fs::exists(manifest_path)) {
		throw Error(ErrorCode::usage, "dataset manifest '" + manifest_path.string() + "' does not exist");
	}
	const auto manifest = io::read_manifest(manifest_path);
	const fs::path base = manifest_path.parent_path();
	std::vector<DepthFrame> frames;
	std::vector<LandmarkSet> landmarks;
	for (const auto& entry : manifest.frames) {
		auto file = io::read_depth(base / entry.depth, entry.index);
		if (file.frame.width() != manifest.intrinsics.width() || file.frame.height() != manifest.intrinsics.height()) {
			throw Error(ErrorCode::validation, entry.depth + ": image size differs from the manifest");
		}
		frames.push_back(std::move(file.frame));
		LandmarkSet lm = io::read_landmarks(base / entry.landmarks);
		lm.require_vertices(model.vertex_count());
		landmarks.push_back(std::move(lm));
	}
	o.solver.icp.threads = o.solver.threads;
	const TrackResult result = track_sequence(model, frames, landmarks, manifest.intrinsics, o.solver);
	io::write_bsc_sequence(o.out, result.sequence);
	const std::string diag = o.diagnostics.empty() ? o.out + ".diagnostics.json" : o.diagnostics;
	io::write_file(diag, io::format_diagnostics(result));
	std::cout << "fitted " << result.sequence.size() << " of " << frames.size() << " frames; wrote " << o.out << "\n";
}

struct PersonalizeOptions
{
	std::string generic;
	std::string examples_dir;
	std::string out;
	PersonalizeConfig cfg;
};

void run_personalize(const PersonalizeOptions& o)
{
	const auto generic = io::read_model(o.generic);
	const auto examples = io::read_examples(o.examples_dir);
	const BlendshapeModel subject = personalize(generic.model, examples, o.cfg);
	io::write_model(o.out, subject, generic.landmarks);
	std::cout << "wrote " << o.out << " from " << examples.size() << " examples\n";
}

struct EvalOptions
{
	std::string pred;
	std::string gt;
	std::string align;
	std::string table;
	double alpha = 0.5;
	std::string out;
};

void run_eval(const EvalOptions& o)
{
	const BscSequence pred = io::read_bsc_sequence(o.pred);
	std::optional<BscSequence> gt;
	if (!o.gt.empty()) {
		gt = io::read_bsc_sequence(o.gt);
		if (gt->names() != pred.names()) {
			throw Error(ErrorCode::validation, "prediction and ground truth name different blendshapes");
		}
		if (gt->size() != pred.size()) {
			throw Error(ErrorCode::dimension, "prediction has " + std::to_string(pred.size()) +
			                                      " frames, ground truth has " + std::to_string(gt->size()));
		}
	}
	const SequenceReport report = sequence_report(pred, gt);
	std::optional<WeightedError> weighted;
	if (!o.align.empty()) {
		const VisemeTable table = io::read_viseme_table(o.table);
		weighted = viseme_weighted_error(pred, *gt, io::read_alignment(o.align), table, o.alpha);
		std::cout << "viseme-weighted error " << io::format_double(weighted->score)
		          << (weighted->all_silence ? " (all frames silent)" : "") << "\n";
	}
	const std::string text = io::format_report(report, weighted, o.alpha);
	if (o.out.empty()) {
		std::cout << text;
	} else {
		io::write_file(o.out, text);
		std::cout << "wrote " << o.out << "\n";
	}
}

struct ApplyOptions
{
	std::string model;
	std::string sequence;
	std::string out_dir;
	int every = 1;
};

void run_apply(const ApplyOptions& o)
{
	const auto model = io::read_model(o.model).model;
	const BscSequence seq = io::read_bsc_sequence(o.sequence);
	if (seq.names() != model.names()) {
		throw Error(ErrorCode::validation, "sequence blendshape names do not match the model");
	}
	std::size_t written = 0;
	for (std::size_t t = 0; t < seq.size(); t += static_cast<std::size_t>(o.every)) {
		io::write_mesh(fs::path(o.out_dir) / frame_name(seq[t].frame_index, ".obj"), evaluate_mesh(model, seq[t].x));
		++written;
	}
	std::cout << "wrote " << written << " meshes to " << o.out_dir << "\n";
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"facetrack: blendshape coefficient and head pose estimation from depth and landmarks"};
	app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
	app.option_defaults()->always_capture_default();
	app.require_subcommand(1);
	app.set_version_flag("--version", "facetrack 0.1.0");

	ModelOptions model_opt{"model.json", {}};
	auto* mm = app.add_subcommand("make-model", "Write the procedural test head as a model file");
	mm->add_option("--out", model_opt.out, "Output model path");
	mm->add_option("--seed", model_opt.face.seed, "Seed for bump placement");
	mm->add_option("--blendshapes", model_opt.face.blendshapes, "Number of blendshapes")->check(CLI::PositiveNumber);
	mm->add_option("--columns", model_opt.face.columns, "Grid columns")->check(CLI::Range(2, 4096));
	mm->add_option("--rows", model_opt.face.rows, "Grid rows")->check(CLI::Range(2, 4096));

	ScriptOptions script_opt;
	auto* ms = app.add_subcommand("make-script", "Write a scripted coefficient sequence for synth");
	ms->add_option("--model", script_opt.model, "Model file")->required()->check(CLI::ExistingFile);
	ms->add_option("--out", script_opt.out, "Output sequence path")->required();
	ms->add_option("--kind", script_opt.kind, "neutral | ramp | sparse")
	    ->check(CLI::IsMember({"neutral", "ramp", "sparse"}));
	ms->add_option("--frames", script_opt.frames, "Number of frames")->check(CLI::PositiveNumber);
	ms->add_option("--fps", script_opt.fps, "Frame rate, Hz")->check(CLI::PositiveNumber);
	ms->add_option("--active", script_opt.active, "Active blendshapes per frame");
	ms->add_option("--seed", script_opt.seed, "Seed for the choice of active blendshapes");
	ms->add_option("--depth", script_opt.depth, "Head distance from the camera, m")->check(CLI::PositiveNumber);

	SynthOptions synth_opt;
	auto* sy = app.add_subcommand("synth", "Render a synthetic depth + landmark dataset from a script");
	sy->add_option("--model", synth_opt.model, "Model file")->required()->check(CLI::ExistingFile);
	sy->add_option("--script", synth_opt.script, "Scripted coefficient sequence")->required()->check(CLI::ExistingFile);
	sy->add_option("--out-dir", synth_opt.out_dir, "Output dataset directory")->required();
	sy->add_option("--noise-depth", synth_opt.noise.depth_sigma, "Depth noise sigma, m")->check(CLI::NonNegativeNumber);
	sy->add_option("--noise-landmark", synth_opt.noise.landmark_sigma, "Landmark noise sigma, px")
	    ->check(CLI::NonNegativeNumber);
	sy->add_option("--dropout", synth_opt.noise.landmark_dropout, "Landmark dropout probability")
	    ->check(CLI::Range(0.0, 1.0));
	sy->add_option("--seed", synth_opt.noise.seed, "Noise seed");
	sy->add_option("--width", synth_opt.width, "Image width, px")->check(CLI::PositiveNumber);
	sy->add_option("--height", synth_opt.height, "Image height, px")->check(CLI::PositiveNumber);
	sy->add_option("--fx", synth_opt.fx, "Focal length x, px")->check(CLI::PositiveNumber);
	sy->add_option("--fy", synth_opt.fy, "Focal length y, px")->check(CLI::PositiveNumber);
	sy->add_option("--threads", synth_opt.threads, "Worker threads (output does not depend on it)")
	    ->check(CLI::PositiveNumber);

	TrackOptions track_opt;
	auto* tr = app.add_subcommand("track", "Fit pose and coefficients to every frame of a dataset");
	tr->add_option("--model", track_opt.model, "Model file")->required()->check(CLI::ExistingFile);
	tr->add_option("--dataset", track_opt.dataset, "Dataset manifest or directory")->required()->check(CLI::ExistingPath);
	tr->add_option("--out", track_opt.out, "Output sequence path")->required();
	tr->add_option("--diagnostics", track_opt.diagnostics, "Per-frame diagnostics path (default: <out>.diagnostics.json)");
	tr->add_option("--wd", track_opt.solver.w_d, "Depth weight, per m^2")->check(CLI::NonNegativeNumber);
	tr->add_option("--wl", track_opt.solver.w_l, "Landmark weight, per px^2")->check(CLI::NonNegativeNumber);
	tr->add_option("--wr", track_opt.solver.w_r, "L1 weight")->check(CLI::NonNegativeNumber);
	tr->add_option("--outer-iters", track_opt.solver.outer_iterations, "Outer iterations per frame")
	    ->check(CLI::PositiveNumber);
	tr->add_option("--gs-sweeps", track_opt.solver.gs_sweeps, "Coordinate descent sweeps per outer iteration")
	    ->check(CLI::PositiveNumber);
	tr->add_option("--tol", track_opt.solver.objective_rel_tol, "Relative objective change for convergence")
	    ->check(CLI::PositiveNumber);
	tr->add_option("--threads", track_opt.solver.threads, "Worker threads (output does not depend on it)")
	    ->check(CLI::PositiveNumber);

	PersonalizeOptions pers_opt;
	pers_opt.out = "personalized.json";
	auto* pe = app.add_subcommand("personalize", "Adapt a generic model to a subject's example scans");
	pe->add_option("--generic", pers_opt.generic, "Generic model file")->required()->check(CLI::ExistingFile);
	pe->add_option("--examples-dir", pers_opt.examples_dir, "Directory with examples.json")
	    ->required()
	    ->check(CLI::ExistingDirectory);
	pe->add_option("--lambda", pers_opt.cfg.basis_regularization, "Pull towards the generic basis")
	    ->check(CLI::NonNegativeNumber);
	pe->add_option("--landmark-weight", pers_opt.cfg.landmark_weight, "Landmark weight, per px^2")
	    ->check(CLI::NonNegativeNumber);
	pe->add_option("--out", pers_opt.out, "Output model path");
	pe->add_option("--threads", pers_opt.cfg.threads, "Worker threads (output does not depend on it)")
	    ->check(CLI::PositiveNumber);

	EvalOptions eval_opt;
	eval_opt.table = std::string(FACETRACK_DATA_DIR) + "/viseme_table.json";
	auto* ev = app.add_subcommand("eval", "Score a coefficient sequence against ground truth");
	ev->add_option("--pred", eval_opt.pred, "Predicted sequence")->required()->check(CLI::ExistingFile);
	auto* gt_opt = ev->add_option("--gt", eval_opt.gt, "Ground-truth sequence")->check(CLI::ExistingFile);
	ev->add_option("--align", eval_opt.align, "Per-frame phoneme alignment")->check(CLI::ExistingFile)->needs(gt_opt);
	ev->add_option("--viseme-table", eval_opt.table, "Viseme table")->check(CLI::ExistingFile);
	ev->add_option("--alpha", eval_opt.alpha, "L1 share of the hybrid loss")->check(CLI::Range(0.0, 1.0));
	ev->add_option("--out", eval_opt.out, "Report path (default: standard output)");

	ApplyOptions apply_opt;
	auto* ap = app.add_subcommand("apply", "Write the unposed expression mesh of selected frames as OBJ");
	ap->add_option("--model", apply_opt.model, "Model file")->required()->check(CLI::ExistingFile);
	ap->add_option("--sequence", apply_opt.sequence, "Coefficient sequence")->required()->check(CLI::ExistingFile);
	ap->add_option("--out-dir", apply_opt.out_dir, "Output directory")->required();
	ap->add_option("--every", apply_opt.every, "Write every k-th frame")->check(CLI::PositiveNumber);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int rc = app.exit(e);
		return rc == 0 ? 0 : 1;
	}

	try {
		if (*mm) {
			run_make_model(model_opt);
		} else if (*ms) {
			run_make_script(script_opt);
		} else if (*sy) {
			run_synth(synth_opt);
		} else if (*tr) {
			run_track(track_opt);
		} else if (*pe) {
			run_personalize(pers_opt);
		} else if (*ev) {
			run_eval(eval_opt);
		} else if (*ap) {
			run_apply(apply_opt);
		}
	} catch (const Error& e) {
		std::cerr << "facetrack: " << e.what() << "\n";
		return exit_code(e.code());
	} catch (const std::exception& e) {
		std::cerr << "facetrack: " << e.what() << "\n";
		return 2;
	}
	return 0;
}
