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

#ifndef FACETRACK_IO_DOCUMENTS_HPP_
#define FACETRACK_IO_DOCUMENTS_HPP_

#include "facetrack/bsc_solver.hpp"
#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/io/text.hpp"
#include "facetrack/metrics.hpp"
#include "facetrack/personalize.hpp"
#include "facetrack/synth.hpp"

#include "json.hpp"

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace facetrack::io {

using json = nlohmann::json;

inline constexpr int document_major = 1;

namespace detail {

/// Typed, path-tracking access to a JSON node so that schema errors say where they are.
class Node
{
public:
	Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

	const json& raw() const noexcept { return value_; }
	const std::string& path() const noexcept { return path_; }

	[[noreturn]] void fail(const std::string& what) const
	{
		throw Error(ErrorCode::validation, path_ + ": " + what);
	}

	void require_object(std::initializer_list<std::string_view> required,
	                    std::initializer_list<std::string_view> optional = {}) const
	{
		if (!value_.is_object()) {
			fail("expected an object");
		}
		for (const auto& key : required) {
			if (!value_.contains(std::string(key))) {
				fail("missing field '" + std::string(key) + "'");
			}
		}
		std::set<std::string_view> allowed(required);
		allowed.insert(optional.begin(), optional.end());
		for (const auto& [key, v] : value_.items()) {
			if (allowed.count(key) == 0) {
				fail("unknown field '" + key + "'");
			}
		}
	}

	bool has(const std::string& key) const { return value_.contains(key) && !value_.at(key).is_null(); }

	Node operator[](const std::string& key) const
	{
		if (!value_.contains(key)) {
			fail("missing field '" + key + "'");
		}
		return Node(value_.at(key), path_ + "." + key);
	}

	Node operator[](std::size_t i) const { return Node(value_.at(i), path_ + "[" + std::to_string(i) + "]"); }

	std::size_t array_size() const
	{
		if (!value_.is_array()) {
			fail("expected an array");
		}
		return value_.size();
	}

	double number() const
	{
		if (!value_.is_number()) {
			fail("expected a number");
		}
		return value_.get<double>();
	}

	long long integer() const
	{
		if (!value_.is_number_integer()) {
			fail("expected an integer");
		}
		return value_.get<long long>();
	}

	std::size_t index() const
	{
		const long long v = integer();
		if (v < 0) {
			fail("expected a non-negative integer");
		}
		return static_cast<std::size_t>(v);
	}

	std::string string() const
	{
		if (!value_.is_string()) {
			fail("expected a string");
		}
		return value_.get<std::string>();
	}

	std::vector<double> numbers() const
	{
		std::vector<double> out(array_size());
		for (std::size_t i = 0; i < out.size(); ++i) {
			out[i] = (*this)[i].number();
		}
		return out;
	}

	Vec3 vec3() const
	{
		if (array_size() != 3) {
			fail("expected 3 numbers");
		}
		return {(*this)[0].number(), (*this)[1].number(), (*this)[2].number()};
	}

private:
	const json& value_;
	std::string path_;
};

inline json parse_json(std::string_view text, const std::string& source)
{
	try {
		return json::parse(text);
	} catch (const json::parse_error& e) {
		throw Error(ErrorCode::parse, source + ": " + e.what());
	}
}

/// Checks the "format" tag and the major part of the "version" string.
inline void check_header(const Node& doc, std::string_view format)
{
	if (!doc.raw().is_object()) {
		doc.fail("expected an object");
	}
	const std::string got = doc["format"].string();
	if (got != format) {
		throw Error(ErrorCode::format, doc.path() + ": expected format '" + std::string(format) + "', got '" + got + "'");
	}
	const std::string version = doc["version"].string();
	long long major = -1;
	if (!parse_long(std::string_view(version).substr(0, version.find('.')), major) || major != document_major) {
		throw Error(ErrorCode::format, doc.path() + ": unsupported " + std::string(format) + " version '" + version + "'");
	}
}

inline json header(std::string_view format)
{
	json doc = json::object();
	doc["format"] = std::string(format);
	doc["version"] = std::to_string(document_major) + ".0";
	return doc;
}

inline std::string dump(const json& doc) { return doc.dump(1, '\t') + '\n'; }

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& relative)
{
	const std::filesystem::path p(relative);
	return p.is_absolute() ? p : base / p;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Camera and pose fragments

inline json intrinsics_to_json(const CameraIntrinsics& intr)
{
	return json{{"fx", intr.fx()}, {"fy", intr.fy()}, {"cx", intr.cx()},
	            {"cy", intr.cy()}, {"width", intr.width()}, {"height", intr.height()}};
}

inline CameraIntrinsics intrinsics_from_json(const detail::Node& node)
{
	node.require_object({"fx", "fy", "cx", "cy", "width", "height"});
	try {
		return CameraIntrinsics(node["fx"].number(), node["fy"].number(), node["cx"].number(), node["cy"].number(),
		                        static_cast<int>(node["width"].integer()), static_cast<int>(node["height"].integer()));
	} catch (const Error& e) {
		node.fail(e.what());
	}
}

inline json pose_to_json(const RigidPose& pose)
{
	const auto& q = pose.rotation();
	return json{{"rotation_wxyz", json::array({q.w(), q.x(), q.y(), q.z()})},
	            {"translation", detail::vec3_json(pose.translation())}};
}

inline RigidPose pose_from_json(const detail::Node& node)
{
	node.require_object({"rotation_wxyz", "translation"});
	const auto q = node["rotation_wxyz"].numbers();
	if (q.size() != 4) {
		node["rotation_wxyz"].fail("expected 4 numbers");
	}
	const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
	if (std::abs(quat.norm() - 1.0) > 1e-6) {
		node["rotation_wxyz"].fail("quaternion is not unit length");
	}
	return RigidPose::from_unnormalized(quat, node["translation"].vec3());
}

// ---------------------------------------------------------------------------
// Landmarks

inline std::string format_landmarks(const LandmarkSet& set)
{
	json doc = detail::header("facetrack-landmarks");
	doc["width"] = set.width();
	doc["height"] = set.height();
	json entries = json::array();
	for (const auto& e : set.entries()) {
		entries.push_back(json{{"id", e.id}, {"vertex", e.vertex_index}, {"u", e.u}, {"v", e.v}, {"confidence", e.confidence}});
	}
	doc["landmarks"] = std::move(entries);
	return detail::dump(doc);
}

/// An empty (or whitespace-only) document is an empty landmark set.
inline LandmarkSet parse_landmarks(std::string_view text, const std::string& source = "<memory>")
{
	if (trim(text).empty()) {
		return {};
	}
	const json doc = detail::parse_json(text, source);
	const detail::Node root(doc, source);
	detail::check_header(root, "facetrack-landmarks");
	root.require_object({"format", "version", "width", "height", "landmarks"});
	const auto list = root["landmarks"];
	std::vector<Landmark> entries;
	for (std::size_t i = 0; i < list.array_size(); ++i) {
		const auto e = list[i];
		e.require_object({"id", "vertex", "u", "v"}, {"confidence"});
		Landmark lm;
		lm.id = e["id"].string();
		lm.vertex_index = e["vertex"].index();
		lm.u = e["u"].number();
		lm.v = e["v"].number();
		lm.confidence = e.has("confidence") ? e["confidence"].number() : 1.0;
		entries.push_back(std::move(lm));
	}
	try {
		return LandmarkSet(static_cast<int>(root["width"].integer()), static_cast<int>(root["height"].integer()),
		                   std::move(entries));
	} catch (const Error& e) {
		root.fail(e.what());
	}
}

inline LandmarkSet read_landmarks(const std::filesystem::path& path)
{
	return parse_landmarks(read_file(path), path.string());
}

inline void write_landmarks(const std::filesystem::path& path, const LandmarkSet& set)
{
	write_file(path, format_landmarks(set));
}

// ---------------------------------------------------------------------------
// Viseme table

inline std::string format_viseme_table(const VisemeTable& table, const std::vector<std::string>& notes = {})
{
	json doc = detail::header("facetrack-viseme-table");
	if (!notes.empty()) {
		doc["notes"] = notes;
	}
	json list = json::array();
	for (const auto& c : table.classes()) {
		list.push_back(json{{"viseme", c.viseme}, {"cluster", c.cluster}, {"weight", c.weight}, {"phonemes", c.phonemes}});
	}
	doc["visemes"] = std::move(list);
	return detail::dump(doc);
}

inline VisemeTable parse_viseme_table(std::string_view text, const std::string& source = "<memory>")
{
	const json doc = detail::parse_json(text, source);
	const detail::Node root(doc, source);
	detail::check_header(root, "facetrack-viseme-table");
	root.require_object({"format", "version", "visemes"}, {"notes"});
	const auto list = root["visemes"];
	std::vector<VisemeClass> classes;
	for (std::size_t i = 0; i < list.array_size(); ++i) {
		const auto c = list[i];
		c.require_object({"viseme", "weight", "phonemes"}, {"cluster"});
		VisemeClass cls;
		cls.viseme = c["viseme"].string();
		cls.cluster = c.has("cluster") ? c["cluster"].string() : std::string();
		cls.weight = c["weight"].number();
		const auto ph = c["phonemes"];
		for (std::size_t p = 0; p < ph.array_size(); ++p) {
			cls.phonemes.push_back(ph[p].string());
		}
		classes.push_back(std::move(cls));
	}
	try {
		return VisemeTable(std::move(classes));
	} catch (const Error& e) {
		throw Error(e.code(), source + ": " + e.what());
	}
}

inline VisemeTable read_viseme_table(const std::filesystem::path& path)
{
	return parse_viseme_table(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Blendshape model

/**
 * Neutral vertices, 0-based triangles, one delta array (3V numbers, xyz per vertex)
 * per blendshape, and the landmark vertices used for synthesis and tracking.
 */
inline std::string format_model(const BlendshapeModel& model, const std::vector<LandmarkDefinition>& landmarks = {})
{
	json doc = detail::header("facetrack-model");
	json verts = json::array();
	for (const auto& v : model.neutral().vertices()) {
		verts.push_back(detail::vec3_json(v));
	}
	json faces = json::array();
	for (const auto& f : model.neutral().faces()) {
		faces.push_back(json::array({f[0], f[1], f[2]}));
	}
	json shapes = json::array();
	for (std::size_t k = 0; k < model.size(); ++k) {
		const auto col = model.basis().col(static_cast<Eigen::Index>(k));
		shapes.push_back(json{{"name", model.names()[k]}, {"deltas", std::vector<double>(col.data(), col.data() + col.size())}});
	}
	json lms = json::array();
	for (const auto& l : landmarks) {
		lms.push_back(json{{"id", l.id}, {"vertex", l.vertex}});
	}
	doc["vertices"] = std::move(verts);
	doc["faces"] = std::move(faces);
	doc["blendshapes"] = std::move(shapes);
	doc["landmarks"] = std::move(lms);
	return detail::dump(doc);
}

struct ModelFile
{
	BlendshapeModel model;
	std::vector<LandmarkDefinition> landmarks;
};

inline ModelFile parse_model(std::string_view text, const std::string& source = "<memory>")
{
	const json doc = detail::parse_json(text, source);
	const detail::Node root(doc, source);
	detail::check_header(root, "facetrack-model");
	root.require_object({"format", "version", "vertices", "faces", "blendshapes"}, {"landmarks"});
	const auto vnode = root["vertices"];
	std::vector<Vec3> vertices(vnode.array_size());
	for (std::size_t i = 0; i < vertices.size(); ++i) {
		vertices[i] = vnode[i].vec3();
	}
	const auto fnode = root["faces"];
	std::vector<Triangle> faces(fnode.array_size());
	for (std::size_t i = 0; i < faces.size(); ++i) {
		const auto f = fnode[i];
		if (f.array_size() != 3) {
			throw Error(ErrorCode::unsupported_face, f.path() + ": only triangles are supported");
		}
		for (std::size_t c = 0; c < 3; ++c) {
			faces[i][c] = static_cast<int>(f[c].integer());
		}
	}
	Mesh neutral = [&] {
		try {
			return Mesh(std::move(vertices), std::move(faces));
		} catch (const Error& e) {
			throw Error(e.code(), source + ": " + e.what());
		}
	}();
	const auto snode = root["blendshapes"];
	const auto rows = static_cast<Eigen::Index>(3 * neutral.vertex_count());
	Eigen::MatrixXd basis(rows, static_cast<Eigen::Index>(snode.array_size()));
	std::vector<std::string> names;
	for (std::size_t k = 0; k < snode.array_size(); ++k) {
		const auto s = snode[k];
		s.require_object({"name", "deltas"});
		names.push_back(s["name"].string());
		const auto d = s["deltas"].numbers();
		if (static_cast<Eigen::Index>(d.size()) != rows) {
			throw Error(ErrorCode::dimension, s.path() + ".deltas: expected " + std::to_string(rows) + " numbers, got " +
			                                      std::to_string(d.size()));
		}
		basis.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(d.data(), rows);
	}
	ModelFile out{[&] {
		              try {
			              return BlendshapeModel(std::move(neutral), std::move(basis), std::move(names));
		              } catch (const Error& e) {
			              throw Error(e.code(), source + ": " + e.what());
		              }
	              }(),
	              {}};
	if (root.has("landmarks")) {
		const auto lnode = root["landmarks"];
		for (std::size_t i = 0; i < lnode.array_size(); ++i) {
			const auto l = lnode[i];
			l.require_object({"id", "vertex"});
			LandmarkDefinition def{l["id"].string(), l["vertex"].index()};
			if (def.vertex >= out.model.vertex_count()) {
				l.fail("vertex index out of range");
			}
			out.landmarks.push_back(std::move(def));
		}
	}
	return out;
}

inline ModelFile read_model(const std::filesystem::path& path) { return parse_model(read_file(path), path.string()); }

inline void write_model(const std::filesystem::path& path, const BlendshapeModel& model,
                        const std::vector<LandmarkDefinition>& landmarks = {})
{
	write_file(path, format_model(model, landmarks));
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestFrame
{
	int index = 0;
	double timestamp = 0.0;
	std::string depth;     ///< relative to the manifest's directory
	std::string landmarks; ///< relative to the manifest's directory
};

struct DatasetManifest
{
	CameraIntrinsics intrinsics;
	std::vector<ManifestFrame> frames;
	std::optional<std::string> ground_truth;
	std::optional<NoiseConfig> noise; ///< generator settings, synthetic sets only
};

inline std::string format_manifest(const DatasetManifest& m)
{
	json doc = detail::header("facetrack-dataset");
	doc["intrinsics"] = intrinsics_to_json(m.intrinsics);
	json frames = json::array();
	for (const auto& f : m.frames) {
		frames.push_back(json{{"index", f.index}, {"timestamp", f.timestamp}, {"depth", f.depth}, {"landmarks", f.landmarks}});
	}
	doc["frames"] = std::move(frames);
	if (m.ground_truth) {
		doc["ground_truth"] = *m.ground_truth;
	}
	if (m.noise) {
		doc["generator"] = json{{"seed", m.noise->seed},
		                        {"depth_sigma", m.noise->depth_sigma},
		                        {"landmark_sigma", m.noise->landmark_sigma},
		                        {"landmark_dropout", m.noise->landmark_dropout}};
	}
	return detail::dump(doc);
}

/// Parses a manifest; when base_dir is given, every referenced file must exist under it.
inline DatasetManifest parse_manifest(std::string_view text, const std::string& source = "<memory>",
                                      const std::optional<std::filesystem::path>& base_dir = std::nullopt)
{
	const json doc = detail::parse_json(text, source);
	const detail::Node root(doc, source);
	detail::check_header(root, "facetrack-dataset");
	root.require_object({"format", "version", "intrinsics", "frames"}, {"ground_truth", "generator"});
	DatasetManifest m;
	m.intrinsics = intrinsics_from_json(root["intrinsics"]);
	const auto fnode = root["frames"];
	for (std::size_t i = 0; i < fnode.array_size(); ++i) {
		const auto f = fnode[i];
		f.require_object({"index", "timestamp", "depth", "landmarks"});
		m.frames.push_back(ManifestFrame{static_cast<int>(f["index"].integer()), f["timestamp"].number(),
		                                 f["depth"].string(), f["landmarks"].string()});
	}
	if (root.has("ground_truth")) {
		m.ground_truth = root["ground_truth"].string();
	}
	if (root.has("generator")) {
		const auto g = root["generator"];
		g.require_object({"seed", "depth_sigma", "landmark_sigma", "landmark_dropout"});
		NoiseConfig noise;
		noise.seed = static_cast<std::uint64_t>(g["seed"].index());
		noise.depth_sigma = g["depth_sigma"].number();
		noise.landmark_sigma = g["landmark_sigma"].number();
		noise.landmark_dropout = g["landmark_dropout"].number();
		m.noise = noise;
	}
	if (base_dir) {
		const auto require = [&](const std::string& rel, const std::string& path) {
			if (!std::filesystem::exists(detail::resolve(*base_dir, rel))) {
				throw Error(ErrorCode::io, path + ": file '" + rel + "' does not exist");
			}
		};
		for (std::size_t i = 0; i < m.frames.size(); ++i) {
			const std::string at = source + ".frames[" + std::to_string(i) + "]";
			require(m.frames[i].depth, at + ".depth");
			require(m.frames[i].landmarks, at + ".landmarks");
		}
		if (m.ground_truth) {
			require(*m.ground_truth, source + ".ground_truth");
		}
	}
	return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path)
{
	return parse_manifest(read_file(path), path.string(), path.parent_path());
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m)
{
	write_file(path, format_manifest(m));
}

// ---------------------------------------------------------------------------
// Phoneme alignment

inline std::string format_alignment(const FrameAlignment& a)
{
	json doc = detail::header("facetrack-alignment");
	doc["phonemes"] = a.phonemes;
	return detail::dump(doc);
}

inline FrameAlignment parse_alignment(std::string_view text, const std::string& source = "<memory>")
{
	const json doc = detail::parse_json(text, source);
	const detail::Node root(doc, source);
	detail::check_header(root, "facetrack-alignment");
	root.require_object({"format", "version", "phonemes"});
	FrameAlignment a;
	const auto list = root["phonemes"];
	for (std::size_t i = 0; i < list.array_size(); ++i) {
		a.phonemes.push_back(list[i].string());
	}
	return a;
}

inline FrameAlignment read_alignment(const std::filesystem::path& path)
{
	return parse_alignment(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_report(const SequenceReport& report, const std::optional<WeightedError>& weighted = std::nullopt,
                                 double alpha = 0.5)
{
	json doc = detail::header("facetrack-report");
	doc["frames"] = report.frames;
	doc["sparsity"] = report.sparsity;
	doc["zero_threshold"] = report.zero_threshold;
	doc["temporal_delta"] = report.temporal_delta;
	doc["range_violations"] = report.range_violations;
	if (report.rmse) {
		json rmse = json::object();
		for (std::size_t k = 0; k < report.names.size(); ++k) {
			rmse[report.names[k]] = (*report.rmse)[k];
		}
		doc["rmse"] = std::move(rmse);
	}
	if (weighted) {
		json per = json::object();
		for (const auto& [name, b] : weighted->per_viseme) {
			per[name] = json{{"frames", b.frames}, {"weight_sum", b.weight_sum},
			                 {"weighted_error", b.weighted_error}, {"mean_error", b.mean_error}};
		}
		doc["viseme_weighted"] = json{{"alpha", alpha}, {"score", weighted->score},
		                              {"all_silence", weighted->all_silence}, {"per_viseme", std::move(per)}};
	}
	return detail::dump(doc);
}

inline void write_report(const std::filesystem::path& path, const SequenceReport& report,
                         const std::optional<WeightedError>& weighted = std::nullopt, double alpha = 0.5)
{
	write_file(path, format_report(report, weighted, alpha));
}

/// Per-frame outcome of a tracking run.
inline std::string format_diagnostics(const TrackResult& result)
{
	json doc = detail::header("facetrack-diagnostics");
	doc["fitted"] = result.sequence.size();
	doc["failed"] = result.failed;
	json frames = json::array();
	for (const auto& f : result.frames) {
		json entry{{"frame_index", f.frame_index}, {"ok", f.ok}};
		if (!f.ok) {
			entry["message"] = f.message;
		}
		if (f.fit) {
			entry["outer_iterations"] = f.fit->outer_iterations;
			entry["converged"] = f.fit->converged;
			entry["correspondences"] = f.fit->correspondence_count;
			entry["landmarks"] = f.fit->landmark_count;
			entry["rigid_skipped"] = f.fit->rigid_skipped;
			entry["frozen"] = f.fit->frozen;
			if (!f.fit->objective_trace.empty()) {
				entry["objective_initial"] = f.fit->objective_trace.front();
				entry["objective_final"] = f.fit->objective_trace.back();
			}
		}
		frames.push_back(std::move(entry));
	}
	doc["frames"] = std::move(frames);
	return detail::dump(doc);
}

} // namespace facetrack::io

#endif // FACETRACK_IO_DOCUMENTS_HPP_
