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

#ifndef FACETRACK_IO_EXAMPLES_HPP_
#define FACETRACK_IO_EXAMPLES_HPP_

#include "facetrack/io/documents.hpp"
#include "facetrack/io/obj.hpp"
#include "facetrack/personalize.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace facetrack::io {

inline constexpr const char* examples_index = "examples.json";

/**
 * Reads the example scans of one subject from dir/examples.json:
 *
 *   {"format": "facetrack-examples", "version": "1.0", "examples": [
 *     {"scan": "neutral.obj", "activation": [0, 0, ...]},
 *     {"scan": "smile.obj", "activation": [...],
 *      "landmarks": {"file": "smile_lm.json", "intrinsics": {...}, "pose": {...}}}]}
 *
 * Paths are relative to dir.
 */
inline std::vector<ExampleExpression> read_examples(const std::filesystem::path& dir)
{
	const auto index_path = dir / examples_index;
	if (!std::filesystem::exists(index_path)) {
		throw Error(ErrorCode::io, "'" + dir.string() + "' has no " + examples_index);
	}
	const std::string source = index_path.string();
	const json doc = detail::parse_json(read_file(index_path), source);
	const detail::Node root(doc, source);
	detail::check_header(root, "facetrack-examples");
	root.require_object({"format", "version", "examples"});
	const auto list = root["examples"];
	std::vector<ExampleExpression> out;
	for (std::size_t i = 0; i < list.array_size(); ++i) {
		const auto e = list[i];
		e.require_object({"scan", "activation"}, {"landmarks"});
		ExampleExpression ex{read_mesh(detail::resolve(dir, e["scan"].string())), BscVector::zeros(0), std::nullopt};
		try {
			ex.activation = BscVector(e["activation"].numbers());
		} catch (const Error& err) {
			e["activation"].fail(err.what());
		}
		if (e.has("landmarks")) {
			const auto l = e["landmarks"];
			l.require_object({"file", "intrinsics", "pose"});
			ex.landmarks = ExampleLandmarks{read_landmarks(detail::resolve(dir, l["file"].string())),
			                                intrinsics_from_json(l["intrinsics"]), pose_from_json(l["pose"])};
		}
		out.push_back(std::move(ex));
	}
	return out;
}

/// Writes scans as OBJ files next to an examples.json index.
inline void write_examples(const std::filesystem::path& dir, const std::vector<ExampleExpression>& examples)
{
	json doc = detail::header("facetrack-examples");
	json list = json::array();
	for (std::size_t i = 0; i < examples.size(); ++i) {
		const auto& ex = examples[i];
		const std::string stem = "example_" + std::to_string(i);
		write_mesh(dir / (stem + ".obj"), ex.scan);
		const auto& a = ex.activation.values();
		json entry{{"scan", stem + ".obj"}, {"activation", std::vector<double>(a.data(), a.data() + a.size())}};
		if (ex.landmarks) {
			write_landmarks(dir / (stem + "_landmarks.json"), ex.landmarks->landmarks);
			entry["landmarks"] = json{{"file", stem + "_landmarks.json"},
			                          {"intrinsics", intrinsics_to_json(ex.landmarks->intrinsics)},
			                          {"pose", pose_to_json(ex.landmarks->pose)}};
		}
		list.push_back(std::move(entry));
	}
	doc["examples"] = std::move(list);
	write_file(dir / examples_index, detail::dump(doc));
}

} // namespace facetrack::io

#endif // FACETRACK_IO_EXAMPLES_HPP_
