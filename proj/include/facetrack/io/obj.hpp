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

#ifndef FACETRACK_IO_OBJ_HPP_
#define FACETRACK_IO_OBJ_HPP_

#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/io/text.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace facetrack::io {

/**
 * Parses the triangle-only OBJ subset: "v x y z" and "f a b c" records with 1-based
 * (or negative, relative) indices. Texture and normal indices in "a/b/c" face tokens
 * are ignored, as are vn/vt/o/g/s/usemtl/mtllib records. Faces with more than three
 * corners are rejected rather than triangulated. Zero-area faces are rejected.
 */
inline Mesh parse_obj(std::string_view text, const std::string& source = "<memory>")
{
	std::vector<Vec3> vertices;
	std::vector<Triangle> faces;
	std::size_t line_no = 0;
	std::size_t pos = 0;
	const auto fail = [&](ErrorCode code, const std::string& what) {
		throw Error(code, source + ":" + std::to_string(line_no) + ": " + what);
	};
	while (pos <= text.size()) {
		const auto end = text.find('\n', pos);
		const std::string_view line =
		    trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
		pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
		++line_no;
		if (line.empty() || line.front() == '#') {
			continue;
		}
		const auto tokens = split_ws(line);
		const std::string_view tag = tokens.front();
		if (tag == "v") {
			if (tokens.size() != 4 && tokens.size() != 5) {
				fail(ErrorCode::parse, "vertex record needs 3 coordinates");
			}
			Vec3 p;
			for (int c = 0; c < 3; ++c) {
				if (!parse_double(tokens[static_cast<std::size_t>(c) + 1], p[c])) {
					fail(ErrorCode::parse, "bad coordinate '" + std::string(tokens[static_cast<std::size_t>(c) + 1]) + "'");
				}
			}
			vertices.push_back(p);
		} else if (tag == "f") {
			if (tokens.size() < 4) {
				fail(ErrorCode::parse, "face record needs 3 vertices");
			}
			if (tokens.size() > 4) {
				fail(ErrorCode::unsupported_face, std::to_string(tokens.size() - 1) +
				                                      "-sided face; only triangles are supported");
			}
			Triangle t{};
			for (int c = 0; c < 3; ++c) {
				const std::string_view tok = tokens[static_cast<std::size_t>(c) + 1];
				long long idx = 0;
				if (!parse_long(tok.substr(0, tok.find('/')), idx) || idx == 0) {
					fail(ErrorCode::parse, "bad face index '" + std::string(tok) + "'");
				}
				const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertices.size()) + idx;
				if (resolved < 0 || resolved >= static_cast<long long>(vertices.size())) {
					fail(ErrorCode::parse, "face index " + std::to_string(idx) + " out of range");
				}
				t[static_cast<std::size_t>(c)] = static_cast<int>(resolved);
			}
			faces.push_back(t);
		} else if (tag == "vn" || tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" ||
		           tag == "mtllib") {
			continue;
		} else {
			fail(ErrorCode::parse, "unsupported record '" + std::string(tag) + "'");
		}
	}
	Mesh mesh(std::move(vertices), std::move(faces));
	require_nondegenerate(mesh);
	return mesh;
}

inline Mesh read_mesh(const std::filesystem::path& path) { return parse_obj(read_file(path), path.string()); }

inline std::string format_obj(const Mesh& mesh)
{
	std::string out;
	out.reserve(mesh.vertex_count() * 48 + mesh.faces().size() * 24);
	for (const auto& v : mesh.vertices()) {
		out += "v " + format_double(v.x()) + ' ' + format_double(v.y()) + ' ' + format_double(v.z()) + '\n';
	}
	for (const auto& f : mesh.faces()) {
		out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
	}
	return out;
}

inline void write_mesh(const std::filesystem::path& path, const Mesh& mesh) { write_file(path, format_obj(mesh)); }

} // namespace facetrack::io

#endif // FACETRACK_IO_OBJ_HPP_
