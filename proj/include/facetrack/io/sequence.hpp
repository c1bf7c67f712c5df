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

#ifndef FACETRACK_IO_SEQUENCE_HPP_
#define FACETRACK_IO_SEQUENCE_HPP_

#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/io/text.hpp"
#include "facetrack/sequence.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace facetrack::io {

inline constexpr std::string_view sequence_magic = "# facetrack bsc-sequence";
inline constexpr int sequence_major = 1;
inline constexpr int sequence_minor = 0;

inline const std::vector<std::string>& sequence_fixed_columns()
{
	static const std::vector<std::string> cols{"frame_index", "timestamp_s", "qw", "qx", "qy", "qz", "tx", "ty", "tz"};
	return cols;
}

/**
 * Comma-separated text:
 *
 *   # facetrack bsc-sequence 1.0
 *   frame_index,timestamp_s,qw,qx,qy,qz,tx,ty,tz,<blendshape names...>
 *   0,0,1,0,0,0,0,0,0.5,0,0.25,...
 *
 * Numbers are written as the shortest decimal that reads back exactly.
 */
inline std::string format_bsc_sequence(const BscSequence& seq)
{
	std::string out(sequence_magic);
	out += ' ' + std::to_string(sequence_major) + '.' + std::to_string(sequence_minor) + '\n';
	for (const auto& c : sequence_fixed_columns()) {
		out += c + ',';
	}
	for (std::size_t k = 0; k < seq.names().size(); ++k) {
		out += seq.names()[k];
		out += k + 1 < seq.names().size() ? ',' : '\n';
	}
	for (const auto& f : seq.frames()) {
		const auto& q = f.pose.rotation();
		const auto& t = f.pose.translation();
		out += std::to_string(f.frame_index) + ',' + format_double(f.timestamp);
		for (double v : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()}) {
			out += ',' + format_double(v);
		}
		for (Eigen::Index k = 0; k < f.x.values().size(); ++k) {
			out += ',' + format_double(f.x.values()[k]);
		}
		out += '\n';
	}
	return out;
}

inline BscSequence parse_bsc_sequence(std::string_view text, const std::string& source = "<memory>")
{
	std::vector<std::string_view> lines;
	std::size_t pos = 0;
	while (pos < text.size()) {
		const auto end = text.find('\n', pos);
		lines.push_back(trim(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos)));
		pos = end == std::string_view::npos ? text.size() : end + 1;
	}
	const auto where = [&](std::size_t line) { return source + ":" + std::to_string(line + 1) + ": "; };
	if (lines.empty() || lines[0].substr(0, sequence_magic.size()) != sequence_magic) {
		throw Error(ErrorCode::format, source + ": missing '" + std::string(sequence_magic) + "' header");
	}
	{
		const auto version = trim(lines[0].substr(sequence_magic.size()));
		long long major = -1;
		if (!parse_long(version.substr(0, version.find('.')), major) || major != sequence_major) {
			throw Error(ErrorCode::format, source + ": unsupported sequence version '" + std::string(version) + "'");
		}
	}
	if (lines.size() < 2) {
		throw Error(ErrorCode::format, source + ": missing column header");
	}
	const auto header = split(lines[1], ',');
	const auto& fixed = sequence_fixed_columns();
	if (header.size() <= fixed.size()) {
		throw Error(ErrorCode::format, where(1) + "column header names no blendshapes");
	}
	for (std::size_t c = 0; c < fixed.size(); ++c) {
		if (header[c] != fixed[c]) {
			throw Error(ErrorCode::format, where(1) + "expected column '" + fixed[c] + "', got '" +
			                                   std::string(header[c]) + "'");
		}
	}
	std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(fixed.size()), header.end());
	const std::size_t n = names.size();

	std::vector<BscFrame> frames;
	for (std::size_t l = 2; l < lines.size(); ++l) {
		if (lines[l].empty() || lines[l].front() == '#') {
			continue;
		}
		const auto cells = split(lines[l], ',');
		if (cells.size() != fixed.size() + n) {
			throw Error(ErrorCode::parse, where(l) + "expected " + std::to_string(fixed.size() + n) + " fields, got " +
			                                  std::to_string(cells.size()));
		}
		long long index = 0;
		if (!parse_long(cells[0], index)) {
			throw Error(ErrorCode::parse, where(l) + "bad frame index '" + std::string(cells[0]) + "'");
		}
		std::vector<double> v(cells.size() - 1);
		for (std::size_t c = 1; c < cells.size(); ++c) {
			if (!parse_double(cells[c], v[c - 1]) || !std::isfinite(v[c - 1])) {
				throw Error(ErrorCode::parse, where(l) + "bad number '" + std::string(cells[c]) + "' in column '" +
				                                  std::string(header[c]) + "'");
			}
		}
		const Eigen::Quaterniond q(v[1], v[2], v[3], v[4]);
		if (std::abs(q.norm() - 1.0) > 1e-6) {
			throw Error(ErrorCode::validation, where(l) + "frame " + std::to_string(index) +
			                                       " quaternion is not unit length");
		}
		std::vector<double> coeffs(v.begin() + 8, v.end());
		for (std::size_t k = 0; k < n; ++k) {
			if (!(coeffs[k] >= 0.0 && coeffs[k] <= 1.0)) {
				throw Error(ErrorCode::validation, where(l) + "frame " + std::to_string(index) + " coefficient '" +
				                                       names[k] + "' = " + format_double(coeffs[k]) +
				                                       " outside [0,1]");
			}
		}
		// Exact unit quaternions are kept as written so that round trips are lossless.
		const RigidPose pose = std::abs(q.norm() - 1.0) <= 1e-9 ? RigidPose(q, Vec3(v[5], v[6], v[7]))
		                                                        : RigidPose::from_unnormalized(q, Vec3(v[5], v[6], v[7]));
		frames.push_back(BscFrame{static_cast<int>(index), v[0], pose, BscVector(coeffs)});
	}
	return BscSequence(std::move(names), std::move(frames));
}

inline BscSequence read_bsc_sequence(const std::filesystem::path& path)
{
	return parse_bsc_sequence(read_file(path), path.string());
}

inline void write_bsc_sequence(const std::filesystem::path& path, const BscSequence& seq)
{
	write_file(path, format_bsc_sequence(seq));
}

} // namespace facetrack::io

#endif // FACETRACK_IO_SEQUENCE_HPP_
