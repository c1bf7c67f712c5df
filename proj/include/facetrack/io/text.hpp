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

#ifndef FACETRACK_IO_TEXT_HPP_
#define FACETRACK_IO_TEXT_HPP_

#include "facetrack/error.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace facetrack::io {

/// Shortest decimal that reads back to the same double; '.' separator regardless of locale.
inline std::string format_double(double value)
{
	std::array<char, 64> buf{};
	const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
	return std::string(buf.data(), res.ptr);
}

inline bool parse_double(std::string_view text, double& out)
{
	if (!text.empty() && text.front() == '+') {
		text.remove_prefix(1);
	}
	const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
	return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline bool parse_long(std::string_view text, long long& out)
{
	const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
	return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline std::string_view trim(std::string_view s)
{
	const auto first = s.find_first_not_of(" \t\r\n");
	if (first == std::string_view::npos) {
		return {};
	}
	const auto last = s.find_last_not_of(" \t\r\n");
	return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
	std::vector<std::string_view> out;
	std::size_t start = 0;
	while (true) {
		const auto pos = s.find(sep, start);
		out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
		if (pos == std::string_view::npos) {
			break;
		}
		start = pos + 1;
	}
	return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
	std::vector<std::string_view> out;
	std::size_t i = 0;
	while (i < s.size()) {
		while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) {
			++i;
		}
		const std::size_t start = i;
		while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') {
			++i;
		}
		if (i > start) {
			out.push_back(s.substr(start, i - start));
		}
	}
	return out;
}

inline std::string read_file(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
	}
	return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view content)
{
	if (path.has_parent_path()) {
		std::error_code ec;
		std::filesystem::create_directories(path.parent_path(), ec);
	}
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
	}
	out.write(content.data(), static_cast<std::streamsize>(content.size()));
	if (!out) {
		throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
	}
}

} // namespace facetrack::io

#endif // FACETRACK_IO_TEXT_HPP_
