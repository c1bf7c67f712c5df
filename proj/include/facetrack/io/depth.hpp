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

#ifndef FACETRACK_IO_DEPTH_HPP_
#define FACETRACK_IO_DEPTH_HPP_

#include "facetrack/correspondence.hpp"
#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/io/text.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

namespace facetrack::io {

/// A depth image together with the pinhole camera stored in its header.
struct DepthFile
{
	DepthFrame frame;
	CameraIntrinsics intrinsics;
};

inline constexpr char depth_magic[4] = {'B', 'S', 'D', 'F'};
inline constexpr std::uint16_t depth_version = 1;
inline constexpr std::size_t depth_header_bytes = 4 + 2 + 4 + 4 + 4 * 4 + 8;

namespace detail {

template <typename T>
void put_le(std::string& out, T value)
{
	using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
	const U bits = std::bit_cast<U>(value);
	for (std::size_t b = 0; b < sizeof(T); ++b) {
		out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
	}
}

template <typename T>
T get_le(std::string_view in, std::size_t offset)
{
	using U = std::conditional_t<sizeof(T) == 2, std::uint16_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
	U bits = 0;
	for (std::size_t b = 0; b < sizeof(T); ++b) {
		bits |= static_cast<U>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
	}
	return std::bit_cast<T>(bits);
}

} // namespace detail

/**
 * Serializes to the BSDF layout: magic "BSDF", u16 version, u32 width, u32 height,
 * f32 fx fy cx cy, f64 timestamp, then width*height f32 depths in row-major order.
 * All fields little-endian. 0 marks an invalid pixel.
 */
inline std::string encode_depth(const DepthFrame& frame, const CameraIntrinsics& intr)
{
	std::string out(depth_magic, 4);
	out.reserve(depth_header_bytes + 4 * frame.values().size());
	detail::put_le(out, depth_version);
	detail::put_le(out, static_cast<std::uint32_t>(frame.width()));
	detail::put_le(out, static_cast<std::uint32_t>(frame.height()));
	detail::put_le(out, static_cast<float>(intr.fx()));
	detail::put_le(out, static_cast<float>(intr.fy()));
	detail::put_le(out, static_cast<float>(intr.cx()));
	detail::put_le(out, static_cast<float>(intr.cy()));
	detail::put_le(out, frame.timestamp());
	for (float d : frame.values()) {
		detail::put_le(out, d);
	}
	return out;
}

inline DepthFile decode_depth(std::string_view bytes, int frame_index = 0, const std::string& source = "<memory>")
{
	if (bytes.size() < depth_header_bytes) {
		throw Error(ErrorCode::format, source + ": truncated header, expected " + std::to_string(depth_header_bytes) +
		                                   " bytes, got " + std::to_string(bytes.size()));
	}
	if (std::memcmp(bytes.data(), depth_magic, 4) != 0) {
		throw Error(ErrorCode::format, source + ": bad magic, not a BSDF depth file");
	}
	const auto version = detail::get_le<std::uint16_t>(bytes, 4);
	if (version != depth_version) {
		throw Error(ErrorCode::format, source + ": unsupported depth format version " + std::to_string(version));
	}
	const auto width = detail::get_le<std::uint32_t>(bytes, 6);
	const auto height = detail::get_le<std::uint32_t>(bytes, 10);
	if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
		throw Error(ErrorCode::format, source + ": implausible image size " + std::to_string(width) + "x" +
		                                   std::to_string(height));
	}
	const double fx = detail::get_le<float>(bytes, 14);
	const double fy = detail::get_le<float>(bytes, 18);
	const double cx = detail::get_le<float>(bytes, 22);
	const double cy = detail::get_le<float>(bytes, 26);
	const double timestamp = detail::get_le<double>(bytes, 30);
	const std::size_t count = static_cast<std::size_t>(width) * height;
	const std::size_t expected = depth_header_bytes + 4 * count;
	if (bytes.size() != expected) {
		throw Error(ErrorCode::format, source + ": expected " + std::to_string(expected) + " bytes, got " +
		                                   std::to_string(bytes.size()));
	}
	std::vector<float> values(count);
	for (std::size_t i = 0; i < count; ++i) {
		values[i] = detail::get_le<float>(bytes, depth_header_bytes + 4 * i);
	}
	CameraIntrinsics intr(fx, fy, cx, cy, static_cast<int>(width), static_cast<int>(height));
	return {DepthFrame(static_cast<int>(width), static_cast<int>(height), std::move(values), frame_index, timestamp),
	        intr};
}

inline DepthFile read_depth(const std::filesystem::path& path, int frame_index = 0)
{
	return decode_depth(read_file(path), frame_index, path.string());
}

inline void write_depth(const std::filesystem::path& path, const DepthFrame& frame, const CameraIntrinsics& intr)
{
	write_file(path, encode_depth(frame, intr));
}

} // namespace facetrack::io

#endif // FACETRACK_IO_DEPTH_HPP_
