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

#ifndef FACETRACK_ERROR_HPP_
#define FACETRACK_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace facetrack {

enum class ErrorCode {
	dimension,
	validation,
	behind_camera,
	invalid_depth,
	insufficient_data,
	degenerate_geometry,
	no_data,
	rank_deficiency,
	unknown_phoneme,
	parse,
	format,
	unsupported_face,
	io,
	sequence_failed,
	usage,
};

inline std::string_view to_string(ErrorCode code)
{
	switch (code) {
	case ErrorCode::dimension: return "dimension";
	case ErrorCode::validation: return "validation";
	case ErrorCode::behind_camera: return "behind-camera";
	case ErrorCode::invalid_depth: return "invalid-depth";
	case ErrorCode::insufficient_data: return "insufficient-data";
	case ErrorCode::degenerate_geometry: return "degenerate-geometry";
	case ErrorCode::no_data: return "no-data";
	case ErrorCode::rank_deficiency: return "rank-deficiency";
	case ErrorCode::unknown_phoneme: return "unknown-phoneme";
	case ErrorCode::parse: return "parse";
	case ErrorCode::format: return "format";
	case ErrorCode::unsupported_face: return "unsupported-face";
	case ErrorCode::io: return "io";
	case ErrorCode::sequence_failed: return "sequence-failed";
	case ErrorCode::usage: return "usage";
	}
	return "unknown";
}

/**
 * The single exception type thrown by the library. Callers that need to react to a
 * particular failure inspect code() rather than catching subclasses.
 */
class Error : public std::runtime_error
{
public:
	Error(ErrorCode code, const std::string& message)
	    : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code)
	{
	}

	ErrorCode code() const noexcept { return code_; }

private:
	ErrorCode code_;
};

} // namespace facetrack

#endif // FACETRACK_ERROR_HPP_
