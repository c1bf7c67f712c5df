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

#ifndef FACETRACK_SEQUENCE_HPP_
#define FACETRACK_SEQUENCE_HPP_

#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace facetrack {

/// Pose and coefficients for one frame.
struct BscFrame
{
	int frame_index = 0;
	double timestamp = 0.0; ///< seconds
	RigidPose pose;
	BscVector x;
};

/**
 * Coefficient sequence with the blendshape names it refers to. Used both for
 * tracking results and for scripting synthetic sequences.
 */
class BscSequence
{
public:
	BscSequence() = default;

	BscSequence(std::vector<std::string> names, std::vector<BscFrame> frames)
	    : names_(std::move(names)), frames_(std::move(frames))
	{
		for (const auto& f : frames_) {
			if (f.x.size() != names_.size()) {
				throw Error(ErrorCode::dimension, "frame " + std::to_string(f.frame_index) + " has " +
				                                      std::to_string(f.x.size()) + " coefficients for " +
				                                      std::to_string(names_.size()) + " blendshapes");
			}
		}
	}

	const std::vector<std::string>& names() const noexcept { return names_; }
	const std::vector<BscFrame>& frames() const noexcept { return frames_; }
	std::size_t size() const noexcept { return frames_.size(); }
	bool empty() const noexcept { return frames_.empty(); }
	const BscFrame& operator[](std::size_t i) const { return frames_[i]; }

	void push_back(BscFrame frame)
	{
		if (frame.x.size() != names_.size()) {
			throw Error(ErrorCode::dimension, "coefficient count does not match the sequence header");
		}
		frames_.push_back(std::move(frame));
	}

private:
	std::vector<std::string> names_;
	std::vector<BscFrame> frames_;
};

/// A script is a sequence whose timestamps strictly increase.
inline void require_script(const BscSequence& script)
{
	if (script.empty()) {
		throw Error(ErrorCode::validation, "sequence script is empty");
	}
	for (std::size_t t = 1; t < script.size(); ++t) {
		if (!(script[t].timestamp > script[t - 1].timestamp)) {
			throw Error(ErrorCode::validation, "script timestamps must strictly increase (frame " +
			                                       std::to_string(script[t].frame_index) + ")");
		}
	}
}

} // namespace facetrack

#endif // FACETRACK_SEQUENCE_HPP_
