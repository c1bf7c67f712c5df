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

#ifndef FACETRACK_PARALLEL_HPP_
#define FACETRACK_PARALLEL_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace facetrack {

/**
 * Runs fn(begin, end) over contiguous chunks of [0, count). Chunks are fixed by
 * count and threads only, and callers write into per-index slots, so results do
 * not depend on scheduling. The first exception thrown by any chunk is rethrown.
 */
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn)
{
	const auto workers = static_cast<std::size_t>(std::max(1, threads));
	if (workers == 1 || count < 2 * workers) {
		fn(std::size_t{0}, count);
		return;
	}
	const std::size_t chunk = (count + workers - 1) / workers;
	std::vector<std::exception_ptr> errors(workers);
	std::vector<std::thread> pool;
	pool.reserve(workers);
	for (std::size_t w = 0; w < workers; ++w) {
		const std::size_t begin = w * chunk;
		const std::size_t end = std::min(count, begin + chunk);
		if (begin >= end) {
			break;
		}
		pool.emplace_back([&, w, begin, end] {
			try {
				fn(begin, end);
			} catch (...) {
				errors[w] = std::current_exception();
			}
		});
	}
	for (auto& t : pool) {
		t.join();
	}
	for (auto& e : errors) {
		if (e) {
			std::rethrow_exception(e);
		}
	}
}

} // namespace facetrack

#endif // FACETRACK_PARALLEL_HPP_
