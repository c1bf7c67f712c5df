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

#ifndef FACETRACK_METRICS_HPP_
#define FACETRACK_METRICS_HPP_

#include "facetrack/error.hpp"
#include "facetrack/geometry.hpp"
#include "facetrack/sequence.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace facetrack {

struct VisemeClass
{
	std::string viseme;   ///< e.g. "P"
	std::string cluster;  ///< e.g. "Bilabial"
	double weight = 0.0;  ///< importance in [0,1]
	std::vector<std::string> phonemes;
};

/// Strips surrounding slashes and lower-cases, so "/P/" and "p" name the same phoneme.
inline std::string normalize_phoneme(std::string_view label)
{
	while (!label.empty() && label.front() == '/') {
		label.remove_prefix(1);
	}
	while (!label.empty() && label.back() == '/') {
		label.remove_suffix(1);
	}
	std::string out(label);
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	return out;
}

inline std::string normalize_viseme(std::string_view label)
{
	std::string out = normalize_phoneme(label);
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
	return out;
}

/**
 * Phoneme to viseme mapping with a per-viseme importance weight. Every phoneme maps
 * to exactly one viseme; the silence viseme "SIL", when present, has weight 0.
 */
class VisemeTable
{
public:
	VisemeTable() = default;

	explicit VisemeTable(std::vector<VisemeClass> classes) : classes_(std::move(classes))
	{
		std::unordered_map<std::string, bool> visemes;
		for (std::size_t c = 0; c < classes_.size(); ++c) {
			auto& cls = classes_[c];
			cls.viseme = normalize_viseme(cls.viseme);
			if (cls.viseme.empty() || visemes.count(cls.viseme) != 0) {
				throw Error(ErrorCode::validation, "viseme '" + cls.viseme + "' is empty or listed twice");
			}
			visemes[cls.viseme] = true;
			if (!(cls.weight >= 0.0 && cls.weight <= 1.0)) {
				throw Error(ErrorCode::validation, "viseme '" + cls.viseme + "' weight outside [0,1]");
			}
			if (cls.viseme == "SIL" && cls.weight != 0.0) {
				throw Error(ErrorCode::validation, "the silence viseme must have weight 0");
			}
			for (auto& p : cls.phonemes) {
				p = normalize_phoneme(p);
				if (p.empty()) {
					throw Error(ErrorCode::validation, "empty phoneme under viseme '" + cls.viseme + "'");
				}
				if (!index_.emplace(p, c).second) {
					throw Error(ErrorCode::validation, "phoneme '" + p + "' is mapped more than once");
				}
			}
		}
	}

	const std::vector<VisemeClass>& classes() const noexcept { return classes_; }

	const VisemeClass& lookup(std::string_view phoneme) const
	{
		const auto it = index_.find(normalize_phoneme(phoneme));
		if (it == index_.end()) {
			throw Error(ErrorCode::unknown_phoneme, "phoneme '" + std::string(phoneme) + "' is not in the table");
		}
		return classes_[it->second];
	}

	std::optional<double> weight_of(std::string_view viseme) const
	{
		const std::string key = normalize_viseme(viseme);
		for (const auto& c : classes_) {
			if (c.viseme == key) {
				return c.weight;
			}
		}
		return std::nullopt;
	}

	std::size_t phoneme_count() const noexcept { return index_.size(); }

private:
	std::vector<VisemeClass> classes_;
	std::unordered_map<std::string, std::size_t> index_;
};

/**
 * The 13-viseme table used for weighting lip-sync errors. Weights are viseme
 * classifier accuracies normalized by the best class (/P/), with silence forced to
 * zero. The same table ships as data/viseme_table.json.
 */
inline VisemeTable standard_viseme_table()
{
	return VisemeTable({
	    {"P", "Bilabial", 1.0, {"p", "b", "m"}},
	    {"F", "Labio-Dental", 0.97, {"f", "v"}},
	    {"SH", "Palato alveolar", 0.75, {"sh", "zh", "ch", "jh"}},
	    {"TH", "Dental", 0.66, {"th", "dh"}},
	    {"Z", "Alveolar fricative", 0.66, {"z", "s"}},
	    {"V2", "Lip rounded vowels level 2", 0.6, {"uw", "uh", "ow", "w"}},
	    {"V1", "Lip rounded vowels level 1", 0.59, {"aa", "ah", "ao", "aw", "er", "oy"}},
	    // "/ay~/y/" is read as the two phonemes ay and y.
	    {"V3", "Lip stretched vowels level 1", 0.58, {"ae", "eh", "ey", "ay", "y"}},
	    {"L", "Alveolar semivowels", 0.5, {"l", "el", "r"}},
	    {"V4", "Lip stretched vowels level 2", 0.48, {"ih", "iy"}},
	    {"G", "Velar", 0.46, {"g", "ng", "k", "hh"}},
	    {"T", "Alveolar", 0.36, {"t", "d", "n", "en"}},
	    {"SIL", "Silence", 0.0, {"sil", "sp"}},
	});
}

struct VisemeLookup
{
	std::string viseme;
	double weight = 0.0;
};

inline VisemeLookup phoneme_to_viseme(const VisemeTable& table, std::string_view phoneme)
{
	const auto& cls = table.lookup(phoneme);
	return {cls.viseme, cls.weight};
}

/**
 * alpha * mean|a - b| + (1 - alpha) * (1 - cos(a, b)).
 *
 * Cosine distance between two all-zero vectors is 0; between an all-zero and a
 * non-zero vector it is 1.
 */
inline double hybrid_l1_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double alpha = 0.5)
{
	if (a.size() != b.size()) {
		throw Error(ErrorCode::dimension, "hybrid loss needs equal-length vectors");
	}
	if (!(alpha >= 0.0 && alpha <= 1.0)) {
		throw Error(ErrorCode::validation, "alpha must lie in [0,1]");
	}
	const double l1 = a.size() == 0 ? 0.0 : (a - b).cwiseAbs().mean();
	const double na = a.norm();
	const double nb = b.norm();
	double cosdist = 0.0;
	if (na == 0.0 || nb == 0.0) {
		cosdist = (na == 0.0 && nb == 0.0) ? 0.0 : 1.0;
	} else {
		cosdist = std::max(0.0, 1.0 - a.dot(b) / (na * nb));
	}
	return alpha * l1 + (1.0 - alpha) * cosdist;
}

inline double hybrid_l1_cosine(const BscVector& a, const BscVector& b, double alpha = 0.5)
{
	return hybrid_l1_cosine(a.values(), b.values(), alpha);
}

/// Time-aligned phoneme label for each scored frame.
struct FrameAlignment
{
	std::vector<std::string> phonemes;
};

struct VisemeBreakdown
{
	std::size_t frames = 0;
	double weight_sum = 0.0;
	double weighted_error = 0.0; ///< sum of weight * per-frame loss
	double mean_error = 0.0;     ///< unweighted mean per-frame loss
};

struct WeightedError
{
	double score = 0.0;
	bool all_silence = false; ///< total weight was zero; score defined as 0
	std::map<std::string, VisemeBreakdown> per_viseme;
};

/**
 * Weighted mean of the per-frame hybrid loss, each frame weighted by the importance
 * of its spoken viseme:
 *
 *   sum_t w(viseme_t) e(pred_t, gt_t) / sum_t w(viseme_t)
 */
inline WeightedError viseme_weighted_error(const BscSequence& pred, const BscSequence& gt,
                                           const FrameAlignment& align, const VisemeTable& table,
                                           double alpha = 0.5, double timestamp_tolerance = 1e-6)
{
	if (pred.size() != gt.size()) {
		throw Error(ErrorCode::dimension, "prediction has " + std::to_string(pred.size()) +
		                                      " frames, ground truth has " + std::to_string(gt.size()));
	}
	if (align.phonemes.size() != pred.size()) {
		throw Error(ErrorCode::dimension, "alignment has " + std::to_string(align.phonemes.size()) + " labels for " +
		                                      std::to_string(pred.size()) + " frames");
	}
	WeightedError out;
	double numerator = 0.0;
	double denominator = 0.0;
	for (std::size_t t = 0; t < pred.size(); ++t) {
		if (std::abs(pred[t].timestamp - gt[t].timestamp) > timestamp_tolerance) {
			throw Error(ErrorCode::validation, "timestamps disagree at frame " + std::to_string(t));
		}
		const auto& cls = table.lookup(align.phonemes[t]);
		const double e = hybrid_l1_cosine(pred[t].x, gt[t].x, alpha);
		auto& bucket = out.per_viseme[cls.viseme];
		bucket.frames += 1;
		bucket.weight_sum += cls.weight;
		bucket.weighted_error += cls.weight * e;
		bucket.mean_error += e;
		numerator += cls.weight * e;
		denominator += cls.weight;
	}
	for (auto& [name, bucket] : out.per_viseme) {
		bucket.mean_error /= static_cast<double>(bucket.frames);
	}
	if (denominator > 0.0) {
		out.score = numerator / denominator;
	} else {
		out.all_silence = true;
	}
	return out;
}

struct SequenceReport
{
	std::size_t frames = 0;
	std::vector<std::string> names;
	std::optional<std::vector<double>> rmse; ///< per blendshape, present when ground truth is given
	double sparsity = 0.0;                   ///< fraction of coefficients <= zero_threshold
	double zero_threshold = 1e-6;
	double temporal_delta = 0.0;             ///< mean |x_t - x_{t-1}| over frames and blendshapes
	std::vector<std::string> range_violations;
};

inline SequenceReport sequence_report(const BscSequence& pred, const std::optional<BscSequence>& gt = std::nullopt)
{
	if (pred.empty()) {
		throw Error(ErrorCode::validation, "cannot report on an empty sequence");
	}
	SequenceReport report;
	report.frames = pred.size();
	report.names = pred.names();
	const auto n = static_cast<Eigen::Index>(pred.names().size());

	std::size_t zeros = 0;
	double delta_sum = 0.0;
	for (std::size_t t = 0; t < pred.size(); ++t) {
		const auto& x = pred[t].x.values();
		for (Eigen::Index k = 0; k < n; ++k) {
			if (x[k] <= report.zero_threshold) {
				++zeros;
			}
			if (!(x[k] >= 0.0 && x[k] <= 1.0)) {
				report.range_violations.push_back("frame " + std::to_string(pred[t].frame_index) + " " +
				                                  pred.names()[static_cast<std::size_t>(k)]);
			}
		}
		if (t > 0) {
			delta_sum += (x - pred[t - 1].x.values()).cwiseAbs().sum();
		}
	}
	const double total = static_cast<double>(pred.size()) * static_cast<double>(n);
	report.sparsity = total > 0.0 ? static_cast<double>(zeros) / total : 0.0;
	if (pred.size() > 1 && n > 0) {
		report.temporal_delta = delta_sum / (static_cast<double>(pred.size() - 1) * static_cast<double>(n));
	}

	if (gt) {
		if (gt->size() != pred.size() || gt->names().size() != pred.names().size()) {
			throw Error(ErrorCode::dimension, "ground truth does not match the prediction's shape");
		}
		Eigen::VectorXd sq = Eigen::VectorXd::Zero(n);
		for (std::size_t t = 0; t < pred.size(); ++t) {
			sq += (pred[t].x.values() - (*gt)[t].x.values()).array().square().matrix();
		}
		sq /= static_cast<double>(pred.size());
		std::vector<double> rmse(static_cast<std::size_t>(n));
		for (Eigen::Index k = 0; k < n; ++k) {
			rmse[static_cast<std::size_t>(k)] = std::sqrt(sq[k]);
		}
		report.rmse = std::move(rmse);
	}
	return report;
}

} // namespace facetrack

#endif // FACETRACK_METRICS_HPP_
