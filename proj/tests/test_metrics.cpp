#include "support.hpp"

#include <gtest/gtest.h>

using namespace facetrack;

namespace {

BscSequence seq(const std::vector<std::vector<double>>& rows)
{
	std::vector<std::string> names;
	for (std::size_t k = 0; k < rows.front().size(); ++k) {
		names.push_back("s" + std::to_string(k));
	}
	BscSequence out(names, {});
	for (std::size_t t = 0; t < rows.size(); ++t) {
		out.push_back(BscFrame{static_cast<int>(t), t * 0.04, RigidPose::identity(), BscVector(rows[t])});
	}
	return out;
}

} // namespace

TEST(PhonemeToViseme, TableExamples)
{
	const auto table = standard_viseme_table();
	const auto p = phoneme_to_viseme(table, "/p/");
	EXPECT_EQ(p.viseme, "P");
	EXPECT_EQ(p.weight, 1.0);
	const auto uw = phoneme_to_viseme(table, "uw");
	EXPECT_EQ(uw.viseme, "V2");
	EXPECT_EQ(uw.weight, 0.6);
	const auto sil = phoneme_to_viseme(table, "SIL");
	EXPECT_EQ(sil.viseme, "SIL");
	EXPECT_EQ(sil.weight, 0.0);
	EXPECT_EQ(phoneme_to_viseme(table, "ay").viseme, "V3");
	EXPECT_EQ(phoneme_to_viseme(table, "y").viseme, "V3");
}

TEST(PhonemeToViseme, UnknownPhoneme)
{
	try {
		phoneme_to_viseme(standard_viseme_table(), "xx");
		FAIL();
	} catch (const Error& e) {
		EXPECT_EQ(e.code(), ErrorCode::unknown_phoneme);
	}
}

TEST(VisemeTable, InventoryResolves)
{
	const auto table = standard_viseme_table();
	EXPECT_EQ(table.classes().size(), 13u);
	std::size_t phonemes = 0;
	for (const auto& c : table.classes()) {
		for (const auto& p : c.phonemes) {
			EXPECT_EQ(phoneme_to_viseme(table, p).viseme, c.viseme);
			++phonemes;
		}
	}
	EXPECT_EQ(table.phoneme_count(), phonemes);
	EXPECT_EQ(phonemes, 43u);
}

TEST(VisemeTable, Invariants)
{
	EXPECT_THROW(VisemeTable({{"A", "", 0.5, {"a"}}, {"B", "", 0.5, {"a"}}}), Error);
	EXPECT_THROW(VisemeTable({{"A", "", 1.5, {"a"}}}), Error);
	EXPECT_THROW(VisemeTable({{"SIL", "", 0.1, {"sil"}}}), Error);
	EXPECT_THROW(VisemeTable({{"A", "", 0.5, {"a"}}, {"a", "", 0.5, {"b"}}}), Error);
}

TEST(HybridLoss, Examples)
{
	const Eigen::Vector2d a(0.5, 0.0), b(0.25, 0.0);
	EXPECT_DOUBLE_EQ(hybrid_l1_cosine(a, b, 0.5), 0.0625);
	EXPECT_NEAR(hybrid_l1_cosine(a, a, 0.5), 0.0, 1e-15);
	EXPECT_DOUBLE_EQ(hybrid_l1_cosine(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), 0.0), 1.0);
	EXPECT_DOUBLE_EQ(hybrid_l1_cosine(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(), 0.0), 0.0);
	EXPECT_DOUBLE_EQ(hybrid_l1_cosine(Eigen::Vector2d::Zero(), Eigen::Vector2d(0.1, 0), 0.0), 1.0);
}

TEST(HybridLoss, Properties)
{
	std::mt19937_64 rng(61);
	for (int i = 0; i < 200; ++i) {
		const auto a = test::random_bsc(rng, 7);
		const auto b = test::random_bsc(rng, 7);
		EXPECT_NEAR(hybrid_l1_cosine(a, a), 0.0, 1e-12);
		EXPECT_GE(hybrid_l1_cosine(a, b), 0.0);
		EXPECT_DOUBLE_EQ(hybrid_l1_cosine(a, b, 1.0), (a.values() - b.values()).cwiseAbs().mean());
	}
}

TEST(VisemeWeightedError, IdenticalSequencesScoreZero)
{
	const auto s = seq({{0.1, 0.2}, {0.5, 0.0}, {0.0, 0.0}});
	const auto r = viseme_weighted_error(s, s, FrameAlignment{{"p", "t", "sil"}}, standard_viseme_table());
	EXPECT_EQ(r.score, 0.0);
	EXPECT_FALSE(r.all_silence);
}

TEST(VisemeWeightedError, AllSilenceIsZeroWithFlag)
{
	const auto pred = seq({{1.0, 0.0}, {0.0, 1.0}});
	const auto gt = seq({{0.0, 1.0}, {1.0, 0.0}});
	const auto r = viseme_weighted_error(pred, gt, FrameAlignment{{"sil", "/sp/"}}, standard_viseme_table());
	EXPECT_EQ(r.score, 0.0);
	EXPECT_TRUE(r.all_silence);
}

TEST(VisemeWeightedError, HandComputedTwoFrames)
{
	// alpha = 1 makes the per-frame loss the mean absolute error: 0.2 and 0.5.
	const auto pred = seq({{0.2, 0.2}, {0.5, 0.5}});
	const auto gt = seq({{0.0, 0.0}, {0.0, 0.0}});
	const auto r = viseme_weighted_error(pred, gt, FrameAlignment{{"p", "t"}}, standard_viseme_table(), 1.0);
	EXPECT_NEAR(r.score, 0.38 / 1.36, 1e-12);
	EXPECT_NEAR(r.score, 0.2794, 5e-5);
	EXPECT_NEAR(r.per_viseme.at("P").weighted_error, 0.2, 1e-12);
	EXPECT_NEAR(r.per_viseme.at("T").weighted_error, 0.18, 1e-12);
}

TEST(VisemeWeightedError, WeightScalesNumerator)
{
	const auto pred = seq({{0.2, 0.2}, {0.5, 0.5}});
	const auto gt = seq({{0.0, 0.0}, {0.0, 0.0}});
	auto classes = standard_viseme_table().classes();
	const auto base = viseme_weighted_error(pred, gt, FrameAlignment{{"p", "t"}}, VisemeTable(classes), 1.0);
	for (auto& c : classes) {
		if (c.viseme == "T") {
			c.weight *= 0.5;
		}
	}
	const auto scaled = viseme_weighted_error(pred, gt, FrameAlignment{{"p", "t"}}, VisemeTable(classes), 1.0);
	EXPECT_NEAR(scaled.per_viseme.at("T").weighted_error, 0.5 * base.per_viseme.at("T").weighted_error, 1e-15);
	EXPECT_EQ(scaled.per_viseme.at("P").weighted_error, base.per_viseme.at("P").weighted_error);
}

TEST(VisemeWeightedError, Mismatches)
{
	const auto a = seq({{0.1}, {0.2}});
	const auto b = seq({{0.1}});
	EXPECT_THROW(viseme_weighted_error(a, b, FrameAlignment{{"p", "p"}}, standard_viseme_table()), Error);
	EXPECT_THROW(viseme_weighted_error(a, a, FrameAlignment{{"p"}}, standard_viseme_table()), Error);
	EXPECT_THROW(viseme_weighted_error(a, a, FrameAlignment{{"p", "qq"}}, standard_viseme_table()), Error);
}

TEST(SequenceReport, Examples)
{
	const auto s = seq({{0.2, 0.0}, {0.2, 0.0}, {0.2, 0.0}});
	const auto same = sequence_report(s, s);
	ASSERT_TRUE(same.rmse.has_value());
	EXPECT_EQ(*same.rmse, (std::vector<double>{0.0, 0.0}));
	EXPECT_EQ(same.temporal_delta, 0.0);
	EXPECT_DOUBLE_EQ(same.sparsity, 0.5);
	EXPECT_TRUE(same.range_violations.empty());

	// Two frames: errors (0.3, 0.0) and (0.1, 0.4).
	const auto pred = seq({{0.3, 0.0}, {0.1, 0.4}});
	const auto gt = seq({{0.0, 0.0}, {0.0, 0.0}});
	const auto r = sequence_report(pred, gt);
	EXPECT_NEAR((*r.rmse)[0], std::sqrt((0.09 + 0.01) / 2), 1e-15);
	EXPECT_NEAR((*r.rmse)[1], std::sqrt(0.16 / 2), 1e-15);
	EXPECT_NEAR(r.temporal_delta, (0.2 + 0.4) / 2, 1e-15);
	EXPECT_FALSE(sequence_report(pred).rmse.has_value());
	EXPECT_THROW(sequence_report(BscSequence({"a"}, {})), Error);
}
