#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "semx/core_types.hpp"
#include "test_support.hpp"

using namespace semx;
using semx::testing::make_matrix;

namespace {

template <typename F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected semx::Error";
    return Errc::IoError;
}

} // namespace

TEST(EmbeddingMatrix, RejectsBadShapes) {
    EXPECT_EQ(code_of([] { EmbeddingMatrix(1, 2, std::vector<float>(2, 1.0f)); }), Errc::DimensionMismatch);
    EXPECT_EQ(code_of([] { EmbeddingMatrix(3, 2, std::vector<float>(5, 1.0f)); }), Errc::DimensionMismatch);
    std::vector<float> bad(6, 1.0f);
    bad[3] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_EQ(code_of([&] { EmbeddingMatrix(3, 2, bad); }), Errc::NonFiniteValue);
}

TEST(EmbeddingMatrix, RowAccessAndNorms) {
    const auto E = make_matrix({{3.0f, 4.0f}, {0.0f, 0.0f}, {1.0f, 0.0f}});
    EXPECT_EQ(E.vocab_size(), 3u);
    EXPECT_EQ(E.dim(), 2u);
    EXPECT_FLOAT_EQ(E.row(0)[1], 4.0f);
    EXPECT_DOUBLE_EQ(E.row_norm(0), 5.0);
    EXPECT_DOUBLE_EQ(E.row_norm(1), 0.0);
}

TEST(Cosine, AxisAndDiagonal) {
    const semx::testing::FiveTokenFixture f;
    EXPECT_DOUBLE_EQ(cosine(f.E, 0, 2), 1.0);
    EXPECT_DOUBLE_EQ(cosine(f.E, 0, 1), 0.0);
    EXPECT_NEAR(cosine(f.E, 0, 4), 1.0 / std::sqrt(2.0), 1e-7);
}

TEST(Cosine, ZeroNormAndRange) {
    const auto E = make_matrix({{1.0f, 0.0f}, {0.0f, 0.0f}});
    EXPECT_EQ(code_of([&] { cosine(E, 0, 1); }), Errc::ZeroNormRow);
    EXPECT_EQ(code_of([&] { cosine(E, 0, 2); }), Errc::IndexOutOfRange);
}

TEST(Cosine, ClampedToUnitInterval) {
    const auto E = make_matrix({{0.1f, 0.2f, 0.3f}, {0.1f, 0.2f, 0.3f}});
    const double c = cosine(E, 0, 1);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(c, -1.0);
}

TEST(LabelSet, RejectsDuplicatesAndEmpty) {
    EXPECT_EQ(code_of([] { LabelSet({}); }), Errc::EmptyLabelSet);
    EXPECT_EQ(code_of([] { LabelSet({{"a", 1}, {"b", 1}}); }), Errc::DuplicateTokenId);
    EXPECT_EQ(code_of([] { LabelSet({{"a", 1}, {"a", 2}}); }), Errc::DuplicateName);
}

TEST(LabelSet, VocabCheck) {
    const LabelSet labels({{"a", 1}, {"b", 7}});
    EXPECT_NO_THROW(labels.check_vocab(8));
    EXPECT_EQ(code_of([&] { labels.check_vocab(7); }), Errc::TokenOutOfRange);
    EXPECT_EQ(labels.token_ids(), (std::vector<TokenId>{1, 7}));
}

TEST(ValidateRecord, DenseLengthAndFiniteness) {
    LogitRecord r{"x", DenseLogits{{0.0, 1.0}}, std::nullopt};
    EXPECT_EQ(code_of([&] { validate_record(r, 3, 2); }), Errc::DimensionMismatch);
    r.logits = DenseLogits{{0.0, INFINITY, 1.0}};
    EXPECT_EQ(code_of([&] { validate_record(r, 3, 2); }), Errc::NonFiniteValue);
    r.logits = DenseLogits{{0.0, 2.0, 1.0}};
    EXPECT_NO_THROW(validate_record(r, 3, 2));
}

TEST(ValidateRecord, SparseRules) {
    LogitRecord r{"x", SparseLogits{{{2, 1.0}, {2, 0.5}}, ScoreKind::Logit}, std::nullopt};
    EXPECT_EQ(code_of([&] { validate_record(r, 5, 2); }), Errc::DuplicateTokenId);
    r.logits = SparseLogits{{{2, 0.5}, {1, 1.0}}, ScoreKind::Logit};
    EXPECT_EQ(code_of([&] { validate_record(r, 5, 2); }), Errc::UnsortedSparse);
    r.logits = SparseLogits{{{9, 0.5}}, ScoreKind::LogProb};
    EXPECT_EQ(code_of([&] { validate_record(r, 5, 2); }), Errc::TokenOutOfRange);
    r.logits = SparseLogits{{{1, 1.0}, {3, 1.0}, {0, -2.0}}, ScoreKind::LogProb};
    EXPECT_NO_THROW(validate_record(r, 5, 2));
}

TEST(ValidateRecord, Truth) {
    LogitRecord r{"x", DenseLogits{{0.0, 1.0, 2.0}}, HardLabel{2}};
    EXPECT_EQ(code_of([&] { validate_record(r, 3, 2); }), Errc::TruthIndexOutOfRange);
    r.truth = SoftLabel{{0.5, 0.6}};
    EXPECT_EQ(code_of([&] { validate_record(r, 3, 2); }), Errc::BadSoftLabel);
    r.truth = SoftLabel{{0.5, 0.5, 0.0}};
    EXPECT_EQ(code_of([&] { validate_record(r, 3, 2); }), Errc::BadSoftLabel);
    r.truth = SoftLabel{{1.2, -0.2}};
    EXPECT_EQ(code_of([&] { validate_record(r, 3, 2); }), Errc::BadSoftLabel);
    r.truth = SoftLabel{{0.25, 0.75}};
    EXPECT_NO_THROW(validate_record(r, 3, 2));
}

TEST(SemanticKernel, ConstructorChecks) {
    const std::vector<TokenId> tokens{0, 1};
    auto good = [] { return std::vector<KernelRow>{{{0, 0.2}, {2, 0.2}}, {{1, 0.2}}}; };
    EXPECT_NO_THROW(SemanticKernel(0.8, 5, tokens, good()));
    EXPECT_EQ(code_of([&] { SemanticKernel(1.0, 5, tokens, good()); }), Errc::InvalidTau);
    EXPECT_EQ(code_of([&] { SemanticKernel(0.8, 5, {0}, good()); }), Errc::KernelLabelMismatch);
    EXPECT_EQ(code_of([&] { SemanticKernel(0.8, 5, tokens, {{{2, 0.2}, {0, 0.2}}, {{1, 0.2}}}); }),
              Errc::DuplicateTokenId);
    EXPECT_EQ(code_of([&] { SemanticKernel(0.8, 5, tokens, {{{0, 0.2}, {2, 0.3}}, {{1, 0.2}}}); }),
              Errc::InvalidConfig);
    EXPECT_EQ(code_of([&] { SemanticKernel(0.8, 5, tokens, {{{2, 0.1}}, {{1, 0.2}}}); }), Errc::InvalidConfig);
}

TEST(Argmax, TiesGoToLowerIndex) {
    const std::vector<double> v{0.3, 0.4, 0.4, 0.1};
    EXPECT_EQ(argmax(v), 1u);
    EXPECT_EQ(hard_index(SoftLabel{{0.5, 0.5}}), 0u);
}

TEST(EvalRecord, ValidatesTruthAgainstDistribution) {
    LabelDistribution d{{0.4, 0.6}, Method::Standard, "a"};
    EXPECT_EQ(code_of([&] { EvalRecord(d, HardLabel{2}); }), Errc::TruthIndexOutOfRange);
    EXPECT_NO_THROW(EvalRecord(d, HardLabel{1}));
}

TEST(Error, CategoriesAndMessage) {
    const Error e(Errc::MalformedLine, "bad token", 7);
    EXPECT_EQ(e.line(), 7u);
    EXPECT_EQ(e.message(), "bad token");
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
    EXPECT_EQ(errc_category(Errc::TruncatedFile), ErrorCategory::Io);
    EXPECT_EQ(errc_category(Errc::AuthFailure), ErrorCategory::Remote);
    EXPECT_EQ(errc_category(Errc::ZeroNormRow), ErrorCategory::Validation);
    EXPECT_EQ(method_name(Method::SemanticFellBack), "semantic_fell_back");
}
