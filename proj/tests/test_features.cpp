#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "imgraph/error.hpp"
#include "imgraph/features.hpp"
#include "support/fixtures.hpp"

using namespace imgraph;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an imgraph::Error";
    return ErrorCode::Undefined;
}

std::vector<double> padded(std::initializer_list<double> head, std::size_t dims) {
    std::vector<double> v(head);
    v.resize(dims, 0.0);
    return v;
}

}  // namespace

TEST(Quantize, EndpointsMapToByteRange) {
    const auto bytes = quantize(padded({0.0, 1.0}, 64), 64);
    EXPECT_EQ(bytes[0], 0);
    EXPECT_EQ(bytes[1], 255);
}

TEST(Quantize, ZeroVector) {
    const auto bytes = quantize(std::vector<double>(50, 0.0), 50);
    EXPECT_EQ(bytes, std::vector<std::uint8_t>(50, 0));
}

TEST(Quantize, HalfRoundsUp) {
    // 0.5 * 255 = 127.5, which rounds half up to 128.
    EXPECT_EQ(quantize(padded({0.5}, 64), 64)[0], 128);
}

TEST(Quantize, RejectsOutOfRangeComponents) {
    EXPECT_EQ(code_of([] { quantize(padded({1.0001}, 64), 64); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([] { quantize(padded({-0.001}, 50), 50); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([] { quantize(padded({std::nan("")}, 50), 50); }), ErrorCode::OutOfRange);
}

TEST(Quantize, RejectsUnsupportedWidths) {
    EXPECT_EQ(code_of([] { quantize(std::vector<double>(10, 0.0), 10); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([] { quantize(std::vector<double>(63, 0.0), 64); }), ErrorCode::DimensionMismatch);
}

TEST(Dequantize, Endpoints) {
    const std::vector<std::uint8_t> zero{0};
    const std::vector<std::uint8_t> full{255};
    EXPECT_EQ(dequantize(zero)[0], 0.0);
    EXPECT_EQ(dequantize(full)[0], 1.0);
}

TEST(Dequantize, RoundTripIsIdentityOnEveryByteValue) {
    std::vector<std::uint8_t> all(64);
    for (int start = 0; start < 256; start += 64) {
        for (int i = 0; i < 64; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(start + i);
        EXPECT_EQ(quantize(dequantize(all), 64), all);
    }
    const std::vector<std::uint8_t> mid{128};
    EXPECT_NEAR(dequantize(mid)[0], 0.50196078, 1e-8);
}

TEST(Similarity, Examples) {
    std::vector<std::uint8_t> zeros(64, 0);
    std::vector<std::uint8_t> full(64, 255);
    std::vector<std::uint8_t> half(64, 0);
    std::fill(half.begin(), half.begin() + 32, 255);
    EXPECT_EQ(similarity(zeros, zeros), 1.0);
    EXPECT_EQ(similarity(zeros, full), 0.0);
    EXPECT_DOUBLE_EQ(similarity(zeros, half), 0.5);
}

TEST(Similarity, LengthMismatch) {
    std::vector<std::uint8_t> a(64), b(50);
    EXPECT_EQ(code_of([&] { similarity(a, b); }), ErrorCode::DimensionMismatch);
}

TEST(Similarity, PropertiesOnRandomVectors) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::uint8_t> a(64), b(64);
        for (auto& x : a) x = static_cast<std::uint8_t>(byte(rng));
        for (auto& x : b) x = static_cast<std::uint8_t>(byte(rng));
        if (trial % 5 == 0) b = a;
        const double s = similarity(a, b);
        EXPECT_EQ(s, similarity(b, a));
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        EXPECT_EQ(s == 1.0, a == b);
        EXPECT_NEAR(s, fixtures::reference_similarity(a, b), 1e-12);
    }
}

TEST(CombinedDistance, Examples) {
    const auto a = fixtures::uniform_record(1, 0, 0);
    auto b = fixtures::uniform_record(2, 0, 255);
    EXPECT_EQ(combined_distance(a, a), 0.0);
    EXPECT_NEAR(combined_distance(a, b), 0.3, 1e-12);
    b.semantic.fill(255);
    EXPECT_NEAR(combined_distance(a, b), 1.0, 1e-12);
    EXPECT_NEAR(combined_distance(a, b, DistanceWeights{0.5, 0.5}), 1.0, 1e-12);
}

TEST(CombinedDistance, SymmetricAndNonNegative) {
    const auto records = generate_synthetic(3, 10, false, 5);
    for (const auto& a : records) {
        for (const auto& b : records) {
            const double d = combined_distance(a, b);
            EXPECT_GE(d, 0.0);
            EXPECT_EQ(d, combined_distance(b, a));
        }
    }
}

TEST(GenerateSynthetic, SingleRecord) {
    const auto records = generate_synthetic(1, 1, false, 1234);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].image_id, 1u);
    EXPECT_TRUE(records[0].keywords.empty());
}

TEST(GenerateSynthetic, DeterministicForSeed) {
    const auto a = generate_synthetic(2, 100, true, 42);
    const auto b = generate_synthetic(2, 100, true, 42);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a[0].keywords, std::vector<std::string>{"kw0"});
    EXPECT_EQ(a[150].keywords, std::vector<std::string>{"kw1"});
    EXPECT_EQ(a.back().image_id, 200u);
    EXPECT_NE(a, generate_synthetic(2, 100, true, 43));
}

TEST(GenerateSynthetic, ClustersAreTighterThanTheGapsBetweenThem) {
    const auto records = generate_synthetic(2, 100, false, 42);
    double intra = 0.0, inter = 0.0;
    std::size_t n_intra = 0, n_inter = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::size_t j = i + 1; j < records.size(); ++j) {
            const double s = fixtures::reference_similarity(records[i].semantic, records[j].semantic);
            if ((i < 100) == (j < 100)) {
                intra += s;
                ++n_intra;
            } else {
                inter += s;
                ++n_inter;
            }
        }
    }
    EXPECT_GT(intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter));
}

TEST(GenerateSynthetic, RejectsImpossibleSizes) {
    EXPECT_EQ(code_of([] { generate_synthetic(0, 1, false, 0); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([] { generate_synthetic(1ull << 20, 1ull << 12, false, 0); }), ErrorCode::TooLarge);
}

TEST(KeywordIndex, IsTheInverseOfRecordKeywords) {
    auto records = generate_synthetic(3, 4, true, 9);
    records[0].keywords.push_back("extra");
    KeywordIndex index(records);
    EXPECT_EQ(index.keyword_count(), 4u);
    const auto kw1 = index.find("KW1");
    EXPECT_EQ(std::vector<ImageId>(kw1.begin(), kw1.end()), (std::vector<ImageId>{5, 6, 7, 8}));
    EXPECT_TRUE(index.find("missing").empty());

    index.remove(records[0]);
    EXPECT_TRUE(index.find("extra").empty());
    EXPECT_EQ(index.find("kw0").size(), 3u);
    index.add(records[0]);
    EXPECT_EQ(index.find("kw0").size(), 4u);
}
