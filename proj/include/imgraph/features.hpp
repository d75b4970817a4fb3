#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace imgraph {

using ImageId = std::uint32_t;

/// Reserved id: marks a missing neighbor slot or an empty grid cell.
inline constexpr ImageId kNullId = std::numeric_limits<ImageId>::max();

inline constexpr std::size_t kSemanticDims = 64;
inline constexpr std::size_t kVisualDims = 50;

using SemanticFeature = std::array<std::uint8_t, kSemanticDims>;
using VisualFeature = std::array<std::uint8_t, kVisualDims>;

struct FeatureRecord {
    ImageId image_id = kNullId;
    SemanticFeature semantic{};
    VisualFeature visual{};
    std::vector<std::string> keywords;  // lowercase, sorted, unique

    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

/// Weights of the two feature types in combined_distance.
struct DistanceWeights {
    double semantic = 0.7;
    double visual = 0.3;
};

/// Maps each component of v from [0,1] to a byte, rounding half up.
/// Throws OutOfRange for components outside [0,1] and DimensionMismatch
/// when v.size() != dims or dims is not one of the two feature widths.
std::vector<std::uint8_t> quantize(std::span<const double> v, std::size_t dims);

std::vector<double> dequantize(std::span<const std::uint8_t> bytes);

/// Sum of squared byte differences. Exact; the hot path of graph improvement.
std::uint64_t squared_byte_distance(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b) noexcept;

/// 1 - ||a/255 - b/255||^2 / D, in [0,1]. Exactly 1 iff a and b are byte-identical.
double similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

inline double similarity(const SemanticFeature& a, const SemanticFeature& b) {
    return similarity(std::span<const std::uint8_t>(a), std::span<const std::uint8_t>(b));
}
inline double similarity(const VisualFeature& a, const VisualFeature& b) {
    return similarity(std::span<const std::uint8_t>(a), std::span<const std::uint8_t>(b));
}

double combined_distance(const SemanticFeature& sa, const VisualFeature& va,
                         const SemanticFeature& sb, const VisualFeature& vb,
                         const DistanceWeights& weights = {});

inline double combined_distance(const FeatureRecord& a, const FeatureRecord& b,
                                const DistanceWeights& weights = {}) {
    return combined_distance(a.semantic, a.visual, b.semantic, b.visual, weights);
}

struct SyntheticOptions {
    std::size_t clusters = 1;
    std::size_t per_cluster = 1;
    bool keyword_per_cluster = false;
    std::uint64_t seed = 0;
    double sigma = 0.05;
};

/// Clustered random records standing in for CNN output. Cluster c occupies
/// ids [c*per_cluster + 1, (c+1)*per_cluster]; with keyword_per_cluster every
/// member carries "kw<c>".
std::vector<FeatureRecord> generate_synthetic(const SyntheticOptions& options);

inline std::vector<FeatureRecord> generate_synthetic(std::size_t clusters, std::size_t per_cluster,
                                                     bool keyword_per_cluster, std::uint64_t seed) {
    return generate_synthetic(SyntheticOptions{clusters, per_cluster, keyword_per_cluster, seed});
}

/// Lowercases ASCII letters; other bytes pass through.
std::string normalize_keyword(std::string_view keyword);

/// keyword -> ascending image ids. Exactly the inverse of the records' keyword sets.
class KeywordIndex {
public:
    KeywordIndex() = default;
    explicit KeywordIndex(std::span<const FeatureRecord> records);

    void add(const FeatureRecord& record);
    void remove(const FeatureRecord& record);

    /// Case-insensitive lookup; empty span when the keyword is unknown.
    std::span<const ImageId> find(std::string_view keyword) const;

    std::size_t keyword_count() const noexcept { return postings_.size(); }
    const std::unordered_map<std::string, std::vector<ImageId>>& postings() const noexcept {
        return postings_;
    }

private:
    std::unordered_map<std::string, std::vector<ImageId>> postings_;
};

}  // namespace imgraph
