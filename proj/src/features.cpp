#include "imgraph/features.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "imgraph/error.hpp"

namespace imgraph {

std::vector<std::uint8_t> quantize(std::span<const double> v, std::size_t dims) {
    if (dims != kSemanticDims && dims != kVisualDims) {
        throw Error(ErrorCode::DimensionMismatch, "dims must be 64 or 50, got " + std::to_string(dims));
    }
    if (v.size() != dims) {
        throw Error(ErrorCode::DimensionMismatch,
                    "expected " + std::to_string(dims) + " components, got " + std::to_string(v.size()));
    }
    std::vector<std::uint8_t> out(dims);
    for (std::size_t i = 0; i < dims; ++i) {
        const double x = v[i];
        if (!(x >= 0.0 && x <= 1.0)) {
            throw Error(ErrorCode::OutOfRange, "component " + std::to_string(i) + " outside [0,1]");
        }
        out[i] = static_cast<std::uint8_t>(std::floor(x * 255.0 + 0.5));
    }
    return out;
}

std::vector<double> dequantize(std::span<const std::uint8_t> bytes) {
    std::vector<double> out(bytes.size());
    std::transform(bytes.begin(), bytes.end(), out.begin(),
                   [](std::uint8_t b) { return static_cast<double>(b) / 255.0; });
    return out;
}

std::uint64_t squared_byte_distance(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b) noexcept {
    std::uint32_t sum = 0;  // 64 * 255^2 fits comfortably
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
        sum += static_cast<std::uint32_t>(d * d);
    }
    return sum;
}

double similarity(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch, "similarity of vectors with different lengths");
    }
    if (a.empty()) {
        return 1.0;
    }
    const double ssd = static_cast<double>(squared_byte_distance(a, b));
    return 1.0 - ssd / (255.0 * 255.0 * static_cast<double>(a.size()));
}

double combined_distance(const SemanticFeature& sa, const VisualFeature& va,
                         const SemanticFeature& sb, const VisualFeature& vb,
                         const DistanceWeights& weights) {
    return weights.semantic * (1.0 - similarity(sa, sb)) + weights.visual * (1.0 - similarity(va, vb));
}

namespace {

template <std::size_t N>
void perturb(std::array<std::uint8_t, N>& out, const std::array<double, N>& center, double sigma,
             std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t i = 0; i < N; ++i) {
        const double x = std::clamp(center[i] + noise(rng), 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::floor(x * 255.0 + 0.5));
    }
}

}  // namespace

std::vector<FeatureRecord> generate_synthetic(const SyntheticOptions& options) {
    if (options.clusters == 0 || options.per_cluster == 0) {
        throw Error(ErrorCode::OutOfRange, "clusters and per_cluster must be >= 1");
    }
    constexpr std::uint64_t kMaxRecords = 0xFFFFFFFFull - 1;  // ids 1..2^32-2
    if (options.per_cluster > kMaxRecords / options.clusters) {
        throw Error(ErrorCode::TooLarge, "record count exceeds 2^32 - 2");
    }

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<FeatureRecord> records;
    records.reserve(options.clusters * options.per_cluster);
    ImageId next_id = 1;
    for (std::size_t c = 0; c < options.clusters; ++c) {
        std::array<double, kSemanticDims> semantic_center{};
        std::array<double, kVisualDims> visual_center{};
        for (auto& x : semantic_center) x = unit(rng);
        for (auto& x : visual_center) x = unit(rng);

        const std::string keyword = "kw" + std::to_string(c);
        for (std::size_t i = 0; i < options.per_cluster; ++i) {
            FeatureRecord record;
            record.image_id = next_id++;
            perturb(record.semantic, semantic_center, options.sigma, rng);
            perturb(record.visual, visual_center, options.sigma, rng);
            if (options.keyword_per_cluster) {
                record.keywords.push_back(keyword);
            }
            records.push_back(std::move(record));
        }
    }
    return records;
}

std::string normalize_keyword(std::string_view keyword) {
    std::string out(keyword);
    for (char& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

KeywordIndex::KeywordIndex(std::span<const FeatureRecord> records) {
    for (const auto& record : records) {
        for (const auto& keyword : record.keywords) {
            postings_[normalize_keyword(keyword)].push_back(record.image_id);
        }
    }
    for (auto& [keyword, ids] : postings_) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    }
}

void KeywordIndex::add(const FeatureRecord& record) {
    for (const auto& keyword : record.keywords) {
        auto& ids = postings_[normalize_keyword(keyword)];
        auto it = std::lower_bound(ids.begin(), ids.end(), record.image_id);
        if (it == ids.end() || *it != record.image_id) ids.insert(it, record.image_id);
    }
}

void KeywordIndex::remove(const FeatureRecord& record) {
    for (const auto& keyword : record.keywords) {
        auto found = postings_.find(normalize_keyword(keyword));
        if (found == postings_.end()) continue;
        auto& ids = found->second;
        auto it = std::lower_bound(ids.begin(), ids.end(), record.image_id);
        if (it != ids.end() && *it == record.image_id) ids.erase(it);
        if (ids.empty()) postings_.erase(found);
    }
}

std::span<const ImageId> KeywordIndex::find(std::string_view keyword) const {
    auto found = postings_.find(normalize_keyword(keyword));
    if (found == postings_.end()) return {};
    return found->second;
}

}  // namespace imgraph
