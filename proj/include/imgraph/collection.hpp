#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "imgraph/features.hpp"
#include "imgraph/graph.hpp"

namespace imgraph {

inline constexpr std::size_t kFeatureRecordBytes = 4 + kSemanticDims + kVisualDims;
static_assert(kFeatureRecordBytes == 118);

inline constexpr char kGraphMagic[4] = {'H', 'I', 'G', 'R'};
inline constexpr std::uint8_t kGraphVersion = 1;

struct Collection {
    std::map<ImageId, FeatureRecord> records;
    HierarchicalGraph graph;
    KeywordIndex keywords;
    std::string url_template = "{id}";

    std::optional<std::string> check_invariants() const;
};

struct BuildOptions {
    std::uint64_t seed = 0;
    /// improve budget = factor x record count
    std::size_t improve_factor = 50;
};

/// Random quartic graph, improve, hierarchy. Throws EmptyCollection, DuplicateId.
Collection build_collection(std::vector<FeatureRecord> records, const BuildOptions& options = {});

/// Fixed 118-byte records; keywords left empty. Throws FormatError, IoError.
std::vector<FeatureRecord> read_features(const std::filesystem::path& path);
std::vector<FeatureRecord> parse_features(std::string_view bytes);
void write_features(const std::filesystem::path& path, std::span<const FeatureRecord> records);

/// "id<TAB>kw1,kw2" lines.
std::map<ImageId, std::vector<std::string>> parse_metadata(std::string_view text);
std::map<ImageId, std::vector<std::string>> read_metadata(const std::filesystem::path& path);
void write_metadata(const std::filesystem::path& path, std::span<const FeatureRecord> records);

/// Attaches sidecar keywords. Throws DanglingMetadata for ids not in records.
void apply_metadata(std::map<ImageId, FeatureRecord>& records,
                    const std::map<ImageId, std::vector<std::string>>& metadata);

Collection ingest(const std::filesystem::path& features, const std::optional<std::filesystem::path>& metadata,
                  const BuildOptions& options = {});

std::uint64_t graph_file_size(const HierarchicalGraph& graph);
std::string serialize_graph(const HierarchicalGraph& graph);
/// Throws FormatError (magic, version, length) or CorruptGraph (structure).
HierarchicalGraph parse_graph(std::string_view bytes);

void save_graph(const HierarchicalGraph& graph, const std::filesystem::path& path);
inline void save_graph(const Collection& collection, const std::filesystem::path& path) {
    save_graph(collection.graph, path);
}
Collection load_graph(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& metadata = std::nullopt);

}  // namespace imgraph
