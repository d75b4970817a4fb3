#include "imgraph/collection.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "imgraph/error.hpp"

namespace imgraph {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.append(bytes, 4);
}

std::uint32_t get_u32(const char* p) {
    const auto* b = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
    return data;
}

class FileWriter {
public:
    explicit FileWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    void write(std::string_view data) {
        out_.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out_) throw Error(ErrorCode::IoError, "write failed: " + path_.string());
    }
    void close() {
        out_.close();
        if (!out_) throw Error(ErrorCode::IoError, "close failed: " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

void append_node(std::string& out, const GraphNode& node) {
    put_u32(out, node.image_id);
    for (ImageId m : node.neighbors) put_u32(out, m);
    out.append(reinterpret_cast<const char*>(node.semantic.data()), kSemanticDims);
    out.append(reinterpret_cast<const char*>(node.visual.data()), kVisualDims);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::optional<std::string> Collection::check_invariants() const {
    if (auto broken = graph.check_invariants()) return broken;
    for (const auto& node : graph.base().nodes()) {
        if (!records.contains(node.image_id)) return "graph node " + std::to_string(node.image_id) + " has no record";
    }
    std::map<std::string, std::vector<ImageId>> expected;
    for (const auto& [id, r] : records) {
        for (const auto& kw : r.keywords) {
            auto& ids = expected[normalize_keyword(kw)];
            if (ids.empty() || ids.back() != id) ids.push_back(id);
        }
    }
    if (expected.size() != keywords.keyword_count()) return "keyword index out of sync";
    for (const auto& [kw, ids] : expected) {
        const auto found = keywords.find(kw);
        if (!std::equal(ids.begin(), ids.end(), found.begin(), found.end())) return "keyword index out of sync: " + kw;
    }
    return std::nullopt;
}

Collection build_collection(std::vector<FeatureRecord> records, const BuildOptions& options) {
    if (records.empty()) throw Error(ErrorCode::EmptyCollection, "no feature records");
    Collection c;
    for (auto& r : records) {
        const ImageId id = r.image_id;
        if (!c.records.emplace(id, std::move(r)).second) {
            throw Error(ErrorCode::DuplicateId, "image " + std::to_string(id) + " listed twice");
        }
    }
    std::vector<FeatureRecord> ordered;
    ordered.reserve(c.records.size());
    for (const auto& [id, r] : c.records) ordered.push_back(r);
    GraphLayer base = build_random_graph(ordered, options.seed);
    std::mt19937_64 rng(options.seed + 1);
    improve_in_place(base, options.improve_factor * ordered.size(), rng);
    c.graph = build_hierarchy(base, options.seed + 2);
    c.keywords = KeywordIndex(ordered);
    return c;
}

std::vector<FeatureRecord> parse_features(std::string_view bytes) {
    if (bytes.size() % kFeatureRecordBytes != 0) {
        throw Error(ErrorCode::FormatError, "feature data is " + std::to_string(bytes.size()) +
                                                " bytes, not a multiple of 118");
    }
    std::vector<FeatureRecord> out(bytes.size() / kFeatureRecordBytes);
    const char* p = bytes.data();
    for (auto& r : out) {
        r.image_id = get_u32(p);
        if (r.image_id == kNullId) throw Error(ErrorCode::FormatError, "image id 0xFFFFFFFF is reserved");
        std::memcpy(r.semantic.data(), p + 4, kSemanticDims);
        std::memcpy(r.visual.data(), p + 4 + kSemanticDims, kVisualDims);
        p += kFeatureRecordBytes;
    }
    return out;
}

std::vector<FeatureRecord> read_features(const std::filesystem::path& path) {
    return parse_features(read_file(path));
}

void write_features(const std::filesystem::path& path, std::span<const FeatureRecord> records) {
    FileWriter out(path);
    std::string buf;
    buf.reserve(kFeatureRecordBytes * 4096);
    for (const auto& r : records) {
        put_u32(buf, r.image_id);
        buf.append(reinterpret_cast<const char*>(r.semantic.data()), kSemanticDims);
        buf.append(reinterpret_cast<const char*>(r.visual.data()), kVisualDims);
        if (buf.size() >= kFeatureRecordBytes * 4096) {
            out.write(buf);
            buf.clear();
        }
    }
    out.write(buf);
    out.close();
}

std::map<ImageId, std::vector<std::string>> parse_metadata(std::string_view text) {
    std::map<ImageId, std::vector<std::string>> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        const std::size_t tab = line.find('\t');
        const std::string_view id_text = trim(line.substr(0, tab));
        ImageId id = 0;
        std::uint64_t value = 0;
        bool ok = !id_text.empty() && id_text.size() <= 10;
        for (char ch : id_text) {
            ok = ok && ch >= '0' && ch <= '9';
            value = value * 10 + static_cast<std::uint64_t>(ch - '0');
        }
        if (!ok || value >= kNullId) {
            throw Error(ErrorCode::FormatError, "metadata line " + std::to_string(line_no) + ": bad image id");
        }
        id = static_cast<ImageId>(value);
        auto& keywords = out[id];
        if (tab == std::string_view::npos) continue;
        std::string_view rest = line.substr(tab + 1);
        while (true) {
            const std::size_t comma = rest.find(',');
            const std::string_view kw = trim(rest.substr(0, comma));
            if (!kw.empty()) keywords.emplace_back(kw);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
    }
    return out;
}

std::map<ImageId, std::vector<std::string>> read_metadata(const std::filesystem::path& path) {
    return parse_metadata(read_file(path));
}

void write_metadata(const std::filesystem::path& path, std::span<const FeatureRecord> records) {
    std::vector<const FeatureRecord*> sorted;
    for (const auto& r : records) {
        if (!r.keywords.empty()) sorted.push_back(&r);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->image_id < b->image_id; });
    std::ostringstream text;
    for (const auto* r : sorted) {
        text << r->image_id << '\t';
        for (std::size_t i = 0; i < r->keywords.size(); ++i) text << (i ? "," : "") << r->keywords[i];
        text << '\n';
    }
    FileWriter out(path);
    out.write(text.str());
    out.close();
}

void apply_metadata(std::map<ImageId, FeatureRecord>& records,
                    const std::map<ImageId, std::vector<std::string>>& metadata) {
    for (const auto& [id, keywords] : metadata) {
        if (!records.contains(id)) {
            throw Error(ErrorCode::DanglingMetadata, "metadata names unknown image " + std::to_string(id));
        }
    }
    for (const auto& [id, keywords] : metadata) {
        auto& target = records.at(id).keywords;
        target.insert(target.end(), keywords.begin(), keywords.end());
    }
}

Collection ingest(const std::filesystem::path& features, const std::optional<std::filesystem::path>& metadata,
                  const BuildOptions& options) {
    std::vector<FeatureRecord> records = read_features(features);
    if (records.empty()) throw Error(ErrorCode::EmptyCollection, features.string() + " holds no records");
    if (metadata) {
        // Validate ids before the expensive build.
        std::map<ImageId, FeatureRecord> by_id;
        for (auto& r : records) {
            const ImageId id = r.image_id;
            if (!by_id.emplace(id, std::move(r)).second) {
                throw Error(ErrorCode::DuplicateId, "image " + std::to_string(id) + " listed twice");
            }
        }
        apply_metadata(by_id, read_metadata(*metadata));
        records.clear();
        for (auto& [id, r] : by_id) records.push_back(std::move(r));
    }
    return build_collection(std::move(records), options);
}

std::uint64_t graph_file_size(const HierarchicalGraph& graph) {
    std::uint64_t nodes = 0;
    for (const auto& layer : graph.layers) nodes += layer.size();
    return 6 + 4 * graph.layers.size() + kNodeRecordBytes * nodes;
}

namespace {

std::string header_bytes(const HierarchicalGraph& graph) {
    if (graph.layers.empty() || graph.layers.size() > 255) {
        throw Error(ErrorCode::OutOfRange, "layer count must be 1..255");
    }
    std::string out(kGraphMagic, 4);
    out.push_back(static_cast<char>(kGraphVersion));
    out.push_back(static_cast<char>(graph.layers.size()));
    for (const auto& layer : graph.layers) put_u32(out, static_cast<std::uint32_t>(layer.size()));
    return out;
}

template <class Sink>
void emit_graph(const HierarchicalGraph& graph, Sink&& sink) {
    sink(header_bytes(graph));
    std::string buf;
    constexpr std::size_t kChunk = 8192;
    buf.reserve(kNodeRecordBytes * kChunk);
    for (const auto& layer : graph.layers) {
        std::vector<const GraphNode*> nodes;
        nodes.reserve(layer.size());
        for (const auto& n : layer.nodes()) nodes.push_back(&n);
        std::sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return a->image_id < b->image_id; });
        for (const GraphNode* n : nodes) {
            append_node(buf, *n);
            if (buf.size() >= kNodeRecordBytes * kChunk) {
                sink(buf);
                buf.clear();
            }
        }
    }
    sink(buf);
}

}  // namespace

std::string serialize_graph(const HierarchicalGraph& graph) {
    std::string out;
    out.reserve(graph_file_size(graph));
    emit_graph(graph, [&](std::string_view chunk) { out.append(chunk); });
    return out;
}

void save_graph(const HierarchicalGraph& graph, const std::filesystem::path& path) {
    header_bytes(graph);  // validate before truncating the target
    FileWriter out(path);
    emit_graph(graph, [&](std::string_view chunk) { out.write(chunk); });
    out.close();
}

HierarchicalGraph parse_graph(std::string_view bytes) {
    if (bytes.size() < 6) throw Error(ErrorCode::FormatError, "graph file shorter than its header");
    if (std::memcmp(bytes.data(), kGraphMagic, 4) != 0) throw Error(ErrorCode::FormatError, "bad magic");
    if (static_cast<std::uint8_t>(bytes[4]) != kGraphVersion) {
        throw Error(ErrorCode::FormatError, "unsupported version " + std::to_string(static_cast<std::uint8_t>(bytes[4])));
    }
    const std::size_t layer_count = static_cast<std::uint8_t>(bytes[5]);
    if (layer_count == 0) throw Error(ErrorCode::FormatError, "graph file has no layers");
    if (bytes.size() < 6 + 4 * layer_count) throw Error(ErrorCode::FormatError, "truncated layer table");
    std::vector<std::uint32_t> counts(layer_count);
    std::uint64_t expected = 6 + 4 * layer_count;
    for (std::size_t k = 0; k < layer_count; ++k) {
        counts[k] = get_u32(bytes.data() + 6 + 4 * k);
        expected += static_cast<std::uint64_t>(kNodeRecordBytes) * counts[k];
    }
    if (bytes.size() != expected) {
        throw Error(ErrorCode::FormatError, "graph file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                                                std::to_string(expected));
    }

    HierarchicalGraph graph;
    const char* p = bytes.data() + 6 + 4 * layer_count;
    for (std::size_t k = 0; k < layer_count; ++k) {
        GraphLayer layer;
        layer.set_level(k);
        ImageId previous = 0;
        for (std::uint32_t i = 0; i < counts[k]; ++i, p += kNodeRecordBytes) {
            GraphNode node;
            node.image_id = get_u32(p);
            for (std::size_t j = 0; j < kDegree; ++j) node.neighbors[j] = get_u32(p + 4 + 4 * j);
            std::memcpy(node.semantic.data(), p + 20, kSemanticDims);
            std::memcpy(node.visual.data(), p + 20 + kSemanticDims, kVisualDims);
            if (node.image_id == kNullId || (i > 0 && node.image_id <= previous)) {
                throw Error(ErrorCode::CorruptGraph, "layer " + std::to_string(k) + " ids not strictly ascending");
            }
            previous = node.image_id;
            layer.insert_raw(node);
        }
        graph.layers.push_back(std::move(layer));
    }
    if (auto broken = graph.check_invariants()) throw Error(ErrorCode::CorruptGraph, *broken);
    return graph;
}

Collection load_graph(const std::filesystem::path& path, const std::optional<std::filesystem::path>& metadata) {
    Collection c;
    c.graph = parse_graph(read_file(path));
    for (const auto& node : c.graph.base().nodes()) {
        FeatureRecord r;
        r.image_id = node.image_id;
        r.semantic = node.semantic;
        r.visual = node.visual;
        c.records.emplace(r.image_id, std::move(r));
    }
    if (metadata) apply_metadata(c.records, read_metadata(*metadata));
    std::vector<FeatureRecord> ordered;
    ordered.reserve(c.records.size());
    for (const auto& [id, r] : c.records) ordered.push_back(r);
    c.keywords = KeywordIndex(ordered);
    return c;
}

}  // namespace imgraph
