#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "imgraph/collection.hpp"
#include "imgraph/error.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace imgraph;
using fixtures::TempDir;

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

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::uint32_t le32(const std::string& s, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | static_cast<unsigned char>(s[at + i]);
    return v;
}

void set_le32(std::string& s, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::vector<FeatureRecord> records(std::size_t n, std::uint64_t seed) {
    return generate_synthetic(2, (n + 1) / 2, true, seed);
}

std::vector<FeatureRecord> first_n(std::vector<FeatureRecord> v, std::size_t n) {
    v.resize(n);
    return v;
}

}  // namespace

TEST(GraphFile, FiveNodeLayerIs680Bytes) {
    TempDir dir;
    const Collection c = build_collection(first_n(records(6, 1), 5));
    ASSERT_EQ(c.graph.layer_count(), 1u);
    save_graph(c, dir / "g.higr");
    EXPECT_EQ(std::filesystem::file_size(dir / "g.higr"), 6u + 4u + 5u * 134u);
    EXPECT_EQ(graph_file_size(c.graph), 680u);
}

TEST(GraphFile, BytesDecodeByHand) {
    TempDir dir;
    const auto recs = records(40, 2);
    const Collection c = build_collection(recs);
    save_graph(c, dir / "g.higr");
    const std::string bytes = slurp(dir / "g.higr");
    ASSERT_EQ(bytes.substr(0, 4), "HIGR");
    EXPECT_EQ(bytes[4], 1);
    ASSERT_EQ(static_cast<std::size_t>(bytes[5]), c.graph.layer_count());
    std::size_t at = 6 + 4 * c.graph.layer_count();
    for (std::size_t k = 0; k < c.graph.layer_count(); ++k) {
        const GraphLayer& layer = c.graph.layers[k];
        ASSERT_EQ(le32(bytes, 6 + 4 * k), layer.size());
        ImageId previous = 0;
        for (std::size_t i = 0; i < layer.size(); ++i, at += 134) {
            const ImageId id = le32(bytes, at);
            EXPECT_GT(id, previous);
            previous = id;
            const GraphNode& node = layer.node(id);
            for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(le32(bytes, at + 4 + 4 * j), node.neighbors[j]);
            EXPECT_EQ(0, std::memcmp(bytes.data() + at + 20, node.semantic.data(), 64));
            EXPECT_EQ(0, std::memcmp(bytes.data() + at + 84, node.visual.data(), 50));
        }
    }
    EXPECT_EQ(at, bytes.size());
}

TEST(GraphFile, SmallLayerPadsWithNull) {
    TempDir dir;
    const Collection c = build_collection(first_n(records(4, 3), 3));
    save_graph(c, dir / "g.higr");
    const std::string bytes = slurp(dir / "g.higr");
    ASSERT_EQ(bytes.size(), 10u + 3 * 134);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(le32(bytes, 10 + 134 * i + 4 + 8), 0xFFFFFFFFu);
        EXPECT_EQ(le32(bytes, 10 + 134 * i + 4 + 12), 0xFFFFFFFFu);
    }
}

TEST(GraphFile, SaveLoadSaveIsByteIdentical) {
    TempDir dir;
    const Collection c = build_collection(records(600, 4), {.seed = 9});
    ASSERT_GT(c.graph.layer_count(), 1u);
    save_graph(c, dir / "a.higr");
    const Collection loaded = load_graph(dir / "a.higr");
    EXPECT_EQ(loaded.graph.layer_count(), c.graph.layer_count());
    for (std::size_t k = 0; k < c.graph.layer_count(); ++k) EXPECT_TRUE(loaded.graph.layers[k] == c.graph.layers[k]);
    save_graph(loaded, dir / "b.higr");
    EXPECT_EQ(slurp(dir / "a.higr"), slurp(dir / "b.higr"));
    EXPECT_EQ(std::filesystem::file_size(dir / "a.higr"), graph_file_size(c.graph));
}

TEST(GraphFile, SerializeMatchesSave) {
    TempDir dir;
    const Collection c = build_collection(records(120, 5));
    save_graph(c, dir / "a.higr");
    EXPECT_EQ(serialize_graph(c.graph), slurp(dir / "a.higr"));
    EXPECT_TRUE(parse_graph(serialize_graph(c.graph)).layers[0] == c.graph.layers[0]);
}

TEST(GraphFile, LoadWithMetadataRestoresKeywords) {
    TempDir dir;
    const auto recs = records(200, 6);
    const Collection c = build_collection(recs);
    save_graph(c, dir / "g.higr");
    write_metadata(dir / "g.meta", recs);
    const Collection loaded = load_graph(dir / "g.higr", dir / "g.meta");
    EXPECT_FALSE(loaded.check_invariants().has_value());
    EXPECT_EQ(loaded.keywords.keyword_count(), 2u);
    EXPECT_EQ(loaded.keywords.find("kw1").size(), 100u);
    for (const auto& r : recs) EXPECT_EQ(loaded.records.at(r.image_id), r);
}

TEST(GraphFile, RejectsBadMagicAndVersion) {
    TempDir dir;
    const Collection c = build_collection(records(20, 7));
    std::string bytes = serialize_graph(c.graph);
    std::string bad = bytes;
    bad.replace(0, 4, "XXXX");
    spit(dir / "m.higr", bad);
    EXPECT_EQ(code_of([&] { load_graph(dir / "m.higr"); }), ErrorCode::FormatError);
    bad = bytes;
    bad[4] = 2;
    spit(dir / "v.higr", bad);
    EXPECT_EQ(code_of([&] { load_graph(dir / "v.higr"); }), ErrorCode::FormatError);
    EXPECT_EQ(code_of([&] { parse_graph("HIG"); }), ErrorCode::FormatError);
    EXPECT_EQ(code_of([&] { parse_graph(std::string("HIGR\x01\x00", 6)); }), ErrorCode::FormatError);
}

TEST(GraphFile, RejectsTruncationAndTrailingBytes) {
    TempDir dir;
    const Collection c = build_collection(records(20, 8));
    const std::string bytes = serialize_graph(c.graph);
    spit(dir / "t.higr", bytes.substr(0, bytes.size() - 67));
    EXPECT_EQ(code_of([&] { load_graph(dir / "t.higr"); }), ErrorCode::FormatError);
    EXPECT_EQ(code_of([&] { parse_graph(bytes.substr(0, 8)); }), ErrorCode::FormatError);
    EXPECT_EQ(code_of([&] { parse_graph(bytes + "x"); }), ErrorCode::FormatError);
}

TEST(GraphFile, RejectsStructuralDamage) {
    const Collection c = build_collection(records(20, 9));
    const std::string bytes = serialize_graph(c.graph);
    const std::size_t first = 10;  // single layer: 6 + 4
    ASSERT_EQ(c.graph.layer_count(), 1u);

    std::string asym = bytes;
    const ImageId id0 = le32(bytes, first);
    // Point node 0's last neighbor somewhere that does not point back.
    for (const auto& n : c.graph.base().nodes()) {
        if (n.image_id != id0 && !n.is_adjacent(id0) && n.image_id > le32(bytes, first + 4 + 8)) {
            set_le32(asym, first + 4 + 12, n.image_id);
            break;
        }
    }
    EXPECT_EQ(code_of([&] { parse_graph(asym); }), ErrorCode::CorruptGraph);

    std::string swapped = bytes;
    swapped.replace(first, 134, bytes.substr(first + 134, 134));
    swapped.replace(first + 134, 134, bytes.substr(first, 134));
    EXPECT_EQ(code_of([&] { parse_graph(swapped); }), ErrorCode::CorruptGraph);

    std::string dup = bytes;
    dup.replace(first + 134, 134, bytes.substr(first, 134));
    EXPECT_EQ(code_of([&] { parse_graph(dup); }), ErrorCode::CorruptGraph);
}

TEST(GraphFile, IoErrors) {
    TempDir dir;
    const Collection c = build_collection(records(10, 10));
    EXPECT_EQ(code_of([&] { save_graph(c, dir / "missing" / "g.higr"); }), ErrorCode::IoError);
    EXPECT_EQ(code_of([&] { load_graph(dir / "nope.higr"); }), ErrorCode::IoError);
}

TEST(Features, RoundTripAndLength) {
    TempDir dir;
    const auto recs = records(30, 11);
    write_features(dir / "f.bin", recs);
    EXPECT_EQ(std::filesystem::file_size(dir / "f.bin"), 30u * 118);
    const auto back = read_features(dir / "f.bin");
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].image_id, recs[i].image_id);
        EXPECT_EQ(back[i].semantic, recs[i].semantic);
        EXPECT_EQ(back[i].visual, recs[i].visual);
        EXPECT_TRUE(back[i].keywords.empty());
    }
    std::string bytes = slurp(dir / "f.bin");
    EXPECT_EQ(le32(bytes, 118), recs[1].image_id);
    spit(dir / "short.bin", bytes.substr(0, 117));
    EXPECT_EQ(code_of([&] { read_features(dir / "short.bin"); }), ErrorCode::FormatError);
}

TEST(Metadata, ParsesSidecarLines) {
    const auto meta = parse_metadata("7\tRed,  Balloon ,\r\n\n3\tsky\n9\n");
    ASSERT_EQ(meta.size(), 3u);
    EXPECT_EQ(meta.at(7), (std::vector<std::string>{"Red", "Balloon"}));
    EXPECT_EQ(meta.at(3), std::vector<std::string>{"sky"});
    EXPECT_TRUE(meta.at(9).empty());
    EXPECT_EQ(code_of([&] { parse_metadata("x7\tsky\n"); }), ErrorCode::FormatError);
    EXPECT_EQ(code_of([&] { parse_metadata("4294967295\tsky\n"); }), ErrorCode::FormatError);
}

TEST(Ingest, SyntheticCollection) {
    TempDir dir;
    const auto recs = generate_synthetic(4, 250, true, 1);
    write_features(dir / "f.bin", recs);
    write_metadata(dir / "f.meta", recs);
    const Collection c = ingest(dir / "f.bin", dir / "f.meta");
    EXPECT_EQ(c.records.size(), 1000u);
    EXPECT_EQ(c.keywords.keyword_count(), 4u);
    EXPECT_EQ(c.graph.base().size(), 1000u);
    EXPECT_FALSE(c.check_invariants().has_value());
}

TEST(Ingest, EmptyFile) {
    TempDir dir;
    spit(dir / "f.bin", "");
    EXPECT_EQ(code_of([&] { ingest(dir / "f.bin", std::nullopt); }), ErrorCode::EmptyCollection);
}

TEST(Ingest, SingleRecord) {
    TempDir dir;
    const auto recs = first_n(records(2, 12), 1);
    write_features(dir / "f.bin", recs);
    const Collection c = ingest(dir / "f.bin", std::nullopt);
    ASSERT_EQ(c.graph.layer_count(), 1u);
    EXPECT_EQ(c.graph.base().size(), 1u);
    EXPECT_EQ(c.graph.base().edge_count(), 0u);
    EXPECT_EQ(code_of([&] { graph_quality(c.graph.base()); }), ErrorCode::NoEdges);
}

TEST(Ingest, DanglingMetadataAndDuplicates) {
    TempDir dir;
    const auto recs = records(10, 13);
    write_features(dir / "f.bin", recs);
    spit(dir / "bad.meta", std::to_string(recs.back().image_id + 1000) + "\tghost\n");
    EXPECT_EQ(code_of([&] { ingest(dir / "f.bin", dir / "bad.meta"); }), ErrorCode::DanglingMetadata);
    std::vector<FeatureRecord> twice = recs;
    twice.push_back(recs[0]);
    write_features(dir / "dup.bin", twice);
    EXPECT_EQ(code_of([&] { ingest(dir / "dup.bin", std::nullopt); }), ErrorCode::DuplicateId);
}
