#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "imgraph/api.hpp"
#include "imgraph/collection.hpp"
#include "imgraph/error.hpp"
#include "imgraph/navigator.hpp"
#include "imgraph/sorter.hpp"

namespace py = pybind11;
using namespace imgraph;

namespace {

template <std::size_t N>
py::bytes to_bytes(const std::array<std::uint8_t, N>& a) {
    return py::bytes(reinterpret_cast<const char*>(a.data()), N);
}

template <std::size_t N>
std::array<std::uint8_t, N> from_bytes(const py::bytes& b) {
    const std::string s = b;
    if (s.size() != N) throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(N) + " bytes");
    std::array<std::uint8_t, N> out{};
    std::copy(s.begin(), s.end(), out.begin());
    return out;
}

py::dict map_to_dict(const MapResponse& m) {
    py::list cells, related, transitions;
    for (const auto& c : m.cells) cells.append(py::dict(py::arg("id") = c.id, py::arg("x") = c.x, py::arg("y") = c.y));
    for (const auto& r : m.related) related.append(py::dict(py::arg("label") = r.label, py::arg("id") = r.id));
    for (const auto& t : m.transitions) {
        transitions.append(py::dict(py::arg("id") = t.id, py::arg("fromX") = t.from_x, py::arg("fromY") = t.from_y,
                                    py::arg("toX") = t.to_x, py::arg("toY") = t.to_y));
    }
    return py::dict(py::arg("layer") = m.layer, py::arg("cells") = cells, py::arg("related") = related,
                    py::arg("transitions") = transitions);
}

/// Navigator plus one session, for scripting.
class PySession {
public:
    PySession(const Collection& c, NavigatorOptions options)
        : nav_(std::make_shared<const HierarchicalGraph>(c.graph), std::make_shared<const KeywordIndex>(c.keywords),
               options),
          state_(nav_.new_session("py")) {}

    py::dict search(const std::string& q) { return map_to_dict(nav_.search(state_, q)); }
    py::dict drag(std::int64_t dx, std::int64_t dy) { return map_to_dict(nav_.drag(state_, dx, dy)); }
    py::dict zoom(const std::string& direction, std::int64_t fx, std::int64_t fy) {
        if (direction != "in" && direction != "out") throw py::value_error("direction must be 'in' or 'out'");
        return map_to_dict(nav_.zoom(state_, direction == "in" ? ZoomDirection::In : ZoomDirection::Out, fx, fy));
    }
    py::dict recenter(ImageId id) { return map_to_dict(nav_.recenter(state_, id)); }
    py::dict visible() const { return map_to_dict(nav_.visible_map(state_)); }
    std::size_t layer() const { return state_.viewport.layer; }

private:
    Navigator nav_;
    SessionState state_;
};

}  // namespace

PYBIND11_MODULE(_imgraph, m) {
    m.doc() = "Hierarchical quartic image similarity graphs with visually sorted map navigation";

    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
    error_type.call_once_and_store_result(
        [&] { return py::object(py::exception<Error>(m, "Error", PyExc_RuntimeError)); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object type = error_type.get_stored();
            py::object instance = type(e.what());
            instance.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(type.ptr(), instance.ptr());
        }
    });

    m.attr("NULL_ID") = kNullId;
    m.attr("NODE_RECORD_BYTES") = kNodeRecordBytes;

    py::class_<FeatureRecord>(m, "FeatureRecord")
        .def(py::init([](ImageId id, const py::bytes& semantic, const py::bytes& visual, std::vector<std::string> kw) {
                 return FeatureRecord{id, from_bytes<kSemanticDims>(semantic), from_bytes<kVisualDims>(visual),
                                      std::move(kw)};
             }),
             py::arg("image_id"), py::arg("semantic"), py::arg("visual"), py::arg("keywords") = std::vector<std::string>{})
        .def_readwrite("image_id", &FeatureRecord::image_id)
        .def_property(
            "semantic", [](const FeatureRecord& r) { return to_bytes(r.semantic); },
            [](FeatureRecord& r, const py::bytes& b) { r.semantic = from_bytes<kSemanticDims>(b); })
        .def_property(
            "visual", [](const FeatureRecord& r) { return to_bytes(r.visual); },
            [](FeatureRecord& r, const py::bytes& b) { r.visual = from_bytes<kVisualDims>(b); })
        .def_readwrite("keywords", &FeatureRecord::keywords)
        .def("__eq__", [](const FeatureRecord& a, const FeatureRecord& b) { return a == b; })
        .def("__repr__", [](const FeatureRecord& r) { return "<FeatureRecord " + std::to_string(r.image_id) + ">"; });

    m.def("quantize", [](const std::vector<double>& v, std::size_t dims) {
        const auto q = quantize(v, dims);
        return py::bytes(reinterpret_cast<const char*>(q.data()), q.size());
    });
    m.def("similarity", [](const py::bytes& a, const py::bytes& b) {
        const std::string sa = a, sb = b;
        return similarity(std::span(reinterpret_cast<const std::uint8_t*>(sa.data()), sa.size()),
                          std::span(reinterpret_cast<const std::uint8_t*>(sb.data()), sb.size()));
    });
    m.def("generate_synthetic", py::overload_cast<std::size_t, std::size_t, bool, std::uint64_t>(&generate_synthetic),
          py::arg("clusters"), py::arg("per_cluster"), py::arg("keyword_per_cluster") = true, py::arg("seed") = 0);

    py::class_<GraphLayer>(m, "GraphLayer")
        .def_property_readonly("level", &GraphLayer::level)
        .def("__len__", &GraphLayer::size)
        .def("__contains__", &GraphLayer::contains)
        .def("ids", &GraphLayer::sorted_ids)
        .def("neighbors", [](const GraphLayer& l, ImageId id) {
            std::vector<ImageId> out;
            for (ImageId n : l.node(id).neighbors) {
                if (n != kNullId) out.push_back(n);
            }
            return out;
        })
        .def("edges", [](const GraphLayer& l) {
            std::vector<std::pair<ImageId, ImageId>> out;
            for (const auto& e : l.edges()) out.emplace_back(e.lo, e.hi);
            return out;
        })
        .def("quality", [](const GraphLayer& l) { return graph_quality(l).quality; })
        .def("check", [](const GraphLayer& l) { return l.check_invariants(); });

    m.def(
        "build_random_graph",
        [](const std::vector<FeatureRecord>& records, std::uint64_t seed) { return build_random_graph(records, seed); },
        py::arg("records"), py::arg("seed") = 0);
    m.def("improve", &improve, py::arg("layer"), py::arg("attempts"), py::arg("seed") = 0);
    m.def("add_node", &add_node, py::arg("layer"), py::arg("record"));
    m.def("remove_node", &remove_node, py::arg("layer"), py::arg("image_id"), py::arg("seed") = 0);
    m.def("expand_neighborhood", &expand_neighborhood, py::arg("layer"), py::arg("center"), py::arg("count"));

    py::class_<HierarchicalGraph>(m, "HierarchicalGraph")
        .def_readonly("layers", &HierarchicalGraph::layers)
        .def("__len__", &HierarchicalGraph::layer_count)
        .def("check", &HierarchicalGraph::check_invariants);
    m.def("build_hierarchy", &build_hierarchy, py::arg("base"), py::arg("seed") = 0);

    m.def(
        "sort_grid",
        [](const std::vector<FeatureRecord>& items, std::size_t rows, std::size_t cols, std::uint64_t seed) {
            const GridAssignment g = sort_grid(items, rows, cols, seed);
            std::vector<std::vector<std::optional<ImageId>>> out(rows, std::vector<std::optional<ImageId>>(cols));
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    if (!g.at(r, c).empty()) out[r][c] = g.at(r, c).image_id;
                }
            }
            return py::make_tuple(out, grid_quality(g));
        },
        py::arg("items"), py::arg("rows"), py::arg("cols"), py::arg("seed") = 0,
        "Returns (rows of ids or None, grid quality)");

    py::class_<Collection>(m, "Collection")
        .def_readonly("graph", &Collection::graph)
        .def_readwrite("url_template", &Collection::url_template)
        .def("__len__", [](const Collection& c) { return c.records.size(); })
        .def("record", [](const Collection& c, ImageId id) { return c.records.at(id); })
        .def("keyword_ids", [](const Collection& c, const std::string& kw) {
            auto ids = c.keywords.find(kw);
            return std::vector<ImageId>(ids.begin(), ids.end());
        })
        .def("check", &Collection::check_invariants);

    m.def(
        "build_collection",
        [](std::vector<FeatureRecord> records, std::uint64_t seed, std::size_t factor) {
            return build_collection(std::move(records), {seed, factor});
        },
        py::arg("records"), py::arg("seed") = 0, py::arg("improve_factor") = 50);
    m.def(
        "ingest",
        [](const std::filesystem::path& f, std::optional<std::filesystem::path> meta, std::uint64_t seed) {
            return ingest(f, meta, {seed, 50});
        },
        py::arg("features"), py::arg("metadata") = py::none(), py::arg("seed") = 0);
    m.def("write_features", [](const std::filesystem::path& p, const std::vector<FeatureRecord>& r) { write_features(p, r); });
    m.def("write_metadata", [](const std::filesystem::path& p, const std::vector<FeatureRecord>& r) { write_metadata(p, r); });
    m.def("save_graph", py::overload_cast<const Collection&, const std::filesystem::path&>(&save_graph));
    m.def("load_graph", &load_graph, py::arg("path"), py::arg("metadata") = py::none());
    m.def("graph_file_size", &graph_file_size);

    py::class_<PySession>(m, "Session")
        .def(py::init([](const Collection& c, std::int64_t cols, std::int64_t rows, std::size_t search_layer,
                         std::uint64_t seed) {
                 NavigatorOptions o;
                 o.viewport_cols = cols;
                 o.viewport_rows = rows;
                 o.search_layer = search_layer;
                 o.seed = seed;
                 return PySession(c, o);
             }),
             py::arg("collection"), py::arg("cols") = 12, py::arg("rows") = 8, py::arg("search_layer") = 1,
             py::arg("seed") = 0)
        .def("search", &PySession::search)
        .def("drag", &PySession::drag, py::arg("dx"), py::arg("dy"))
        .def("zoom", &PySession::zoom, py::arg("direction"), py::arg("focus_x"), py::arg("focus_y"))
        .def("recenter", &PySession::recenter)
        .def("visible", &PySession::visible)
        .def_property_readonly("layer", &PySession::layer);

    py::class_<ApiHandler>(m, "ApiHandler")
        .def(py::init([](const Collection& c, std::optional<std::uint64_t> session_seed) {
                 auto graph = std::make_shared<const HierarchicalGraph>(c.graph);
                 ApiOptions o;
                 o.url_template = c.url_template;
                 o.session_seed = session_seed;
                 return std::make_unique<ApiHandler>([graph] { return graph; },
                                                     std::make_shared<const KeywordIndex>(c.keywords), o);
             }),
             py::arg("collection"), py::arg("session_seed") = py::none())
        .def(
            "handle",
            [](ApiHandler& api, std::string method, std::string path, std::map<std::string, std::string> query,
               std::string body) {
                ApiResponse r;
                {
                    py::gil_scoped_release release;
                    r = api.handle({std::move(method), std::move(path), std::move(query), std::move(body)});
                }
                return py::make_tuple(r.status, r.body);
            },
            py::arg("method"), py::arg("path"), py::arg("query") = std::map<std::string, std::string>{},
            py::arg("body") = "");
}
