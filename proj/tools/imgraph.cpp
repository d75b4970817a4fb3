#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "imgraph/api.hpp"
#include "imgraph/collection.hpp"
#include "imgraph/error.hpp"
#include "imgraph/http_server.hpp"
#include "imgraph/improvement_loop.hpp"

using namespace imgraph;
namespace fs = std::filesystem;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void print_layers(const HierarchicalGraph& graph) {
    for (const auto& layer : graph.layers) {
        std::printf("layer %zu: %zu nodes", layer.level(), layer.size());
        if (layer.edge_count() > 0) {
            const QualityReport q = graph_quality(layer);
            std::printf(", %zu edges, quality %.6f", q.edge_count, q.quality);
        }
        std::printf("\n");
    }
}

int cmd_gen(std::size_t clusters, std::size_t per_cluster, std::uint64_t seed, double sigma, const fs::path& out) {
    SyntheticOptions opt{clusters, per_cluster, true, seed, sigma};
    const auto records = generate_synthetic(opt);
    write_features(out, records);
    const fs::path meta = out.string() + ".meta";
    write_metadata(meta, records);
    std::printf("wrote %zu records to %s and keywords to %s\n", records.size(), out.c_str(), meta.c_str());
    return 0;
}

int cmd_ingest(const fs::path& features, const std::optional<fs::path>& meta, const fs::path& out,
               const BuildOptions& build) {
    const auto t0 = std::chrono::steady_clock::now();
    const Collection c = ingest(features, meta, build);
    save_graph(c, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("ingested %zu records, %zu keywords in %.1f s\n", c.records.size(), c.keywords.keyword_count(), secs);
    print_layers(c.graph);
    std::printf("saved %s (%ju bytes)\n", out.c_str(), static_cast<std::uintmax_t>(fs::file_size(out)));
    return 0;
}

int cmd_improve(const fs::path& graph_path, std::size_t budget, std::uint64_t seed) {
    Collection c = load_graph(graph_path);
    GraphLayer& base = c.graph.layers[0];
    const double before = base.edge_count() ? graph_quality(base).quality : 0.0;
    std::mt19937_64 rng(seed);
    const std::size_t accepted = improve_in_place(base, budget, rng);
    const double after = base.edge_count() ? graph_quality(base).quality : 0.0;
    save_graph(c, graph_path);
    std::printf("layer 0: %zu of %zu swaps accepted, quality %.6f -> %.6f\n", accepted, budget, before, after);
    return 0;
}

int cmd_stats(const fs::path& graph_path) {
    const Collection c = load_graph(graph_path);
    std::printf("file: %s, %ju bytes\n", graph_path.c_str(), static_cast<std::uintmax_t>(fs::file_size(graph_path)));
    std::printf("layers: %zu\n", c.graph.layer_count());
    print_layers(c.graph);
    return 0;
}

struct ServeArgs {
    fs::path graph;
    std::optional<fs::path> meta;
    std::string host = "0.0.0.0";
    int port = 8080;
    std::string url_template = "{id}";
    std::size_t batch_size = 10000;
    std::size_t refresh_every = 100;
    std::uint64_t seed = 0;
};

int cmd_serve(const ServeArgs& args) {
    if (args.url_template.find("{id}") == std::string::npos) {
        throw CLI::ValidationError("--url-template", "must contain {id}");
    }
    Collection c = load_graph(args.graph, args.meta);
    std::printf("loaded %zu images in %zu layers, %zu keywords\n", c.records.size(), c.graph.layer_count(),
                c.keywords.keyword_count());
    ImprovementLoop loop(std::move(c.graph), {args.batch_size, args.refresh_every, args.seed});
    if (args.batch_size > 0) loop.start();

    ApiOptions options;
    options.url_template = args.url_template;
    ApiHandler api([&loop] { return loop.snapshot(); }, std::make_shared<const KeywordIndex>(std::move(c.keywords)),
                   options);
    HttpServer server(api);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::printf("serving on http://%s:%d\n", args.host.c_str(), args.port);
    std::fflush(stdout);
    const bool ok = server.listen(args.host, args.port);
    g_server = nullptr;
    loop.stop();
    if (!ok) {
        std::fprintf(stderr, "could not listen on %s:%d\n", args.host.c_str(), args.port);
        return 1;
    }
    std::printf("stopped after %ju improvement batches\n", static_cast<std::uintmax_t>(loop.batches()));
    return 0;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args) {
        if (a == flag || a.starts_with(flag + "=")) return true;
    }
    return false;
}

/// Appends "--key value" for each key of the --config file that the command
/// line does not already set, so flags take precedence over the file.
std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].starts_with("--config=")) path = args[i].substr(9);
    }
    if (!path) return args;
    for (const auto& item : CLI::ConfigINI().from_file(*path)) {
        if (item.name.empty() || item.name == "++" || item.name == "--") continue;
        const std::string flag = "--" + item.name;
        if (has_flag(args, flag)) continue;
        args.push_back(flag);
        args.insert(args.end(), item.inputs.begin(), item.inputs.end());
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical image similarity graph: build, improve, inspect, serve"};
    app.require_subcommand(1);

    std::size_t clusters = 8, per_cluster = 1000;
    std::uint64_t seed = 0;
    double sigma = 0.05;
    fs::path out;
    auto* gen = app.add_subcommand("gen", "Write synthetic clustered features plus a keyword sidecar (<out>.meta)");
    gen->add_option("--clusters", clusters)->check(CLI::PositiveNumber);
    gen->add_option("--per-cluster", per_cluster)->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed);
    gen->add_option("--sigma", sigma)->check(CLI::Range(0.0, 1.0));
    gen->add_option("--out", out)->required();

    fs::path features;
    std::optional<fs::path> meta;
    BuildOptions build;
    auto* ing = app.add_subcommand("ingest", "Build the hierarchical graph from a feature file and save it");
    ing->add_option("--features", features)->required()->check(CLI::ExistingFile);
    ing->add_option("--meta", meta)->check(CLI::ExistingFile);
    ing->add_option("--out", out)->required();
    ing->add_option("--seed", build.seed);
    ing->add_option("--improve-factor", build.improve_factor, "improve attempts per image");

    fs::path graph_path;
    std::size_t budget = 0;
    auto* imp = app.add_subcommand("improve", "Run swap attempts on layer 0 of a saved graph, in place");
    imp->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);
    imp->add_option("--budget", budget)->required();
    imp->add_option("--seed", seed);

    auto* stats = app.add_subcommand("stats", "Print layer sizes, quality, and file size");
    stats->add_option("--graph", graph_path)->required()->check(CLI::ExistingFile);

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API and keep improving the graph in the background");
    std::string config_path;
    serve->add_option("--config", config_path, "key=value file; command-line flags take precedence")
        ->check(CLI::ExistingFile);
    serve->add_option("--graph", serve_args.graph)->required()->check(CLI::ExistingFile);
    serve->add_option("--meta", serve_args.meta)->check(CLI::ExistingFile);
    serve->add_option("--host", serve_args.host);
    serve->add_option("--port", serve_args.port)->check(CLI::Range(0, 65535));
    serve->add_option("--url-template", serve_args.url_template, "image URL with the literal token {id}");
    serve->add_option("--batch-size", serve_args.batch_size, "improve attempts per background batch; 0 disables");
    serve->add_option("--refresh-every", serve_args.refresh_every, "batches between upper-layer rebuilds");
    serve->add_option("--seed", serve_args.seed);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) return cmd_gen(clusters, per_cluster, seed, sigma, out);
        if (*ing) return cmd_ingest(features, meta, out, build);
        if (*imp) return cmd_improve(graph_path, budget, seed);
        if (*stats) return cmd_stats(graph_path);
        if (*serve) return cmd_serve(serve_args);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    }
    return 0;
}
