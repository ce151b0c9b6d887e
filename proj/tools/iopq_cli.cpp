#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "iopq/bench.hpp"
#include "iopq/graph.hpp"
#include "iopq/verify.hpp"

using namespace iopq;

namespace {

constexpr int EXIT_PASS = 0, EXIT_FAIL = 1, EXIT_USAGE = 2;

struct CommonOpts {
    std::size_t block_size = 64;
    std::size_t memory_size = 16384;
    double alpha = 1.0;
    double lambda = 0;  // 0 = default for the command family
    std::uint64_t seed = 1;
    std::string csv;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--block-size", o.block_size, "Elements per block (B)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--memory-size", o.memory_size, "Cache capacity in elements (M)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", o.alpha, "Buffer exponent in (0,1]");
    cmd->add_option("--lambda", o.lambda, "Recursion parameter (default: M, or E/V for graphs)");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--csv", o.csv, "Append the record to this CSV file");
}

StoreConfig store_config(const CommonOpts& o) {
    StoreConfig c;
    c.block_size = o.block_size;
    c.memory_capacity = o.memory_size;
    if (!c.tall_cache())
        std::cerr << "warning: M < B^2; tall-cache assumption does not hold\n";
    return c;
}

void emit_record(const bench::BenchRecord& rec, const std::string& csv) {
    std::cout << rec.structure << " " << rec.workload << ": n=" << rec.n
              << " B=" << rec.block_size << " M=" << rec.memory_size << " reads=" << rec.reads
              << " writes=" << rec.writes << " reads/update=" << rec.reads_per_update()
              << " reads/extract=" << rec.reads_per_extract() << " wall=" << rec.wall_seconds
              << "s\n";
    if (csv.empty()) return;
    const bool fresh = !std::filesystem::exists(csv);
    std::ofstream out(csv, std::ios::app);
    if (!out) throw std::runtime_error("cannot open CSV file: " + csv);
    if (fresh) out << bench::BenchRecord::csv_header() << "\n";
    out << rec.csv_row() << "\n";
}

int report(const verify::SuiteResult& res, const std::string& name) {
    if (res.pass()) {
        std::cout << name << ": pass (" << res.checks << " checks)\n";
        return EXIT_PASS;
    }
    std::cout << name << ": FAIL\n";
    for (const auto& f : res.failures) std::cout << "  " << f << "\n";
    return EXIT_FAIL;
}

int run_verify(const std::string& suite, std::uint64_t seed, std::uint64_t size) {
    if (suite == "pq") return report(verify::verify_pq(seed, size), "pq");
    if (suite == "xtreap") return report(verify::verify_xtreap(seed, size), "xtreap");
    if (suite == "brt")
        return report(verify::verify_brt(seed, size, std::max<std::uint64_t>(1, size / 100)),
                      "brt");
    if (suite == "graphs")
        return report(verify::verify_graphs(seed, 200, 2000, 20000, 1000000), "graphs");
    std::cerr << "unknown suite: " << suite << " (expected pq|brt|xtreap|graphs)\n";
    return EXIT_USAGE;
}

EdgeList load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    return load_graph(in);
}

int run_graph_cmd(const std::string& algo, const std::string& path, std::uint64_t source,
                  const CommonOpts& o, const std::string& out_path, bool oracle) {
    const EdgeList el = load_graph_file(path);
    if (source >= el.node_count) {
        std::cerr << "source " << source << " out of range (V=" << el.node_count << ")\n";
        return EXIT_USAGE;
    }
    BlockStore store = create_store(store_config(o));
    Graph g = build_adjacency(store, el);
    const double lambda = o.lambda > 0 ? o.lambda : graph_lambda(g);
    TreapParams params(o.alpha, lambda);
    store.reset_counters();

    std::ostringstream body;
    bool ok = true;
    const auto t0 = std::chrono::steady_clock::now();
    if (algo == "sssp") {
        SsspResult r = sssp(store, g, source, params);
        for (std::uint64_t v = 0; v < g.node_count; ++v)
            body << v << " " << static_cast<std::int64_t>(r.dist[v]) << " "
                 << static_cast<std::int64_t>(r.parent[v]) << "\n";
        if (oracle) ok = r.dist == sssp_oracle(el, source).dist;
    } else {
        TraversalResult r = algo == "dfs" ? dfs(store, g, source, params)
                                          : bfs(store, g, source, params);
        for (std::uint64_t v = 0; v < g.node_count; ++v)
            body << v << " " << static_cast<std::int64_t>(r.order[v]) << " "
                 << static_cast<std::int64_t>(r.level[v]) << "\n";
        if (oracle) {
            TraversalResult want =
                algo == "dfs" ? dfs_oracle(el, source) : bfs_oracle(el, source);
            ok = r.order == want.order && r.level == want.level;
        }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    free_graph(store, g);

    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open output file: " + out_path);
        out << body.str();
    }
    const IoCounters c = store.snapshot_counters();
    std::cerr << algo << ": V=" << g.node_count << " E=" << g.edge_count << " lambda=" << lambda
              << " reads=" << c.reads << " writes=" << c.writes << " wall=" << wall << "s\n";
    if (oracle) {
        std::cerr << "oracle check: " << (ok ? "pass" : "FAIL") << "\n";
        if (!ok) return EXIT_FAIL;
    }
    return EXIT_PASS;
}

int run_gen_graph(std::uint64_t v, std::uint64_t e, std::uint64_t weight_max, std::uint64_t seed,
                  const std::string& out_path) {
    std::mt19937_64 rng(seed);
    std::ostringstream body;
    body << v << " " << e << "\n";
    for (std::uint64_t i = 0; i < e; ++i)
        body << rng() % v << " " << rng() % v << " " << 1 + rng() % weight_max << "\n";
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot open output file: " + out_path);
        out << body.str();
    }
    return EXIT_PASS;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"External-memory priority queue and graph algorithm harness"};
    app.require_subcommand(1);

    // verify
    auto* v_cmd = app.add_subcommand("verify", "Run a randomized oracle suite");
    std::string suite;
    std::uint64_t v_seed = 1, v_size = 100000;
    v_cmd->add_option("suite", suite, "pq|brt|xtreap|graphs")->required();
    v_cmd->add_option("--seed", v_seed, "RNG seed");
    v_cmd->add_option("--size", v_size, "Operation count");

    // pq-bench / brt-bench
    CommonOpts pq_o, brt_o;
    std::string pq_workload = "mixed", brt_workload = "mixed";
    std::uint64_t pq_n = 1 << 16, brt_n = 1 << 16;
    auto* pq_cmd = app.add_subcommand("pq-bench", "Priority-queue workload benchmark");
    pq_cmd->add_option("--workload", pq_workload,
                       "insert-heavy|mixed|sawtooth|decrease-heavy");
    pq_cmd->add_option("-n,--ops", pq_n, "Operation budget N");
    add_common(pq_cmd, pq_o);
    auto* brt_cmd = app.add_subcommand("brt-bench", "Buffered repository tree benchmark");
    brt_cmd->add_option("--workload", brt_workload,
                        "insert-heavy|mixed|sawtooth|decrease-heavy");
    brt_cmd->add_option("-n,--ops", brt_n, "Operation budget N");
    add_common(brt_cmd, brt_o);

    // graph commands
    struct GraphCmd {
        CLI::App* cmd;
        CommonOpts opts;
        std::string path, out;
        std::uint64_t source = 0;
        bool oracle = false;
    };
    GraphCmd gc[3];
    const char* algos[3] = {"sssp", "dfs", "bfs"};
    const char* descs[3] = {"Single-source shortest paths", "Depth-first search",
                            "Breadth-first search"};
    for (int i = 0; i < 3; ++i) {
        gc[i].cmd = app.add_subcommand(algos[i], descs[i]);
        gc[i].cmd->add_option("graph", gc[i].path, "Graph file (`V E` then `u v w` lines)")
            ->required();
        gc[i].cmd->add_option("--source", gc[i].source, "Source node");
        gc[i].cmd->add_option("--out", gc[i].out, "Result file (default: stdout)");
        gc[i].cmd->add_flag("--oracle", gc[i].oracle, "Cross-check against the in-memory oracle");
        add_common(gc[i].cmd, gc[i].opts);
    }

    // gen-graph
    auto* gen_cmd = app.add_subcommand("gen-graph", "Generate a random directed multigraph");
    std::uint64_t gen_v = 100, gen_e = 500, gen_w = 1000000, gen_seed = 1;
    std::string gen_out;
    gen_cmd->add_option("--nodes", gen_v, "Node count V")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--edges", gen_e, "Edge count E");
    gen_cmd->add_option("--weight-max", gen_w, "Maximum edge weight")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen_seed, "RNG seed");
    gen_cmd->add_option("--out", gen_out, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? EXIT_PASS : EXIT_USAGE;
    }

    try {
        if (v_cmd->parsed()) return run_verify(suite, v_seed, v_size);
        for (auto* p : {pq_cmd, brt_cmd}) {
            if (!p->parsed()) continue;
            CommonOpts& o = p == pq_cmd ? pq_o : brt_o;
            const std::uint64_t n = p == pq_cmd ? pq_n : brt_n;
            const std::string& wname = p == pq_cmd ? pq_workload : brt_workload;
            bench::Workload w;
            try {
                w = bench::parse_workload(wname);
            } catch (const std::invalid_argument& e) {
                std::cerr << e.what() << "\n";
                return EXIT_USAGE;
            }
            const StoreConfig config = store_config(o);
            const double lambda =
                o.lambda > 0 ? o.lambda : static_cast<double>(config.memory_capacity);
            bench::BenchRecord rec =
                p == pq_cmd ? bench::run_pq_workload(config, o.alpha, lambda, w, n, o.seed)
                            : bench::run_brt_workload(config, o.alpha, lambda, w, n, o.seed);
            emit_record(rec, o.csv);
            return EXIT_PASS;
        }
        for (int i = 0; i < 3; ++i)
            if (gc[i].cmd->parsed())
                return run_graph_cmd(algos[i], gc[i].path, gc[i].source, gc[i].opts, gc[i].out,
                                     gc[i].oracle);
        if (gen_cmd->parsed()) return run_gen_graph(gen_v, gen_e, gen_w, gen_seed, gen_out);
    } catch (const GraphParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return EXIT_USAGE;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return EXIT_FAIL;
    }
    return EXIT_USAGE;
}
