#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "iopq/block_store.hpp"
#include "iopq/xtreap.hpp"

namespace iopq {

constexpr std::uint64_t UNREACHABLE = ~std::uint64_t{0};
constexpr std::uint64_t NO_PARENT = ~std::uint64_t{0};
constexpr std::uint64_t UNVISITED = ~std::uint64_t{0};

struct Edge {
    std::uint64_t src = 0, dst = 0, weight = 0;
};

struct EdgeList {
    std::uint64_t node_count = 0;
    std::vector<Edge> edges;  // input order defines per-source edge ranks
};

class GraphParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses `V E` then E lines `u v w`.  Errors carry the 1-based line number.
EdgeList load_graph(std::istream& in);

/// Directed multigraph with both adjacency directions in external arrays:
/// out rows hold (target, weight) in input-rank order, in rows hold
/// (source, source_out_rank).  Row offset tables are in-memory plumbing.
struct Graph {
    std::uint64_t node_count = 0;
    std::uint64_t edge_count = 0;
    std::vector<Edge> edges;            // by edge id, for parent lookups
    std::vector<std::uint64_t> ranks;   // per edge id: rank within its source
    std::vector<std::uint64_t> out_off; // node_count + 1
    std::vector<std::uint64_t> in_off;
    ArrayRef out_rows;  // Element{key: target, priority: edge id}
    ArrayRef in_rows;   // Element{key: source, priority: edge id}
};

/// Builds both CSR directions with external sorts over the store.
Graph build_adjacency(BlockStore& store, const EdgeList& input);
void free_graph(BlockStore& store, Graph& g);

struct SsspResult {
    std::vector<std::uint64_t> dist;    // UNREACHABLE when not reached
    std::vector<std::uint64_t> parent;  // NO_PARENT for source/unreached
};

struct TraversalResult {
    std::vector<std::uint64_t> order;  // visit number or UNVISITED
    std::vector<std::uint64_t> level;  // hop distance (bfs) / stack depth (dfs)
};

SsspResult sssp(BlockStore& store, const Graph& g, std::uint64_t source,
                const TreapParams& params);
TraversalResult dfs(BlockStore& store, const Graph& g, std::uint64_t source,
                    const TreapParams& params);
TraversalResult bfs(BlockStore& store, const Graph& g, std::uint64_t source,
                    const TreapParams& params);

// In-memory reference implementations with the same child-order convention.
SsspResult sssp_oracle(const EdgeList& input, std::uint64_t source);
TraversalResult dfs_oracle(const EdgeList& input, std::uint64_t source);
TraversalResult bfs_oracle(const EdgeList& input, std::uint64_t source);

/// Default lambda for graph runs: max(2, E/V).
double graph_lambda(const Graph& g);

}  // namespace iopq
