#include "batchdex/lp/clearing_lp.hpp"

#include <algorithm>

namespace batchdex {

namespace {

// Residual network shared by the feasibility max-flow and the volume
// maximization. Paired edge layout: edge i and i^1 are mutual reverses.
struct ResidualGraph {
    struct Edge {
        int to;
        uint128_t cap; // residual capacity
        int cost;      // -1 on forward pair edges, +1 on their reverses
    };
    std::vector<Edge> edges;
    std::vector<std::vector<int>> adj;

    explicit ResidualGraph(int n) : adj(n) {}

    int add_edge(int from, int to, uint128_t cap, int cost) {
        int id = static_cast<int>(edges.size());
        edges.push_back({to, cap, cost});
        edges.push_back({from, 0, -cost});
        adj[from].push_back(id);
        adj[to].push_back(id + 1);
        return id;
    }

    void push(int id, uint128_t amount) {
        edges[id].cap -= amount;
        edges[id ^ 1].cap += amount;
    }
};

struct Dinic {
    ResidualGraph& g;
    std::vector<int> level, iter;

    explicit Dinic(ResidualGraph& g) : g(g), level(g.adj.size()), iter(g.adj.size()) {}

    bool bfs(int s, int t) {
        std::fill(level.begin(), level.end(), -1);
        std::vector<int> queue{s};
        level[s] = 0;
        for (size_t qi = 0; qi < queue.size(); qi++) {
            int v = queue[qi];
            for (int id : g.adj[v]) {
                const auto& e = g.edges[id];
                if (e.cap > 0 && level[e.to] < 0) {
                    level[e.to] = level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        return level[t] >= 0;
    }

    uint128_t dfs(int v, int t, uint128_t limit) {
        if (v == t) return limit;
        for (int& i = iter[v]; i < static_cast<int>(g.adj[v].size()); i++) {
            int id = g.adj[v][i];
            auto& e = g.edges[id];
            if (e.cap == 0 || level[e.to] != level[v] + 1) continue;
            uint128_t pushed = dfs(e.to, t, std::min(limit, e.cap));
            if (pushed > 0) {
                g.push(id, pushed);
                return pushed;
            }
        }
        return 0;
    }

    uint128_t run(int s, int t) {
        uint128_t total = 0;
        while (bfs(s, t)) {
            std::fill(iter.begin(), iter.end(), 0);
            while (uint128_t f = dfs(s, t, ~uint128_t(0))) total += f;
        }
        return total;
    }
};

// Cancels negative cycles (cost -1 forward / +1 backward residuals) until
// none remain; every cancellation strictly increases total pair flow.
void maximize_volume(ResidualGraph& g, int n_nodes, size_t max_rounds) {
    std::vector<int64_t> dist(n_nodes);
    std::vector<int> parent_edge(n_nodes);

    for (size_t round = 0; round < max_rounds; round++) {
        std::fill(dist.begin(), dist.end(), 0);
        std::fill(parent_edge.begin(), parent_edge.end(), -1);
        int updated_node = -1;
        for (int pass = 0; pass < n_nodes; pass++) {
            updated_node = -1;
            for (int id = 0; id < static_cast<int>(g.edges.size()); id++) {
                const auto& e = g.edges[id];
                if (e.cap == 0) continue;
                int from = g.edges[id ^ 1].to;
                if (dist[from] + e.cost < dist[e.to]) {
                    dist[e.to] = dist[from] + e.cost;
                    parent_edge[e.to] = id;
                    updated_node = e.to;
                }
            }
            if (updated_node < 0) break;
        }
        if (updated_node < 0) return; // no negative cycle

        // walk back n steps to land inside the cycle
        int v = updated_node;
        for (int i = 0; i < n_nodes; i++) v = g.edges[parent_edge[v] ^ 1].to;

        // collect the cycle and its bottleneck
        uint128_t bottleneck = ~uint128_t(0);
        std::vector<int> cycle;
        int u = v;
        do {
            int id = parent_edge[u];
            cycle.push_back(id);
            bottleneck = std::min(bottleneck, g.edges[id].cap);
            u = g.edges[id ^ 1].to;
        } while (u != v);

        for (int id : cycle) g.push(id, bottleneck);
    }
}

} // namespace

FlowSolution solve_max_circulation(const BoundsSet& bounds, bool use_lower_bounds) {
    const uint32_t pairs = bounds.pair_count();
    const int n = bounds.n_assets;
    const int source = n, sink = n + 1;

    ResidualGraph g(n + 2);
    std::vector<int> pair_edge(pairs, -1);
    std::vector<uint128_t> lo(pairs, 0);
    std::vector<int128_t> excess(n, 0);

    for (uint32_t idx = 0; idx < pairs; idx++) {
        const PairBounds& pb = bounds.pairs[idx];
        if (pb.upper == 0) continue;
        PairId pair = pair_from_index(bounds.n_assets, idx);
        lo[idx] = use_lower_bounds ? pb.lower : 0;
        pair_edge[idx] = g.add_edge(pair.sell.id, pair.buy.id, pb.upper - lo[idx], -1);
        excess[pair.buy.id] += static_cast<int128_t>(lo[idx]);
        excess[pair.sell.id] -= static_cast<int128_t>(lo[idx]);
    }

    uint128_t need = 0;
    for (int v = 0; v < n; v++) {
        if (excess[v] > 0) {
            g.add_edge(source, v, static_cast<uint128_t>(excess[v]), 0);
            need += static_cast<uint128_t>(excess[v]);
        } else if (excess[v] < 0) {
            g.add_edge(v, sink, static_cast<uint128_t>(-excess[v]), 0);
        }
    }

    FlowSolution sol;
    sol.y.assign(pairs, 0);
    sol.used_lower_bounds = use_lower_bounds;

    if (need > 0) {
        Dinic dinic(g);
        uint128_t pushed = dinic.run(source, sink);
        if (pushed != need) {
            sol.feasible = false;
            return sol;
        }
    }

    // saturate the source/sink arcs so they can't participate in cycles
    for (int id : g.adj[source]) g.edges[id].cap = 0;
    for (int id : g.adj[sink]) g.edges[id].cap = 0;
    for (int v = 0; v < n; v++) {
        for (int id : g.adj[v]) {
            if (g.edges[id].to == source || g.edges[id].to == sink) g.edges[id].cap = 0;
        }
    }

    maximize_volume(g, n, 1u << 20);

    sol.feasible = true;
    for (uint32_t idx = 0; idx < pairs; idx++) {
        if (pair_edge[idx] < 0) continue;
        // flow above the floor equals the reverse residual
        uint128_t f = g.edges[pair_edge[idx] ^ 1].cap;
        sol.y[idx] = lo[idx] + f;
        sol.objective = checked_add_u128(sol.objective, sol.y[idx]);
    }
    return sol;
}

bool feasibility_probe(const BoundsSet& bounds) {
    // Fast reject: a pair with a mandatory floor above its own cap.
    for (const auto& pb : bounds.pairs)
        if (pb.lower > pb.upper) return false;
    return solve_max_circulation(bounds, true).feasible;
}

bool feasibility_probe(const MarketCurves& curves, const std::vector<Price>& prices,
                       ApproxParams params) {
    return feasibility_probe(build_bounds(curves, prices, params));
}

} // namespace batchdex
