#include "ocsim/multiplex.hpp"

#include <algorithm>
#include <deque>
#include <fmt/format.h>

namespace ocsim {

namespace {

constexpr std::array<std::string_view, kLayerCount> kLayerNames{"household", "friendship", "work_school",
                                                                 "co_offending", "oc_group"};

auto find_adjacent(const std::vector<Adjacent>& list, AgentId id) {
    return std::lower_bound(list.begin(), list.end(), id,
                            [](const Adjacent& a, AgentId v) { return a.id < v; });
}

} // namespace

std::string_view to_string(LayerId l) noexcept { return kLayerNames[static_cast<std::size_t>(l)]; }

LayerId parse_layer(std::string_view s) {
    for (std::size_t i = 0; i < kLayerCount; ++i) {
        if (kLayerNames[i] == s) return static_cast<LayerId>(i);
    }
    throw ConfigError("layer", fmt::format("unknown layer '{}' (expected household, friendship, work_school, "
                                           "co_offending or oc_group)",
                                           s));
}

MultiplexGraph::MultiplexGraph(std::size_t node_count) {
    for (auto& layer : adjacency_) layer.resize(node_count);
    present_.assign(node_count, 1);
    active_.assign(node_count, 1);
    oc_.assign(node_count, 0);
    present_count_ = node_count;
}

AgentId MultiplexGraph::add_node() {
    const auto id = static_cast<AgentId>(present_.size());
    for (auto& layer : adjacency_) layer.emplace_back();
    present_.push_back(1);
    active_.push_back(1);
    oc_.push_back(0);
    ++present_count_;
    return id;
}

void MultiplexGraph::remove_node(AgentId v) {
    require_node(v);
    for (auto layer : kAllLayers) {
        // copy: remove_edge mutates the list we iterate
        const auto adjacent = adj(layer, v);
        for (const auto& a : adjacent) remove_edge(layer, v, a.id);
    }
    suppressed_.erase(v);
    present_[v] = 0;
    active_[v] = 0;
    --present_count_;
}

void MultiplexGraph::require_node(AgentId v) const {
    if (!contains(v)) throw StructuralError(fmt::format("node {} is not in the node set", v));
}

bool MultiplexGraph::add_edge(LayerId layer, AgentId a, AgentId b, Tick tick) {
    require_node(a);
    require_node(b);
    if (a == b) throw StructuralError(fmt::format("self-loop on node {}", a));
    auto& la = adj(layer, a);
    auto it = find_adjacent(la, b);
    if (it != la.end() && it->id == b) return false;
    la.insert(it, Adjacent{b, tick});
    auto& lb = adj(layer, b);
    lb.insert(find_adjacent(lb, a), Adjacent{a, tick});
    ++edge_counts_[static_cast<std::size_t>(layer)];
    if (record_history_) history_.push_back({clock_, layer, std::min(a, b), std::max(a, b), true, tick});
    return true;
}

bool MultiplexGraph::remove_edge(LayerId layer, AgentId a, AgentId b) {
    require_node(a);
    require_node(b);
    auto& la = adj(layer, a);
    auto it = find_adjacent(la, b);
    if (it == la.end() || it->id != b) return false;
    la.erase(it);
    auto& lb = adj(layer, b);
    lb.erase(find_adjacent(lb, a));
    --edge_counts_[static_cast<std::size_t>(layer)];
    if (record_history_) history_.push_back({clock_, layer, std::min(a, b), std::max(a, b), false, clock_});
    return true;
}

bool MultiplexGraph::has_edge(LayerId layer, AgentId a, AgentId b) const { return edge_tick(layer, a, b).has_value(); }

std::optional<Tick> MultiplexGraph::edge_tick(LayerId layer, AgentId a, AgentId b) const {
    if (!contains(a) || !contains(b)) return std::nullopt;
    const auto& la = adjacency_[static_cast<std::size_t>(layer)][a];
    auto it = find_adjacent(la, b);
    if (it == la.end() || it->id != b) return std::nullopt;
    return it->created;
}

std::span<const Adjacent> MultiplexGraph::adjacency(LayerId layer, AgentId v) const {
    require_node(v);
    return adjacency_[static_cast<std::size_t>(layer)][v];
}

std::vector<AgentId> MultiplexGraph::neighbors(LayerId layer, AgentId v) const {
    std::vector<AgentId> out;
    for (const auto& a : adjacency(layer, v)) out.push_back(a.id);
    return out;
}

std::vector<EdgeRecord> MultiplexGraph::edges(LayerId layer) const {
    std::vector<EdgeRecord> out;
    out.reserve(edge_count(layer));
    const auto& lists = adjacency_[static_cast<std::size_t>(layer)];
    for (AgentId v = 0; v < lists.size(); ++v) {
        for (const auto& a : lists[v]) {
            if (a.id > v) out.push_back({v, a.id, layer, a.created});
        }
    }
    return out;
}

void MultiplexGraph::set_active(AgentId v, bool active) {
    require_node(v);
    active_[v] = active ? 1 : 0;
}

void MultiplexGraph::set_oc_member(AgentId v, bool member) {
    if (v >= oc_.size()) throw StructuralError(fmt::format("node {} is not in the node set", v));
    oc_[v] = member ? 1 : 0;
}

void MultiplexGraph::begin_history() {
    history_.clear();
    for (auto layer : kAllLayers)
        for (const auto& e : edges(layer)) history_.push_back({e.created, layer, e.source, e.target, true, e.created});
    std::stable_sort(history_.begin(), history_.end(), [](const auto& x, const auto& y) { return x.tick < y.tick; });
    record_history_ = true;
}

void MultiplexGraph::suppress_contact(AgentId ego, AgentId other) {
    auto& list = suppressed_[ego];
    if (std::find(list.begin(), list.end(), other) == list.end()) list.push_back(other);
}

void MultiplexGraph::clear_suppressions(AgentId ego) { suppressed_.erase(ego); }

std::span<const AgentId> MultiplexGraph::suppressed_contacts(AgentId ego) const {
    auto it = suppressed_.find(ego);
    if (it == suppressed_.end()) return {};
    return it->second;
}

std::vector<EdgeRecord> edges_at(std::span<const EdgeChange> history, Tick tick, LayerId layer) {
    std::map<std::pair<AgentId, AgentId>, Tick> live;
    for (const auto& c : history) {
        if (c.tick > tick) break;
        if (c.layer != layer) continue;
        if (c.added)
            live.emplace(std::pair{c.a, c.b}, c.created);
        else
            live.erase({c.a, c.b});
    }
    std::vector<EdgeRecord> out;
    out.reserve(live.size());
    for (const auto& [key, created] : live) out.push_back({key.first, key.second, layer, created});
    return out;
}

double NeighborhoodView::total_weight() const {
    double sum = 0.0;
    for (const auto& w : weights) sum += w.weight;
    return sum;
}

template <typename Visit>
void NeighborhoodScanner::scan(AgentId ego, int h, LayerMask layers, Visit&& visit) {
    const auto& g = *graph_;
    if (!g.active(ego) || h < 1) return;
    if (dist_.size() < g.capacity()) {
        dist_.resize(g.capacity(), 0);
        stamp_.resize(g.capacity(), 0);
        via_.resize(g.capacity(), 0);
    }
    if (++epoch_ == 0) {
        std::fill(stamp_.begin(), stamp_.end(), 0);
        epoch_ = 1;
    }
    const auto hidden = g.suppressed_contacts(ego);
    auto admissible = [&](AgentId v) {
        return g.active(v) && std::find(hidden.begin(), hidden.end(), v) == hidden.end();
    };

    order_.clear();
    order_.push_back(ego);
    stamp_[ego] = epoch_;
    dist_[ego] = 0;
    via_[ego] = 0;
    // via_[v]: layers holding an edge from a node one hop closer to ego
    for (std::size_t head = 0; head < order_.size(); ++head) {
        const AgentId u = order_[head];
        const int du = dist_[u];
        if (du == h) continue;
        for (auto layer : kAllLayers) {
            if (!layers.contains(layer)) continue;
            const auto bit = static_cast<std::uint8_t>(1u << static_cast<unsigned>(layer));
            for (const auto& a : g.adjacency(layer, u)) {
                if (stamp_[a.id] == epoch_) {
                    if (dist_[a.id] == du + 1) via_[a.id] |= bit;
                    continue;
                }
                if (!admissible(a.id)) continue;
                stamp_[a.id] = epoch_;
                dist_[a.id] = du + 1;
                via_[a.id] = bit;
                order_.push_back(a.id);
            }
        }
    }

    for (std::size_t i = 1; i < order_.size(); ++i) {
        const AgentId v = order_[i];
        for (auto layer : kAllLayers)
            if (via_[v] & (1u << static_cast<unsigned>(layer))) visit(v, dist_[v], layer);
    }
}

NeighborhoodView NeighborhoodScanner::neighborhood(AgentId ego, int h, LayerMask layers) {
    NeighborhoodView view;
    view.ego = ego;
    view.h = h;
    scan(ego, h, layers, [&](AgentId v, int d, LayerId layer) {
        if (view.members.empty() || view.members.back().id != v)
            view.members.push_back({v, d, 1});
        else
            ++view.members.back().multiplicity;
        view.weights.push_back({v, layer, 1.0 / d});
    });
    return view;
}

EmbeddednessResult NeighborhoodScanner::embeddedness(AgentId ego, int h) {
    EmbeddednessResult out;
    out.ego = ego;
    const auto& g = *graph_;
    scan(ego, h, LayerMask::all(), [&](AgentId v, int d, LayerId) {
        const double w = 1.0 / d;
        out.total_weight_sum += w;
        if (g.oc_member(v)) out.oc_weight_sum += w;
    });
    if (out.total_weight_sum > 0.0) out.r = std::clamp(out.oc_weight_sum / out.total_weight_sum, 0.0, 1.0);
    return out;
}

NeighborhoodView h_hop_neighborhood(const MultiplexGraph& graph, AgentId ego, int h, LayerMask layers) {
    NeighborhoodScanner scanner{graph};
    return scanner.neighborhood(ego, h, layers);
}

EmbeddednessResult oc_embeddedness(const MultiplexGraph& graph, AgentId ego, int h) {
    NeighborhoodScanner scanner{graph};
    return scanner.embeddedness(ego, h);
}

namespace {

/// Depth-limited BFS from `a` inside one layer; calls visit(v, d) for every reached v != a.
template <typename Visit>
void layer_bfs(const MultiplexGraph& graph, LayerId layer, AgentId a, int h, Visit&& visit) {
    std::map<AgentId, int> dist{{a, 0}};
    std::deque<AgentId> queue{a};
    while (!queue.empty()) {
        const AgentId u = queue.front();
        queue.pop_front();
        const int du = dist[u];
        if (du == h) continue;
        for (const auto& adj : graph.adjacency(layer, u)) {
            if (!graph.active(adj.id) || dist.contains(adj.id)) continue;
            dist.emplace(adj.id, du + 1);
            visit(adj.id, du + 1);
            queue.push_back(adj.id);
        }
    }
}

} // namespace

double social_proximity(const MultiplexGraph& graph, AgentId a, AgentId b, int h) {
    if (a == b || !graph.active(a) || !graph.active(b)) return 0.0;
    double sum = 0.0;
    for (auto layer : kAllLayers) {
        int found = 0;
        layer_bfs(graph, layer, a, h, [&](AgentId v, int d) {
            if (v == b && found == 0) found = d;
        });
        if (found > 0) sum += 1.0 / found;
    }
    return sum;
}

std::vector<std::pair<AgentId, double>> proximity_field(const MultiplexGraph& graph, AgentId a, int h) {
    std::map<AgentId, double> acc;
    if (!graph.active(a)) return {};
    for (auto layer : kAllLayers) {
        layer_bfs(graph, layer, a, h, [&](AgentId v, int d) { acc[v] += 1.0 / d; });
    }
    return {acc.begin(), acc.end()};
}

std::map<AgentId, double> betweenness(const MultiplexGraph& graph, LayerMask layers, std::span<const AgentId> nodes) {
    std::vector<AgentId> ids(nodes.begin(), nodes.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::erase_if(ids, [&](AgentId v) { return !graph.contains(v); });

    const std::size_t n = ids.size();
    std::unordered_map<AgentId, std::size_t> local;
    for (std::size_t i = 0; i < n; ++i) local.emplace(ids[i], i);

    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto layer : kAllLayers) {
            if (!layers.contains(layer)) continue;
            for (const auto& a : graph.adjacency(layer, ids[i])) {
                if (auto it = local.find(a.id); it != local.end()) adj[i].push_back(it->second);
            }
        }
        std::sort(adj[i].begin(), adj[i].end());
        adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
    }

    // Brandes accumulation over unweighted BFS trees.
    std::vector<double> score(n, 0.0);
    std::vector<double> sigma(n), delta(n);
    std::vector<int> dist(n);
    std::vector<std::vector<std::size_t>> preds(n);
    std::vector<std::size_t> stack;
    stack.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        for (auto& p : preds) p.clear();
        stack.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        std::deque<std::size_t> queue{s};
        while (!queue.empty()) {
            const auto v = queue.front();
            queue.pop_front();
            stack.push_back(v);
            for (auto w : adj[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    preds[w].push_back(v);
                }
            }
        }
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            const auto w = *it;
            for (auto v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s) score[w] += delta[w];
        }
    }

    std::map<AgentId, double> out;
    // Each unordered pair was counted from both endpoints.
    const double norm = n > 2 ? static_cast<double>((n - 1) * (n - 2)) : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.emplace(ids[i], norm > 0.0 ? score[i] / norm : 0.0);
    return out;
}

} // namespace ocsim
