#pragma once

#include "ocsim/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ocsim {

enum class LayerId : std::uint8_t { Household = 0, Friendship, WorkSchool, CoOffending, OcGroup };

inline constexpr std::size_t kLayerCount = 5;
inline constexpr std::array<LayerId, kLayerCount> kAllLayers{
    LayerId::Household, LayerId::Friendship, LayerId::WorkSchool, LayerId::CoOffending, LayerId::OcGroup};

std::string_view to_string(LayerId l) noexcept;
LayerId parse_layer(std::string_view s);

/// Set of layers, one bit per LayerId.
class LayerMask {
public:
    constexpr LayerMask() = default;
    constexpr LayerMask(std::initializer_list<LayerId> layers) {
        for (auto l : layers) bits_ |= bit(l);
    }
    static constexpr LayerMask all() { return LayerMask{std::uint8_t{0x1f}}; }

    constexpr bool contains(LayerId l) const noexcept { return (bits_ & bit(l)) != 0; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr void insert(LayerId l) noexcept { bits_ |= bit(l); }

private:
    constexpr explicit LayerMask(std::uint8_t bits) : bits_{bits} {}
    static constexpr std::uint8_t bit(LayerId l) { return std::uint8_t(1u << static_cast<unsigned>(l)); }
    std::uint8_t bits_ = 0;
};

struct Adjacent {
    AgentId id;
    Tick created;
};

struct EdgeRecord {
    AgentId source;
    AgentId target;
    LayerId layer;
    Tick created;

    bool operator==(const EdgeRecord&) const = default;
};

struct EdgeChange {
    /// Clock at the time of the change.
    Tick tick;
    LayerId layer;
    AgentId a;
    AgentId b;
    bool added;
    /// Creation tick carried by the edge (restored edges keep their original one).
    Tick created;
};

/// Five undirected, unweighted layers over one dynamic node set.
///
/// Node ids are dense indices. Besides adjacency the graph carries the node flags
/// the neighbourhood metrics need: presence in the node set, activity (incarcerated
/// nodes stay in the node set but are skipped by traversals) and OC membership.
class MultiplexGraph {
public:
    MultiplexGraph() = default;
    explicit MultiplexGraph(std::size_t node_count);

    /// Appends a new present, active, non-OC node and returns its id.
    AgentId add_node();
    /// Drops a node from the node set together with all its edges.
    void remove_node(AgentId v);

    bool contains(AgentId v) const noexcept { return v < present_.size() && present_[v]; }
    std::size_t capacity() const noexcept { return present_.size(); }
    std::size_t node_count() const noexcept { return present_count_; }

    /// Inserts an edge; returns false if it already existed (the original tick is kept).
    bool add_edge(LayerId layer, AgentId a, AgentId b, Tick tick);
    /// Removes an edge; returns false if it was absent.
    bool remove_edge(LayerId layer, AgentId a, AgentId b);
    bool has_edge(LayerId layer, AgentId a, AgentId b) const;
    std::optional<Tick> edge_tick(LayerId layer, AgentId a, AgentId b) const;

    std::span<const Adjacent> adjacency(LayerId layer, AgentId v) const;
    std::vector<AgentId> neighbors(LayerId layer, AgentId v) const;
    std::size_t degree(LayerId layer, AgentId v) const { return adjacency(layer, v).size(); }
    std::size_t edge_count(LayerId layer) const noexcept { return edge_counts_[static_cast<std::size_t>(layer)]; }

    /// All edges of a layer with source < target, ordered by (source, target).
    std::vector<EdgeRecord> edges(LayerId layer) const;

    void set_active(AgentId v, bool active);
    bool active(AgentId v) const noexcept { return contains(v) && active_[v]; }
    void set_oc_member(AgentId v, bool member);
    bool oc_member(AgentId v) const noexcept { return v < oc_.size() && oc_[v]; }

    /// Hides `other` from the neighbourhood of `ego` (used to weaken a tie without deleting it).
    void suppress_contact(AgentId ego, AgentId other);
    void clear_suppressions(AgentId ego);
    std::span<const AgentId> suppressed_contacts(AgentId ego) const;

    /// Timestamp used for recorded edge changes.
    void set_clock(Tick tick) noexcept { clock_ = tick; }
    Tick clock() const noexcept { return clock_; }
    void record_history(bool on) noexcept { record_history_ = on; }
    /// Starts recording with the current edges as the opening entries of the log.
    void begin_history();
    const std::vector<EdgeChange>& history() const noexcept { return history_; }

private:
    void require_node(AgentId v) const;
    std::vector<Adjacent>& adj(LayerId layer, AgentId v) { return adjacency_[static_cast<std::size_t>(layer)][v]; }

    std::array<std::vector<std::vector<Adjacent>>, kLayerCount> adjacency_;
    std::array<std::size_t, kLayerCount> edge_counts_{};
    std::vector<std::uint8_t> present_;
    std::vector<std::uint8_t> active_;
    std::vector<std::uint8_t> oc_;
    std::size_t present_count_ = 0;
    std::unordered_map<AgentId, std::vector<AgentId>> suppressed_;
    Tick clock_ = kSynthesisTick;
    bool record_history_ = false;
    std::vector<EdgeChange> history_;
};

/// Replays recorded changes to rebuild a layer's edge list as it stood at the end of `tick`.
std::vector<EdgeRecord> edges_at(std::span<const EdgeChange> history, Tick tick, LayerId layer);

struct NeighborMember {
    AgentId id;
    int distance;
    /// Number of selected layers linking this member to a node one hop closer to the ego.
    int multiplicity;
};

struct WeightEntry {
    AgentId id;
    LayerId layer;
    double weight;
};

struct NeighborhoodView {
    AgentId ego = 0;
    int h = 0;
    std::vector<NeighborMember> members;
    /// One entry per layer edge on the frontier; weight is 1 / hop distance.
    std::vector<WeightEntry> weights;

    double total_weight() const;
};

struct EmbeddednessResult {
    AgentId ego = 0;
    double r = 0.0;
    double oc_weight_sum = 0.0;
    double total_weight_sum = 0.0;
};

/// Reusable BFS workspace for repeated neighbourhood queries on one graph.
/// Not thread-safe; use one scanner per thread.
class NeighborhoodScanner {
public:
    explicit NeighborhoodScanner(const MultiplexGraph& graph) : graph_{&graph} {}

    NeighborhoodView neighborhood(AgentId ego, int h, LayerMask layers = LayerMask::all());
    EmbeddednessResult embeddedness(AgentId ego, int h);

private:
    template <typename Visit>
    void scan(AgentId ego, int h, LayerMask layers, Visit&& visit);

    const MultiplexGraph* graph_;
    std::vector<int> dist_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint8_t> via_;
    std::uint32_t epoch_ = 0;
    std::vector<AgentId> order_;
};

/// Members within h multiplex hops of `ego` over the union of `layers`.
NeighborhoodView h_hop_neighborhood(const MultiplexGraph& graph, AgentId ego, int h,
                                    LayerMask layers = LayerMask::all());

/// Share of distance-discounted neighbourhood weight that falls on OC members. 0 for an empty neighbourhood.
EmbeddednessResult oc_embeddedness(const MultiplexGraph& graph, AgentId ego, int h);

/// Sum over layers of 1/d where d is the per-layer shortest path (<= h) between a and b.
double social_proximity(const MultiplexGraph& graph, AgentId a, AgentId b, int h);

/// social_proximity(a, b, h) for every b with non-zero proximity, ordered by id.
std::vector<std::pair<AgentId, double>> proximity_field(const MultiplexGraph& graph, AgentId a, int h);

/// Normalized shortest-path betweenness on the union of `layers` induced by `nodes`.
std::map<AgentId, double> betweenness(const MultiplexGraph& graph, LayerMask layers, std::span<const AgentId> nodes);

} // namespace ocsim
