#pragma once

#include "ocsim/crime.hpp"
#include "ocsim/population.hpp"
#include "ocsim/rng.hpp"
#include "ocsim/society.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace ocsim {

enum class PolicyKind : std::uint8_t { PrimarySocialisation = 0, SecondarySocialisation, LawEnforcement };

inline constexpr std::size_t kPolicyKindCount = 3;

std::string_view to_string(PolicyKind k) noexcept;
/// Accepts primary_socialisation, secondary_socialisation, law_enforcement.
PolicyKind parse_policy_kind(std::string_view s);

enum class PolicyComponent : std::uint8_t {
    /// Hide the OC parent from the child's embeddedness neighbourhood (primary).
    TieWeakening = 0,
    /// Add friendships to non-criminal peers; secondary also drops ties to active offenders.
    ProSocialTies,
    /// Pin high-school completion.
    EducationSupport,
    /// Add random friendships (secondary "social activities").
    SocialActivities,
    /// Move the child to another class of the same level and cohort.
    ClassChange,
    /// Employ the child's mother.
    MotherJob,
    /// Employ the child at 16.
    ChildJob,
    Scrutiny,
    Repression,
};

inline constexpr std::size_t kPolicyComponentCount = 9;

std::string_view to_string(PolicyComponent c) noexcept;
PolicyComponent parse_policy_component(std::string_view s);

/// Components a policy kind may carry.
bool component_allowed(PolicyKind kind, PolicyComponent c) noexcept;

class ComponentSet {
public:
    constexpr ComponentSet() = default;
    constexpr ComponentSet(std::initializer_list<PolicyComponent> cs) {
        for (auto c : cs) insert(c);
    }
    constexpr void insert(PolicyComponent c) noexcept { bits_ |= std::uint16_t(1u << static_cast<unsigned>(c)); }
    constexpr bool contains(PolicyComponent c) const noexcept { return (bits_ >> static_cast<unsigned>(c)) & 1u; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    std::vector<PolicyComponent> list() const;
    constexpr bool operator==(const ComponentSet&) const = default;

private:
    std::uint16_t bits_ = 0;
};

enum class LeTargetMode : std::uint8_t { Bosses, Facilitators };
enum class PrimaryRanking : std::uint8_t { Embeddedness, ParentalConviction };

std::string_view to_string(LeTargetMode m) noexcept;
LeTargetMode parse_le_target_mode(std::string_view s);
std::string_view to_string(PrimaryRanking r) noexcept;
PrimaryRanking parse_primary_ranking(std::string_view s);

struct PolicySpec {
    PolicyKind kind = PolicyKind::LawEnforcement;
    Tick start_tick = 0;
    Tick end_tick = 0;
    double target_share = 0.1;
    ComponentSet components;
    double scrutiny_factor = 0.5;
    double repression_multiplier = 2.0;
    double tie_weakening_factor = 0.5;
    LeTargetMode le_target = LeTargetMode::Bosses;
    PrimaryRanking primary_ranking = PrimaryRanking::Embeddedness;
    /// Friendships added by the pro-social and social-activity components.
    int friends_to_add = 2;
    /// Ties to active offenders removed by the secondary pro-social component.
    int ties_to_remove = 2;

    /// Throws ConfigError with paths under `path` (e.g. "policies[0]").
    void validate(const std::string& path) const;
    bool active_at(Tick t) const noexcept { return t >= start_tick && t < end_tick; }
};

struct InterventionRecord {
    Tick tick;
    std::size_t policy;
    PolicyKind kind;
    AgentId target;
    std::string action;
    std::string detail;
};

/// Number of targets for a share of n candidates: ceil(share * n).
std::size_t target_count(double share, std::size_t n);

/// Agents aged 12-18 with a living OC-member parent, best-ranked first, truncated to the target share.
std::vector<AgentId> select_primary_targets(const Society& society, const PolicySpec& spec, int h);
/// Pupils aged 6-18 ranked by their latest crime probability, truncated to the target share.
std::vector<AgentId> select_secondary_targets(const Society& society, const PolicySpec& spec);
/// OC members by betweenness on CoOffending + OcGroup (bosses) or every facilitator-firm employee.
std::vector<AgentId> select_le_targets(const Society& society, const PolicySpec& spec);

/// Resources the socialisation components need for hiring and peer selection.
struct PolicyContext {
    const PopulationConfig* population = nullptr;
    int h = 2;
    int criminal_window_months = 24;
};

/// Schedules policy specs over a run and keeps their per-agent effects.
class PolicyEngine {
public:
    PolicyEngine() = default;
    explicit PolicyEngine(std::vector<PolicySpec> specs) : specs_{std::move(specs)}, states_(specs_.size()) {}

    const std::vector<PolicySpec>& specs() const noexcept { return specs_; }

    /// Policy phase of one tick: ends expired specs, re-selects targets every 12 ticks
    /// from each start, applies components once per target, and runs scheduled child hires.
    void apply(Society& society, const PolicyContext& ctx, Tick tick, Rng& rng);

    /// Product of the scrutiny factors of the active specs targeting `id` (1 when untargeted).
    double scrutiny(AgentId id) const;
    bool scrutinized(AgentId id) const { return scrutiny_.count(id) > 0; }
    /// Product of the repression multipliers of the active specs targeting `id`.
    double repression(AgentId id) const;

    const std::vector<InterventionRecord>& records() const noexcept { return records_; }
    /// Records per policy kind appended at `tick`.
    std::array<std::size_t, kPolicyKindCount> counts_at(Tick tick) const;

    /// Current targets of spec `i`.
    const std::vector<AgentId>& targets(std::size_t i) const { return states_.at(i).targets; }

    // Component actions, exposed for direct use.
    void weaken_parent_ties(Society& society, std::size_t spec, AgentId child, Tick tick, Rng& rng);
    void add_pro_social_ties(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child, Tick tick,
                             Rng& rng);
    void remove_criminal_ties(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child, Tick tick,
                              Rng& rng);
    void add_random_friends(Society& society, std::size_t spec, AgentId child, Tick tick, Rng& rng);
    void pin_education(Society& society, std::size_t spec, AgentId child, Tick tick);
    void change_class(Society& society, std::size_t spec, AgentId child, Tick tick);
    void employ_mother(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child, Tick tick,
                       Rng& rng);
    void employ_child(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child, Tick tick,
                      Rng& rng);

private:
    struct SpecState {
        std::vector<AgentId> targets;
        std::set<AgentId> treated;
        /// (child, parent) contacts this spec suppressed.
        std::vector<std::pair<AgentId, AgentId>> suppressed;
        std::set<AgentId> pending_child_jobs;
        bool ended = false;
    };

    void record(Tick tick, std::size_t spec, AgentId target, std::string action, std::string detail = {});
    void end_spec(Society& society, std::size_t i, Tick tick);
    void select(const Society& society, const PolicyContext& ctx, std::size_t i, Tick tick);
    void treat(Society& society, const PolicyContext& ctx, std::size_t i, AgentId id, Tick tick, Rng& rng);
    void rebuild_law_enforcement();

    std::vector<PolicySpec> specs_;
    std::vector<SpecState> states_;
    std::map<AgentId, double> scrutiny_;
    std::map<AgentId, double> repression_;
    std::vector<InterventionRecord> records_;
};

/// CSV: tick,policy,kind,target,action,detail.
std::string export_interventions(std::span<const InterventionRecord> records);

} // namespace ocsim
