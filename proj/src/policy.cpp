#include "ocsim/policy.hpp"

#include "ocsim/dynamics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace ocsim {

namespace {

constexpr std::array<std::string_view, kPolicyKindCount> kKindNames{
    "primary_socialisation", "secondary_socialisation", "law_enforcement"};

constexpr std::array<std::string_view, kPolicyComponentCount> kComponentNames{
    "tie_weakening", "pro_social_ties", "education_support", "social_activities", "class_change",
    "mother_job",    "child_job",       "scrutiny",          "repression"};

constexpr int kPrimaryMinAge = 12;
constexpr int kPrimaryMaxAge = 18;
constexpr int kSecondaryMinAge = 6;
constexpr int kSecondaryMaxAge = 18;
constexpr int kChildJobAge = 16;
constexpr int kReselectionTicks = 12;
constexpr int kPeerAgeGap = 3;

std::string join_names(auto const& names) {
    std::string out;
    for (auto n : names) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

bool active_offender(const Agent& a, Tick tick, int window) {
    if (a.oc_member) return true;
    const auto last = a.last_crime_tick();
    return last && *last >= tick - window;
}

std::vector<AgentId> truncate_ranked(std::vector<std::pair<double, AgentId>> ranked, double share) {
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    const auto n = target_count(share, ranked.size());
    std::vector<AgentId> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(ranked[i].second);
    return out;
}

std::vector<AgentId> oc_parents(const Society& society, const Agent& child) {
    std::vector<AgentId> out;
    for (const auto& p : child.parents)
        if (p && society.agent(*p).alive && society.agent(*p).oc_member) out.push_back(*p);
    return out;
}

} // namespace

std::string_view to_string(PolicyKind k) noexcept { return kKindNames[static_cast<std::size_t>(k)]; }

PolicyKind parse_policy_kind(std::string_view s) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s) return static_cast<PolicyKind>(i);
    throw ConfigError("", fmt::format("unknown policy kind '{}' (accepted: {})", s, join_names(kKindNames)));
}

std::string_view to_string(PolicyComponent c) noexcept { return kComponentNames[static_cast<std::size_t>(c)]; }

PolicyComponent parse_policy_component(std::string_view s) {
    for (std::size_t i = 0; i < kComponentNames.size(); ++i)
        if (kComponentNames[i] == s) return static_cast<PolicyComponent>(i);
    throw ConfigError("", fmt::format("unknown policy component '{}' (accepted: {})", s, join_names(kComponentNames)));
}

bool component_allowed(PolicyKind kind, PolicyComponent c) noexcept {
    using C = PolicyComponent;
    switch (kind) {
    case PolicyKind::PrimarySocialisation:
        return c == C::TieWeakening || c == C::ProSocialTies || c == C::EducationSupport || c == C::MotherJob;
    case PolicyKind::SecondarySocialisation:
        return c == C::EducationSupport || c == C::ProSocialTies || c == C::SocialActivities || c == C::ClassChange ||
               c == C::MotherJob || c == C::ChildJob;
    case PolicyKind::LawEnforcement:
        return c == C::Scrutiny || c == C::Repression;
    }
    return false;
}

std::vector<PolicyComponent> ComponentSet::list() const {
    std::vector<PolicyComponent> out;
    for (std::size_t i = 0; i < kPolicyComponentCount; ++i)
        if (contains(static_cast<PolicyComponent>(i))) out.push_back(static_cast<PolicyComponent>(i));
    return out;
}

std::string_view to_string(LeTargetMode m) noexcept { return m == LeTargetMode::Bosses ? "bosses" : "facilitators"; }

LeTargetMode parse_le_target_mode(std::string_view s) {
    if (s == "bosses") return LeTargetMode::Bosses;
    if (s == "facilitators") return LeTargetMode::Facilitators;
    throw ConfigError("", fmt::format("unknown law-enforcement target '{}' (accepted: bosses, facilitators)", s));
}

std::string_view to_string(PrimaryRanking r) noexcept {
    return r == PrimaryRanking::Embeddedness ? "embeddedness" : "parental_conviction";
}

PrimaryRanking parse_primary_ranking(std::string_view s) {
    if (s == "embeddedness") return PrimaryRanking::Embeddedness;
    if (s == "parental_conviction") return PrimaryRanking::ParentalConviction;
    throw ConfigError("", fmt::format("unknown ranking '{}' (accepted: embeddedness, parental_conviction)", s));
}

void PolicySpec::validate(const std::string& path) const {
    if (start_tick < 0) throw ConfigError(path + ".start_tick", "must be non-negative");
    if (!(start_tick < end_tick)) throw ConfigError(path + ".end_tick", "must be greater than start_tick");
    if (!(target_share >= 0.0 && target_share <= 1.0)) throw ConfigError(path + ".target_share", "must be in [0, 1]");
    if (components.empty()) throw ConfigError(path + ".components", "at least one component is required");
    for (auto c : components.list())
        if (!component_allowed(kind, c))
            throw ConfigError(path + ".components",
                              fmt::format("component '{}' does not apply to {}", to_string(c), to_string(kind)));
    if (!(scrutiny_factor >= 0.0 && scrutiny_factor <= 1.0))
        throw ConfigError(path + ".scrutiny_factor", "must be in [0, 1]");
    if (!(repression_multiplier >= 1.0)) throw ConfigError(path + ".repression_multiplier", "must be at least 1");
    if (!(tie_weakening_factor >= 0.0 && tie_weakening_factor <= 1.0))
        throw ConfigError(path + ".tie_weakening_factor", "must be in [0, 1]");
    if (friends_to_add < 0) throw ConfigError(path + ".friends_to_add", "must be non-negative");
    if (ties_to_remove < 0) throw ConfigError(path + ".ties_to_remove", "must be non-negative");
}

std::size_t target_count(double share, std::size_t n) {
    const double x = std::ceil(share * static_cast<double>(n) - 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, x)));
}

std::vector<AgentId> select_primary_targets(const Society& society, const PolicySpec& spec, int h) {
    NeighborhoodScanner scanner{society.graph};
    std::vector<std::pair<double, AgentId>> ranked;
    for (const auto& a : society.agents) {
        if (!a.free() || a.age_years() < kPrimaryMinAge || a.age_years() > kPrimaryMaxAge) continue;
        const auto parents = oc_parents(society, a);
        if (parents.empty()) continue;
        double score = scanner.embeddedness(a.id, h).r;
        if (spec.primary_ranking == PrimaryRanking::ParentalConviction) {
            const bool convicted = std::any_of(parents.begin(), parents.end(), [&](AgentId p) {
                return !society.agent(p).crime_history.empty();
            });
            score += convicted ? 2.0 : 0.0;
        }
        ranked.emplace_back(score, a.id);
    }
    return truncate_ranked(std::move(ranked), spec.target_share);
}

std::vector<AgentId> select_secondary_targets(const Society& society, const PolicySpec& spec) {
    std::vector<std::pair<double, AgentId>> ranked;
    for (const auto& a : society.agents) {
        if (!a.free() || !a.school_class) continue;
        if (a.age_years() < kSecondaryMinAge || a.age_years() > kSecondaryMaxAge) continue;
        ranked.emplace_back(a.p_annual, a.id);
    }
    return truncate_ranked(std::move(ranked), spec.target_share);
}

std::vector<AgentId> select_le_targets(const Society& society, const PolicySpec& spec) {
    if (spec.le_target == LeTargetMode::Facilitators) {
        std::vector<AgentId> out;
        for (const auto& a : society.agents)
            if (a.alive && a.employer && society.employers.at(*a.employer).facilitator) out.push_back(a.id);
        return out;
    }
    std::vector<AgentId> members;
    for (const auto& a : society.agents)
        if (a.alive && a.oc_member) members.push_back(a.id);
    const auto bc = betweenness(society.graph, {LayerId::CoOffending, LayerId::OcGroup}, members);
    std::vector<std::pair<double, AgentId>> ranked;
    for (const auto& [id, b] : bc) ranked.emplace_back(b, id);
    return truncate_ranked(std::move(ranked), spec.target_share);
}

double PolicyEngine::scrutiny(AgentId id) const {
    auto it = scrutiny_.find(id);
    return it == scrutiny_.end() ? 1.0 : it->second;
}

double PolicyEngine::repression(AgentId id) const {
    auto it = repression_.find(id);
    return it == repression_.end() ? 1.0 : it->second;
}

std::array<std::size_t, kPolicyKindCount> PolicyEngine::counts_at(Tick tick) const {
    std::array<std::size_t, kPolicyKindCount> out{};
    for (auto it = records_.rbegin(); it != records_.rend() && it->tick == tick; ++it)
        ++out[static_cast<std::size_t>(it->kind)];
    return out;
}

void PolicyEngine::record(Tick tick, std::size_t spec, AgentId target, std::string action, std::string detail) {
    records_.push_back({tick, spec, specs_[spec].kind, target, std::move(action), std::move(detail)});
}

void PolicyEngine::rebuild_law_enforcement() {
    scrutiny_.clear();
    repression_.clear();
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& spec = specs_[i];
        if (spec.kind != PolicyKind::LawEnforcement || states_[i].ended) continue;
        for (AgentId id : states_[i].targets) {
            if (spec.components.contains(PolicyComponent::Scrutiny)) {
                auto [it, fresh] = scrutiny_.try_emplace(id, 1.0);
                it->second *= spec.scrutiny_factor;
            }
            if (spec.components.contains(PolicyComponent::Repression)) {
                auto [it, fresh] = repression_.try_emplace(id, 1.0);
                it->second *= spec.repression_multiplier;
            }
        }
    }
}

void PolicyEngine::end_spec(Society& society, std::size_t i, Tick tick) {
    auto& st = states_[i];
    st.ended = true;
    st.targets.clear();
    st.pending_child_jobs.clear();
    auto lifted = std::move(st.suppressed);
    st.suppressed.clear();
    std::set<AgentId> egos;
    for (const auto& [child, parent] : lifted) {
        egos.insert(child);
        record(tick, i, child, "tie_restored", std::to_string(parent));
    }
    // Re-apply suppressions other specs still hold on the same children.
    for (AgentId ego : egos) {
        if (!society.graph.contains(ego)) continue;
        society.graph.clear_suppressions(ego);
        for (const auto& other : states_)
            for (const auto& [c, p] : other.suppressed)
                if (c == ego) society.graph.suppress_contact(c, p);
    }
}

void PolicyEngine::select(const Society& society, const PolicyContext& ctx, std::size_t i, Tick tick) {
    const auto& spec = specs_[i];
    auto& st = states_[i];
    switch (spec.kind) {
    case PolicyKind::PrimarySocialisation: st.targets = select_primary_targets(society, spec, ctx.h); break;
    case PolicyKind::SecondarySocialisation: st.targets = select_secondary_targets(society, spec); break;
    case PolicyKind::LawEnforcement: st.targets = select_le_targets(society, spec); break;
    }
    for (AgentId id : st.targets) {
        if (spec.kind != PolicyKind::LawEnforcement) continue;
        for (auto c : spec.components.list()) {
            const double v = c == PolicyComponent::Scrutiny ? spec.scrutiny_factor : spec.repression_multiplier;
            record(tick, i, id, std::string{to_string(c)}, fmt::format("{}", v));
        }
    }
}

void PolicyEngine::treat(Society& society, const PolicyContext& ctx, std::size_t i, AgentId id, Tick tick, Rng& rng) {
    const auto& spec = specs_[i];
    auto& st = states_[i];
    if (spec.kind == PolicyKind::LawEnforcement || !st.treated.insert(id).second) return;
    using C = PolicyComponent;
    for (auto c : spec.components.list()) {
        switch (c) {
        case C::TieWeakening: weaken_parent_ties(society, i, id, tick, rng); break;
        case C::ProSocialTies:
            add_pro_social_ties(society, ctx, i, id, tick, rng);
            if (spec.kind == PolicyKind::SecondarySocialisation) remove_criminal_ties(society, ctx, i, id, tick, rng);
            break;
        case C::EducationSupport: pin_education(society, i, id, tick); break;
        case C::SocialActivities: add_random_friends(society, i, id, tick, rng); break;
        case C::ClassChange: change_class(society, i, id, tick); break;
        case C::MotherJob: employ_mother(society, ctx, i, id, tick, rng); break;
        case C::ChildJob:
            if (society.agent(id).age_years() >= kChildJobAge) {
                employ_child(society, ctx, i, id, tick, rng);
            } else {
                st.pending_child_jobs.insert(id);
                record(tick, i, id, "child_job_scheduled");
            }
            break;
        case C::Scrutiny:
        case C::Repression: break;
        }
    }
}

void PolicyEngine::apply(Society& society, const PolicyContext& ctx, Tick tick, Rng& rng) {
    bool le_changed = false;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& spec = specs_[i];
        auto& st = states_[i];
        if (st.ended) continue;
        if (tick >= spec.end_tick) {
            end_spec(society, i, tick);
            le_changed |= spec.kind == PolicyKind::LawEnforcement;
            continue;
        }
        if (!spec.active_at(tick)) continue;

        if ((tick - spec.start_tick) % kReselectionTicks == 0) {
            select(society, ctx, i, tick);
            le_changed |= spec.kind == PolicyKind::LawEnforcement;
            for (AgentId id : st.targets)
                if (society.agent(id).free()) treat(society, ctx, i, id, tick, rng);
        }

        std::vector<AgentId> due;
        for (AgentId id : st.pending_child_jobs) {
            const auto& a = society.agent(id);
            if (!a.alive) due.push_back(id);
            else if (a.age_months >= kChildJobAge * kMonthsPerYear && a.free()) due.push_back(id);
        }
        for (AgentId id : due) {
            st.pending_child_jobs.erase(id);
            if (society.agent(id).alive) employ_child(society, ctx, i, id, tick, rng);
        }
    }
    if (le_changed) rebuild_law_enforcement();
}

void PolicyEngine::weaken_parent_ties(Society& society, std::size_t spec, AgentId child, Tick tick, Rng& rng) {
    for (AgentId parent : oc_parents(society, society.agent(child))) {
        if (!rng.bernoulli(specs_[spec].tie_weakening_factor)) continue;
        society.graph.suppress_contact(child, parent);
        states_[spec].suppressed.emplace_back(child, parent);
        record(tick, spec, child, "tie_weakened", std::to_string(parent));
    }
}

void PolicyEngine::add_pro_social_ties(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child,
                                       Tick tick, Rng& rng) {
    const auto& a = society.agent(child);
    std::vector<AgentId> peers;
    for (const auto& b : society.agents) {
        if (b.id == child || !b.free() || b.oc_member || !b.crime_history.empty()) continue;
        if (std::abs(b.age_years() - a.age_years()) > kPeerAgeGap) continue;
        if (society.graph.has_edge(LayerId::Friendship, child, b.id)) continue;
        peers.push_back(b.id);
    }
    (void)ctx;
    rng.shuffle(peers);
    const auto k = std::min<std::size_t>(peers.size(), static_cast<std::size_t>(specs_[spec].friends_to_add));
    for (std::size_t i = 0; i < k; ++i) {
        society.graph.add_edge(LayerId::Friendship, child, peers[i], tick);
        record(tick, spec, child, "friend_added", std::to_string(peers[i]));
    }
}

void PolicyEngine::remove_criminal_ties(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child,
                                        Tick tick, Rng& rng) {
    std::vector<AgentId> criminal;
    for (AgentId f : society.graph.neighbors(LayerId::Friendship, child))
        if (active_offender(society.agent(f), tick, ctx.criminal_window_months)) criminal.push_back(f);
    rng.shuffle(criminal);
    const auto k = std::min<std::size_t>(criminal.size(), static_cast<std::size_t>(specs_[spec].ties_to_remove));
    for (std::size_t i = 0; i < k; ++i) {
        society.graph.remove_edge(LayerId::Friendship, child, criminal[i]);
        record(tick, spec, child, "tie_removed", std::to_string(criminal[i]));
    }
}

void PolicyEngine::add_random_friends(Society& society, std::size_t spec, AgentId child, Tick tick, Rng& rng) {
    const auto n = society.agents.size();
    int added = 0;
    for (int attempt = 0; attempt < 100 * std::max(1, specs_[spec].friends_to_add) && added < specs_[spec].friends_to_add;
         ++attempt) {
        const auto other = static_cast<AgentId>(rng.index(n));
        const auto& b = society.agent(other);
        if (other == child || !b.free() || society.graph.has_edge(LayerId::Friendship, child, other)) continue;
        society.graph.add_edge(LayerId::Friendship, child, other, tick);
        record(tick, spec, child, "friend_added", std::to_string(other));
        ++added;
    }
}

void PolicyEngine::pin_education(Society& society, std::size_t spec, AgentId child, Tick tick) {
    society.agent(child).education_pinned = true;
    record(tick, spec, child, "education_pinned");
}

void PolicyEngine::change_class(Society& society, std::size_t spec, AgentId child, Tick tick) {
    auto& a = society.agent(child);
    if (!a.school_class) {
        record(tick, spec, child, "class_change_skipped", "not in school");
        return;
    }
    const ClassId from = *a.school_class;
    const auto& cls = society.classes.at(from);
    const ClassId to = society.class_with_room(cls.level, cls.cohort, from);
    society.leave_class(child);
    society.join_class(child, to, tick);
    record(tick, spec, child, "class_changed", fmt::format("{}->{}", from, to));
}

void PolicyEngine::employ_mother(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child,
                                 Tick tick, Rng& rng) {
    std::optional<AgentId> mother;
    for (const auto& p : society.agent(child).parents)
        if (p && society.agent(*p).alive && society.agent(*p).gender == Gender::Female) mother = *p;
    if (!mother) {
        record(tick, spec, child, "mother_job_skipped", "no living mother");
        return;
    }
    const auto& m = society.agent(*mother);
    if (m.employed || !m.free()) {
        record(tick, spec, child, "mother_job_skipped", m.employed ? "already employed" : "incarcerated");
        return;
    }
    const auto firm = hire(society, *mother, ctx.population->table(tables::kEmployerSize),
                           ctx.population->facilitator_share, tick, rng);
    record(tick, spec, child, "mother_employed", fmt::format("{}@{}", *mother, firm));
}

void PolicyEngine::employ_child(Society& society, const PolicyContext& ctx, std::size_t spec, AgentId child, Tick tick,
                                Rng& rng) {
    const auto& a = society.agent(child);
    if (a.employed || !a.free()) {
        record(tick, spec, child, "child_job_skipped", a.employed ? "already employed" : "incarcerated");
        return;
    }
    society.leave_class(child);
    const auto firm = hire(society, child, ctx.population->table(tables::kEmployerSize),
                           ctx.population->facilitator_share, tick, rng);
    record(tick, spec, child, "child_employed", std::to_string(firm));
}

std::string export_interventions(std::span<const InterventionRecord> records) {
    std::string out = "tick,policy,kind,target,action,detail\n";
    for (const auto& r : records)
        out += fmt::format("{},{},{},{},{},{}\n", r.tick, r.policy, to_string(r.kind), r.target, r.action, r.detail);
    return out;
}

} // namespace ocsim
