#include "ocsim/crime.hpp"

#include "ocsim/dynamics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ocsim {

namespace {

constexpr std::array<double, kAgeClassCount> kFemaleP{0.0004, 0.0223, 0.0511, 0.0634, 0.0643, 0.0489, 0.0308, 0.0111};
constexpr std::array<double, kAgeClassCount> kFemaleOr{0.0004, 0.0229, 0.0538, 0.0677, 0.0687, 0.0514, 0.0318, 0.0112};
constexpr std::array<double, kAgeClassCount> kMaleP{0.0022, 0.1502, 0.3019, 0.3036, 0.2751, 0.1996, 0.1268, 0.0537};
constexpr std::array<double, kAgeClassCount> kMaleOr{0.0022, 0.1767, 0.4324, 0.4359, 0.3795, 0.2494, 0.1453, 0.0567};

constexpr std::array<std::string_view, kRiskFactorCount> kFactorNames{
    "unemployment", "education", "natural_propensity", "criminal_history",
    "criminal_family", "criminal_friends", "oc_membership",
};

bool recent_offender(const Agent& a, Tick tick, int window) {
    const auto last = a.last_crime_tick();
    return last && *last >= tick - window;
}

// Share of `ids` with a crime in the look-back window is at least one half.
bool criminal_majority(const Society& society, std::span<const AgentId> ids, Tick tick, int window) {
    if (ids.empty()) return false;
    std::size_t criminal = 0;
    for (AgentId id : ids)
        if (recent_offender(society.agent(id), tick, window)) ++criminal;
    return 2 * criminal >= ids.size();
}

} // namespace

BaselineTable BaselineTable::palermo() {
    std::array<BaselineRow, kClassCount> rows{};
    for (std::size_t a = 0; a < kAgeClassCount; ++a) {
        const auto ac = static_cast<AgeClass>(a);
        rows[class_index(Gender::Female, ac)] = {Gender::Female, ac, kFemaleP[a], kFemaleOr[a]};
        rows[class_index(Gender::Male, ac)] = {Gender::Male, ac, kMaleP[a], kMaleOr[a]};
    }
    return BaselineTable{rows};
}

double BaselineTable::max_odds_deviation() const {
    double worst = 0.0;
    for (const auto& r : rows_) worst = std::max(worst, std::abs(r.odds_ratio - r.probability / (1.0 - r.probability)));
    return worst;
}

void BaselineTable::validate() const {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        const auto path = fmt::format("crime.baseline[{}]", class_label(i));
        if (!(r.probability > 0.0 && r.probability < 1.0)) throw ConfigError(path, "probability must lie in (0, 1)");
        if (std::abs(r.odds_ratio - r.probability / (1.0 - r.probability)) > 5e-4)
            throw ConfigError(path, fmt::format("odds ratio {} inconsistent with probability {}", r.odds_ratio,
                                                r.probability));
    }
}

double baseline_probability(const BaselineTable& table, Gender g, AgeClass a) { return table.probability(g, a); }

std::string_view to_string(RiskFactor f) noexcept { return kFactorNames[static_cast<std::size_t>(f)]; }

RiskFactor parse_risk_factor(std::string_view s) {
    for (std::size_t i = 0; i < kFactorNames.size(); ++i)
        if (kFactorNames[i] == s) return static_cast<RiskFactor>(i);
    throw ConfigError("", fmt::format("unknown risk factor '{}'", s));
}

RiskFactorSet RiskFactorSet::standard() {
    return RiskFactorSet{{{
        {RiskFactor::Unemployment, 1.30, "in the labour force without a job"},
        {RiskFactor::Education, 0.94, "holds a high-school diploma"},
        {RiskFactor::NaturalPropensity, 1.97, "propensity above the threshold x"},
        {RiskFactor::CriminalHistory, 1.62, "committed at least one crime"},
        {RiskFactor::CriminalFamily, 1.45, "at least half of household ties offended in the window"},
        {RiskFactor::CriminalFriends, 1.81, "at least half of friendship and work ties offended in the window"},
        {RiskFactor::OcMembership, 4.5, "member of the OC group"},
    }}};
}

void RiskFactorSet::validate() const {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (specs_[i].factor != static_cast<RiskFactor>(i))
            throw ConfigError("crime.risk_factors", "factors must be listed in canonical order");
        if (!(specs_[i].odds_ratio > 0.0))
            throw ConfigError(fmt::format("crime.risk_factors.{}", kFactorNames[i]), "odds ratio must be positive");
    }
}

void CrimeParams::validate() const {
    baseline.validate();
    risk_factors.validate();
    validate_co_offending_distribution(co_offending_size);
    punishment.validate();
    if (punishment.kind != DistributionKind::ScalarRate)
        throw ConfigError("crime.punishment", "must be a scalar-rate table");
    sentence_months.validate();
    if (sentence_months.kind != DistributionKind::Categorical)
        throw ConfigError("crime.sentence_months", "must be a categorical table");
    for (const auto& b : sentence_months.bins)
        if (b.lower < 1) throw ConfigError("crime.sentence_months", "sentences must be at least one month");
    if (!(facilitator_multiplier > 0.0)) throw ConfigError("crime.facilitator_multiplier", "must be positive");
    if (minimum_age_years < 0) throw ConfigError("crime.minimum_age_years", "must be non-negative");
    if (criminal_window_months < 1) throw ConfigError("crime.criminal_window_months", "must be at least 1");
    if (!(calibration_band >= 0.0)) throw ConfigError("crime.calibration_band", "must be non-negative");
    if (h < 1 || h > 3) throw ConfigError("h", "must be in [1, 3]");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho", "must be in [0, 1]");
    if (ticks_per_year < 1) throw ConfigError("ticks_per_year", "must be positive");
}

FactorMask active_risk_factors(const Society& society, const Agent& agent, Tick tick, const CrimeParams& params) {
    FactorMask m;
    if (society.in_labor_force(agent) && !agent.employed) m.set(RiskFactor::Unemployment);
    if (agent.education >= Education::HighSchool) m.set(RiskFactor::Education);
    if (agent.propensity > params.propensity_threshold) m.set(RiskFactor::NaturalPropensity);
    if (!agent.crime_history.empty()) m.set(RiskFactor::CriminalHistory);
    if (agent.oc_member) m.set(RiskFactor::OcMembership);

    const auto& g = society.graph;
    if (!g.contains(agent.id)) return m;
    const int window = params.criminal_window_months;

    std::vector<AgentId> ids;
    for (const auto& e : g.adjacency(LayerId::Household, agent.id)) ids.push_back(e.id);
    if (criminal_majority(society, ids, tick, window)) m.set(RiskFactor::CriminalFamily);

    ids.clear();
    const auto fr = g.adjacency(LayerId::Friendship, agent.id);
    const auto ws = g.adjacency(LayerId::WorkSchool, agent.id);
    std::size_t i = 0, j = 0;
    while (i < fr.size() || j < ws.size()) {
        if (j == ws.size() || (i < fr.size() && fr[i].id < ws[j].id)) {
            ids.push_back(fr[i++].id);
        } else if (i == fr.size() || ws[j].id < fr[i].id) {
            ids.push_back(ws[j++].id);
        } else {
            ids.push_back(fr[i].id);
            ++i;
            ++j;
        }
    }
    if (criminal_majority(society, ids, tick, window)) m.set(RiskFactor::CriminalFriends);
    return m;
}

double raw_annual_probability(double baseline, FactorMask active, const RiskFactorSet& factors) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kRiskFactorCount; ++i) {
        const auto f = static_cast<RiskFactor>(i);
        if (active.test(f)) sum += factors.odds_ratio(f) - 1.0;
    }
    return std::max(0.0, baseline * (1.0 + sum));
}

CrimeProbability crime_probability(const Agent& agent, FactorMask active, const CrimeParams& params, bool facilitator,
                                   double scrutiny) {
    double p = raw_annual_probability(params.baseline.probability(agent.class_idx()), active, params.risk_factors);
    if (facilitator) p *= params.facilitator_multiplier;
    p *= scrutiny;
    return {p, per_tick_probability(std::min(p, 1.0), params.ticks_per_year)};
}

ClassCalibration calibrate_class(std::span<double> values, double baseline, double band) {
    ClassCalibration c;
    c.count = values.size();
    if (values.empty()) return c;
    c.skipped = false;

    const double n = static_cast<double>(values.size());
    c.raw_mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    auto clamped_mean = [&](double f) {
        double s = 0.0;
        for (double v : values) s += std::clamp(f * v, 0.0, 1.0);
        return s / n;
    };

    double factor = 1.0;
    const double m1 = clamped_mean(1.0);
    if (std::abs(m1 - baseline) > band && c.raw_mean > 0.0) {
        factor = baseline / c.raw_mean;
        const double vmax = *std::max_element(values.begin(), values.end());
        if (factor * vmax > 1.0) {
            // Clamping binds: the clamped mean is increasing in f, so bisect.
            double lo = factor;
            double hi = factor;
            while (clamped_mean(hi) < baseline && hi * vmax < 1e12) hi *= 2.0;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (clamped_mean(mid) < baseline ? lo : hi) = mid;
            }
            factor = hi;
        }
    }
    for (double& v : values) v = std::clamp(factor * v, 0.0, 1.0);
    c.factor = factor;
    c.post_mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    return c;
}

CalibrationState recalibrate_classes(Society& society, std::span<const AgentId> eligible, const CrimeParams& params,
                                     Tick tick) {
    std::array<std::vector<AgentId>, kClassCount> members;
    for (AgentId id : eligible) members[society.agent(id).class_idx()].push_back(id);

    CalibrationState state;
    state.tick = tick;
    std::vector<double> values;
    for (std::size_t k = 0; k < kClassCount; ++k) {
        values.clear();
        for (AgentId id : members[k]) values.push_back(society.agent(id).p_precalibration);
        state.classes[k] = calibrate_class(values, params.baseline.probability(k), params.calibration_band);
        for (std::size_t i = 0; i < members[k].size(); ++i) {
            auto& a = society.agent(members[k][i]);
            a.p_annual = values[i];
            a.p_tick = per_tick_probability(values[i], params.ticks_per_year);
        }
    }
    return state;
}

std::vector<AgentId> draw_offenders(const Society& society, std::span<const AgentId> eligible, Rng& rng) {
    std::vector<AgentId> out;
    for (AgentId id : eligible)
        if (rng.bernoulli(society.agent(id).p_tick)) out.push_back(id);
    return out;
}

void validate_co_offending_distribution(const DistributionTable& table) {
    table.validate();
    const auto path = fmt::format("crime.{}", table.name.empty() ? "co_offending_size" : table.name);
    if (table.kind != DistributionKind::Categorical) throw ConfigError(path, "must be a categorical table");
    for (const auto& b : table.bins)
        if (b.lower < 1) throw ConfigError(path, "party sizes must be at least 1");
    if (table.mode_lower() != 1.0) throw ConfigError(path, "mode of the party-size distribution must be 1");
}

int sample_group_size(const DistributionTable& co_offending, Rng& rng) {
    return static_cast<int>(std::max<std::int64_t>(1, co_offending.sample_integer(rng)));
}

std::vector<AgentId> match_co_offenders(const Society& society, AgentId initiator, int size,
                                        const MatchOptions& options) {
    std::vector<AgentId> out{initiator};
    if (size < 2) return out;
    const auto needed = static_cast<std::size_t>(size - 1);
    const bool oc_initiator = society.agent(initiator).oc_member;

    struct Scored {
        AgentId id;
        double score;
    };
    auto better = [](const Scored& a, const Scored& b) { return a.score > b.score || (a.score == b.score && a.id < b.id); };

    std::vector<Scored> cands;
    for (const auto& [id, prox] : proximity_field(society.graph, initiator, options.h)) {
        if (id == initiator || !options.available(id)) continue;
        if (oc_initiator && options.hidden_from_oc(id)) continue;
        const double s = prox * society.agent(id).p_annual;
        if (s > 0.0) cands.push_back({id, s});
    }
    std::sort(cands.begin(), cands.end(), better);

    if (!oc_initiator) {
        if (cands.size() > needed) cands.resize(needed);
        for (const auto& c : cands) out.push_back(c.id);
        return out;
    }

    // (1 + R) <= 2, so once twice a base score falls below the current k-th final
    // score no later candidate can enter the top list.
    NeighborhoodScanner scanner{society.graph};
    std::vector<Scored> top;
    for (const auto& c : cands) {
        if (top.size() == needed && 2.0 * c.score < top.back().score) break;
        const double r = scanner.embeddedness(c.id, options.h).r;
        Scored s{c.id, c.score * (1.0 + r)};
        top.insert(std::upper_bound(top.begin(), top.end(), s, better), s);
        if (top.size() > needed) top.pop_back();
    }
    for (const auto& c : top) out.push_back(c.id);
    return out;
}

CrimeEvent make_event(const Society& society, EventId id, Tick tick, std::vector<AgentId> participants) {
    CrimeEvent e;
    e.id = id;
    e.tick = tick;
    e.participants = std::move(participants);
    e.oc_involved = std::any_of(e.participants.begin(), e.participants.end(),
                                [&](AgentId p) { return society.agent(p).oc_member; });
    e.sanctioned.assign(e.participants.size(), false);
    e.sentence_months.assign(e.participants.size(), 0);
    return e;
}

void record_co_offending(const CrimeEvent& event, Society& society) {
    const auto& ps = event.participants;
    for (AgentId p : ps) society.agent(p).crime_history.push_back({event.tick, event.id});
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t j = i + 1; j < ps.size(); ++j) society.graph.add_edge(LayerId::CoOffending, ps[i], ps[j], event.tick);
}

std::vector<AgentId> apply_recruitment(const CrimeEvent& event, Society& society) {
    std::vector<AgentId> recruits;
    if (!event.oc_involved) return recruits;
    std::vector<AgentId> members;
    for (AgentId p : event.participants) (society.agent(p).oc_member ? members : recruits).push_back(p);
    for (AgentId r : recruits) {
        society.set_oc_member(r, true);
        for (AgentId m : members) society.graph.add_edge(LayerId::OcGroup, r, m, event.tick);
    }
    return recruits;
}

void sanction(CrimeEvent& event, const Society& society, const DistributionTable& punishment,
              const DistributionTable& sentence_months, const std::function<double(AgentId)>& repression, Rng& rng) {
    event.sanctioned.assign(event.participants.size(), false);
    event.sentence_months.assign(event.participants.size(), 0);
    for (std::size_t i = 0; i < event.participants.size(); ++i) {
        const AgentId id = event.participants[i];
        const double base = punishment.rate("*", society.agent(id).age_years());
        const double p = std::min(1.0, base * (repression ? repression(id) : 1.0));
        if (!rng.bernoulli(p)) continue;
        event.sanctioned[i] = true;
        event.sentence_months[i] = static_cast<int>(std::max<std::int64_t>(1, sentence_months.sample_integer(rng)));
    }
}

void incarcerate(Society& society, AgentId id, int months, Tick tick) {
    auto& a = society.agent(id);
    if (!a.free()) throw StructuralError(fmt::format("agent {} is not free", id));
    IncarcerationState st;
    st.start_tick = tick;
    st.remaining_months = std::max(1, months);
    auto& g = society.graph;
    // Snapshot before leaving job and class so the work and school ties are kept too.
    for (LayerId layer : {LayerId::Friendship, LayerId::WorkSchool, LayerId::CoOffending, LayerId::OcGroup}) {
        const auto adj = g.adjacency(layer, id);
        std::vector<Adjacent> copy(adj.begin(), adj.end());
        for (const auto& e : copy) {
            st.suspended_ties.push_back({layer, e.id, e.created});
            g.remove_edge(layer, id, e.id);
        }
    }
    society.unemploy(id);
    society.leave_class(id);
    a.incarceration = std::move(st);
    g.set_active(id, false);
}

void release(Society& society, AgentId id, double rho, Rng& rng) {
    auto& a = society.agent(id);
    if (!a.incarceration) return;
    auto ties = std::move(a.incarceration->suspended_ties);
    a.incarceration.reset();
    auto& g = society.graph;
    g.set_active(id, true);

    std::vector<SuspendedTie> restore;
    std::vector<SuspendedTie> pool;
    for (const auto& t : ties) (a.oc_member && t.layer == LayerId::OcGroup ? restore : pool).push_back(t);
    const auto k = static_cast<std::size_t>(std::lround(rho * static_cast<double>(pool.size())));
    rng.shuffle(pool);
    restore.insert(restore.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(k, pool.size())));

    for (const auto& t : restore) {
        if (!g.contains(t.other)) continue;
        auto& other = society.agent(t.other);
        if (other.incarceration) {
            auto& theirs = other.incarceration->suspended_ties;
            const SuspendedTie mirror{t.layer, id, t.created};
            if (std::find(theirs.begin(), theirs.end(), mirror) == theirs.end()) theirs.push_back(mirror);
        } else {
            g.add_edge(t.layer, id, t.other, t.created);
        }
    }
}

std::vector<AgentId> advance_incarceration(Society& society, double rho, Rng& rng) {
    std::vector<AgentId> released;
    for (auto& a : society.agents) {
        if (!a.alive || !a.incarceration) continue;
        if (--a.incarceration->remaining_months <= 0) released.push_back(a.id);
    }
    for (AgentId id : released) release(society, id, rho, rng);
    return released;
}

std::string export_crime_log(std::span<const CrimeEvent> events) {
    std::string out = "event_id,tick,participants,oc_involved,sanctioned,sentence_months\n";
    for (const auto& e : events) {
        std::string sanctioned;
        std::string sentences;
        for (std::size_t i = 0; i < e.participants.size(); ++i) {
            if (i) {
                sanctioned += ';';
                sentences += ';';
            }
            sanctioned += e.sanctioned[i] ? '1' : '0';
            sentences += std::to_string(e.sentence_months[i]);
        }
        out += fmt::format("{},{},{},{},{},{}\n", e.id, e.tick, fmt::join(e.participants, ";"), e.oc_involved ? 1 : 0,
                           sanctioned, sentences);
    }
    return out;
}

} // namespace ocsim
