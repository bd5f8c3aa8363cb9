#pragma once

#include "ocsim/distribution.hpp"
#include "ocsim/rng.hpp"
#include "ocsim/society.hpp"

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ocsim {

struct BaselineRow {
    Gender gender;
    AgeClass age_class;
    /// Annual offending probability of the (gender, age class) cell.
    double probability;
    double odds_ratio;
};

/// Offending probability by gender and age class; rows indexed by class_index().
class BaselineTable {
public:
    /// Gender and age-class probabilities for Palermo (2012-2016, corrected for dark figure).
    static BaselineTable palermo();

    explicit BaselineTable(std::array<BaselineRow, kClassCount> rows) : rows_{rows} {}

    double probability(Gender g, AgeClass a) const noexcept { return rows_[class_index(g, a)].probability; }
    double probability(std::size_t class_idx) const noexcept { return rows_[class_idx].probability; }
    const std::array<BaselineRow, kClassCount>& rows() const noexcept { return rows_; }

    /// Largest |OR - p / (1 - p)| over the rows.
    double max_odds_deviation() const;
    /// Throws ConfigError if a probability is outside (0,1) or a row's OR deviates by more than 5e-4.
    void validate() const;

private:
    std::array<BaselineRow, kClassCount> rows_;
};

double baseline_probability(const BaselineTable& table, Gender g, AgeClass a);

enum class RiskFactor : std::uint8_t {
    Unemployment = 0,
    Education,
    NaturalPropensity,
    CriminalHistory,
    CriminalFamily,
    CriminalFriends,
    OcMembership,
};

inline constexpr std::size_t kRiskFactorCount = 7;

std::string_view to_string(RiskFactor f) noexcept;
RiskFactor parse_risk_factor(std::string_view s);

struct RiskFactorSpec {
    RiskFactor factor;
    double odds_ratio;
    std::string definition;
};

class RiskFactorSet {
public:
    /// Odds ratios of the seven individual-level factors.
    static RiskFactorSet standard();

    explicit RiskFactorSet(std::array<RiskFactorSpec, kRiskFactorCount> specs) : specs_{std::move(specs)} {}

    double odds_ratio(RiskFactor f) const noexcept { return specs_[static_cast<std::size_t>(f)].odds_ratio; }
    const std::array<RiskFactorSpec, kRiskFactorCount>& specs() const noexcept { return specs_; }
    void validate() const;

private:
    std::array<RiskFactorSpec, kRiskFactorCount> specs_;
};

/// Subset of the seven risk factors.
class FactorMask {
public:
    constexpr FactorMask() = default;
    constexpr FactorMask(std::initializer_list<RiskFactor> fs) {
        for (auto f : fs) set(f);
    }
    constexpr void set(RiskFactor f) noexcept { bits_ |= std::uint8_t(1u << static_cast<unsigned>(f)); }
    constexpr bool test(RiskFactor f) const noexcept { return (bits_ >> static_cast<unsigned>(f)) & 1u; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr bool operator==(const FactorMask&) const = default;

private:
    std::uint8_t bits_ = 0;
};

struct CrimeParams {
    BaselineTable baseline = BaselineTable::palermo();
    RiskFactorSet risk_factors = RiskFactorSet::standard();
    /// Categorical over party sizes; the mode must be 1.
    DistributionTable co_offending_size;
    /// Scalar-rate, label "*": per-participant sanction probability by age.
    DistributionTable punishment;
    /// Categorical over sentence lengths in months.
    DistributionTable sentence_months;
    /// Propensity above which Natural Propensity is active.
    double propensity_threshold = 1.0;
    /// Multiplier on the probability of agents working for facilitator-tagged employers.
    double facilitator_multiplier = 1.2;
    /// Agents younger than this neither initiate nor join crimes.
    int minimum_age_years = 10;
    /// Look-back window that makes a tie "criminal".
    int criminal_window_months = 24;
    double calibration_band = 0.1;
    int ticks_per_year = kMonthsPerYear;
    /// Neighbourhood radius for proximity and embeddedness.
    int h = 2;
    /// Share of suspended ties recovered on release.
    double rho = 0.5;

    void validate() const;
};

/// Evaluates the seven predicates for `agent` at `tick`.
FactorMask active_risk_factors(const Society& society, const Agent& agent, Tick tick, const CrimeParams& params);

/// baseline * (1 + sum over active factors of (OR - 1)), floored at 0.
double raw_annual_probability(double baseline, FactorMask active, const RiskFactorSet& factors);

struct CrimeProbability {
    double annual;
    double per_tick;
};

/// Uncalibrated probability for an agent with the given active factors. `facilitator` applies the
/// facilitator-sector multiplier; `scrutiny` is the law-enforcement factor (1 when not targeted).
CrimeProbability crime_probability(const Agent& agent, FactorMask active, const CrimeParams& params,
                                   bool facilitator = false, double scrutiny = 1.0);

struct ClassCalibration {
    std::size_t count = 0;
    double raw_mean = 0.0;
    double factor = 1.0;
    double post_mean = 0.0;
    /// Empty class: nothing to calibrate.
    bool skipped = true;
};

struct CalibrationState {
    Tick tick = 0;
    std::array<ClassCalibration, kClassCount> classes{};
};

/// Rescales `values` in place so their mean lies within `band` of `baseline`.
///
/// Values are clamped to [0, 1]. If the clamped mean is already inside the band the
/// factor is 1; otherwise the smallest-change uniform factor that restores the
/// baseline mean is applied (solved numerically when clamping binds).
ClassCalibration calibrate_class(std::span<double> values, double baseline, double band);

/// Reads each eligible agent's p_precalibration, writes p_annual and p_tick.
CalibrationState recalibrate_classes(Society& society, std::span<const AgentId> eligible, const CrimeParams& params,
                                     Tick tick);

/// Independent Bernoulli(p_tick) draw per eligible agent, in the given order.
std::vector<AgentId> draw_offenders(const Society& society, std::span<const AgentId> eligible, Rng& rng);

/// Throws ConfigError unless the party-size distribution has support >= 1 and mode 1.
void validate_co_offending_distribution(const DistributionTable& table);
int sample_group_size(const DistributionTable& co_offending, Rng& rng);

struct MatchOptions {
    int h = 2;
    /// Candidate may join (alive, free, old enough, not already offending this tick).
    std::function<bool(AgentId)> available;
    /// Candidate is hidden from OC initiators (law-enforcement scrutiny).
    std::function<bool(AgentId)> hidden_from_oc = [](AgentId) { return false; };
};

/// Initiator followed by the size-1 best candidates by proximity * p (times 1 + R for OC initiators).
std::vector<AgentId> match_co_offenders(const Society& society, AgentId initiator, int size,
                                        const MatchOptions& options);

struct CrimeEvent {
    EventId id = 0;
    Tick tick = 0;
    std::vector<AgentId> participants;
    bool oc_involved = false;
    std::vector<bool> sanctioned;
    std::vector<int> sentence_months;
};

CrimeEvent make_event(const Society& society, EventId id, Tick tick, std::vector<AgentId> participants);

/// Appends the crime to each participant's history and links participants in the CoOffending layer.
void record_co_offending(const CrimeEvent& event, Society& society);

/// Turns every non-member participant of an OC-involved event into a member with
/// OcGroup edges to the OC co-participants. Returns the recruits.
std::vector<AgentId> apply_recruitment(const CrimeEvent& event, Society& society);

/// Per-participant sanction draws: probability min(1, base * repression(id)), sentence from `sentence_months`.
void sanction(CrimeEvent& event, const Society& society, const DistributionTable& punishment,
              const DistributionTable& sentence_months, const std::function<double(AgentId)>& repression, Rng& rng);

/// Suspends every non-household edge, clears employment and schooling, starts the countdown.
void incarcerate(Society& society, AgentId id, int months, Tick tick);

/// Frees the agent and restores round(rho * |suspended ties|) of them, chosen uniformly;
/// OcGroup ties of OC members come back regardless.
void release(Society& society, AgentId id, double rho, Rng& rng);

/// Decrements every sentence and releases agents reaching zero. Returns released ids.
std::vector<AgentId> advance_incarceration(Society& society, double rho, Rng& rng);

/// CSV: event_id,tick,participants,oc_involved,sanctioned,sentence_months (lists separated by ';').
std::string export_crime_log(std::span<const CrimeEvent> events);

} // namespace ocsim
