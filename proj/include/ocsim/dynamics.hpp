#pragma once

#include "ocsim/distribution.hpp"
#include "ocsim/rng.hpp"
#include "ocsim/society.hpp"

#include <functional>

namespace ocsim {

struct PopulationConfig;

namespace tables {
inline constexpr std::string_view kFertilityByAge = "fertility_by_age";
inline constexpr std::string_view kMortalityByAgeGender = "mortality_by_age_gender";
inline constexpr std::string_view kPartnershipByAge = "partnership_by_age";
} // namespace tables

struct LifecycleConfig {
    /// Scalar-rate, label "F": annual birth probability of a partnered woman by age.
    DistributionTable fertility_by_age;
    /// Scalar-rate, labels "F"/"M": annual death probability by age.
    DistributionTable mortality_by_age_gender;
    /// Scalar-rate, label "*": annual probability that a single adult seeks a partner.
    DistributionTable partnership_by_age;
    /// Annual probability that an agent attempts a new friendship.
    double friendship_make_rate = 0.9;
    /// Annual probability that an existing friendship breaks.
    double friendship_break_rate = 0.1;
    /// Share of school leavers who obtain a high-school diploma.
    double high_school_completion = 0.6;
    /// Share of diploma holders who go on to higher education.
    double higher_education_share = 0.3;
    /// Target unemployment rate of the labour force.
    double unemployment_target = 0.15;
    /// Annual probability that an employed agent leaves their job.
    double job_separation_rate = 0.08;
    /// Maximum age gap (years) for partnership.
    int partner_age_gap = 8;

    void validate() const;
};

/// Converts an annual probability to a per-tick probability by complement compounding.
double per_tick_probability(double annual, int ticks_per_year = kMonthsPerYear);

struct DemographyEvents {
    std::vector<AgentId> births;
    std::vector<AgentId> deaths;
};

/// Ageing, mortality and fertility for one tick, in agent-id order.
/// `newborn_propensity` draws the propensity of each newborn.
DemographyEvents step_demography(Society& society, const LifecycleConfig& config, Tick tick, Rng& rng,
                                 const std::function<double(Rng&)>& newborn_propensity);

/// Partnership, friendship churn, school progression and labour-market transitions for one tick.
/// School attendance, firm sizes and the facilitator share come from the population config.
void step_social(Society& society, const LifecycleConfig& config, const PopulationConfig& population, Tick tick,
                 Rng& rng);

/// True when b shares a class, employer or household neighbourhood with a.
bool shares_context(const Society& society, const Agent& a, const Agent& b);

/// Relative weight of forming a friendship a-b: (10 if shared context else 1) * exp(-|age gap| / 10 years).
double friendship_formation_weight(const Society& society, const Agent& a, const Agent& b);

/// One friendship attempt by `id`: samples context and random candidates and picks one
/// proportionally to formation weight. Returns the new friend, if any.
std::optional<AgentId> attempt_friendship(Society& society, AgentId id, Tick tick, Rng& rng);

/// Moves pupils between school levels, graduates 19 year olds and enrols 6 year olds.
void step_schooling(Society& society, const LifecycleConfig& config, Tick tick, Rng& rng, double attendance);

/// Separations, retirements and hires steering employment toward the target rate.
void step_labor_market(Society& society, const LifecycleConfig& config, const DistributionTable& employer_size,
                       double facilitator_share, Tick tick, Rng& rng);

/// Employment rate of the labour force (0 when the labour force is empty).
double employment_rate(const Society& society);

/// Hires `id` into a firm with a vacancy, creating a firm when none has room.
EmployerId hire(Society& society, AgentId id, const DistributionTable& employer_size, double facilitator_share,
                Tick tick, Rng& rng);

} // namespace ocsim
