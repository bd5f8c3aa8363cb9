#pragma once

#include "ocsim/distribution.hpp"
#include "ocsim/rng.hpp"
#include "ocsim/society.hpp"

#include <cstdint>
#include <string>

namespace ocsim {

/// Log-normal natural criminal propensity.
struct PropensityParams {
    double mu = 0.0;
    double sigma = 0.5;
    /// Quantile of the log-normal used as the "high propensity" threshold x.
    double threshold_quantile = 0.9;

    /// exp(mu + sigma * z_q), the propensity above which the risk factor applies.
    double threshold() const;
};

enum class OcTopology { Clique, Tree };

std::string_view to_string(OcTopology t) noexcept;
OcTopology parse_oc_topology(std::string_view s);

struct OcSeedConfig {
    std::size_t member_count = 0;
    /// Categorical over labels "F" / "M".
    DistributionTable gender_distribution;
    /// Piecewise-by-age with label "*".
    DistributionTable age_distribution;
    OcTopology topology = OcTopology::Tree;
    int branching_factor = 3;
};

/// Names of the tables a population bundle must provide.
namespace tables {
inline constexpr std::string_view kAgeByGender = "age_by_gender";
inline constexpr std::string_view kHouseholdHeadAge = "household_head_age";
inline constexpr std::string_view kHouseholdTypeByHeadAge = "household_type_by_head_age";
inline constexpr std::string_view kChildrenPerFamily = "children_per_family";
inline constexpr std::string_view kEducationByAge = "education_by_age";
inline constexpr std::string_view kWealthByEducation = "wealth_by_education";
inline constexpr std::string_view kEmployerSize = "employer_size";
} // namespace tables

struct PopulationConfig {
    std::size_t population_size = 10000;
    DistributionSet distributions;
    OcSeedConfig oc_seed;
    PropensityParams propensity;
    double unemployment_rate = 0.15;
    std::uint64_t random_seed = 42;
    int max_class_size = 25;
    /// Share of 6-18 year olds attending school.
    double school_attendance = 0.97;
    /// Share of employers tagged as facilitator sectors.
    double facilitator_share = 0.05;
    /// Friendship formation attempts per agent at synthesis.
    int initial_friendship_attempts = 4;

    void validate() const;
    const DistributionTable& table(std::string_view name) const;
};

/// Log-normal draw exp(mu + sigma * N(0,1)).
double sample_propensity(const PropensityParams& params, Rng& rng);

/// Draws gender and age of every agent from the age-by-gender table, then
/// education, wealth and propensity.
std::vector<Agent> draw_agents(const PopulationConfig& config, Rng& rng);

/// Groups agents into households (head age, then type, then size, then members by
/// age offset) and links co-residents pairwise in the Household layer.
void assign_households(Society& society, const PopulationConfig& config, Rng& rng);

/// Places 6-18 year olds into cohort classes of at most max_class_size; classmates form a clique.
void assign_schools(Society& society, const PopulationConfig& config, Rng& rng);

/// Employs (1 - unemployment_rate) of the labour force in firms whose sizes follow the employer-size table.
void assign_jobs(Society& society, const PopulationConfig& config, Rng& rng);

/// Marks exactly member_count agents as OC members and wires the OC layer.
void seed_oc_group(Society& society, const OcSeedConfig& seed, Rng& rng);

/// Full synthesis: agents, households, schools, jobs, initial friendships and the OC seed.
Society synthesize_population(const PopulationConfig& config, Rng& rng);
Society synthesize_population(const PopulationConfig& config);

/// Agent roster as CSV (one row per agent, ordered by id).
std::string export_roster(const Society& society);
/// Edge list of every layer as CSV: source_id,target_id,layer,created_tick.
std::string export_edges(const Society& society);
std::string export_edges(std::span<const EdgeRecord> edges);

} // namespace ocsim
