#pragma once

#include "ocsim/crime.hpp"
#include "ocsim/dynamics.hpp"
#include "ocsim/policy.hpp"
#include "ocsim/population.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ocsim {

inline constexpr int kScenarioSchemaVersion = 1;

namespace tables {
inline constexpr std::string_view kCoOffendingSize = "co_offending_size";
inline constexpr std::string_view kPunishment = "punishment";
inline constexpr std::string_view kSentenceMonths = "sentence_months";
inline constexpr std::string_view kOcSeedGender = "oc_seed_gender";
inline constexpr std::string_view kOcSeedAge = "oc_seed_age";
} // namespace tables

struct ScenarioConfig {
    std::string name = "default";
    std::uint64_t seed = 42;
    int horizon_ticks = 360;
    int ticks_per_year = kMonthsPerYear;
    int h = 2;
    double rho = 0.5;
    /// Every distribution table, population, lifecycle and crime alike.
    DistributionSet distributions;
    /// Set when the tables were loaded from a bundle directory rather than given inline.
    std::optional<std::string> distribution_bundle;
    PopulationConfig population;
    LifecycleConfig lifecycle;
    CrimeParams crime;
    std::vector<PolicySpec> policies;

    /// Copies the shared tables and scalars (seed, h, rho, ticks per year) into the sub-configs.
    void sync();
    /// Throws ConfigError whose path names the offending field.
    void validate() const;
};

/// Synthetic tables with plausible shapes for a mid-sized southern Italian city. Not empirical.
DistributionSet default_distributions();
ScenarioConfig default_scenario();

/// Parses a scenario document. Relative bundle paths resolve against `base_dir`.
/// Throws ConfigError naming the field path on schema or invariant violations.
ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& file);

/// Full document; distributions inline unless `bundle_reference` and the config came from a bundle.
nlohmann::json to_json(const ScenarioConfig& config, bool bundle_reference = false);
nlohmann::json to_json(const DistributionTable& table);
DistributionTable distribution_from_json(const nlohmann::json& j, const std::string& name, const std::string& path);
nlohmann::json to_json(const PolicySpec& spec);

/// FNV-1a 64 over the canonical (inline, key-sorted) document, as 16 hex digits.
std::string scenario_hash(const ScenarioConfig& config);

struct Diagnostic {
    std::string path;
    std::string message;
};

/// Parses and validates; empty when the document is valid.
std::vector<Diagnostic> validate_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

} // namespace ocsim
