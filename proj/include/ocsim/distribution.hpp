#pragma once

#include "ocsim/rng.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ocsim {

enum class DistributionKind {
    /// Masses over labelled bins sum to 1. Numeric bins are inclusive integer ranges.
    Categorical,
    /// Per label, half-open age ranges [lower, upper) in years, contiguous from 0. Masses sum to 1 overall.
    PiecewiseByAge,
    /// Each bin is an independent rate in [0, 1] over a half-open age range [lower, upper).
    ScalarRate,
    /// Masses sum to 1 within each distinct covariate range [lower, upper) (e.g. head age, education).
    Conditional,
};

std::string_view to_string(DistributionKind k) noexcept;
DistributionKind parse_distribution_kind(std::string_view s);

struct DistributionBin {
    std::string label;
    double lower = 0.0;
    double upper = 0.0;
    double mass = 0.0;

    bool operator==(const DistributionBin&) const = default;
};

struct DistributionTable {
    std::string name;
    DistributionKind kind = DistributionKind::Categorical;
    std::string description;
    std::vector<DistributionBin> bins;

    bool operator==(const DistributionTable&) const = default;

    /// Throws ConfigError naming the table when an invariant is violated.
    void validate() const;

    /// Index of a bin drawn proportionally to mass (Categorical, PiecewiseByAge).
    std::size_t sample_bin(Rng& rng) const;

    /// Integer drawn uniformly inside a mass-weighted inclusive [lower, upper] bin.
    std::int64_t sample_integer(Rng& rng) const;

    /// Label drawn from the bins whose covariate range contains `covariate` (Conditional).
    const std::string& sample_conditional(double covariate, Rng& rng) const;

    /// Rate for (label, age) or 0 when no bin matches. Label "*" matches any label.
    double rate(std::string_view label, double age_years) const;

    /// Most probable numeric bin value (lower bound of the heaviest bin).
    double mode_lower() const;
};

using DistributionSet = std::map<std::string, DistributionTable>;

/// Reads every `<name>.csv` of a bundle directory.
///
/// File format: optional `# kind: <kind>` and `# description: <text>` header lines,
/// then a `bin_label,lower_bound,upper_bound,mass` header row and one row per bin.
DistributionSet load_distribution_bundle(const std::filesystem::path& dir);
DistributionTable read_distribution_csv(const std::filesystem::path& file);
void write_distribution_bundle(const DistributionSet& set, const std::filesystem::path& dir);
std::string to_csv(const DistributionTable& table);

} // namespace ocsim
