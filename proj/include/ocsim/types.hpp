#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ocsim {

using AgentId = std::uint32_t;
using HouseholdId = std::uint32_t;
using EmployerId = std::uint32_t;
using ClassId = std::uint32_t;
using EventId = std::uint64_t;
/// Simulation time step. One tick is one month; synthesis happens at tick -1.
using Tick = std::int32_t;

inline constexpr Tick kSynthesisTick = -1;
inline constexpr int kMonthsPerYear = 12;

enum class Gender : std::uint8_t { Female = 0, Male = 1 };

enum class Education : std::uint8_t { None = 0, Primary, Secondary, HighSchool, Higher };

/// Age classes of the gender/age baseline table.
enum class AgeClass : std::uint8_t {
    UpTo13 = 0,
    From14To17,
    From18To24,
    From25To34,
    From35To44,
    From45To54,
    From55To64,
    From65,
};

inline constexpr std::size_t kAgeClassCount = 8;
inline constexpr std::size_t kClassCount = 2 * kAgeClassCount;

constexpr AgeClass age_class_of_years(int years) noexcept {
    if (years <= 13) return AgeClass::UpTo13;
    if (years <= 17) return AgeClass::From14To17;
    if (years <= 24) return AgeClass::From18To24;
    if (years <= 34) return AgeClass::From25To34;
    if (years <= 44) return AgeClass::From35To44;
    if (years <= 54) return AgeClass::From45To54;
    if (years <= 64) return AgeClass::From55To64;
    return AgeClass::From65;
}

/// Index into 16-entry per-class arrays; females first, matching the baseline table order.
constexpr std::size_t class_index(Gender g, AgeClass a) noexcept {
    return static_cast<std::size_t>(g) * kAgeClassCount + static_cast<std::size_t>(a);
}

std::string_view to_string(Gender g) noexcept;
std::string_view to_string(AgeClass a) noexcept;
std::string_view to_string(Education e) noexcept;
std::string class_label(std::size_t class_idx);

Gender parse_gender(std::string_view s);
Education parse_education(std::string_view s);

/// Invalid scenario/configuration input. `path()` names the offending field or table.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_{std::move(path)},
          message_{message} {}

    const std::string& path() const noexcept { return path_; }
    const std::string& message() const noexcept { return message_; }

    /// Same error with `prefix` prepended to the path.
    ConfigError nested(std::string_view prefix) const {
        return ConfigError(path_.empty() ? std::string(prefix) : std::string(prefix) + "." + path_, message_);
    }

private:
    std::string path_;
    std::string message_;
};

/// Violation of a graph structural precondition (unknown node, self-loop).
class StructuralError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace ocsim
