#include "ocsim/types.hpp"

#include <fmt/format.h>

namespace ocsim {

std::string_view to_string(Gender g) noexcept { return g == Gender::Female ? "F" : "M"; }

std::string_view to_string(AgeClass a) noexcept {
    switch (a) {
    case AgeClass::UpTo13: return "0-13";
    case AgeClass::From14To17: return "14-17";
    case AgeClass::From18To24: return "18-24";
    case AgeClass::From25To34: return "25-34";
    case AgeClass::From35To44: return "35-44";
    case AgeClass::From45To54: return "45-54";
    case AgeClass::From55To64: return "55-64";
    case AgeClass::From65: return "65+";
    }
    return "?";
}

std::string_view to_string(Education e) noexcept {
    switch (e) {
    case Education::None: return "none";
    case Education::Primary: return "primary";
    case Education::Secondary: return "secondary";
    case Education::HighSchool: return "high_school";
    case Education::Higher: return "higher";
    }
    return "?";
}

std::string class_label(std::size_t class_idx) {
    const auto g = static_cast<Gender>(class_idx / kAgeClassCount);
    const auto a = static_cast<AgeClass>(class_idx % kAgeClassCount);
    return fmt::format("{}_{}", to_string(g), to_string(a));
}

Gender parse_gender(std::string_view s) {
    if (s == "F" || s == "female") return Gender::Female;
    if (s == "M" || s == "male") return Gender::Male;
    throw ConfigError("gender", fmt::format("unknown gender '{}' (expected F or M)", s));
}

Education parse_education(std::string_view s) {
    for (auto e : {Education::None, Education::Primary, Education::Secondary, Education::HighSchool,
                   Education::Higher}) {
        if (to_string(e) == s) return e;
    }
    throw ConfigError("education",
                      fmt::format("unknown education level '{}' (expected none, primary, secondary, "
                                  "high_school or higher)",
                                  s));
}

} // namespace ocsim
