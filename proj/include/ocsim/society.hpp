#pragma once

#include "ocsim/multiplex.hpp"
#include "ocsim/types.hpp"

#include <array>
#include <optional>
#include <vector>

namespace ocsim {

struct SuspendedTie {
    LayerId layer;
    AgentId other;
    Tick created;

    bool operator==(const SuspendedTie&) const = default;
};

struct IncarcerationState {
    Tick start_tick = 0;
    int remaining_months = 0;
    /// Non-household edges removed on entry; never contains Household-layer ties.
    std::vector<SuspendedTie> suspended_ties;
};

struct CrimeRecord {
    Tick tick;
    EventId event;
};

struct Agent {
    AgentId id = 0;
    Gender gender = Gender::Female;
    int age_months = 0;
    Education education = Education::None;
    bool employed = false;
    std::optional<EmployerId> employer;
    std::optional<ClassId> school_class;
    int wealth = 1;
    double propensity = 1.0;
    /// Append-only, tick-sorted.
    std::vector<CrimeRecord> crime_history;
    bool oc_member = false;
    std::optional<IncarcerationState> incarceration;
    bool alive = true;
    HouseholdId household = 0;
    std::array<std::optional<AgentId>, 2> parents;
    std::optional<AgentId> partner;

    /// Set by the education-support policy component: the agent completes high school.
    bool education_pinned = false;

    // Crime probabilities from the latest probability phase (annual before/after class
    // calibration, and the per-tick realization).
    double p_precalibration = 0.0;
    double p_annual = 0.0;
    double p_tick = 0.0;

    int age_years() const noexcept { return age_months / kMonthsPerYear; }
    AgeClass age_class() const noexcept { return age_class_of_years(age_years()); }
    std::size_t class_idx() const noexcept { return class_index(gender, age_class()); }
    bool incarcerated() const noexcept { return incarceration.has_value(); }
    bool free() const noexcept { return alive && !incarceration; }
    std::optional<Tick> last_crime_tick() const {
        if (crime_history.empty()) return std::nullopt;
        return crime_history.back().tick;
    }
};

struct Household {
    HouseholdId id = 0;
    std::vector<AgentId> members;
};

enum class SchoolLevel : std::uint8_t { Primary = 0, LowerSecondary, UpperSecondary };

struct Classroom {
    ClassId id = 0;
    SchoolLevel level = SchoolLevel::Primary;
    /// Birth-year cohort shared by the pupils.
    int cohort = 0;
    std::vector<AgentId> members;
};

struct Employer {
    EmployerId id = 0;
    int capacity = 1;
    bool facilitator = false;
    std::vector<AgentId> members;
};

inline constexpr int kSchoolEntryAge = 6;
inline constexpr int kLowerSecondaryAge = 11;
inline constexpr int kUpperSecondaryAge = 14;
inline constexpr int kSchoolLeavingAge = 19;
inline constexpr int kRetirementAge = 65;

/// School level for an age in years, or nullopt outside school ages.
std::optional<SchoolLevel> school_level_for_age(int years) noexcept;

/// Agents together with the multiplex graph and the group structures that generate its layers.
///
/// Mutators keep agent fields, group membership and graph edges consistent; the
/// modules change the society only through them or through the graph directly.
class Society {
public:
    std::vector<Agent> agents;
    MultiplexGraph graph;
    std::vector<Household> households;
    std::vector<Classroom> classes;
    std::vector<Employer> employers;
    int max_class_size = 25;

    Agent& agent(AgentId id) { return agents.at(id); }
    const Agent& agent(AgentId id) const { return agents.at(id); }

    std::size_t alive_count() const;
    std::size_t oc_member_count() const;
    std::size_t incarcerated_count() const;

    /// Appends a new agent (and graph node); `prototype.id` is overwritten.
    AgentId add_agent(Agent prototype);

    void set_oc_member(AgentId id, bool member);

    HouseholdId new_household();
    /// Moves an agent to a household, rewiring Household-layer edges to the new co-residents.
    void move_to_household(AgentId id, HouseholdId household, Tick tick);

    EmployerId new_employer(int capacity, bool facilitator);
    void employ(AgentId id, EmployerId employer, Tick tick);
    /// Leaves the current job and drops work ties to current co-workers.
    void unemploy(AgentId id);

    /// Class with room for this cohort and level, created if none has room.
    ClassId class_with_room(SchoolLevel level, int cohort, std::optional<ClassId> exclude = std::nullopt);
    void join_class(AgentId id, ClassId cls, Tick tick);
    void leave_class(AgentId id);

    /// Death: removes the agent from every group and the graph node set.
    void kill(AgentId id);

    bool in_labor_force(const Agent& a) const noexcept;
};

/// Birth-year cohort of an agent at a given tick.
int cohort_of(const Agent& a, Tick tick) noexcept;

} // namespace ocsim
