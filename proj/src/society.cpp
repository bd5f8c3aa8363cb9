#include "ocsim/society.hpp"

#include <algorithm>

namespace ocsim {

std::optional<SchoolLevel> school_level_for_age(int years) noexcept {
    if (years < kSchoolEntryAge || years >= kSchoolLeavingAge) return std::nullopt;
    if (years < kLowerSecondaryAge) return SchoolLevel::Primary;
    if (years < kUpperSecondaryAge) return SchoolLevel::LowerSecondary;
    return SchoolLevel::UpperSecondary;
}

int cohort_of(const Agent& a, Tick tick) noexcept {
    const int birth_month = tick - a.age_months;
    return birth_month >= 0 ? birth_month / kMonthsPerYear : -((-birth_month + kMonthsPerYear - 1) / kMonthsPerYear);
}

std::size_t Society::alive_count() const {
    return static_cast<std::size_t>(std::count_if(agents.begin(), agents.end(), [](const Agent& a) { return a.alive; }));
}

std::size_t Society::oc_member_count() const {
    return static_cast<std::size_t>(
        std::count_if(agents.begin(), agents.end(), [](const Agent& a) { return a.alive && a.oc_member; }));
}

std::size_t Society::incarcerated_count() const {
    return static_cast<std::size_t>(
        std::count_if(agents.begin(), agents.end(), [](const Agent& a) { return a.alive && a.incarcerated(); }));
}

AgentId Society::add_agent(Agent prototype) {
    const AgentId id = graph.add_node();
    prototype.id = id;
    agents.push_back(std::move(prototype));
    if (agents.back().oc_member) graph.set_oc_member(id, true);
    return id;
}

void Society::set_oc_member(AgentId id, bool member) {
    agents.at(id).oc_member = member;
    graph.set_oc_member(id, member);
}

HouseholdId Society::new_household() {
    const auto id = static_cast<HouseholdId>(households.size());
    households.push_back({id, {}});
    return id;
}

void Society::move_to_household(AgentId id, HouseholdId household, Tick tick) {
    auto& a = agents.at(id);
    auto& old_members = households.at(a.household).members;
    if (auto it = std::find(old_members.begin(), old_members.end(), id); it != old_members.end()) {
        old_members.erase(it);
        for (auto other : old_members) graph.remove_edge(LayerId::Household, id, other);
    }
    a.household = household;
    auto& members = households.at(household).members;
    for (auto other : members) graph.add_edge(LayerId::Household, id, other, tick);
    members.push_back(id);
}

EmployerId Society::new_employer(int capacity, bool facilitator) {
    const auto id = static_cast<EmployerId>(employers.size());
    employers.push_back({id, std::max(1, capacity), facilitator, {}});
    return id;
}

void Society::employ(AgentId id, EmployerId employer, Tick tick) {
    auto& a = agents.at(id);
    if (a.employer) unemploy(id);
    auto& firm = employers.at(employer);
    for (auto other : firm.members) graph.add_edge(LayerId::WorkSchool, id, other, tick);
    firm.members.push_back(id);
    a.employed = true;
    a.employer = employer;
}

void Society::unemploy(AgentId id) {
    auto& a = agents.at(id);
    if (a.employer) {
        auto& members = employers.at(*a.employer).members;
        std::erase(members, id);
        if (graph.contains(id)) {
            for (auto other : members) graph.remove_edge(LayerId::WorkSchool, id, other);
        }
    }
    a.employed = false;
    a.employer.reset();
}

ClassId Society::class_with_room(SchoolLevel level, int cohort, std::optional<ClassId> exclude) {
    for (const auto& c : classes) {
        if (c.level == level && c.cohort == cohort && c.id != exclude &&
            static_cast<int>(c.members.size()) < max_class_size)
            return c.id;
    }
    const auto id = static_cast<ClassId>(classes.size());
    classes.push_back({id, level, cohort, {}});
    return id;
}

void Society::join_class(AgentId id, ClassId cls, Tick tick) {
    auto& a = agents.at(id);
    if (a.school_class) leave_class(id);
    auto& c = classes.at(cls);
    for (auto other : c.members) graph.add_edge(LayerId::WorkSchool, id, other, tick);
    c.members.push_back(id);
    a.school_class = cls;
}

void Society::leave_class(AgentId id) {
    auto& a = agents.at(id);
    if (!a.school_class) return;
    auto& members = classes.at(*a.school_class).members;
    std::erase(members, id);
    if (graph.contains(id)) {
        for (auto other : members) graph.remove_edge(LayerId::WorkSchool, id, other);
    }
    a.school_class.reset();
}

void Society::kill(AgentId id) {
    auto& a = agents.at(id);
    if (!a.alive) return;
    unemploy(id);
    leave_class(id);
    std::erase(households.at(a.household).members, id);
    if (a.partner) {
        auto& p = agents.at(*a.partner);
        if (p.partner == id) p.partner.reset();
        a.partner.reset();
    }
    a.incarceration.reset();
    a.alive = false;
    graph.remove_node(id);
}

bool Society::in_labor_force(const Agent& a) const noexcept {
    const int y = a.age_years();
    return a.free() && y >= kSchoolLeavingAge && y < kRetirementAge && !a.school_class;
}

} // namespace ocsim
