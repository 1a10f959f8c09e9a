#pragma once

#include <map>
#include <optional>
#include <string>
#include <tvr/json.hpp>
#include <tvr/physical.hpp>
#include <tvr/rules.hpp>
#include <tvr/runtime.hpp>
#include <tvr/search.hpp>
#include <vector>

namespace tvr {

struct MaterializedState
{
    StateDecl decl;
    BagRelation relation;
    Trait trait;
};

/// One planning problem: timeline and arrivals, required outputs, cost objective, rule families and prior states.
struct Session
{
    std::string name;
    Arrivals arrivals;
    OutputRequirement requirement;
    CostFunction cost;
    CostProfile profile = CostProfile::output();
    RuleFamilies rules = RuleFamilies::all();
    std::vector<MaterializedState> states;
};

/// Throws ParseError with the path of the offending element, SchemaError / NameError / RangeError for contents that
/// parse but do not validate.
Session session_from_json(const Json &j, const std::string &source = "session");
Session load_session(const std::string &path);
Json to_json(const Session &s);

/// Adds a prior state usable from `available_from` on.  Throws ContractError for a duplicate id and SchemaError if
/// `relation` does not match the declared table.
void register_materialized_state(Session &s, const std::string &id, BagRelation relation, int available_from,
                                 Trait trait = Trait::none(), std::optional<std::string> table = std::nullopt,
                                 std::optional<Slot> slot = std::nullopt);

struct PlanOptions
{
    std::optional<RuleFamilies> rules;
    bool translation_copy = true;
    int seed_interval = 0;
    bool share = true;
    /// Also run exhaustive_search (sharing off) and record whether it agrees with the DP.
    bool exhaustive_check = false;
    std::size_t exhaustive_limit = 2'000'000;
};

struct PlanResult
{
    Exploration exploration;
    Stats stats;
    PlanSpace space;
    /// The chosen plan: greedy MQO when sharing is on, else the DP plan.
    TimedPlan plan;
    TimedPlan unshared;
    MqoTrace trace;
    std::optional<bool> exhaustive_agrees;
};

PlanResult plan_session(const Session &s, const PlanOptions &options = {});

/// Prior states by id, for the executor's store and for exact stats.
std::map<std::string, BagRelation> state_relations(const Session &s);
StateAvailability state_availability(const Session &s);

/// Executes with the session's profile, validating against the oracle.  Registered states are put into `store`.
RunReport run_session(const Session &s, const TimedPlan &plan, StateStore &store, bool keep_relations = false);

struct MethodRow
{
    std::string method;
    RuleFamilies rules;
    TimedPlan plan;
    double cost = 0;
    std::vector<int64_t> tuples;
};

/// One row per single method (`im1`, `im2`, `ojv`) and one for all rules together.
std::vector<MethodRow> compare_methods(const Session &s, const PlanOptions &options = {});

}
