#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <tvr/physical.hpp>
#include <vector>

namespace tvr {

/// A shared-state candidate: class `cls` computed once at `time`.
struct Candidate
{
    ClassId cls = -1;
    int time = 0;

    auto operator<=>(const Candidate&) const = default;
    std::string to_string() const;
};

/// Best incremental plan for `space` under `f`, with the classes in `shared` materialized: each is computed once at
/// its time (paying its Save unless it is a by-product) and every consumer reads it for a Load.  Roots are delivered at
/// their required times.  Throws UnplannableError if some root cannot be delivered.
TimedPlan dp_search(const PlanSpace &space, const CostFunction &f, const std::set<Candidate> &shared = {});

/// dp_search's objective alone.
CostVector dp_objective(const PlanSpace &space, const CostFunction &f, const std::set<Candidate> &shared = {});

/// Minimum over every explicit plan tree (no alternative repeated at one time along a path), by enumeration.  For
/// cross-checking the search on small spaces.  Throws RangeError once more than `limit` partial trees were built.
TimedPlan exhaustive_search(const PlanSpace &space, const CostFunction &f, std::size_t limit = 2'000'000);

/// Classes consumed by at least two parent alternatives, at each time they can be computed.
std::vector<Candidate> share_candidates(const PlanSpace &space);

/// Keeps only the earliest time per class.  Applies only for weighted sums with strictly increasing weights; otherwise
/// returns the input.
std::vector<Candidate> store_early_reduction(const std::vector<Candidate> &candidates, const CostFunction &f);

struct MqoStep
{
    Candidate added;
    CostVector objective;
};

struct MqoTrace
{
    CostVector initial;
    std::vector<MqoStep> steps;
    std::size_t evaluated = 0;
    std::size_t candidates = 0;
};

/// Greedy multi-query optimization: starting from no sharing, repeatedly adds the candidate that lowers the objective
/// most, until none does.
TimedPlan greedy_mqo(const PlanSpace &space, const CostFunction &f, bool store_early = true, MqoTrace *trace = nullptr);

}
