#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tvr/memo.hpp>
#include <tvr/timeline.hpp>
#include <vector>

namespace tvr {

/// Data distribution: none, or hash-partitioned on a key set (empty set = a single partition).
struct Trait
{
    std::optional<std::vector<std::string>> hash;

    static Trait none() { return {}; }
    static Trait hashed(std::vector<std::string> keys);
    bool is_none() const { return not hash.has_value(); }
    auto operator<=>(const Trait&) const = default;
    std::string to_string() const;
};

enum class PhysKind {
    TableScanAt,
    DeltaScanAt,
    EmptyScan,
    StateScan,
    FilterExec,
    ProjectExec,
    HashInnerJoin,
    IncrHashInnerJoin,
    HashLeftOuterJoin,
    IncrHashLeftOuterJoin,
    HashSemiJoin,
    HashAntiJoin,
    NestedLoopJoin,
    OjvIndirectExec,
    HashAggregate,
    PartialAggregate,
    FinalAggregate,
    IncrAggregateMerge,
    AggregateDiff,
    MergeUnion,
    DifferenceExec,
    Exchange,
    Save,
    Load,
};

std::string_view to_string(PhysKind k);
PhysKind phys_kind_from_string(std::string_view s);

/// Per-operator cost factors.  Compute operators cost `compute` per output tuple.
struct CostProfile
{
    std::string name = "output";
    double compute = 1.0;
    double scan = 1.0;
    double exchange = 0.3;
    double save = 0.5;
    double load = 0.4;
    /// A merge with an empty input is free (it forwards the other side).
    bool free_empty_merge = true;

    /// Output-tuple counting with Save 0.5 / Load 0.4 / Exchange 0.3.
    static CostProfile output() { return {}; }
    /// Only tuples delivered by Exchange cost (1 each); everything else, Save and Load included, is free.
    static CostProfile shuffle() { return { "shuffle", 0, 0, 1.0, 0, 0, true }; }
    /// Throws ParseError.
    static CostProfile by_name(std::string_view name);
};

using CostVector = std::vector<double>;

struct CostFunction
{
    enum class Kind { WeightedSum, ReverseLexical };

    Kind kind = Kind::WeightedSum;
    std::vector<double> weights;

    static CostFunction weighted(std::vector<double> w);
    static CostFunction reverse_lexical() { return { Kind::ReverseLexical, {} }; }
    /// Weighted sum with all weights 1.
    static CostFunction uniform(std::size_t k) { return weighted(std::vector<double>(k, 1.0)); }

    /// Strict order on equal-length vectors.  Throws ContractError on length mismatch.
    bool less(const CostVector &a, const CostVector &b) const;
    /// Weights strictly increasing over time.
    bool increasing() const;
    std::string to_string() const;
};

/// Scalarized cost for WeightedSum; for ReverseLexical the last entry decides, so the vector itself is the key.
double reduce_cost(const CostVector &v, const CostFunction &f);
CostVector add(CostVector a, const CostVector &b);
/// Exact-within-epsilon comparison for reporting and tests.
bool same_cost(const CostVector &a, const CostVector &b, double eps = 1e-9);

using ClassId = int;

/// One way to produce a class: a physical operator over child classes.
struct PlanAlt
{
    PhysKind kind = PhysKind::FilterExec;
    /// Logical expr implemented (-1 for Exchange and materialized loads).
    ExprId expr = -1;
    Operator op;
    std::vector<ClassId> children;
    /// Earliest execution time of this operator alone (leaf availability).
    int available = 0;
    /// Own cost if executed at each time.
    std::vector<double> cost;
    /// Output persisted for free (Exchange outputs).
    bool by_product = false;
    /// For materialized loads: the candidate time the state was computed at.
    int materialized_at = -1;
};

/// A (group, trait) pair with its alternatives.
struct PlanClass
{
    GroupId group = -1;
    Trait trait;
    int64_t cardinality = 0;
    /// Cost to save at / load at a later time; charged per edge that crosses time unless the producer is a by-product.
    double save_cost = 0;
    double load_cost = 0;
    std::vector<PlanAlt> alts;
};

/// The search-facing view of an explored memo: classes of interchangeable physical alternatives.
struct PlanSpace
{
    int points = 0;
    std::vector<PlanClass> classes;
    /// Required delivery time → root class.
    std::map<int, ClassId> roots;

    std::optional<ClassId> find(GroupId g, const Trait &t) const;
    std::size_t alt_count() const;
};

/// Exact output cardinality per group.
using Stats = std::map<GroupId, int64_t>;

/// Evaluates every group (via its shallowest derivation) on the arrivals, plus registered states.
Stats exact_stats(const Memo &memo, const Arrivals &arrivals, const std::map<std::string, BagRelation> &states = {});

/// Availability of a materialized state scan, by state id.
using StateAvailability = std::map<std::string, std::pair<int, Trait>>;

/// Implementation pass: derives the physical classes needed to deliver every root with no distribution requirement,
/// inserting Exchange enforcers for hash requirements.  Throws StatsError if a group lacks stats.
PlanSpace build_plan_space(const Memo &memo, const std::map<int, GroupId> &roots, const Stats &stats,
                           const CostProfile &profile, const StateAvailability &states = {});

/// A node of an executable incremental plan.
struct PlanNode
{
    int id = -1;
    ClassId cls = -1;
    GroupId group = -1;
    Trait trait;
    PhysKind kind = PhysKind::FilterExec;
    Operator op;
    std::vector<int> children;
    int time = 0;
    bool by_product = false;
    int64_t cardinality = 0;
    /// Own cost at `time`.
    double cost = 0;
    double save_cost = 0;
    double load_cost = 0;
};

struct TimedPlan
{
    int points = 0;
    std::vector<PlanNode> nodes;
    /// Required time → node delivering the output.
    std::map<int, int> roots;
    /// Per-time cost of executing the plan once: node costs plus one Save per node consumed later and one Load per
    /// later consuming time.
    CostVector cost;
    /// The value the search minimized (tree-counted, with materialization costs under MQO).
    CostVector objective;
    /// Nodes chosen as shared materialized states.
    std::set<int> materialized;

    /// Nodes consumed at a later time than they run (by a parent or as a later output), with the consuming times.
    std::map<int, std::set<int>> cross_time_edges() const;
    std::string to_string() const;
};

/// Recomputes `plan.cost` from the node costs and cross-time edges.
CostVector plan_cost(const TimedPlan &plan);

/// Times at which a node may execute: leaves from their data availability on; internal nodes the intersection of
/// their children's.  Throws UnplannableError if empty.
std::set<int> temporal_domain(const TimedPlan &plan, int node, const StateAvailability &states = {});

/// Empty if every node runs inside its temporal domain and no earlier than its children; otherwise one message per
/// violation.
std::vector<std::string> validate_assignment(const TimedPlan &plan, const StateAvailability &states = {});

}
