#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tvr/memo.hpp>
#include <tvr/timeline.hpp>
#include <vector>

namespace tvr {

/// Rule families selectable per run.  The core family is always on.
struct RuleFamilies
{
    bool im1 = true;
    bool im2 = true;
    bool ojv = true;

    static RuleFamilies all() { return {}; }
    static RuleFamilies none() { return { false, false, false }; }
    /// Comma-separated list of `im1`, `im2`, `ojv`, `all`, or `core`.  Throws ParseError.
    static RuleFamilies parse(std::string_view s);
    std::string to_string() const;
    bool operator==(const RuleFamilies&) const = default;
};

enum class Family { Core, Im1, Im2, Ojv };
std::string_view to_string(Family f);

enum class RuleClass { Traditional, Implementation, TvrGenerating, IntraTvr, InterTvr, PnaDeferred };

struct Scoring
{
    double traditional = 1.0;
    double implementation = 1.5;
    double tvr_boost = 2.0;
    double pna_base = 0.1;
    double pna_height_step = 0.001;
};

/// Operand ids of one match.  The meaning of each position is rule-specific (exprs, groups, TVRs, time points).
using Binding = std::vector<int>;

struct RuleMatch
{
    int rule = -1;
    Binding binding;
    double score = 0;
};

/// Static shape of a rule, for listings.
struct RulePattern
{
    std::vector<OpKind> operators;
    int tvr_operands = 0;
    std::string edges;
};

class RuleEngine;

class Rule
{
    public:
    virtual ~Rule() = default;
    virtual std::string_view name() const = 0;
    virtual Family family() const = 0;
    virtual RuleClass rule_class() const = 0;
    virtual RulePattern pattern() const = 0;
    /// Appends every current match.
    virtual void match(const Memo &memo, std::vector<Binding> &out) const = 0;
    /// Fires one match; returns whether the memo changed.
    virtual bool apply(Memo &memo, const Binding &b) const = 0;
    /// Height of the matched operator for PNA-deferred scoring.
    virtual int height(const Memo&, const Binding&, const std::map<GroupId, int>&) const { return 0; }
};

struct FiringStats
{
    std::size_t rounds = 0;
    std::size_t matches = 0;
    std::size_t firings = 0;
    std::size_t changes = 0;
    /// Budget ran out before the fixpoint.
    bool partial_exploration = false;
    std::map<std::string, std::size_t> per_rule;

    FiringStats & operator+=(const FiringStats &o);
};

/// Registry of rules plus the firing loop.
class RuleEngine
{
    std::vector<std::unique_ptr<Rule>> rules_;
    RuleFamilies families_;
    Scoring scoring_;
    std::optional<uint64_t> shuffle_seed_;
    std::set<std::pair<int, Binding>> fired_;

    public:
    /// The built-in library, filtered by `families`.
    explicit RuleEngine(RuleFamilies families = RuleFamilies::all(), Scoring scoring = {});

    void add_rule(std::unique_ptr<Rule> rule) { rules_.push_back(std::move(rule)); }
    const std::vector<std::unique_ptr<Rule>> & rules() const { return rules_; }
    bool enabled(const Rule &r) const;
    const RuleFamilies & families() const { return families_; }
    /// Randomizes the order among equally scored matches.
    void shuffle_ties(std::optional<uint64_t> seed) { shuffle_seed_ = seed; }

    double score(const Memo &memo, int rule, const Binding &b, const std::map<GroupId, int> &heights) const;
    /// Unfired matches of the enabled rules, best first.
    std::vector<RuleMatch> pending(const Memo &memo) const;
    /// Fires matches until none are pending or `budget` firings were spent.
    FiringStats fire_until_fixpoint(Memo &memo, std::size_t budget = 200000);
};

/// Shallowest derivation depth per group; leaves are 0.
std::map<GroupId, int> group_heights(const Memo &memo);

/// Registers the base tables' snapshots over `points` and the deltas between consecutive ones, the trivial positive
/// parts of base tables (with IM-2 enabled), and the required queries at their points.  Returns the root group of
/// each required point.  Throws NameError for unknown tables and ContractError for an empty requirement.
std::map<int, GroupId> seed(Memo &memo, const Arrivals &arrivals, const OutputRequirement &req, const std::vector<int> &points,
                            const RuleFamilies &families);

/// Copies the exprs explored over the template interval (ts, ts + 1) to every other interval of the timeline,
/// shifting scan times.  Throws ContractError if the template interval is not seeded.
void copy_by_translation(Memo &memo, int ts);

/// Merges the snapshots around every empty base-table delta and drops self-referencing merge exprs.  Returns
/// whether anything changed.
bool prune_empty_deltas(Memo &memo, const Arrivals &arrivals);

/// A previously materialized relation offered to the planner as a scan, optionally declared equal to a slot of a
/// base table's TVR.
struct StateDecl
{
    std::string id;
    Schema schema;
    int available_from = 0;
    std::optional<std::string> table;
    std::optional<Slot> slot;
};

/// Adds a StateScan group for `decl`, merged into the declared slot's group if any.  Throws SchemaError if the schema
/// does not match the slot's and ContractError if the id is already registered.
GroupId register_state(Memo &memo, const StateDecl &decl);

struct ExploreOptions
{
    RuleFamilies families = RuleFamilies::all();
    Scoring scoring;
    std::size_t budget = 200000;
    bool translation_copy = true;
    int seed_interval = 0;
    std::optional<uint64_t> shuffle_seed;
    std::vector<StateDecl> states;
};

struct Exploration
{
    Memo memo;
    /// Required point → root group (canonicalize with memo.find).
    std::map<int, GroupId> roots;
    FiringStats stats;
};

Exploration explore(const Arrivals &arrivals, const OutputRequirement &req, const ExploreOptions &options = {});

/// Checks every group, slot and part edge of `memo` against the data: all exprs of a group agree, snapshots and
/// deltas compose under the TVR's merge operator, and part edges recombine to their parent.  Returns violations.
std::vector<std::string> verify_memo(const Memo &memo, const Arrivals &arrivals);

}
