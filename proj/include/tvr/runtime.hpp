#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tvr/physical.hpp>
#include <tvr/timeline.hpp>
#include <vector>

namespace tvr {

/// Saved relations by id.  With a directory, every saved state is also written as one JSON file and states found
/// there are readable.
class StateStore
{
    public:
    struct Entry
    {
        BagRelation relation;
        Trait trait;
        int saved_at = 0;
    };

    StateStore() = default;
    /// Creates the directory if needed.
    explicit StateStore(std::filesystem::path dir);

    void save(const std::string &id, BagRelation relation, Trait trait, int t);
    /// Throws StateError if the state is missing or was saved after `t`.
    const BagRelation & load(const std::string &id, int t) const;
    bool contains(const std::string &id) const;
    std::vector<std::string> ids() const;
    const std::optional<std::filesystem::path> & dir() const { return dir_; }

    private:
    mutable std::map<std::string, Entry> entries_;
    std::optional<std::filesystem::path> dir_;

    const Entry * find(const std::string &id) const;
};

struct NodeRun
{
    int node = -1;
    PhysKind kind = PhysKind::FilterExec;
    int64_t tuples = 0;
    double cost = 0;
};

struct TimeReport
{
    int time = 0;
    std::vector<NodeRun> nodes;
    double cost = 0;
    /// Tuples delivered by Exchange.
    int64_t exchanged = 0;
    /// Tuples produced by compute operators (no scans, Exchange, Save or Load).
    int64_t computed = 0;
    std::optional<BagRelation> output;
    /// Set when the output was checked against the batch oracle.
    std::optional<bool> oracle_match;
};

struct RunReport
{
    std::vector<TimeReport> times;
    CostVector cost;
    /// Every node's output, when requested.
    std::map<int, BagRelation> relations;

    bool operator==(const RunReport &o) const;
};

struct ExecOptions
{
    CostProfile profile;
    bool validate = true;
    bool keep_relations = false;
    /// Receives every saved output; also the source of registered states read by StateScan.
    StateStore *store = nullptr;
};

/// Runs every node at its time, children first and ties by id.  Outputs consumed at a later time go through the
/// state store.  Throws StateError if a load finds nothing and ValidationError if a required output differs from
/// evaluate_on_accumulated.
RunReport execute(const TimedPlan &plan, const Arrivals &arrivals, const OutputRequirement &req,
                  const ExecOptions &options = {});

/// Headline tuple count per time: Exchange-delivered tuples under a profile that only charges exchanges, compute
/// outputs otherwise.
std::vector<int64_t> account_tuples(const RunReport &report, const CostProfile &profile);

/// Id under which a node's output is saved.
std::string state_id(const TimedPlan &plan, int node);

}
