#pragma once

#include <map>
#include <optional>
#include <string>
#include <tvr/algebra.hpp>
#include <vector>

namespace tvr {

/// Time points are the dense indices 0..k-1; labels are cosmetic.
class Timeline
{
    std::vector<std::string> labels_;

    public:
    Timeline() = default;
    explicit Timeline(std::size_t k);
    explicit Timeline(std::vector<std::string> labels);

    std::size_t size() const { return labels_.size(); }
    int last() const { return int(labels_.size()) - 1; }
    const std::string & label(int t) const;
    const std::vector<std::string> & labels() const { return labels_; }
    bool contains(int t) const { return t >= 0 and t < int(labels_.size()); }
    /// Throws RangeError.
    void check(int t) const;
    /// Accepts a label or a decimal index.
    int parse(std::string_view s) const;
};

/// The arrival script of one base table.  `deltas[t]` is the data newly available at t.
struct TvrInput
{
    std::string table;
    Schema schema;
    std::map<int, BagRelation> deltas;
    MergeOperator perspective;
    std::size_t points = 1;

    /// Throws SchemaError / ContractError if a delta does not fit or a snapshot over-retracts.
    void validate() const;
};

BagRelation snapshot_at(const TvrInput &input, int t);
/// Requires t < t2.
BagRelation delta_between(const TvrInput &input, int t, int t2);

/// All base tables of a session.
struct Arrivals
{
    Timeline timeline;
    std::map<std::string, TvrInput, std::less<>> inputs;

    const TvrInput & input(std::string_view table) const;
    Catalog catalog() const;
    Database database_at(int t) const;
    /// Adds an insert-only or mixed delta row; creates the input on first use.
    void add(const std::string &table, int t, Tuple row, int64_t mult = 1);
    void declare(const std::string &table, Schema schema);
};

/// Q_i per time point; an empty optional is the empty query.
struct OutputRequirement
{
    std::vector<LogicalPtr> queries;

    /// Q at the last point only (the PDW setting).
    static OutputRequirement at_end(std::size_t k, LogicalPtr q);
    /// Q at every point (the IVM setting).
    static OutputRequirement at_every(std::size_t k, LogicalPtr q);
    std::vector<int> points() const;
    void validate(const Timeline &timeline) const;
};

/// Value of a snapshot, delta or empty leaf on the arrivals.  StateScan is not a leaf of the arrivals.
BagRelation leaf_relation(const Arrivals &arrivals, const Operator &op);

/// evaluate_batch over the snapshots of all tables as of t.
BagRelation evaluate_on_accumulated(const LogicalNode &expr, const Arrivals &arrivals, int t);

}
