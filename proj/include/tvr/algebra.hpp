#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <tvr/bag.hpp>
#include <tvr/scalar.hpp>
#include <vector>

namespace tvr {

/// Operator kinds shared by query trees and the memo.  The first group are the user-facing logical operators; the
/// rest are introduced by rewrites.
enum class OpKind {
    Scan,
    Filter,
    Project,
    InnerJoin,
    LeftOuterJoin,
    LeftSemiJoin,
    LeftAntiJoin,
    Aggregate,
    Union,
    /// Snapshot of a base table as of time `t`.
    ScanSnapshot,
    /// Delta of a base table over (`t`, `t2`).
    ScanDelta,
    /// Previously materialized state, by id in `table`.
    StateScan,
    Empty,
    AggPartial,
    AggFinal,
    AttrMerge,
    AttrDiff,
    Difference,
    /// Children (L, R, ΔL, ΔR).
    DeltaInnerJoin,
    /// Children (L, R, ΔL, ΔR).
    DeltaLeftOuterJoin,
    /// Children (ΔQ^D, Q, L): padding changes of left tuples whose match status flips.
    OjvIndirect,
};

std::string_view to_string(OpKind k);
OpKind op_kind_from_string(std::string_view s);
/// Number of children, or -1 if variable.
int arity(OpKind k);
bool is_join(OpKind k);
bool is_leaf(OpKind k);

struct Projection
{
    std::string name;
    ScalarPtr expr;
};

/// An operator with its parameters.  Value type; compared by `signature()`.
struct Operator
{
    OpKind kind = OpKind::Scan;
    std::string table;
    int t = -1;
    int t2 = -1;
    ScalarPtr pred;
    std::vector<Projection> projections;
    std::shared_ptr<const AggSpec> agg;
    /// Output schema of leaves that do not name a catalog table (Empty, StateScan).
    std::shared_ptr<const Schema> schema;

    /// Canonical text of kind and parameters, used for dedup and dumps.
    std::string signature() const;
};

Operator scan_op(std::string table);
Operator filter_op(ScalarPtr pred);
Operator project_op(std::vector<Projection> cols);
Operator join_op(OpKind kind, ScalarPtr pred);
Operator aggregate_op(AggSpec spec);
Operator union_op();
Operator snapshot_op(std::string table, int t);
Operator delta_op(std::string table, int t, int t2);
Operator empty_op(Schema schema);
/// Parameterless operator of `kind`, optionally with a predicate or aggregate.
Operator simple_op(OpKind kind, ScalarPtr pred = nullptr, std::shared_ptr<const AggSpec> agg = nullptr);

struct LogicalNode;
using LogicalPtr = std::shared_ptr<const LogicalNode>;

/// A query tree.
struct LogicalNode
{
    Operator op;
    std::vector<LogicalPtr> children;

    std::string to_string() const;
};

LogicalPtr node(Operator op, std::vector<LogicalPtr> children = {});

/// Small builder for test workloads: `Q::scan("S").filter(...).left_outer_join(Q::scan("R"), ...)`.
class Q
{
    LogicalPtr n_;

    public:
    explicit Q(LogicalPtr n) : n_(std::move(n)) { }
    static Q scan(std::string table) { return Q(node(scan_op(std::move(table)))); }
    Q filter(ScalarPtr pred) const { return Q(node(filter_op(std::move(pred)), { n_ })); }
    Q project(std::vector<Projection> cols) const { return Q(node(project_op(std::move(cols)), { n_ })); }
    Q join(const Q &r, ScalarPtr pred) const { return Q(node(join_op(OpKind::InnerJoin, std::move(pred)), { n_, r.n_ })); }
    Q left_outer_join(const Q &r, ScalarPtr pred) const {
        return Q(node(join_op(OpKind::LeftOuterJoin, std::move(pred)), { n_, r.n_ }));
    }
    Q semi_join(const Q &r, ScalarPtr pred) const {
        return Q(node(join_op(OpKind::LeftSemiJoin, std::move(pred)), { n_, r.n_ }));
    }
    Q anti_join(const Q &r, ScalarPtr pred) const {
        return Q(node(join_op(OpKind::LeftAntiJoin, std::move(pred)), { n_, r.n_ }));
    }
    Q aggregate(AggSpec spec) const { return Q(node(aggregate_op(std::move(spec)), { n_ })); }
    Q union_all(const Q &r) const { return Q(node(union_op(), { n_, r.n_ })); }
    const LogicalPtr & get() const { return n_; }
    operator LogicalPtr() const { return n_; }
};

using Catalog = std::map<std::string, Schema, std::less<>>;
using Database = std::map<std::string, BagRelation, std::less<>>;

/// Output schema of `op` given its children's schemas.  Leaves read `catalog`.
Schema output_schema(const Operator &op, const std::vector<const Schema*> &children, const Catalog &catalog);
Schema output_schema(const LogicalNode &n, const Catalog &catalog);

/// Applies a non-leaf operator to materialized inputs.
BagRelation apply_operator(const Operator &op, const std::vector<const BagRelation*> &inputs);

/// Null-pads every row of `left` to the schema of `left ⟕ right`.
BagRelation pad_right(const BagRelation &left, const Schema &right);

/// Reference evaluator: Scan reads `db`, everything else is apply_operator over nested-loop semantics.
BagRelation evaluate_batch(const LogicalNode &expr, const Database &db);

/// Projection that null-pads a relation of schema `left` to the schema of `left ⟕ right`.
std::vector<Projection> padding_projection(const Schema &left, const Schema &right);

}
