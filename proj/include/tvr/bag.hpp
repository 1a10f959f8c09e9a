#pragma once

#include <map>
#include <string>
#include <tvr/value.hpp>
#include <vector>

namespace tvr {

/// A bag of tuples with signed multiplicities.  Always normalized: no entry has multiplicity 0.  A relation whose
/// multiplicities are all positive is a snapshot; anything else is a delta.
class BagRelation
{
    Schema schema_;
    std::map<Tuple, int64_t> rows_;

    public:
    BagRelation() = default;
    explicit BagRelation(Schema schema) : schema_(std::move(schema)) { }

    const Schema & schema() const { return schema_; }
    const std::map<Tuple, int64_t> & rows() const { return rows_; }

    /// Adds `mult` copies of `t`.  Checks arity, kinds and nullability.
    void add(Tuple t, int64_t mult = 1);
    /// As add() but skips the schema checks; for operators that build rows from checked inputs.
    void add_unchecked(Tuple t, int64_t mult);
    int64_t multiplicity(const Tuple &t) const;

    bool empty() const { return rows_.empty(); }
    /// Number of distinct tuples.
    std::size_t distinct() const { return rows_.size(); }
    /// Sum of absolute multiplicities, the tuple count used for costing.
    int64_t tuple_count() const;
    /// Sum of signed multiplicities.
    int64_t net_count() const;
    bool is_snapshot() const;

    /// Replaces the schema (e.g. to attach a key); the column lists must be compatible.
    BagRelation with_schema(Schema schema) const;

    bool operator==(const BagRelation &other) const;
    std::string to_string() const;
};

/// Equal rows and multiplicities, floats within `tol` (absolute or relative).
bool approx_equal(const BagRelation &a, const BagRelation &b, double tol = 1e-9);

/// ⊎: multiplicities add.
BagRelation additive_union(const BagRelation &a, const BagRelation &b);
/// a − b, the inverse of ⊎.
BagRelation bag_difference(const BagRelation &a, const BagRelation &b);
BagRelation negate(const BagRelation &a);

enum class Combiner { Sum, Count, AvgPair, Min, Max, FullState };
std::string_view to_string(Combiner c);
bool invertible(Combiner c);

struct MergeOperator
{
    enum class Kind { MultiplicityUnion, AttributeMerge };

    Kind kind = Kind::MultiplicityUnion;
    /// For AttributeMerge: combiner per non-key column.
    std::vector<std::pair<std::string, Combiner>> combiners;

    static MergeOperator multiplicity() { return {}; }
    static MergeOperator attribute(std::vector<std::pair<std::string, Combiner>> combiners) {
        return { Kind::AttributeMerge, std::move(combiners) };
    }
    bool invertible() const;
    bool operator==(const MergeOperator&) const = default;
};

/// +^γ: rows joined on the key, columns combined per `m`, unmatched rows pass through.
BagRelation attribute_merge(const BagRelation &a, const BagRelation &b, const MergeOperator &m);
/// −^γ: the state `d` with attribute_merge(b, d, m) == a, up to zero states.
BagRelation attribute_inverse(const BagRelation &a, const BagRelation &b, const MergeOperator &m);
/// Dispatches on `m.kind`.
BagRelation merge(const BagRelation &a, const BagRelation &b, const MergeOperator &m);
BagRelation inverse(const BagRelation &a, const BagRelation &b, const MergeOperator &m);
/// Drops state rows whose combined columns are all zero or null.
BagRelation drop_zero_states(const BagRelation &a, const MergeOperator &m);

enum class AggFunc { SUM, COUNT, AVG, MIN, MAX };
std::string_view to_string(AggFunc f);
AggFunc agg_func_from_string(std::string_view s);

struct AggCall
{
    std::string output;
    AggFunc fn = AggFunc::SUM;
    /// Input column.  Empty for COUNT(*).
    std::string input;

    bool operator==(const AggCall&) const = default;
};

/// Name of the contributing-tuple count column of every aggregate state.
inline constexpr std::string_view COUNT_COLUMN = "$count";

/// Group-by aggregation in Initialize/Iterate/Merge/Final form.  The state relation is keyed by the group keys and
/// carries, per call, the columns `<out>$sum`, `<out>$n`, `<out>$count`, `<out>$min` or `<out>$max`, plus the
/// contributing count `$count`.
struct AggSpec
{
    std::vector<std::string> group_keys;
    std::vector<AggCall> aggregates;

    bool invertible() const;
    Schema state_schema(const Schema &input) const;
    Schema output_schema(const Schema &input) const;
    MergeOperator merge_operator() const;

    /// Empty state.
    BagRelation initialize(const Schema &input) const;
    /// Folds every row of `input`, weighted by its multiplicity, into `state`.  Negative multiplicities on MIN/MAX
    /// throw NotInvertibleError.
    void iterate(BagRelation &state, const BagRelation &input) const;
    /// initialize() followed by iterate().
    BagRelation partial(const BagRelation &input) const;
    BagRelation merge(const BagRelation &a, const BagRelation &b) const;
    BagRelation final(const BagRelation &state) const;

    std::string to_string() const;
    bool operator==(const AggSpec&) const = default;
};

/// Converts an aggregate state to final rows, dropping groups with zero contributing tuples.
BagRelation agg_final(const BagRelation &state, const AggSpec &spec);

}
