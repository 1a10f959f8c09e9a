#pragma once

#include <ostream>
#include <random>
#include <tvr/physical.hpp>
#include <tvr/session.hpp>
#include <tvr/timeline.hpp>
#include <variant>

namespace std {
inline ostream & operator<<(ostream &out, monostate) { return out << "null"; }
}

namespace tvr {
inline void PrintTo(const BagRelation &r, std::ostream *out) { *out << r.to_string(); }
}

namespace tvr::test {

/// The sales/returns running example: sales(o_id, cat, price), returns(ro_id, cost) over two points.
struct Example1
{
    Arrivals arrivals;
    LogicalPtr sales_status;
    LogicalPtr summary;
};

/// `with_o4_return` adds a returns row for o4 at the second point.
Example1 example1(bool with_o4_return = false);

Tuple row(std::initializer_list<Value> values);

/// Random relation with `rows` draws over small domains.  Multiplicities are in [1, max_mult].
BagRelation random_relation(std::mt19937_64 &rng, const Schema &schema, int rows, int max_mult = 2, int domain = 4);
/// Random delta: mixes inserts with retractions of rows present in `base` (never over-retracting).
BagRelation random_delta(std::mt19937_64 &rng, const BagRelation &base, int rows, int domain = 4);

/// Two-column integer schema (k, v) with optional nullable v.
Schema kv_schema(const std::string &prefix, bool nullable = false);

/// Random search space: `classes` classes over `points` times, mostly acyclic with occasional back edges, random
/// per-time costs, by-products and leaf availability.  Roots sit on class 0 at a random nonempty set of times.
PlanSpace random_plan_space(std::mt19937_64 &rng, int classes, int points);

/// Query shapes over the tables of random_session: a(k, v), b(bk, bv) and c(k, v).
enum class Shape { Filter, Project, Union, Join, OuterJoin, Aggregate, OuterJoinSummary, JoinCount, FilteredOuterJoin };
constexpr int shape_count = 9;
std::string_view to_string(Shape s);
LogicalPtr shape_query(Shape s);

struct RandomSessionOptions
{
    int min_points = 2;
    int max_points = 4;
    /// Rows per table at the first point and per later delta.
    int rows = 5;
    bool retractions = true;
    int domain = 4;
    /// Redraw empty deltas.
    bool nonempty_deltas = false;
};

/// A random session for `shape`: nullable v columns, insert-only first snapshots, later deltas that mix inserts with
/// retractions, outputs at the end or at every point, uniform or increasing weights and a random cost profile.
Session random_session(std::mt19937_64 &rng, Shape shape, const RandomSessionOptions &o = {});

}
