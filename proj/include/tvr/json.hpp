#pragma once

#include <json.hpp>
#include <string>
#include <tvr/algebra.hpp>
#include <tvr/physical.hpp>
#include <tvr/runtime.hpp>
#include <tvr/timeline.hpp>

namespace tvr {

using Json = nlohmann::json;

/// Parses JSON text; syntax errors become ParseError with line and column.
Json parse_json(const std::string &text, const std::string &source = "input");
Json read_json_file(const std::string &path);

Json to_json(const Value &v);
/// Throws ParseError if `j` does not fit the column.
Value value_from_json(const Json &j, const Column &c, const std::string &where = "value");

Json to_json(const Schema &s);
Schema schema_from_json(const Json &j, const std::string &where = "schema");

/// Rows as `{"values": [...], "mult": n}` objects in tuple order.
Json rows_to_json(const BagRelation &r);
/// Accepts rows as plain arrays (multiplicity 1) or `{"values", "mult"}` objects.
BagRelation rows_from_json(const Json &j, const Schema &s, const std::string &where = "rows");
Json to_json(const BagRelation &r);
BagRelation relation_from_json(const Json &j, const std::string &where = "relation");

/// `{"col": name}`, `{"lit": v}` (`{"lit": null, "kind": k}` for typed nulls) or `{"op": name, "args": [...]}`.  When
/// parsing, a bare string is a column and a bare number or boolean a literal.
Json to_json(const Scalar &e);
ScalarPtr scalar_from_json(const Json &j, const std::string &where = "expr");

Json to_json(const AggSpec &a);
AggSpec agg_from_json(const Json &j, const std::string &where = "agg");

Json to_json(const Operator &op);
Operator operator_from_json(const Json &j, const std::string &where = "op");

/// An operator object plus `"inputs"`; `kind` also accepts snake_case names (`scan`, `left_outer_join`, ...).
Json to_json(const LogicalNode &n);
LogicalPtr query_from_json(const Json &j, const std::string &where = "query");

Json to_json(const Trait &t);
Trait trait_from_json(const Json &j, const std::string &where = "trait");

Json to_json(const TimedPlan &p, const CostFunction *f = nullptr);
TimedPlan plan_from_json(const Json &j);

Json to_json(const RunReport &r, const CostFunction *f = nullptr);

}
