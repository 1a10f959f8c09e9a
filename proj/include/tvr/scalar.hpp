#pragma once

#include <memory>
#include <string>
#include <tvr/value.hpp>
#include <utility>
#include <vector>

namespace tvr {

struct Scalar;
using ScalarPtr = std::shared_ptr<const Scalar>;

/// A scalar expression over the columns of one tuple.  Booleans are Int 0/1; comparisons involving null are false.
struct Scalar
{
    enum class Op { Col, Lit, Add, Sub, Mul, Div, Neg, Eq, Ne, Lt, Le, Gt, Ge, And, Or, Not, IsNull, If };

    Op op = Op::Lit;
    std::string column;
    Value literal;
    /// Declared kind of a null literal, so that padding columns get a type.
    Kind literal_kind = Kind::Int;
    std::vector<ScalarPtr> args;

    std::string to_string() const;
};

std::string_view to_string(Scalar::Op op);
Scalar::Op scalar_op_from_string(std::string_view s);
std::size_t arity(Scalar::Op op);

ScalarPtr col(std::string name);
ScalarPtr lit(Value v);
ScalarPtr null_of(Kind k);
ScalarPtr make(Scalar::Op op, std::vector<ScalarPtr> args);
inline ScalarPtr eq(ScalarPtr a, ScalarPtr b) { return make(Scalar::Op::Eq, { std::move(a), std::move(b) }); }
inline ScalarPtr if_(ScalarPtr c, ScalarPtr a, ScalarPtr b) { return make(Scalar::Op::If, { std::move(c), std::move(a), std::move(b) }); }
inline ScalarPtr is_null(ScalarPtr a) { return make(Scalar::Op::IsNull, { std::move(a) }); }
inline ScalarPtr neg(ScalarPtr a) { return make(Scalar::Op::Neg, { std::move(a) }); }
ScalarPtr conjunction(std::vector<ScalarPtr> parts);

/// A Scalar with column references resolved to positions.
struct BoundScalar
{
    Scalar::Op op;
    std::size_t index = 0;
    Value literal;
    std::vector<BoundScalar> args;

    Value eval(const Tuple &t) const;
    bool test(const Tuple &t) const;
};

/// Throws NameError for unknown columns and TypeError for ill-typed expressions.
BoundScalar bind(const Scalar &e, const Schema &s);
/// Kind and nullability of `e` over `s`.
std::pair<Kind, bool> type_of(const Scalar &e, const Schema &s);
bool truthy(const Value &v);

/// Column pairs (left name, right name) of the top-level equality conjuncts of `pred`.
std::vector<std::pair<std::string, std::string>> equi_keys(const ScalarPtr &pred, const Schema &left, const Schema &right);

/// Names of all columns `e` references.
void referenced_columns(const Scalar &e, std::vector<std::string> &out);

}
