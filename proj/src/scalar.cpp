#include <tvr/scalar.hpp>

#include <algorithm>
#include <tvr/errors.hpp>

namespace tvr {

namespace {

struct OpInfo { Scalar::Op op; std::string_view name; std::size_t arity; };

constexpr OpInfo OPS[] = {
    { Scalar::Op::Col, "col", 0 },     { Scalar::Op::Lit, "lit", 0 },   { Scalar::Op::Add, "+", 2 },
    { Scalar::Op::Sub, "-", 2 },       { Scalar::Op::Mul, "*", 2 },     { Scalar::Op::Div, "/", 2 },
    { Scalar::Op::Neg, "neg", 1 },     { Scalar::Op::Eq, "=", 2 },      { Scalar::Op::Ne, "<>", 2 },
    { Scalar::Op::Lt, "<", 2 },        { Scalar::Op::Le, "<=", 2 },     { Scalar::Op::Gt, ">", 2 },
    { Scalar::Op::Ge, ">=", 2 },       { Scalar::Op::And, "and", 2 },   { Scalar::Op::Or, "or", 2 },
    { Scalar::Op::Not, "not", 1 },     { Scalar::Op::IsNull, "is_null", 1 }, { Scalar::Op::If, "if", 3 },
};

bool is_numeric(const Value &v) { return v.index() == 1 or v.index() == 2; }

double as_double(const Value &v)
{
    return v.index() == 1 ? double(std::get<int64_t>(v)) : std::get<double>(v);
}

Value arith(Scalar::Op op, const Value &a, const Value &b)
{
    if (is_null(a) or is_null(b)) return std::monostate{};
    if (not is_numeric(a) or not is_numeric(b))
        throw TypeError("arithmetic over " + to_string(a) + " and " + to_string(b));
    if (op == Scalar::Op::Div) {
        double d = as_double(b);
        if (d == 0.0) return std::monostate{};
        return as_double(a) / d;
    }
    if (a.index() == 1 and b.index() == 1) {
        auto x = std::get<int64_t>(a), y = std::get<int64_t>(b);
        switch (op) {
            case Scalar::Op::Add: return x + y;
            case Scalar::Op::Sub: return x - y;
            default: return x * y;
        }
    }
    double x = as_double(a), y = as_double(b);
    switch (op) {
        case Scalar::Op::Add: return x + y;
        case Scalar::Op::Sub: return x - y;
        default: return x * y;
    }
}

int compare(const Value &a, const Value &b)
{
    if (is_numeric(a) and is_numeric(b)) {
        if (a.index() == 1 and b.index() == 1) {
            auto x = std::get<int64_t>(a), y = std::get<int64_t>(b);
            return x < y ? -1 : x > y;
        }
        double x = as_double(a), y = as_double(b);
        return x < y ? -1 : x > y;
    }
    if (a.index() == 3 and b.index() == 3) return std::get<std::string>(a).compare(std::get<std::string>(b));
    throw TypeError("cannot compare " + to_string(a) + " with " + to_string(b));
}

}

std::string_view to_string(Scalar::Op op)
{
    for (auto &i : OPS) if (i.op == op) return i.name;
    return "?";
}

Scalar::Op scalar_op_from_string(std::string_view s)
{
    for (auto &i : OPS) if (i.name == s) return i.op;
    throw ParseError("unknown scalar operator '" + std::string(s) + "'");
}

std::size_t arity(Scalar::Op op)
{
    for (auto &i : OPS) if (i.op == op) return i.arity;
    return 0;
}

std::string Scalar::to_string() const
{
    switch (op) {
        case Op::Col: return column;
        case Op::Lit:
            if (tvr::is_null(literal)) return "null:" + std::string(tvr::to_string(literal_kind));
            return tvr::to_string(literal);
        case Op::Neg: return "-" + args[0]->to_string();
        case Op::Not: return "NOT " + args[0]->to_string();
        case Op::IsNull: return "(" + args[0]->to_string() + " IS NULL)";
        case Op::If:
            return "IF(" + args[0]->to_string() + ", " + args[1]->to_string() + ", " + args[2]->to_string() + ")";
        case Op::And: return "(" + args[0]->to_string() + " AND " + args[1]->to_string() + ")";
        case Op::Or: return "(" + args[0]->to_string() + " OR " + args[1]->to_string() + ")";
        default:
            return "(" + args[0]->to_string() + " " + std::string(tvr::to_string(op)) + " " + args[1]->to_string() + ")";
    }
}

ScalarPtr col(std::string name)
{
    auto s = std::make_shared<Scalar>();
    s->op = Scalar::Op::Col;
    s->column = std::move(name);
    return s;
}

ScalarPtr lit(Value v)
{
    auto s = std::make_shared<Scalar>();
    s->op = Scalar::Op::Lit;
    switch (v.index()) {
        case 2: s->literal_kind = Kind::Float; break;
        case 3: s->literal_kind = Kind::Text; break;
        default: s->literal_kind = Kind::Int; break;
    }
    s->literal = std::move(v);
    return s;
}

ScalarPtr null_of(Kind k)
{
    auto s = std::make_shared<Scalar>();
    s->op = Scalar::Op::Lit;
    s->literal_kind = k;
    return s;
}

ScalarPtr make(Scalar::Op op, std::vector<ScalarPtr> args)
{
    if (args.size() != arity(op))
        throw ParseError("operator '" + std::string(to_string(op)) + "' takes " + std::to_string(arity(op)) +
                         " arguments");
    auto s = std::make_shared<Scalar>();
    s->op = op;
    s->args = std::move(args);
    return s;
}

ScalarPtr conjunction(std::vector<ScalarPtr> parts)
{
    if (parts.empty()) return lit(int64_t(1));
    auto e = parts[0];
    for (std::size_t i = 1; i != parts.size(); ++i) e = make(Scalar::Op::And, { e, parts[i] });
    return e;
}

bool truthy(const Value &v)
{
    if (auto i = std::get_if<int64_t>(&v)) return *i != 0;
    if (auto d = std::get_if<double>(&v)) return *d != 0.0;
    return false;
}

Value BoundScalar::eval(const Tuple &t) const
{
    using Op = Scalar::Op;
    switch (op) {
        case Op::Col: return t[index];
        case Op::Lit: return literal;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
            return arith(op, args[0].eval(t), args[1].eval(t));
        case Op::Neg: {
            auto v = args[0].eval(t);
            if (is_null(v)) return v;
            if (auto i = std::get_if<int64_t>(&v)) return -*i;
            if (auto d = std::get_if<double>(&v)) return -*d;
            throw TypeError("cannot negate " + tvr::to_string(v));
        }
        case Op::Eq: case Op::Ne: case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: {
            auto a = args[0].eval(t), b = args[1].eval(t);
            if (is_null(a) or is_null(b)) return int64_t(0);
            int c = compare(a, b);
            bool r = op == Op::Eq ? c == 0 : op == Op::Ne ? c != 0 : op == Op::Lt ? c < 0
                   : op == Op::Le ? c <= 0 : op == Op::Gt ? c > 0 : c >= 0;
            return int64_t(r);
        }
        case Op::And: return int64_t(args[0].test(t) and args[1].test(t));
        case Op::Or: return int64_t(args[0].test(t) or args[1].test(t));
        case Op::Not: return int64_t(not args[0].test(t));
        case Op::IsNull: return int64_t(is_null(args[0].eval(t)));
        case Op::If: return args[0].test(t) ? args[1].eval(t) : args[2].eval(t);
    }
    return std::monostate{};
}

bool BoundScalar::test(const Tuple &t) const { return truthy(eval(t)); }

BoundScalar bind(const Scalar &e, const Schema &s)
{
    type_of(e, s);
    BoundScalar b;
    b.op = e.op;
    if (e.op == Scalar::Op::Col) b.index = s.index_of(e.column);
    b.literal = e.literal;
    for (auto &a : e.args) b.args.push_back(bind(*a, s));
    return b;
}

std::pair<Kind, bool> type_of(const Scalar &e, const Schema &s)
{
    using Op = Scalar::Op;
    switch (e.op) {
        case Op::Col: {
            auto &c = s[s.index_of(e.column)];
            return { c.kind, c.nullable };
        }
        case Op::Lit: return { e.literal_kind, tvr::is_null(e.literal) };
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: {
            auto [ka, na] = type_of(*e.args[0], s);
            auto [kb, nb] = type_of(*e.args[1], s);
            if (ka == Kind::Text or kb == Kind::Text) throw TypeError("arithmetic over text in " + e.to_string());
            Kind k = (e.op == Op::Div or ka == Kind::Float or kb == Kind::Float) ? Kind::Float : Kind::Int;
            return { k, na or nb or e.op == Op::Div };
        }
        case Op::Neg: {
            auto t = type_of(*e.args[0], s);
            if (t.first == Kind::Text) throw TypeError("negation of text in " + e.to_string());
            return t;
        }
        case Op::Eq: case Op::Ne: case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: {
            auto ka = type_of(*e.args[0], s).first, kb = type_of(*e.args[1], s).first;
            if ((ka == Kind::Text) != (kb == Kind::Text)) throw TypeError("comparison of text with number in " + e.to_string());
            return { Kind::Int, false };
        }
        case Op::And: case Op::Or: case Op::Not: case Op::IsNull:
            for (auto &a : e.args) type_of(*a, s);
            return { Kind::Int, false };
        case Op::If: {
            type_of(*e.args[0], s);
            auto [ka, na] = type_of(*e.args[1], s);
            auto [kb, nb] = type_of(*e.args[2], s);
            bool a_null = e.args[1]->op == Op::Lit and tvr::is_null(e.args[1]->literal);
            bool b_null = e.args[2]->op == Op::Lit and tvr::is_null(e.args[2]->literal);
            if (a_null) return { kb, true };
            if (b_null) return { ka, true };
            if (ka == kb) return { ka, na or nb };
            if (ka != Kind::Text and kb != Kind::Text) return { Kind::Float, na or nb };
            throw TypeError("IF branches disagree in " + e.to_string());
        }
    }
    return { Kind::Int, true };
}

std::vector<std::pair<std::string, std::string>> equi_keys(const ScalarPtr &pred, const Schema &left, const Schema &right)
{
    std::vector<std::pair<std::string, std::string>> keys;
    std::vector<const Scalar*> stack{ pred.get() };
    while (not stack.empty()) {
        auto e = stack.back();
        stack.pop_back();
        if (e->op == Scalar::Op::And) {
            stack.push_back(e->args[1].get());
            stack.push_back(e->args[0].get());
            continue;
        }
        if (e->op != Scalar::Op::Eq) continue;
        auto &a = *e->args[0], &b = *e->args[1];
        if (a.op != Scalar::Op::Col or b.op != Scalar::Op::Col) continue;
        if (left.has(a.column) and right.has(b.column))
            keys.emplace_back(a.column, b.column);
        else if (left.has(b.column) and right.has(a.column))
            keys.emplace_back(b.column, a.column);
    }
    return keys;
}

void referenced_columns(const Scalar &e, std::vector<std::string> &out)
{
    if (e.op == Scalar::Op::Col) {
        if (std::ranges::find(out, e.column) == out.end()) out.push_back(e.column);
    }
    for (auto &a : e.args) referenced_columns(*a, out);
}

}
