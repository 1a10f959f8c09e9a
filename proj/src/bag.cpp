#include <tvr/bag.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tvr/errors.hpp>

namespace tvr {

namespace {

void check_same_schema(const BagRelation &a, const BagRelation &b, const char *op)
{
    if (not a.schema().compatible(b.schema()))
        throw SchemaError(std::string(op) + ": schema mismatch " + a.schema().to_string() + " vs " +
                          b.schema().to_string());
}

Value add_values(const Value &a, const Value &b)
{
    if (is_null(a)) return b;
    if (is_null(b)) return a;
    if (auto x = std::get_if<int64_t>(&a)) {
        if (auto y = std::get_if<int64_t>(&b)) return *x + *y;
        if (auto y = std::get_if<double>(&b)) return double(*x) + *y;
    }
    if (auto x = std::get_if<double>(&a)) {
        if (auto y = std::get_if<int64_t>(&b)) return *x + double(*y);
        if (auto y = std::get_if<double>(&b)) return *x + *y;
    }
    throw TypeError("cannot add " + to_string(a) + " and " + to_string(b));
}

Value negate_value(const Value &a)
{
    if (is_null(a)) return a;
    if (auto x = std::get_if<int64_t>(&a)) return -*x;
    if (auto x = std::get_if<double>(&a)) return -*x;
    throw TypeError("cannot negate " + to_string(a));
}

Value scale(const Value &a, int64_t m)
{
    if (auto x = std::get_if<int64_t>(&a)) return *x * m;
    if (auto x = std::get_if<double>(&a)) return *x * double(m);
    throw TypeError("cannot scale " + to_string(a));
}

bool is_zero(const Value &v)
{
    if (is_null(v)) return true;
    if (auto x = std::get_if<int64_t>(&v)) return *x == 0;
    if (auto x = std::get_if<double>(&v)) return *x == 0.0;
    return false;
}

Value combine(Combiner c, const Value &a, const Value &b)
{
    switch (c) {
        case Combiner::Sum:
        case Combiner::Count:
        case Combiner::AvgPair:
            return add_values(a, b);
        case Combiner::Min:
            if (is_null(a)) return b;
            if (is_null(b)) return a;
            return std::min(a, b);
        case Combiner::Max:
            if (is_null(a)) return b;
            if (is_null(b)) return a;
            return std::max(a, b);
        case Combiner::FullState:
            return b;
    }
    return a;
}

/// Column plan of an attribute merge: key positions and a combiner for each other position.
struct MergeLayout
{
    std::vector<std::size_t> key;
    std::vector<std::pair<std::size_t, Combiner>> values;
};

MergeLayout layout_of(const Schema &s, const MergeOperator &m)
{
    if (m.kind != MergeOperator::Kind::AttributeMerge)
        throw ContractError("attribute merge requires an AttributeMerge operator");
    MergeLayout l;
    l.key = s.key_indices();
    for (auto &[name, c] : m.combiners) {
        auto i = s.index_of(name);
        auto kind = s[i].kind;
        bool numeric = kind == Kind::Int or kind == Kind::Float;
        if ((c == Combiner::Sum or c == Combiner::Count or c == Combiner::AvgPair) and not numeric)
            throw TypeError("combiner " + std::string(to_string(c)) + " over non-numeric column '" + name + "'");
        l.values.emplace_back(i, c);
    }
    for (std::size_t i = 0; i != s.arity(); ++i) {
        bool covered = std::ranges::find(l.key, i) != l.key.end() or
                       std::ranges::any_of(l.values, [i](auto &p) { return p.first == i; });
        if (not covered) throw TypeError("no combiner for column '" + s[i].name + "'");
    }
    return l;
}

Tuple key_of(const Tuple &t, const std::vector<std::size_t> &key)
{
    Tuple k;
    k.reserve(key.size());
    for (auto i : key) k.push_back(t[i]);
    return k;
}

std::map<Tuple, Tuple> by_key(const BagRelation &r, const MergeLayout &l)
{
    std::map<Tuple, Tuple> out;
    for (auto &[t, m] : r.rows()) {
        if (m != 1) throw ContractError("attribute state rows must have multiplicity 1, got " + std::to_string(m));
        if (not out.emplace(key_of(t, l.key), t).second)
            throw KeyError("duplicate key " + to_string(key_of(t, l.key)) + " in state");
    }
    return out;
}

}

void BagRelation::add(Tuple t, int64_t mult)
{
    if (t.size() != schema_.arity())
        throw SchemaError("tuple " + tvr::to_string(t) + " does not match " + schema_.to_string());
    for (std::size_t i = 0; i != t.size(); ++i) {
        auto &c = schema_[i];
        if (is_null(t[i])) {
            if (not c.nullable) throw SchemaError("null in non-nullable column '" + c.name + "'");
        } else if (not fits(t[i], c.kind)) {
            throw TypeError("value " + tvr::to_string(t[i]) + " does not fit column '" + c.name + "'");
        }
    }
    add_unchecked(std::move(t), mult);
}

void BagRelation::add_unchecked(Tuple t, int64_t mult)
{
    if (mult == 0) return;
    auto [it, fresh] = rows_.try_emplace(std::move(t), mult);
    if (not fresh) {
        it->second += mult;
        if (it->second == 0) rows_.erase(it);
    }
}

int64_t BagRelation::multiplicity(const Tuple &t) const
{
    auto it = rows_.find(t);
    return it == rows_.end() ? 0 : it->second;
}

int64_t BagRelation::tuple_count() const
{
    int64_t n = 0;
    for (auto &[_, m] : rows_) n += m < 0 ? -m : m;
    return n;
}

int64_t BagRelation::net_count() const
{
    int64_t n = 0;
    for (auto &[_, m] : rows_) n += m;
    return n;
}

bool BagRelation::is_snapshot() const
{
    return std::ranges::all_of(rows_, [](auto &r) { return r.second > 0; });
}

BagRelation BagRelation::with_schema(Schema schema) const
{
    if (not schema.compatible(schema_))
        throw SchemaError("incompatible schema " + schema.to_string() + " for " + schema_.to_string());
    BagRelation r(std::move(schema));
    r.rows_ = rows_;
    return r;
}

bool BagRelation::operator==(const BagRelation &other) const
{
    return schema_.compatible(other.schema_) and rows_ == other.rows_;
}

bool approx_equal(const BagRelation &a, const BagRelation &b, double tol)
{
    if (a.distinct() != b.distinct()) return false;
    auto close = [tol](const Value &x, const Value &y) {
        auto dx = std::get_if<double>(&x), dy = std::get_if<double>(&y);
        if (dx and dy) return std::abs(*dx - *dy) <= tol * std::max(1.0, std::max(std::abs(*dx), std::abs(*dy)));
        return x == y;
    };
    for (auto i = a.rows().begin(), j = b.rows().begin(); i != a.rows().end(); ++i, ++j) {
        if (i->second != j->second or i->first.size() != j->first.size()) return false;
        for (std::size_t k = 0; k != i->first.size(); ++k)
            if (not close(i->first[k], j->first[k])) return false;
    }
    return true;
}

std::string BagRelation::to_string() const
{
    std::string s = schema_.to_string() + " {";
    bool first = true;
    for (auto &[t, m] : rows_) {
        s += first ? "" : ", ";
        first = false;
        s += tvr::to_string(t) + ":" + (m > 0 ? "+" : "") + std::to_string(m);
    }
    return s + "}";
}

BagRelation additive_union(const BagRelation &a, const BagRelation &b)
{
    check_same_schema(a, b, "additive_union");
    BagRelation r = a;
    for (auto &[t, m] : b.rows()) r.add_unchecked(t, m);
    return r;
}

BagRelation bag_difference(const BagRelation &a, const BagRelation &b)
{
    check_same_schema(a, b, "bag_difference");
    BagRelation r = a;
    for (auto &[t, m] : b.rows()) r.add_unchecked(t, -m);
    return r;
}

BagRelation negate(const BagRelation &a)
{
    BagRelation r(a.schema());
    for (auto &[t, m] : a.rows()) r.add_unchecked(t, -m);
    return r;
}

std::string_view to_string(Combiner c)
{
    switch (c) {
        case Combiner::Sum: return "sum";
        case Combiner::Count: return "count";
        case Combiner::AvgPair: return "avg";
        case Combiner::Min: return "min";
        case Combiner::Max: return "max";
        case Combiner::FullState: return "full";
    }
    return "?";
}

bool invertible(Combiner c) { return c == Combiner::Sum or c == Combiner::Count or c == Combiner::AvgPair; }

bool MergeOperator::invertible() const
{
    return kind == Kind::MultiplicityUnion or
           std::ranges::all_of(combiners, [](auto &p) { return tvr::invertible(p.second); });
}

BagRelation attribute_merge(const BagRelation &a, const BagRelation &b, const MergeOperator &m)
{
    check_same_schema(a, b, "attribute_merge");
    if (not a.schema().key() or not b.schema().key() or *a.schema().key() != *b.schema().key())
        throw KeyError("attribute_merge requires identically keyed operands");
    auto l = layout_of(a.schema(), m);
    auto rows = by_key(a, l);
    for (auto &[k, t] : by_key(b, l)) {
        auto [it, fresh] = rows.try_emplace(k, t);
        if (fresh) continue;
        for (auto [i, c] : l.values) it->second[i] = combine(c, it->second[i], t[i]);
    }
    BagRelation r(a.schema());
    for (auto &[_, t] : rows) r.add_unchecked(std::move(t), 1);
    return r;
}

BagRelation attribute_inverse(const BagRelation &a, const BagRelation &b, const MergeOperator &m)
{
    check_same_schema(a, b, "attribute_inverse");
    if (not a.schema().key() or not b.schema().key() or *a.schema().key() != *b.schema().key())
        throw KeyError("attribute_inverse requires identically keyed operands");
    auto l = layout_of(a.schema(), m);
    for (auto [_, c] : l.values)
        if (not invertible(c))
            throw NotInvertibleError("combiner " + std::string(to_string(c)) + " has no inverse");
    auto rows = by_key(a, l);
    for (auto &[k, t] : by_key(b, l)) {
        auto [it, fresh] = rows.try_emplace(k, t);
        for (auto [i, c] : l.values) {
            if (fresh)
                it->second[i] = negate_value(t[i]);
            else
                it->second[i] = add_values(it->second[i], negate_value(t[i]));
            if (is_null(it->second[i])) it->second[i] = a.schema()[i].kind == Kind::Float ? Value(0.0) : Value(int64_t(0));
        }
    }
    BagRelation r(a.schema());
    for (auto &[_, t] : rows) r.add_unchecked(std::move(t), 1);
    return r;
}

BagRelation merge(const BagRelation &a, const BagRelation &b, const MergeOperator &m)
{
    return m.kind == MergeOperator::Kind::MultiplicityUnion ? additive_union(a, b) : attribute_merge(a, b, m);
}

BagRelation inverse(const BagRelation &a, const BagRelation &b, const MergeOperator &m)
{
    return m.kind == MergeOperator::Kind::MultiplicityUnion ? bag_difference(a, b) : attribute_inverse(a, b, m);
}

BagRelation drop_zero_states(const BagRelation &a, const MergeOperator &m)
{
    if (m.kind == MergeOperator::Kind::MultiplicityUnion) return a;
    auto l = layout_of(a.schema(), m);
    BagRelation r(a.schema());
    for (auto &[t, mult] : a.rows()) {
        bool zero = std::ranges::all_of(l.values, [&](auto &p) { return is_zero(t[p.first]); });
        if (not zero) r.add_unchecked(t, mult);
    }
    return r;
}

std::string_view to_string(AggFunc f)
{
    switch (f) {
        case AggFunc::SUM: return "SUM";
        case AggFunc::COUNT: return "COUNT";
        case AggFunc::AVG: return "AVG";
        case AggFunc::MIN: return "MIN";
        case AggFunc::MAX: return "MAX";
    }
    return "?";
}

AggFunc agg_func_from_string(std::string_view s)
{
    for (auto f : { AggFunc::SUM, AggFunc::COUNT, AggFunc::AVG, AggFunc::MIN, AggFunc::MAX })
        if (to_string(f) == s) return f;
    throw ParseError("unknown aggregate function '" + std::string(s) + "'");
}

bool AggSpec::invertible() const
{
    return std::ranges::none_of(aggregates, [](auto &a) { return a.fn == AggFunc::MIN or a.fn == AggFunc::MAX; });
}

namespace {

Kind input_kind(const Schema &input, const AggCall &a)
{
    auto k = input[input.index_of(a.input)].kind;
    if ((a.fn == AggFunc::SUM or a.fn == AggFunc::AVG) and k == Kind::Text)
        throw TypeError(std::string(to_string(a.fn)) + " over text column '" + a.input + "'");
    return k;
}

}

Schema AggSpec::state_schema(const Schema &input) const
{
    std::vector<Column> cols;
    for (auto &g : group_keys) cols.push_back(input[input.index_of(g)]);
    for (auto &a : aggregates) {
        switch (a.fn) {
            case AggFunc::SUM:
            case AggFunc::AVG:
                cols.push_back({ a.output + "$sum", input_kind(input, a), false });
                cols.push_back({ a.output + "$n", Kind::Int, false });
                break;
            case AggFunc::COUNT:
                if (not a.input.empty()) input.index_of(a.input);
                cols.push_back({ a.output + "$count", Kind::Int, false });
                break;
            case AggFunc::MIN:
                cols.push_back({ a.output + "$min", input_kind(input, a), true });
                break;
            case AggFunc::MAX:
                cols.push_back({ a.output + "$max", input_kind(input, a), true });
                break;
        }
    }
    cols.push_back({ std::string(COUNT_COLUMN), Kind::Int, false });
    return Schema(std::move(cols), group_keys);
}

Schema AggSpec::output_schema(const Schema &input) const
{
    std::vector<Column> cols;
    for (auto &g : group_keys) cols.push_back(input[input.index_of(g)]);
    for (auto &a : aggregates) {
        switch (a.fn) {
            case AggFunc::SUM: cols.push_back({ a.output, input_kind(input, a), true }); break;
            case AggFunc::AVG: input_kind(input, a); cols.push_back({ a.output, Kind::Float, true }); break;
            case AggFunc::COUNT:
                if (not a.input.empty()) input.index_of(a.input);
                cols.push_back({ a.output, Kind::Int, false });
                break;
            case AggFunc::MIN:
            case AggFunc::MAX: cols.push_back({ a.output, input_kind(input, a), true }); break;
        }
    }
    return Schema(std::move(cols), group_keys);
}

MergeOperator AggSpec::merge_operator() const
{
    std::vector<std::pair<std::string, Combiner>> c;
    for (auto &a : aggregates) {
        switch (a.fn) {
            case AggFunc::SUM:
                c.emplace_back(a.output + "$sum", Combiner::Sum);
                c.emplace_back(a.output + "$n", Combiner::Count);
                break;
            case AggFunc::AVG:
                c.emplace_back(a.output + "$sum", Combiner::AvgPair);
                c.emplace_back(a.output + "$n", Combiner::AvgPair);
                break;
            case AggFunc::COUNT: c.emplace_back(a.output + "$count", Combiner::Count); break;
            case AggFunc::MIN: c.emplace_back(a.output + "$min", Combiner::Min); break;
            case AggFunc::MAX: c.emplace_back(a.output + "$max", Combiner::Max); break;
        }
    }
    c.emplace_back(std::string(COUNT_COLUMN), Combiner::Count);
    return MergeOperator::attribute(std::move(c));
}

BagRelation AggSpec::initialize(const Schema &input) const { return BagRelation(state_schema(input)); }

void AggSpec::iterate(BagRelation &state, const BagRelation &input) const
{
    auto &in = input.schema();
    std::vector<std::size_t> keys;
    for (auto &g : group_keys) keys.push_back(in.index_of(g));
    std::vector<std::optional<std::size_t>> args;
    for (auto &a : aggregates) args.push_back(a.input.empty() ? std::nullopt : std::optional(in.index_of(a.input)));

    std::vector<std::size_t> state_key(keys.size());
    std::iota(state_key.begin(), state_key.end(), 0);
    std::map<Tuple, Tuple> groups;
    for (auto &[t, _] : state.rows()) groups.emplace(key_of(t, state_key), t);

    for (auto &[t, m] : input.rows()) {
        auto k = key_of(t, keys);
        auto it = groups.find(k);
        if (it == groups.end()) {
            Tuple fresh = k;
            for (auto &a : aggregates) {
                auto zero = [&] { return in[in.index_of(a.input)].kind == Kind::Float ? Value(0.0) : Value(int64_t(0)); };
                switch (a.fn) {
                    case AggFunc::SUM:
                    case AggFunc::AVG: fresh.push_back(zero()); fresh.push_back(int64_t(0)); break;
                    case AggFunc::COUNT: fresh.push_back(int64_t(0)); break;
                    case AggFunc::MIN:
                    case AggFunc::MAX: fresh.push_back(std::monostate{}); break;
                }
            }
            fresh.push_back(int64_t(0));
            it = groups.emplace(std::move(k), std::move(fresh)).first;
        }
        auto &row = it->second;
        std::size_t col = keys.size();
        for (std::size_t j = 0; j != aggregates.size(); ++j) {
            auto &a = aggregates[j];
            const Value *v = args[j] ? &t[*args[j]] : nullptr;
            switch (a.fn) {
                case AggFunc::SUM:
                case AggFunc::AVG:
                    if (not is_null(*v)) {
                        row[col] = add_values(row[col], scale(*v, m));
                        row[col + 1] = std::get<int64_t>(row[col + 1]) + m;
                    }
                    col += 2;
                    break;
                case AggFunc::COUNT:
                    if (not v or not is_null(*v)) row[col] = std::get<int64_t>(row[col]) + m;
                    col += 1;
                    break;
                case AggFunc::MIN:
                case AggFunc::MAX:
                    if (not is_null(*v)) {
                        if (m < 0)
                            throw NotInvertibleError(std::string(tvr::to_string(a.fn)) + " cannot absorb a retraction");
                        row[col] = combine(a.fn == AggFunc::MIN ? Combiner::Min : Combiner::Max, row[col], *v);
                    }
                    col += 1;
                    break;
            }
        }
        row[col] = std::get<int64_t>(row[col]) + m;
    }

    BagRelation out(state.schema());
    for (auto &[_, row] : groups) out.add_unchecked(std::move(row), 1);
    state = std::move(out);
}

BagRelation AggSpec::partial(const BagRelation &input) const
{
    auto state = initialize(input.schema());
    iterate(state, input);
    return state;
}

BagRelation AggSpec::merge(const BagRelation &a, const BagRelation &b) const
{
    return attribute_merge(a, b, merge_operator());
}

BagRelation AggSpec::final(const BagRelation &state) const { return agg_final(state, *this); }

std::string AggSpec::to_string() const
{
    std::string s = "[";
    for (std::size_t i = 0; i != group_keys.size(); ++i) s += (i ? "," : "") + group_keys[i];
    s += "]{";
    for (std::size_t i = 0; i != aggregates.size(); ++i) {
        auto &a = aggregates[i];
        s += (i ? "," : "") + a.output + "=" + std::string(tvr::to_string(a.fn)) + "(" +
             (a.input.empty() ? "*" : a.input) + ")";
    }
    return s + "}";
}

BagRelation agg_final(const BagRelation &state, const AggSpec &spec)
{
    auto &ss = state.schema();
    auto count = ss.find(COUNT_COLUMN);
    if (not count) throw ContractError("aggregate state has no contributing-count column");

    std::vector<Column> cols;
    for (auto &g : spec.group_keys) cols.push_back(ss[ss.index_of(g)]);
    struct Plan { AggFunc fn; std::size_t col; };
    std::vector<Plan> plan;
    for (auto &a : spec.aggregates) {
        switch (a.fn) {
            case AggFunc::SUM:
                plan.push_back({ a.fn, ss.index_of(a.output + "$sum") });
                cols.push_back({ a.output, ss[plan.back().col].kind, true });
                break;
            case AggFunc::AVG:
                plan.push_back({ a.fn, ss.index_of(a.output + "$sum") });
                cols.push_back({ a.output, Kind::Float, true });
                break;
            case AggFunc::COUNT:
                plan.push_back({ a.fn, ss.index_of(a.output + "$count") });
                cols.push_back({ a.output, Kind::Int, false });
                break;
            case AggFunc::MIN:
                plan.push_back({ a.fn, ss.index_of(a.output + "$min") });
                cols.push_back({ a.output, ss[plan.back().col].kind, true });
                break;
            case AggFunc::MAX:
                plan.push_back({ a.fn, ss.index_of(a.output + "$max") });
                cols.push_back({ a.output, ss[plan.back().col].kind, true });
                break;
        }
    }
    BagRelation out(Schema(std::move(cols), spec.group_keys));
    for (auto &[t, _] : state.rows()) {
        if (std::get<int64_t>(t[*count]) == 0) continue;
        Tuple row;
        for (std::size_t i = 0; i != spec.group_keys.size(); ++i) row.push_back(t[i]);
        for (auto &p : plan) {
            switch (p.fn) {
                case AggFunc::SUM: row.push_back(std::get<int64_t>(t[p.col + 1]) ? t[p.col] : Value()); break;
                case AggFunc::AVG: {
                    auto n = std::get<int64_t>(t[p.col + 1]);
                    if (n == 0) {
                        row.push_back(std::monostate{});
                    } else {
                        double s = std::holds_alternative<double>(t[p.col]) ? std::get<double>(t[p.col])
                                                                            : double(std::get<int64_t>(t[p.col]));
                        row.push_back(s / double(n));
                    }
                    break;
                }
                default: row.push_back(t[p.col]); break;
            }
        }
        out.add_unchecked(std::move(row), 1);
    }
    return out;
}

}
