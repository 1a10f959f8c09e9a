#include <tvr/timeline.hpp>

#include <charconv>
#include <tvr/errors.hpp>

namespace tvr {

Timeline::Timeline(std::size_t k)
{
    if (k == 0) throw ContractError("a timeline has at least one point");
    for (std::size_t i = 0; i != k; ++i) labels_.push_back("t" + std::to_string(i + 1));
}

Timeline::Timeline(std::vector<std::string> labels) : labels_(std::move(labels))
{
    if (labels_.empty()) throw ContractError("a timeline has at least one point");
}

const std::string & Timeline::label(int t) const
{
    check(t);
    return labels_[t];
}

void Timeline::check(int t) const
{
    if (not contains(t))
        throw RangeError("time point " + std::to_string(t) + " outside timeline of " + std::to_string(size()) + " points");
}

int Timeline::parse(std::string_view s) const
{
    for (std::size_t i = 0; i != labels_.size(); ++i)
        if (labels_[i] == s) return int(i);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() or p != s.data() + s.size()) throw RangeError("unknown time point '" + std::string(s) + "'");
    check(v);
    return v;
}

void TvrInput::validate() const
{
    for (auto &[t, d] : deltas) {
        if (t < 0 or t >= int(points)) throw RangeError(table + ": delta at time " + std::to_string(t) + " outside timeline");
        if (not d.schema().compatible(schema)) throw SchemaError(table + ": delta schema " + d.schema().to_string());
    }
    for (int t = 0; t != int(points); ++t) {
        if (perspective.kind != MergeOperator::Kind::MultiplicityUnion) break;
        if (not snapshot_at(*this, t).is_snapshot())
            throw ContractError(table + ": arrivals retract more than was inserted by time " + std::to_string(t));
    }
}

BagRelation snapshot_at(const TvrInput &input, int t)
{
    if (t < 0 or t >= int(input.points)) throw RangeError("snapshot_at: time " + std::to_string(t) + " outside timeline");
    BagRelation r(input.schema);
    for (auto &[ti, d] : input.deltas) {
        if (ti > t) break;
        r = merge(r, d.with_schema(input.schema), input.perspective);
    }
    return r;
}

BagRelation delta_between(const TvrInput &input, int t, int t2)
{
    if (t >= t2) throw ContractError("delta_between requires t < t2");
    if (t < 0 or t2 >= int(input.points)) throw RangeError("delta_between: interval outside timeline");
    BagRelation r(input.schema);
    for (auto &[ti, d] : input.deltas)
        if (ti > t and ti <= t2) r = merge(r, d.with_schema(input.schema), input.perspective);
    return r;
}

const TvrInput & Arrivals::input(std::string_view table) const
{
    auto it = inputs.find(table);
    if (it == inputs.end()) throw NameError("unknown table '" + std::string(table) + "'");
    return it->second;
}

Catalog Arrivals::catalog() const
{
    Catalog c;
    for (auto &[name, in] : inputs) c.emplace(name, in.schema);
    return c;
}

Database Arrivals::database_at(int t) const
{
    timeline.check(t);
    Database db;
    for (auto &[name, in] : inputs) db.emplace(name, snapshot_at(in, t));
    return db;
}

void Arrivals::declare(const std::string &table, Schema schema)
{
    auto &in = inputs[table];
    in.table = table;
    in.schema = std::move(schema);
    in.points = timeline.size();
}

void Arrivals::add(const std::string &table, int t, Tuple row, int64_t mult)
{
    timeline.check(t);
    auto it = inputs.find(table);
    if (it == inputs.end()) throw NameError("table '" + table + "' not declared");
    auto [d, _] = it->second.deltas.try_emplace(t, it->second.schema);
    d->second.add(std::move(row), mult);
}

OutputRequirement OutputRequirement::at_end(std::size_t k, LogicalPtr q)
{
    OutputRequirement r;
    r.queries.resize(k);
    r.queries.back() = std::move(q);
    return r;
}

OutputRequirement OutputRequirement::at_every(std::size_t k, LogicalPtr q)
{
    OutputRequirement r;
    r.queries.assign(k, q);
    return r;
}

std::vector<int> OutputRequirement::points() const
{
    std::vector<int> p;
    for (std::size_t i = 0; i != queries.size(); ++i)
        if (queries[i]) p.push_back(int(i));
    return p;
}

void OutputRequirement::validate(const Timeline &timeline) const
{
    if (queries.size() != timeline.size())
        throw ContractError("output requirement has " + std::to_string(queries.size()) + " entries for " +
                            std::to_string(timeline.size()) + " time points");
    if (points().empty()) throw ContractError("output requirement has no non-empty query");
}

BagRelation evaluate_on_accumulated(const LogicalNode &expr, const Arrivals &arrivals, int t)
{
    return evaluate_batch(expr, arrivals.database_at(t));
}

BagRelation leaf_relation(const Arrivals &arrivals, const Operator &op)
{
    switch (op.kind) {
        case OpKind::ScanSnapshot: return snapshot_at(arrivals.input(op.table), op.t);
        case OpKind::ScanDelta: return delta_between(arrivals.input(op.table), op.t, op.t2);
        case OpKind::Empty:
            if (not op.schema) throw ContractError("Empty leaf without schema");
            return BagRelation(*op.schema);
        default: throw ContractError(std::string(to_string(op.kind)) + " is not an arrivals leaf");
    }
}

}
