#include <tvr/algebra.hpp>

#include <algorithm>
#include <tvr/errors.hpp>

namespace tvr {

namespace {

struct KindInfo { OpKind kind; std::string_view name; int arity; };

constexpr KindInfo KINDS[] = {
    { OpKind::Scan, "Scan", 0 },
    { OpKind::Filter, "Filter", 1 },
    { OpKind::Project, "Project", 1 },
    { OpKind::InnerJoin, "InnerJoin", 2 },
    { OpKind::LeftOuterJoin, "LeftOuterJoin", 2 },
    { OpKind::LeftSemiJoin, "LeftSemiJoin", 2 },
    { OpKind::LeftAntiJoin, "LeftAntiJoin", 2 },
    { OpKind::Aggregate, "Aggregate", 1 },
    { OpKind::Union, "Union", 2 },
    { OpKind::ScanSnapshot, "ScanSnapshot", 0 },
    { OpKind::ScanDelta, "ScanDelta", 0 },
    { OpKind::StateScan, "StateScan", 0 },
    { OpKind::Empty, "Empty", 0 },
    { OpKind::AggPartial, "AggPartial", 1 },
    { OpKind::AggFinal, "AggFinal", 1 },
    { OpKind::AttrMerge, "AttrMerge", 2 },
    { OpKind::AttrDiff, "AttrDiff", 2 },
    { OpKind::Difference, "Difference", 2 },
    { OpKind::DeltaInnerJoin, "DeltaInnerJoin", 4 },
    { OpKind::DeltaLeftOuterJoin, "DeltaLeftOuterJoin", 4 },
    { OpKind::OjvIndirect, "OjvIndirect", 3 },
};

Tuple concat(const Tuple &a, const Tuple &b)
{
    Tuple t;
    t.reserve(a.size() + b.size());
    t.insert(t.end(), a.begin(), a.end());
    t.insert(t.end(), b.begin(), b.end());
    return t;
}

Schema or_nullability(const Schema &a, const Schema &b)
{
    if (not a.compatible(b))
        throw SchemaError("union of incompatible schemas " + a.to_string() + " and " + b.to_string());
    auto cols = a.columns();
    for (std::size_t i = 0; i != cols.size(); ++i) cols[i].nullable = cols[i].nullable or b[i].nullable;
    return Schema(std::move(cols), a.key() == b.key() ? a.key() : std::nullopt);
}

const Schema & child(const std::vector<const Schema*> &c, std::size_t i, const Operator &op)
{
    if (c.size() <= i or not c[i]) throw ContractError(std::string(to_string(op.kind)) + ": missing child schema");
    return *c[i];
}

BoundScalar bind_join(const Operator &op, const Schema &l, const Schema &r)
{
    if (not op.pred) throw ContractError(std::string(to_string(op.kind)) + " without predicate");
    return bind(*op.pred, Schema::concat(l, r));
}

/// Inner join rows, multiplicities multiplied.
void inner_join(const BagRelation &l, const BagRelation &r, const BoundScalar &p, BagRelation &out, int64_t sign = 1)
{
    for (auto &[a, ma] : l.rows())
        for (auto &[b, mb] : r.rows()) {
            auto t = concat(a, b);
            if (p.test(t)) out.add_unchecked(std::move(t), sign * ma * mb);
        }
}

bool has_match(const Tuple &a, const BagRelation &r, const BoundScalar &p)
{
    return std::ranges::any_of(r.rows(), [&](auto &row) { return p.test(concat(a, row.first)); });
}

/// Left rows of `l` with (`want` = true) or without a partner in `r`, multiplicities of `l` kept.
BagRelation semi(const BagRelation &l, const BagRelation &r, const BoundScalar &p, bool want)
{
    BagRelation out(l.schema());
    for (auto &[a, m] : l.rows())
        if (has_match(a, r, p) == want) out.add_unchecked(a, m);
    return out;
}

void add_padded(const BagRelation &l, std::size_t right_arity, BagRelation &out, int64_t sign = 1)
{
    for (auto &[a, m] : l.rows()) {
        Tuple t = a;
        t.resize(a.size() + right_arity);
        out.add_unchecked(std::move(t), sign * m);
    }
}

BagRelation left_outer(const BagRelation &l, const BagRelation &r, const BoundScalar &p, const Schema &schema)
{
    BagRelation out(schema);
    for (auto &[a, ma] : l.rows()) {
        bool matched = false;
        for (auto &[b, mb] : r.rows()) {
            auto t = concat(a, b);
            if (p.test(t)) {
                matched = true;
                out.add_unchecked(std::move(t), ma * mb);
            }
        }
        if (not matched) {
            Tuple t = a;
            t.resize(a.size() + r.schema().arity());
            out.add_unchecked(std::move(t), ma);
        }
    }
    return out;
}

}

std::string_view to_string(OpKind k)
{
    for (auto &i : KINDS) if (i.kind == k) return i.name;
    return "?";
}

OpKind op_kind_from_string(std::string_view s)
{
    for (auto &i : KINDS) if (i.name == s) return i.kind;
    throw ParseError("unknown operator '" + std::string(s) + "'");
}

int arity(OpKind k)
{
    for (auto &i : KINDS) if (i.kind == k) return i.arity;
    return -1;
}

bool is_join(OpKind k)
{
    return k == OpKind::InnerJoin or k == OpKind::LeftOuterJoin or k == OpKind::LeftSemiJoin or
           k == OpKind::LeftAntiJoin or k == OpKind::DeltaInnerJoin or k == OpKind::DeltaLeftOuterJoin or
           k == OpKind::OjvIndirect;
}

bool is_leaf(OpKind k) { return arity(k) == 0; }

std::string Operator::signature() const
{
    std::string s(to_string(kind));
    switch (kind) {
        case OpKind::Scan: return s + "(" + table + ")";
        case OpKind::ScanSnapshot: return s + "(" + table + "@" + std::to_string(t) + ")";
        case OpKind::ScanDelta: return s + "(" + table + "@" + std::to_string(t) + "," + std::to_string(t2) + ")";
        case OpKind::StateScan: return s + "(" + table + ")";
        case OpKind::Empty: return s + (schema ? schema->to_string() : "()");
        case OpKind::Filter: return s + "(" + pred->to_string() + ")";
        case OpKind::Project: {
            s += "(";
            for (std::size_t i = 0; i != projections.size(); ++i)
                s += (i ? ", " : "") + projections[i].name + "=" + projections[i].expr->to_string();
            return s + ")";
        }
        case OpKind::Aggregate:
        case OpKind::AggPartial:
        case OpKind::AggFinal:
        case OpKind::AttrMerge:
        case OpKind::AttrDiff:
            return s + agg->to_string();
        case OpKind::Union:
        case OpKind::Difference:
            return s;
        default:
            return pred ? s + "(" + pred->to_string() + ")" : s;
    }
}

Operator scan_op(std::string table)
{
    Operator op;
    op.kind = OpKind::Scan;
    op.table = std::move(table);
    return op;
}

Operator filter_op(ScalarPtr pred)
{
    Operator op;
    op.kind = OpKind::Filter;
    op.pred = std::move(pred);
    return op;
}

Operator project_op(std::vector<Projection> cols)
{
    Operator op;
    op.kind = OpKind::Project;
    op.projections = std::move(cols);
    return op;
}

Operator join_op(OpKind kind, ScalarPtr pred)
{
    Operator op;
    op.kind = kind;
    op.pred = std::move(pred);
    return op;
}

Operator aggregate_op(AggSpec spec)
{
    Operator op;
    op.kind = OpKind::Aggregate;
    op.agg = std::make_shared<AggSpec>(std::move(spec));
    return op;
}

Operator union_op()
{
    Operator op;
    op.kind = OpKind::Union;
    return op;
}

Operator snapshot_op(std::string table, int t)
{
    Operator op;
    op.kind = OpKind::ScanSnapshot;
    op.table = std::move(table);
    op.t = t;
    return op;
}

Operator delta_op(std::string table, int t, int t2)
{
    Operator op;
    op.kind = OpKind::ScanDelta;
    op.table = std::move(table);
    op.t = t;
    op.t2 = t2;
    return op;
}

Operator empty_op(Schema schema)
{
    Operator op;
    op.kind = OpKind::Empty;
    op.schema = std::make_shared<const Schema>(std::move(schema));
    return op;
}

Operator simple_op(OpKind kind, ScalarPtr pred, std::shared_ptr<const AggSpec> agg)
{
    Operator op;
    op.kind = kind;
    op.pred = std::move(pred);
    op.agg = std::move(agg);
    return op;
}

std::string LogicalNode::to_string() const
{
    std::string s = op.signature();
    if (children.empty()) return s;
    s += "[";
    for (std::size_t i = 0; i != children.size(); ++i) s += (i ? ", " : "") + children[i]->to_string();
    return s + "]";
}

LogicalPtr node(Operator op, std::vector<LogicalPtr> children)
{
    int a = arity(op.kind);
    if (a >= 0 and std::size_t(a) != children.size())
        throw ContractError(std::string(to_string(op.kind)) + " expects " + std::to_string(a) + " children");
    auto n = std::make_shared<LogicalNode>();
    n->op = std::move(op);
    n->children = std::move(children);
    return n;
}

Schema output_schema(const Operator &op, const std::vector<const Schema*> &c, const Catalog &catalog)
{
    switch (op.kind) {
        case OpKind::Scan:
        case OpKind::ScanSnapshot:
        case OpKind::ScanDelta: {
            auto it = catalog.find(op.table);
            if (it == catalog.end()) throw NameError("unknown table '" + op.table + "'");
            return it->second;
        }
        case OpKind::StateScan:
        case OpKind::Empty:
            if (not op.schema) throw ContractError(std::string(to_string(op.kind)) + " without schema");
            return *op.schema;
        case OpKind::Filter: {
            auto &s = child(c, 0, op);
            if (not op.pred) throw ContractError("Filter without predicate");
            bind(*op.pred, s);
            return s;
        }
        case OpKind::Project: {
            auto &s = child(c, 0, op);
            std::vector<Column> cols;
            for (auto &p : op.projections) {
                auto [k, n] = type_of(*p.expr, s);
                cols.push_back({ p.name, k, n });
            }
            return Schema(std::move(cols));
        }
        case OpKind::InnerJoin:
        case OpKind::DeltaInnerJoin: {
            auto &l = child(c, 0, op), &r = child(c, 1, op);
            bind_join(op, l, r);
            return Schema::concat(l, r);
        }
        case OpKind::LeftOuterJoin:
        case OpKind::DeltaLeftOuterJoin: {
            auto &l = child(c, 0, op), &r = child(c, 1, op);
            bind_join(op, l, r);
            return Schema::concat(l, r.nullable());
        }
        case OpKind::LeftSemiJoin:
        case OpKind::LeftAntiJoin: {
            auto &l = child(c, 0, op), &r = child(c, 1, op);
            bind_join(op, l, r);
            return l;
        }
        case OpKind::OjvIndirect: return child(c, 1, op);
        case OpKind::Aggregate: return op.agg->output_schema(child(c, 0, op));
        case OpKind::AggPartial: return op.agg->state_schema(child(c, 0, op));
        case OpKind::AggFinal: {
            auto &s = child(c, 0, op);
            return agg_final(BagRelation(s), *op.agg).schema();
        }
        case OpKind::AttrMerge:
        case OpKind::AttrDiff:
        case OpKind::Union:
        case OpKind::Difference:
            return or_nullability(child(c, 0, op), child(c, 1, op));
    }
    throw ContractError("unhandled operator");
}

Schema output_schema(const LogicalNode &n, const Catalog &catalog)
{
    std::vector<Schema> cs;
    for (auto &ch : n.children) cs.push_back(output_schema(*ch, catalog));
    std::vector<const Schema*> ptrs;
    for (auto &s : cs) ptrs.push_back(&s);
    return output_schema(n.op, ptrs, catalog);
}

BagRelation pad_right(const BagRelation &left, const Schema &right)
{
    BagRelation out(Schema::concat(left.schema(), right.nullable()));
    add_padded(left, right.arity(), out);
    return out;
}

std::vector<Projection> padding_projection(const Schema &left, const Schema &right)
{
    std::vector<Projection> p;
    for (auto &c : left.columns()) p.push_back({ c.name, col(c.name) });
    for (auto &c : right.columns()) p.push_back({ c.name, null_of(c.kind) });
    return p;
}

BagRelation apply_operator(const Operator &op, const std::vector<const BagRelation*> &in)
{
    auto need = [&](std::size_t n) {
        if (in.size() != n or std::ranges::any_of(in, [](auto p) { return p == nullptr; }))
            throw ContractError(std::string(to_string(op.kind)) + " expects " + std::to_string(n) + " inputs");
    };
    std::vector<const Schema*> schemas;
    for (auto r : in) schemas.push_back(r ? &r->schema() : nullptr);

    switch (op.kind) {
        case OpKind::Filter: {
            need(1);
            auto p = bind(*op.pred, in[0]->schema());
            BagRelation out(in[0]->schema());
            for (auto &[t, m] : in[0]->rows())
                if (p.test(t)) out.add_unchecked(t, m);
            return out;
        }
        case OpKind::Project: {
            need(1);
            BagRelation out(output_schema(op, schemas, {}));
            std::vector<BoundScalar> exprs;
            for (auto &p : op.projections) exprs.push_back(bind(*p.expr, in[0]->schema()));
            for (auto &[t, m] : in[0]->rows()) {
                Tuple row;
                row.reserve(exprs.size());
                for (auto &e : exprs) row.push_back(e.eval(t));
                out.add_unchecked(std::move(row), m);
            }
            return out;
        }
        case OpKind::InnerJoin: {
            need(2);
            BagRelation out(output_schema(op, schemas, {}));
            inner_join(*in[0], *in[1], bind_join(op, in[0]->schema(), in[1]->schema()), out);
            return out;
        }
        case OpKind::LeftOuterJoin: {
            need(2);
            return left_outer(*in[0], *in[1], bind_join(op, in[0]->schema(), in[1]->schema()),
                              output_schema(op, schemas, {}));
        }
        case OpKind::LeftSemiJoin:
        case OpKind::LeftAntiJoin: {
            need(2);
            return semi(*in[0], *in[1], bind_join(op, in[0]->schema(), in[1]->schema()),
                        op.kind == OpKind::LeftSemiJoin);
        }
        case OpKind::Aggregate: need(1); return op.agg->final(op.agg->partial(*in[0]));
        case OpKind::AggPartial: need(1); return op.agg->partial(*in[0]);
        case OpKind::AggFinal: need(1); return op.agg->final(*in[0]);
        case OpKind::AttrMerge: need(2); return op.agg->merge(*in[0], *in[1]);
        case OpKind::AttrDiff: need(2); return attribute_inverse(*in[0], *in[1], op.agg->merge_operator());
        case OpKind::Union: {
            need(2);
            auto s = output_schema(op, schemas, {});
            return additive_union(in[0]->with_schema(s), in[1]->with_schema(s));
        }
        case OpKind::Difference: {
            need(2);
            auto s = output_schema(op, schemas, {});
            return bag_difference(in[0]->with_schema(s), in[1]->with_schema(s));
        }
        case OpKind::DeltaInnerJoin: {
            need(4);
            auto &L = *in[0], &R = *in[1], &dL = *in[2], &dR = *in[3];
            auto p = bind_join(op, L.schema(), R.schema());
            BagRelation out(output_schema(op, schemas, {}));
            inner_join(dL, R, p, out);
            inner_join(L, dR, p, out);
            inner_join(dL, dR, p, out);
            return out;
        }
        case OpKind::DeltaLeftOuterJoin: {
            need(4);
            auto &L = *in[0], &R = *in[1], &dL = *in[2], &dR = *in[3];
            auto p = bind_join(op, L.schema(), R.schema());
            auto R2 = additive_union(R, dR.with_schema(R.schema()));
            BagRelation out(output_schema(op, schemas, {}));
            auto ra = R.schema().arity();
            inner_join(dL, R2, p, out);
            inner_join(L, dR, p, out);
            add_padded(semi(dL, R2, p, false), ra, out);
            auto affected = semi(L, dR, p, true);
            add_padded(semi(affected, R2, p, false), ra, out);
            add_padded(semi(affected, R, p, false), ra, out, -1);
            return out;
        }
        case OpKind::OjvIndirect: {
            need(3);
            auto &dD = *in[0], &Qprev = *in[1], &L = *in[2];
            auto la = L.schema().arity();
            auto prefix = [la](const Tuple &t) { return Tuple(t.begin(), t.begin() + la); };
            auto padded = [la](const Tuple &t) {
                return std::all_of(t.begin() + la, t.end(), [](auto &v) { return is_null(v); });
            };
            std::map<Tuple, int64_t> change;
            for (auto &[t, m] : dD.rows()) change[prefix(t)] += m;
            BagRelation out(Qprev.schema());
            for (auto &[s, dm] : change) {
                int64_t matched = 0, pad = 0;
                for (auto it = Qprev.rows().lower_bound(s); it != Qprev.rows().end(); ++it) {
                    if (not std::equal(s.begin(), s.end(), it->first.begin())) break;
                    (padded(it->first) ? pad : matched) += it->second;
                }
                Tuple row = s;
                row.resize(Qprev.schema().arity());
                if (pad > 0 and matched + dm > 0)
                    out.add_unchecked(std::move(row), -pad);
                else if (pad == 0 and matched > 0 and matched + dm == 0)
                    out.add_unchecked(std::move(row), L.multiplicity(s));
            }
            return out;
        }
        default:
            throw ContractError(std::string(to_string(op.kind)) + " is not applicable to materialized inputs");
    }
}

BagRelation evaluate_batch(const LogicalNode &expr, const Database &db)
{
    if (expr.op.kind == OpKind::Scan) {
        auto it = db.find(expr.op.table);
        if (it == db.end()) throw NameError("unknown table '" + expr.op.table + "'");
        return it->second;
    }
    if (is_leaf(expr.op.kind))
        throw ContractError("evaluate_batch: " + std::string(to_string(expr.op.kind)) + " in a query tree");
    std::vector<BagRelation> inputs;
    for (auto &c : expr.children) inputs.push_back(evaluate_batch(*c, db));
    std::vector<const BagRelation*> ptrs;
    for (auto &r : inputs) ptrs.push_back(&r);
    return apply_operator(expr.op, ptrs);
}

}
