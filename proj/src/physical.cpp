#include <tvr/physical.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <tvr/errors.hpp>

namespace tvr {

Trait Trait::hashed(std::vector<std::string> keys)
{
    Trait t;
    t.hash = std::move(keys);
    return t;
}

std::string Trait::to_string() const
{
    if (not hash) return "None";
    std::string s = "Hash(";
    for (std::size_t i = 0; i != hash->size(); ++i) s += (i ? "," : "") + (*hash)[i];
    return s + ")";
}

namespace {

constexpr std::pair<PhysKind, std::string_view> PHYS_NAMES[] = {
    { PhysKind::TableScanAt, "TableScanAt" },
    { PhysKind::DeltaScanAt, "DeltaScanAt" },
    { PhysKind::EmptyScan, "EmptyScan" },
    { PhysKind::StateScan, "StateScan" },
    { PhysKind::FilterExec, "FilterExec" },
    { PhysKind::ProjectExec, "ProjectExec" },
    { PhysKind::HashInnerJoin, "HashInnerJoin" },
    { PhysKind::IncrHashInnerJoin, "IncrHashInnerJoin" },
    { PhysKind::HashLeftOuterJoin, "HashLeftOuterJoin" },
    { PhysKind::IncrHashLeftOuterJoin, "IncrHashLeftOuterJoin" },
    { PhysKind::HashSemiJoin, "HashSemiJoin" },
    { PhysKind::HashAntiJoin, "HashAntiJoin" },
    { PhysKind::NestedLoopJoin, "NestedLoopJoin" },
    { PhysKind::OjvIndirectExec, "OjvIndirectExec" },
    { PhysKind::HashAggregate, "HashAggregate" },
    { PhysKind::PartialAggregate, "PartialAggregate" },
    { PhysKind::FinalAggregate, "FinalAggregate" },
    { PhysKind::IncrAggregateMerge, "IncrAggregateMerge" },
    { PhysKind::AggregateDiff, "AggregateDiff" },
    { PhysKind::MergeUnion, "MergeUnion" },
    { PhysKind::DifferenceExec, "DifferenceExec" },
    { PhysKind::Exchange, "Exchange" },
    { PhysKind::Save, "Save" },
    { PhysKind::Load, "Load" },
};

}

std::string_view to_string(PhysKind k)
{
    for (auto &[kind, name] : PHYS_NAMES)
        if (kind == k) return name;
    return "?";
}

PhysKind phys_kind_from_string(std::string_view s)
{
    for (auto &[kind, name] : PHYS_NAMES)
        if (name == s) return kind;
    throw ParseError("unknown physical operator '" + std::string(s) + "'");
}

CostProfile CostProfile::by_name(std::string_view name)
{
    if (name == "output") return output();
    if (name == "shuffle") return shuffle();
    throw ParseError("unknown cost profile '" + std::string(name) + "' (expected output or shuffle)");
}

CostFunction CostFunction::weighted(std::vector<double> w)
{
    for (auto x : w)
        if (not(x >= 0)) throw ContractError("cost weights must be nonnegative");
    return { Kind::WeightedSum, std::move(w) };
}

namespace {

constexpr double EPS = 1e-9;

void check_lengths(const CostVector &a, const CostVector &b)
{
    if (a.size() != b.size()) throw ContractError("cost vectors of different lengths");
}

}

double reduce_cost(const CostVector &v, const CostFunction &f)
{
    if (f.kind == CostFunction::Kind::ReverseLexical) {
        double s = 0;
        for (auto x : v) s += x;
        return s;
    }
    if (v.size() != f.weights.size()) throw ContractError("cost vector length does not match the weights");
    double s = 0;
    for (std::size_t i = 0; i != v.size(); ++i) s += v[i] * f.weights[i];
    return s;
}

bool CostFunction::less(const CostVector &a, const CostVector &b) const
{
    check_lengths(a, b);
    if (kind == Kind::WeightedSum) return reduce_cost(a, *this) < reduce_cost(b, *this) - EPS;
    for (std::size_t i = a.size(); i-- != 0;) {
        if (a[i] < b[i] - EPS) return true;
        if (a[i] > b[i] + EPS) return false;
    }
    return false;
}

bool CostFunction::increasing() const
{
    if (kind != Kind::WeightedSum) return false;
    for (std::size_t i = 1; i < weights.size(); ++i)
        if (not(weights[i] > weights[i - 1])) return false;
    return true;
}

std::string CostFunction::to_string() const
{
    if (kind == Kind::ReverseLexical) return "reverse_lexical";
    std::ostringstream os;
    os << "weights(";
    for (std::size_t i = 0; i != weights.size(); ++i) os << (i ? "," : "") << weights[i];
    os << ")";
    return os.str();
}

CostVector add(CostVector a, const CostVector &b)
{
    check_lengths(a, b);
    for (std::size_t i = 0; i != a.size(); ++i) a[i] += b[i];
    return a;
}

bool same_cost(const CostVector &a, const CostVector &b, double eps)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i != a.size(); ++i)
        if (std::abs(a[i] - b[i]) > eps) return false;
    return true;
}

std::optional<ClassId> PlanSpace::find(GroupId g, const Trait &t) const
{
    for (std::size_t i = 0; i != classes.size(); ++i)
        if (classes[i].group == g and classes[i].trait == t) return ClassId(i);
    return std::nullopt;
}

std::size_t PlanSpace::alt_count() const
{
    std::size_t n = 0;
    for (auto &c : classes) n += c.alts.size();
    return n;
}

Stats exact_stats(const Memo &memo, const Arrivals &arrivals, const std::map<std::string, BagRelation> &states)
{
    GroupEvaluator ev(memo, [&](const Operator &op) {
        if (op.kind == OpKind::StateScan) {
            auto it = states.find(op.table);
            if (it == states.end()) throw StateError("no materialized state '" + op.table + "'");
            return it->second;
        }
        return leaf_relation(arrivals, op);
    });
    Stats s;
    for (auto g : memo.group_ids())
        if (ev.representative(g)) s[g] = ev.relation(g).tuple_count();
    return s;
}

namespace {

struct Impl
{
    PhysKind kind;
    std::vector<Trait> child_traits;
    Trait provides;
};

/// Left and right key lists of a join predicate.
std::pair<std::vector<std::string>, std::vector<std::string>> join_keys(const Operator &op, const Schema &l, const Schema &r)
{
    std::pair<std::vector<std::string>, std::vector<std::string>> k;
    if (not op.pred) return k;
    for (auto &[a, b] : equi_keys(op.pred, l, r)) {
        k.first.push_back(a);
        k.second.push_back(b);
    }
    return k;
}

Schema suffix_schema(const Schema &s, std::size_t from)
{
    std::vector<Column> cols(s.columns().begin() + from, s.columns().end());
    return Schema(std::move(cols));
}

/// Physical implementations of `e` able to deliver `want`.
std::vector<Impl> implementations(const Memo &memo, const GroupExpr &e, const Trait &want, const StateAvailability &states)
{
    std::vector<Impl> out;
    auto children = memo.children_of(e);
    auto schema = [&](int i) -> const Schema & { return memo.group(children[i]).schema; };
    auto fixed = [&](PhysKind k, std::vector<Trait> req, Trait provides) {
        if (want.is_none() or want == provides) out.push_back({ k, std::move(req), std::move(provides) });
    };
    auto pass = [&](PhysKind k, std::size_t n) { out.push_back({ k, std::vector<Trait>(n, want), want }); };
    switch (e.op.kind) {
        case OpKind::ScanSnapshot: fixed(PhysKind::TableScanAt, {}, Trait::none()); break;
        case OpKind::ScanDelta: fixed(PhysKind::DeltaScanAt, {}, Trait::none()); break;
        case OpKind::Empty: fixed(PhysKind::EmptyScan, {}, Trait::none()); break;
        case OpKind::StateScan: {
            auto it = states.find(e.op.table);
            fixed(PhysKind::StateScan, {}, it == states.end() ? Trait::none() : it->second.second);
            break;
        }
        case OpKind::Filter: pass(PhysKind::FilterExec, 1); break;
        case OpKind::Union: pass(PhysKind::MergeUnion, 2); break;
        case OpKind::Difference: pass(PhysKind::DifferenceExec, 2); break;
        case OpKind::AggFinal: pass(PhysKind::FinalAggregate, 1); break;
        case OpKind::Project: {
            if (want.is_none()) {
                pass(PhysKind::ProjectExec, 1);
                break;
            }
            std::vector<std::string> mapped;
            for (auto &k : *want.hash) {
                auto p = std::ranges::find_if(e.op.projections, [&](const Projection &p) {
                    return p.name == k and p.expr->op == Scalar::Op::Col;
                });
                if (p == e.op.projections.end()) return out;
                mapped.push_back(p->expr->column);
            }
            out.push_back({ PhysKind::ProjectExec, { Trait::hashed(mapped) }, want });
            break;
        }
        case OpKind::InnerJoin:
        case OpKind::LeftOuterJoin:
        case OpKind::LeftSemiJoin:
        case OpKind::LeftAntiJoin: {
            auto [lk, rk] = join_keys(e.op, schema(0), schema(1));
            if (lk.empty()) {
                fixed(PhysKind::NestedLoopJoin, { Trait::none(), Trait::none() }, Trait::none());
                break;
            }
            auto k = e.op.kind == OpKind::InnerJoin       ? PhysKind::HashInnerJoin
                     : e.op.kind == OpKind::LeftOuterJoin ? PhysKind::HashLeftOuterJoin
                     : e.op.kind == OpKind::LeftSemiJoin  ? PhysKind::HashSemiJoin
                                                          : PhysKind::HashAntiJoin;
            fixed(k, { Trait::hashed(lk), Trait::hashed(rk) }, Trait::hashed(lk));
            break;
        }
        case OpKind::DeltaInnerJoin:
        case OpKind::DeltaLeftOuterJoin: {
            auto k = e.op.kind == OpKind::DeltaInnerJoin ? PhysKind::IncrHashInnerJoin : PhysKind::IncrHashLeftOuterJoin;
            auto [lk, rk] = join_keys(e.op, schema(0), schema(1));
            if (lk.empty()) {
                fixed(k, std::vector<Trait>(4, Trait::none()), Trait::none());
                break;
            }
            auto l = Trait::hashed(lk), r = Trait::hashed(rk);
            fixed(k, { l, r, l, r }, l);
            break;
        }
        case OpKind::OjvIndirect: {
            auto &L = schema(2);
            auto [lk, rk] = join_keys(e.op, L, suffix_schema(schema(1), L.arity()));
            auto l = lk.empty() ? Trait::none() : Trait::hashed(lk);
            fixed(PhysKind::OjvIndirectExec, { l, l, l }, l);
            break;
        }
        case OpKind::Aggregate:
        case OpKind::AggPartial: {
            auto t = Trait::hashed(e.op.agg->group_keys);
            fixed(e.op.kind == OpKind::Aggregate ? PhysKind::HashAggregate : PhysKind::PartialAggregate, { t }, t);
            break;
        }
        case OpKind::AttrMerge:
        case OpKind::AttrDiff: {
            auto t = Trait::hashed(e.op.agg->group_keys);
            fixed(e.op.kind == OpKind::AttrMerge ? PhysKind::IncrAggregateMerge : PhysKind::AggregateDiff, { t, t }, t);
            break;
        }
        default: break;
    }
    return out;
}

bool is_merge(PhysKind k) { return k == PhysKind::MergeUnion or k == PhysKind::IncrAggregateMerge; }

}

PlanSpace build_plan_space(const Memo &memo, const std::map<int, GroupId> &roots, const Stats &stats,
                           const CostProfile &profile, const StateAvailability &states)
{
    PlanSpace ps;
    ps.points = int(memo.points());
    int k = ps.points;
    std::map<std::pair<GroupId, Trait>, ClassId> index;
    std::deque<ClassId> work;
    auto card = [&](GroupId g) {
        auto it = stats.find(memo.find(g));
        if (it == stats.end()) throw StatsError("no cardinality for group G" + std::to_string(memo.find(g)));
        return it->second;
    };
    auto intern = [&](GroupId g, const Trait &t) {
        g = memo.find(g);
        auto [it, fresh] = index.try_emplace({ g, t }, ClassId(ps.classes.size()));
        if (fresh) {
            PlanClass c;
            c.group = g;
            c.trait = t;
            c.cardinality = card(g);
            c.save_cost = profile.save * double(c.cardinality);
            c.load_cost = profile.load * double(c.cardinality);
            ps.classes.push_back(std::move(c));
            work.push_back(it->second);
        }
        return it->second;
    };
    for (auto &[t, g] : roots) ps.roots[t] = intern(g, Trait::none());

    while (not work.empty()) {
        ClassId id = work.front();
        work.pop_front();
        GroupId g = ps.classes[id].group;
        Trait want = ps.classes[id].trait;
        std::vector<PlanAlt> alts;
        for (auto e : memo.exprs_of(g)) {
            auto children = memo.children_of(*e);
            if (std::ranges::any_of(children, [&](GroupId c) { return not stats.contains(c); })) continue;
            for (auto &impl : implementations(memo, *e, want, states)) {
                PlanAlt a;
                a.kind = impl.kind;
                a.expr = e->id;
                a.op = e->op;
                for (std::size_t i = 0; i != children.size(); ++i) a.children.push_back(intern(children[i], impl.child_traits[i]));
                double own;
                switch (e->op.kind) {
                    case OpKind::ScanSnapshot:
                        a.available = e->op.t;
                        own = profile.scan * double(card(g));
                        break;
                    case OpKind::ScanDelta:
                        a.available = e->op.t2;
                        own = profile.scan * double(card(g));
                        break;
                    case OpKind::Empty: own = 0; break;
                    case OpKind::StateScan: {
                        auto it = states.find(e->op.table);
                        a.available = it == states.end() ? 0 : it->second.first;
                        own = profile.load * double(card(g));
                        break;
                    }
                    default:
                        own = profile.compute * double(card(g));
                        if (profile.free_empty_merge and is_merge(impl.kind) and
                            std::ranges::any_of(children, [&](GroupId c) { return card(c) == 0; }))
                            own = 0;
                }
                a.cost.assign(k, own);
                alts.push_back(std::move(a));
            }
        }
        if (want.hash and std::ranges::all_of(*want.hash, [&](auto &c) { return memo.group(g).schema.has(c); })) {
            PlanAlt x;
            x.kind = PhysKind::Exchange;
            x.children = { intern(g, Trait::none()) };
            x.cost.assign(k, profile.exchange * double(card(g)));
            x.by_product = true;
            alts.push_back(std::move(x));
        }
        ps.classes[id].alts = std::move(alts);
    }
    return ps;
}

std::map<int, std::set<int>> TimedPlan::cross_time_edges() const
{
    std::map<int, std::set<int>> out;
    for (auto &n : nodes)
        for (auto c : n.children)
            if (nodes[c].time < n.time) out[c].insert(n.time);
    for (auto &[t, r] : roots)
        if (nodes[r].time < t) out[r].insert(t);
    return out;
}

CostVector plan_cost(const TimedPlan &plan)
{
    CostVector v(plan.points, 0.0);
    for (auto &n : plan.nodes) v.at(n.time) += n.cost;
    for (auto &[c, times] : plan.cross_time_edges()) {
        auto &n = plan.nodes[c];
        if (n.by_product) continue;
        v[n.time] += n.save_cost;
        for (auto t : times) v[t] += n.load_cost;
    }
    return v;
}

std::string TimedPlan::to_string() const
{
    std::ostringstream os;
    auto edges = cross_time_edges();
    for (int t = 0; t != points; ++t) {
        os << "time " << t << ":\n";
        for (auto &n : nodes) {
            if (n.time != t) continue;
            os << "  N" << n.id << " " << tvr::to_string(n.kind);
            if (n.kind != PhysKind::Exchange) os << " " << n.op.signature();
            os << " G" << n.group << " " << n.trait.to_string() << " rows=" << n.cardinality << " cost=" << n.cost;
            if (not n.children.empty()) {
                os << " <-";
                for (auto c : n.children) os << " N" << c << (nodes[c].time < t ? "(load)" : "");
            }
            if (edges.contains(n.id)) os << (n.by_product ? " [persisted]" : " [save]");
            if (materialized.contains(n.id)) os << " [shared]";
            for (auto &[rt, r] : roots)
                if (r == n.id and rt == t) os << " [output]";
            os << "\n";
        }
    }
    os << "cost:";
    for (auto c : cost) os << " " << c;
    os << "\n";
    return os.str();
}

std::set<int> temporal_domain(const TimedPlan &plan, int node, const StateAvailability &states)
{
    auto &n = plan.nodes.at(node);
    std::set<int> td;
    int from = 0;
    if (n.children.empty()) {
        switch (n.kind) {
            case PhysKind::TableScanAt: from = n.op.t; break;
            case PhysKind::DeltaScanAt: from = n.op.t2; break;
            case PhysKind::StateScan: {
                auto it = states.find(n.op.table);
                from = it == states.end() ? 0 : it->second.first;
                break;
            }
            default: break;
        }
        for (int t = std::max(0, from); t < plan.points; ++t) td.insert(t);
    } else {
        for (int t = 0; t != plan.points; ++t) td.insert(t);
        for (auto c : n.children) {
            auto ct = temporal_domain(plan, c, states);
            std::erase_if(td, [&](int t) { return not ct.contains(t); });
        }
    }
    if (td.empty()) throw UnplannableError("node N" + std::to_string(node) + " has an empty temporal domain");
    return td;
}

std::vector<std::string> validate_assignment(const TimedPlan &plan, const StateAvailability &states)
{
    std::vector<std::string> bad;
    for (auto &n : plan.nodes) {
        try {
            auto td = temporal_domain(plan, n.id, states);
            if (not td.contains(n.time))
                bad.push_back("N" + std::to_string(n.id) + " runs at " + std::to_string(n.time) + " outside its temporal domain");
        } catch (const UnplannableError &e) {
            bad.push_back(e.what());
        }
        for (auto c : n.children)
            if (plan.nodes.at(c).time > n.time)
                bad.push_back("N" + std::to_string(n.id) + " runs before its input N" + std::to_string(c));
    }
    for (auto &[t, r] : plan.roots)
        if (plan.nodes.at(r).time > t) bad.push_back("output for time " + std::to_string(t) + " delivered late");
    return bad;
}

}
