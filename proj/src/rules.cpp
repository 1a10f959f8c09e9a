#include <tvr/rules.hpp>

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>
#include <tvr/errors.hpp>

namespace tvr {

RuleFamilies RuleFamilies::parse(std::string_view s)
{
    RuleFamilies f = none();
    std::string item;
    std::istringstream in{ std::string(s) };
    bool any = false;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        any = true;
        if (item == "all") f = all();
        else if (item == "core") continue;
        else if (item == "im1") f.im1 = true;
        else if (item == "im2") f.im2 = true;
        else if (item == "ojv") f.ojv = true;
        else throw ParseError("unknown rule family '" + item + "' (expected im1, im2, ojv, core or all)");
    }
    if (not any) throw ParseError("empty rule family list");
    return f;
}

std::string RuleFamilies::to_string() const
{
    if (*this == all()) return "all";
    std::string s;
    auto add = [&](bool on, const char *n) {
        if (not on) return;
        if (not s.empty()) s += ",";
        s += n;
    };
    add(im1, "im1");
    add(im2, "im2");
    add(ojv, "ojv");
    return s.empty() ? "core" : s;
}

std::string_view to_string(Family f)
{
    switch (f) {
        case Family::Core: return "core";
        case Family::Im1: return "im1";
        case Family::Im2: return "im2";
        case Family::Ojv: return "ojv";
    }
    return "?";
}

FiringStats & FiringStats::operator+=(const FiringStats &o)
{
    rounds += o.rounds;
    matches += o.matches;
    firings += o.firings;
    changes += o.changes;
    partial_exploration = partial_exploration or o.partial_exploration;
    for (auto &[k, v] : o.per_rule) per_rule[k] += v;
    return *this;
}

namespace {

bool lifts(OpKind k)
{
    switch (k) {
        case OpKind::Filter:
        case OpKind::Project:
        case OpKind::InnerJoin:
        case OpKind::LeftOuterJoin:
        case OpKind::LeftSemiJoin:
        case OpKind::LeftAntiJoin:
        case OpKind::Aggregate:
        case OpKind::AggPartial:
        case OpKind::AggFinal:
        case OpKind::AttrMerge:
        case OpKind::Union:
            return true;
        default:
            return false;
    }
}

bool monotone(OpKind k)
{
    return k == OpKind::Filter or k == OpKind::Project or k == OpKind::InnerJoin or k == OpKind::Union or
           k == OpKind::LeftSemiJoin;
}

std::optional<TvrId> tvr_at(const Memo &m, GroupId g, int t)
{
    auto v = m.snapshot_tvrs(g, t);
    if (v.empty()) return std::nullopt;
    return v.front();
}

/// Times at which every child of `e` is a snapshot, with the child TVRs at that time.
std::vector<std::pair<int, std::vector<TvrId>>> child_snapshot_times(const Memo &m, const GroupExpr &e)
{
    std::vector<std::pair<int, std::vector<TvrId>>> out;
    auto children = m.children_of(e);
    if (children.empty()) return out;
    for (int t = 0; t != int(m.points()); ++t) {
        std::vector<TvrId> tvrs;
        for (auto c : children) {
            auto x = tvr_at(m, c, t);
            if (not x) break;
            tvrs.push_back(*x);
        }
        if (tvrs.size() == children.size()) out.emplace_back(t, std::move(tvrs));
    }
    return out;
}

/// Registers `op(children)` into slot `s` of `tvr`, creating the group if the slot is empty.
GroupId put(Memo &m, TvrId tvr, Slot s, const Operator &op, std::vector<GroupId> children)
{
    auto existing = m.slot(tvr, s);
    auto g = m.register_expr(op, std::move(children), existing).first;
    if (not existing) m.register_tvr_link({ tvr, g, s });
    return m.find(g);
}

bool decomposable(const AggSpec &spec)
{
    auto mo = spec.merge_operator();
    return std::ranges::none_of(mo.combiners, [](auto &c) { return c.second == Combiner::FullState; });
}

using MatchFn = std::function<void(const Memo&, std::vector<Binding>&)>;
using ApplyFn = std::function<void(Memo&, const Binding&)>;
using HeightFn = std::function<int(const Memo&, const Binding&, const std::map<GroupId, int>&)>;

class LambdaRule final : public Rule
{
    std::string name_;
    Family family_;
    RuleClass class_;
    RulePattern pattern_;
    MatchFn match_;
    ApplyFn apply_;
    HeightFn height_;

    public:
    LambdaRule(std::string name, Family family, RuleClass cls, RulePattern pattern, MatchFn m, ApplyFn a,
               HeightFn h = nullptr)
        : name_(std::move(name)), family_(family), class_(cls), pattern_(std::move(pattern)), match_(std::move(m)),
          apply_(std::move(a)), height_(std::move(h)) { }

    std::string_view name() const override { return name_; }
    Family family() const override { return family_; }
    RuleClass rule_class() const override { return class_; }
    RulePattern pattern() const override { return pattern_; }
    void match(const Memo &memo, std::vector<Binding> &out) const override { match_(memo, out); }
    bool apply(Memo &memo, const Binding &b) const override
    {
        auto v = memo.version();
        apply_(memo, b);
        return memo.version() != v;
    }
    int height(const Memo &m, const Binding &b, const std::map<GroupId, int> &h) const override
    {
        return height_ ? height_(m, b, h) : 0;
    }
};

/// Calls `f(e, t, D, children TVRs)` for each expr of kind `k` sitting in a Snapshot(t) of D over snapshot children.
template <class F> void each_snapshot_expr(const Memo &m, OpKind k, F f)
{
    for (auto id : m.expr_ids()) {
        auto &e = m.expr(id);
        if (e.op.kind != k) continue;
        auto g = m.find(e.group);
        for (auto &[t, cs] : child_snapshot_times(m, e))
            if (auto d = tvr_at(m, g, t)) f(e, t, *d, cs);
    }
}

/// Delta intervals (t, t2) present on every TVR of `cs`.
std::vector<int> common_delta_ends(const Memo &m, int t, const std::vector<TvrId> &cs)
{
    std::vector<int> ends;
    for (int t2 = t + 1; t2 != int(m.points()); ++t2)
        if (std::ranges::all_of(cs, [&](TvrId c) { return m.slot(c, Slot::delta(t, t2)).has_value(); }))
            ends.push_back(t2);
    return ends;
}

void add_delta_rule(RuleEngine &eng, std::string name, Family fam, OpKind k,
                    std::function<bool(const Memo&, const GroupExpr&, const std::vector<TvrId>&)> guard,
                    std::function<std::pair<Operator, std::vector<GroupId>>(Memo&, const GroupExpr&, int, int,
                                                                          const std::vector<TvrId>&)> build)
{
    auto match = [k, guard](const Memo &m, std::vector<Binding> &out) {
        each_snapshot_expr(m, k, [&](const GroupExpr &e, int t, TvrId, const std::vector<TvrId> &cs) {
            if (guard and not guard(m, e, cs)) return;
            for (auto t2 : common_delta_ends(m, t, cs)) out.push_back({ e.id, t, t2 });
        });
    };
    auto apply = [build](Memo &m, const Binding &b) {
        auto e = m.expr(b[0]);
        int t = b[1], t2 = b[2];
        auto g = m.find(e.group);
        auto d = tvr_at(m, g, t);
        if (not d) return;
        std::vector<TvrId> cs;
        for (auto c : m.children_of(e)) {
            auto x = tvr_at(m, c, t);
            if (not x) return;
            cs.push_back(*x);
        }
        auto [op, children] = build(m, e, t, t2, cs);
        put(m, *d, Slot::delta(t, t2), op, std::move(children));
    };
    eng.add_rule(std::make_unique<LambdaRule>(std::move(name), fam, RuleClass::TvrGenerating,
                                              RulePattern{ { k }, 1, "Snapshot(t) over children with Delta(t,t2)" },
                                              match, apply));
}

GroupId delta_of(const Memo &m, TvrId c, int t, int t2) { return *m.slot(c, Slot::delta(t, t2)); }
GroupId snap_of(const Memo &m, TvrId c, int t) { return *m.slot(c, Slot::snapshot(t)); }

bool self_positive(const Memo &m, TvrId t) { return m.part(t, InterKind::PositivePart) == m.find_tvr(t); }

void add_builtin_rules(RuleEngine &eng)
{
    using RC = RuleClass;

    // Re-register an operator over its children's snapshots at another time.
    eng.add_rule(std::make_unique<LambdaRule>(
        "snapshot_lift", Family::Core, RC::Traditional, RulePattern{ {}, 1, "Snapshot(t) -> Snapshot(t')" },
        [](const Memo &m, std::vector<Binding> &out) {
            for (auto id : m.expr_ids()) {
                auto &e = m.expr(id);
                if (not lifts(e.op.kind)) continue;
                auto times = child_snapshot_times(m, e);
                if (times.empty()) continue;
                auto &[t0, cs] = times.front();
                for (int t = 0; t != int(m.points()); ++t) {
                    if (std::ranges::any_of(times, [t](auto &p) { return p.first == t; })) continue;
                    if (std::ranges::all_of(cs, [&](TvrId c) { return m.slot(c, Slot::snapshot(t)).has_value(); }))
                        out.push_back({ id, t0, t });
                }
            }
        },
        [](Memo &m, const Binding &b) {
            auto e = m.expr(b[0]);
            std::vector<GroupId> children;
            for (auto c : m.children_of(e)) {
                auto x = tvr_at(m, c, b[1]);
                if (not x) return;
                auto s = m.slot(*x, Slot::snapshot(b[2]));
                if (not s) return;
                children.push_back(*s);
            }
            auto op = e.op;
            m.register_expr(op, std::move(children));
        }));

    add_delta_rule(eng, "delta_filter", Family::Core, OpKind::Filter, nullptr,
                   [](Memo &m, const GroupExpr &e, int t, int t2, const std::vector<TvrId> &cs) {
                       return std::pair{ e.op, std::vector{ delta_of(m, cs[0], t, t2) } };
                   });
    add_delta_rule(eng, "delta_project", Family::Core, OpKind::Project,
                   [](const Memo &m, const GroupExpr&, const std::vector<TvrId> &cs) {
                       return not m.tvr(cs[0]).attribute();
                   },
                   [](Memo &m, const GroupExpr &e, int t, int t2, const std::vector<TvrId> &cs) {
                       return std::pair{ e.op, std::vector{ delta_of(m, cs[0], t, t2) } };
                   });
    for (auto k : { OpKind::Union, OpKind::AttrMerge })
        add_delta_rule(eng, k == OpKind::Union ? "delta_union" : "delta_attr_merge", Family::Core, k, nullptr,
                       [](Memo &m, const GroupExpr &e, int t, int t2, const std::vector<TvrId> &cs) {
                           return std::pair{ e.op, std::vector{ delta_of(m, cs[0], t, t2), delta_of(m, cs[1], t, t2) } };
                       });
    add_delta_rule(eng, "delta_inner_join", Family::Core, OpKind::InnerJoin, nullptr,
                   [](Memo &m, const GroupExpr &e, int t, int t2, const std::vector<TvrId> &cs) {
                       auto op = e.op;
                       op.kind = OpKind::DeltaInnerJoin;
                       return std::pair{ op, std::vector{ snap_of(m, cs[0], t), snap_of(m, cs[1], t),
                                                          delta_of(m, cs[0], t, t2), delta_of(m, cs[1], t, t2) } };
                   });
    add_delta_rule(eng, "delta_agg_partial", Family::Core, OpKind::AggPartial,
                   [](const Memo &m, const GroupExpr &e, const std::vector<TvrId> &cs) {
                       return e.op.agg->invertible() and not m.tvr(cs[0]).attribute();
                   },
                   [](Memo &m, const GroupExpr &e, int t, int t2, const std::vector<TvrId> &cs) {
                       return std::pair{ e.op, std::vector{ delta_of(m, cs[0], t, t2) } };
                   });
    add_delta_rule(eng, "delta_left_outer_join", Family::Im1, OpKind::LeftOuterJoin, nullptr,
                   [](Memo &m, const GroupExpr &e, int t, int t2, const std::vector<TvrId> &cs) {
                       auto op = e.op;
                       op.kind = OpKind::DeltaLeftOuterJoin;
                       return std::pair{ op, std::vector{ snap_of(m, cs[0], t), snap_of(m, cs[1], t),
                                                          delta_of(m, cs[0], t, t2), delta_of(m, cs[1], t, t2) } };
                   });

    // Snapshot(t) + Delta(t, t+1) -> Snapshot(t+1), left-deep only.
    eng.add_rule(std::make_unique<LambdaRule>(
        "intra_merge", Family::Core, RC::IntraTvr, RulePattern{ { OpKind::Union, OpKind::AttrMerge }, 1, "Snapshot(t), Delta(t,t+1)" },
        [](const Memo &m, std::vector<Binding> &out) {
            for (auto id : m.tvr_ids())
                for (auto &[s, g] : m.tvr(id).slots)
                    if (not s.is_snapshot() and s.t2 == s.t + 1 and m.slot(id, Slot::snapshot(s.t)))
                        out.push_back({ id, s.t });
        },
        [](Memo &m, const Binding &b) {
            TvrId tvr = m.find_tvr(b[0]);
            int t = b[1];
            auto s = m.slot(tvr, Slot::snapshot(t));
            auto d = m.slot(tvr, Slot::delta(t, t + 1));
            if (not s or not d) return;
            auto &node = m.tvr(tvr);
            auto op = node.attribute() ? simple_op(OpKind::AttrMerge, nullptr, node.agg) : union_op();
            put(m, tvr, Slot::snapshot(t + 1), op, { *s, *d });
        }));

    // Snapshot(t+1) − Snapshot(t) -> Delta(t, t+1), deferred and skipped once a delta exists.
    eng.add_rule(std::make_unique<LambdaRule>(
        "intra_difference", Family::Im1, RC::PnaDeferred,
        RulePattern{ { OpKind::Difference, OpKind::AttrDiff }, 1, "Snapshot(t), Snapshot(t+1), no Delta(t,t+1)" },
        [](const Memo &m, std::vector<Binding> &out) {
            for (auto id : m.tvr_ids()) {
                auto &node = m.tvr(id);
                if (node.attribute() and not node.agg->invertible()) continue;
                for (int t = 0; t + 1 < int(m.points()); ++t)
                    if (m.slot(id, Slot::snapshot(t)) and m.slot(id, Slot::snapshot(t + 1)) and
                        not m.slot(id, Slot::delta(t, t + 1)))
                        out.push_back({ id, t });
            }
        },
        [](Memo &m, const Binding &b) {
            TvrId tvr = m.find_tvr(b[0]);
            int t = b[1];
            if (m.slot(tvr, Slot::delta(t, t + 1))) return;
            auto s0 = m.slot(tvr, Slot::snapshot(t)), s1 = m.slot(tvr, Slot::snapshot(t + 1));
            if (not s0 or not s1) return;
            auto &node = m.tvr(tvr);
            auto op = node.attribute() ? simple_op(OpKind::AttrDiff, nullptr, node.agg) : simple_op(OpKind::Difference);
            put(m, tvr, Slot::delta(t, t + 1), op, { *s1, *s0 });
        },
        [](const Memo &m, const Binding &b, const std::map<GroupId, int> &h) {
            auto s = m.slot(b[0], Slot::snapshot(b[1] + 1));
            if (not s) return 0;
            auto it = h.find(*s);
            return it == h.end() ? 0 : it->second;
        }));

    eng.add_rule(std::make_unique<LambdaRule>(
        "agg_split", Family::Core, RC::Traditional, RulePattern{ { OpKind::Aggregate }, 0, "" },
        [](const Memo &m, std::vector<Binding> &out) {
            for (auto id : m.expr_ids())
                if (m.expr(id).op.kind == OpKind::Aggregate) out.push_back({ id });
        },
        [](Memo &m, const Binding &b) {
            auto e = m.expr(b[0]);
            auto agg = e.op.agg;
            auto g = m.find(e.group);
            auto child = m.children_of(e)[0];
            auto p = m.register_expr(simple_op(OpKind::AggPartial, nullptr, agg), { child }).first;
            m.register_expr(simple_op(OpKind::AggFinal, nullptr, agg), { p }, g);
        }));

    // op(Union[a, b]) -> combine(op(a), op(b)).
    auto over_union = [&eng](std::string name, OpKind k) {
        eng.add_rule(std::make_unique<LambdaRule>(
            std::move(name), Family::Core, RC::Traditional, RulePattern{ { k, OpKind::Union }, 0, "" },
            [k](const Memo &m, std::vector<Binding> &out) {
                for (auto id : m.expr_ids()) {
                    auto &e = m.expr(id);
                    if (e.op.kind != k) continue;
                    if (k == OpKind::AggPartial and not decomposable(*e.op.agg)) continue;
                    for (auto u : m.exprs_of(m.children_of(e)[0]))
                        if (u->op.kind == OpKind::Union) out.push_back({ id, u->id });
                }
            },
            [k](Memo &m, const Binding &b) {
                auto e = m.expr(b[0]);
                auto u = m.expr(b[1]);
                if (not u.alive or not e.alive) return;
                auto op = e.op;
                auto g = m.find(e.group);
                auto uc = m.children_of(u);
                auto a = m.register_expr(op, { uc[0] }).first;
                auto c = m.register_expr(op, { uc[1] }).first;
                auto combine = k == OpKind::AggPartial ? simple_op(OpKind::AttrMerge, nullptr, op.agg) : union_op();
                m.register_expr(combine, { a, c }, m.find(g));
            }));
    };
    over_union("agg_partial_over_union", OpKind::AggPartial);
    over_union("filter_over_union", OpKind::Filter);
    over_union("project_over_union", OpKind::Project);

    // Monotone operators over non-retracting inputs are their own positive part.
    eng.add_rule(std::make_unique<LambdaRule>(
        "im2_positive_self", Family::Im2, RC::InterTvr, RulePattern{ {}, 1, "PositivePart(self) children" },
        [](const Memo &m, std::vector<Binding> &out) {
            for (auto id : m.expr_ids()) {
                auto &e = m.expr(id);
                if (not monotone(e.op.kind)) continue;
                auto g = m.find(e.group);
                for (auto &[t, cs] : child_snapshot_times(m, e)) {
                    auto d = tvr_at(m, g, t);
                    if (not d or m.part(*d, InterKind::PositivePart)) continue;
                    if (std::ranges::all_of(cs, [&](TvrId c) { return self_positive(m, c); })) {
                        out.push_back({ id, t });
                        break;
                    }
                }
            }
        },
        [](Memo &m, const Binding &b) {
            auto e = m.expr(b[0]);
            auto d = tvr_at(m, m.find(e.group), b[1]);
            if (d and not m.part(*d, InterKind::PositivePart)) m.register_inter_tvr({ *d, *d, InterKind::PositivePart });
        }));

    auto loj_matches = [](const Memo &m, std::vector<Binding> &out, bool last_only) {
        each_snapshot_expr(m, OpKind::LeftOuterJoin, [&](const GroupExpr &e, int t, TvrId, const std::vector<TvrId> &cs) {
            if (last_only and t != m.last()) return;
            if (self_positive(m, cs[0]) and self_positive(m, cs[1])) out.push_back({ e.id, t });
        });
    };
    // Q^P = L ⋈ R registered as the positive part of L ⟕ R.
    eng.add_rule(std::make_unique<LambdaRule>(
        "im2_positive", Family::Im2, RC::InterTvr,
        RulePattern{ { OpKind::LeftOuterJoin }, 3, "PositivePart(self) on both children" },
        [loj_matches](const Memo &m, std::vector<Binding> &out) { loj_matches(m, out, false); },
        [](Memo &m, const Binding &b) {
            auto e = m.expr(b[0]);
            int t = b[1];
            auto d = tvr_at(m, m.find(e.group), t);
            if (not d) return;
            auto op = e.op;
            op.kind = OpKind::InnerJoin;
            auto p = m.register_expr(op, m.children_of(e)).first;
            auto pt = tvr_at(m, p, t);
            if (pt) m.register_inter_tvr({ *d, *pt, InterKind::PositivePart });
        }));
    // Q^N = pad(L ▷ R), available once all data has arrived.
    eng.add_rule(std::make_unique<LambdaRule>(
        "im2_negative", Family::Im2, RC::InterTvr,
        RulePattern{ { OpKind::LeftOuterJoin }, 3, "final Snapshot, PositivePart(self) on both children" },
        [loj_matches](const Memo &m, std::vector<Binding> &out) { loj_matches(m, out, true); },
        [](Memo &m, const Binding &b) {
            auto e = m.expr(b[0]);
            auto d = tvr_at(m, m.find(e.group), b[1]);
            if (not d) return;
            auto children = m.children_of(e);
            auto anti = e.op;
            anti.kind = OpKind::LeftAntiJoin;
            auto pad = project_op(padding_projection(m.group(children[0]).schema, m.group(children[1]).schema));
            auto a = m.register_expr(anti, children).first;
            auto n = m.register_expr(pad, { a }).first;
            auto neg = m.part(*d, InterKind::NegativePart);
            if (not neg) {
                neg = m.new_tvr("negative part");
                m.register_inter_tvr({ *d, *neg, InterKind::NegativePart });
            }
            m.register_tvr_link({ *neg, n, Slot::snapshot(b[1]) });
        }));
    // Q = Q^P ⊎ Q^N wherever both parts have a snapshot.
    eng.add_rule(std::make_unique<LambdaRule>(
        "im2_combine", Family::Im2, RC::InterTvr, RulePattern{ { OpKind::Union }, 3, "PositivePart, NegativePart" },
        [](const Memo &m, std::vector<Binding> &out) {
            for (auto id : m.tvr_ids()) {
                auto p = m.part(id, InterKind::PositivePart), n = m.part(id, InterKind::NegativePart);
                if (not p or not n or *p == id) continue;
                for (int t = 0; t != int(m.points()); ++t)
                    if (m.slot(*p, Slot::snapshot(t)) and m.slot(*n, Slot::snapshot(t))) out.push_back({ id, t });
            }
        },
        [](Memo &m, const Binding &b) {
            TvrId tvr = m.find_tvr(b[0]);
            auto p = m.part(tvr, InterKind::PositivePart), n = m.part(tvr, InterKind::NegativePart);
            if (not p or not n) return;
            auto ps = m.slot(*p, Slot::snapshot(b[1])), ns = m.slot(*n, Slot::snapshot(b[1]));
            if (ps and ns) put(m, tvr, Slot::snapshot(b[1]), union_op(), { *ps, *ns });
        }));

    // Outer-join view maintenance for L ⟕ R over (t, t+1), R's change applied first, then L's.
    eng.add_rule(std::make_unique<LambdaRule>(
        "ojv", Family::Ojv, RC::InterTvr,
        RulePattern{ { OpKind::LeftOuterJoin }, 3, "Delta(t,t+1) on both children; DirectPart, IndirectPart, UnaffectedPart" },
        [](const Memo &m, std::vector<Binding> &out) {
            each_snapshot_expr(m, OpKind::LeftOuterJoin, [&](const GroupExpr &e, int t, TvrId, const std::vector<TvrId> &cs) {
                if (t + 1 >= int(m.points())) return;
                auto children = m.children_of(e);
                if (equi_keys(e.op.pred, m.group(children[0]).schema, m.group(children[1]).schema).empty()) return;
                if (m.slot(cs[0], Slot::delta(t, t + 1)) and m.slot(cs[1], Slot::delta(t, t + 1)) and
                    m.slot(cs[1], Slot::snapshot(t + 1)))
                    out.push_back({ e.id, t });
            });
        },
        [](Memo &m, const Binding &b) {
            auto e = m.expr(b[0]);
            int t = b[1];
            auto q = m.find(e.group);
            auto d = tvr_at(m, q, t);
            if (not d) return;
            auto children = m.children_of(e);
            auto L = tvr_at(m, children[0], t), R = tvr_at(m, children[1], t);
            if (not L or not R) return;
            auto dl = m.slot(*L, Slot::delta(t, t + 1)), dr = m.slot(*R, Slot::delta(t, t + 1));
            auto r2 = m.slot(*R, Slot::snapshot(t + 1));
            if (not dl or not dr or not r2) return;
            auto ij = e.op;
            ij.kind = OpKind::InnerJoin;
            auto ind = e.op;
            ind.kind = OpKind::OjvIndirect;
            auto d1 = m.register_expr(ij, { children[0], *dr }).first;
            auto i1 = m.register_expr(ind, { d1, q, children[0] }).first;
            auto d2 = m.register_expr(e.op, { *dl, *r2 }).first;
            auto dd = m.register_expr(union_op(), { d1, d2 }).first;
            auto part = [&](InterKind k, const char *origin) {
                auto p = m.part(*d, k);
                if (p) return *p;
                auto x = m.new_tvr(origin);
                m.register_inter_tvr({ *d, x, k });
                return m.find_tvr(x);
            };
            auto direct = part(InterKind::DirectPart, "direct part");
            put(m, direct, Slot::delta(t, t + 1), union_op(), { d1, d2 });
            auto indirect = part(InterKind::IndirectPart, "indirect part");
            put(m, indirect, Slot::delta(t, t + 1), ind, { d1, q, children[0] });
            part(InterKind::UnaffectedPart, "unaffected part");
            put(m, *d, Slot::delta(t, t + 1), union_op(), { m.find(dd), m.find(i1) });
        }));
}

}

RuleEngine::RuleEngine(RuleFamilies families, Scoring scoring) : families_(families), scoring_(scoring)
{
    add_builtin_rules(*this);
}

bool RuleEngine::enabled(const Rule &r) const
{
    switch (r.family()) {
        case Family::Core: return true;
        case Family::Im1: return families_.im1;
        case Family::Im2: return families_.im2;
        case Family::Ojv: return families_.ojv;
    }
    return false;
}

double RuleEngine::score(const Memo &memo, int rule, const Binding &b, const std::map<GroupId, int> &heights) const
{
    auto &r = *rules_.at(rule);
    switch (r.rule_class()) {
        case RuleClass::Traditional: return scoring_.traditional;
        case RuleClass::Implementation: return scoring_.implementation;
        case RuleClass::TvrGenerating:
        case RuleClass::IntraTvr:
        case RuleClass::InterTvr: return scoring_.traditional * scoring_.tvr_boost;
        case RuleClass::PnaDeferred:
            return std::max(0.0, scoring_.pna_base - scoring_.pna_height_step * r.height(memo, b, heights));
    }
    return 0;
}

std::map<GroupId, int> group_heights(const Memo &memo)
{
    constexpr int INF = 1 << 30;
    std::map<GroupId, int> h;
    auto ids = memo.group_ids();
    for (auto g : ids) h[g] = INF;
    for (bool changed = true; changed;) {
        changed = false;
        for (auto g : ids)
            for (auto e : memo.exprs_of(g)) {
                int v = 0;
                for (auto c : memo.children_of(*e)) v = std::max(v, h[c] == INF ? INF : h[c] + 1);
                if (v < h[g]) {
                    h[g] = v;
                    changed = true;
                }
            }
    }
    return h;
}

std::vector<RuleMatch> RuleEngine::pending(const Memo &memo) const
{
    std::vector<RuleMatch> out;
    std::optional<std::map<GroupId, int>> heights;
    for (int i = 0; i != int(rules_.size()); ++i) {
        auto &r = *rules_[i];
        if (not enabled(r)) continue;
        std::vector<Binding> bs;
        r.match(memo, bs);
        std::ranges::sort(bs);
        bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
        if (not bs.empty() and r.rule_class() == RuleClass::PnaDeferred and not heights) heights = group_heights(memo);
        for (auto &b : bs)
            if (not fired_.contains({ i, b })) out.push_back({ i, b, score(memo, i, b, heights ? *heights : std::map<GroupId, int>{}) });
    }
    auto key = [](const RuleMatch &m) { return std::tie(m.rule, m.binding); };
    if (shuffle_seed_) {
        std::mt19937_64 rng(*shuffle_seed_ ^ out.size());
        std::ranges::shuffle(out, rng);
        std::ranges::stable_sort(out, std::greater<>{}, &RuleMatch::score);
    } else {
        std::ranges::sort(out, [&](const RuleMatch &a, const RuleMatch &b) {
            if (a.score != b.score) return a.score > b.score;
            return key(a) < key(b);
        });
    }
    return out;
}

FiringStats RuleEngine::fire_until_fixpoint(Memo &memo, std::size_t budget)
{
    FiringStats stats;
    for (;;) {
        auto ms = pending(memo);
        ++stats.rounds;
        stats.matches += ms.size();
        if (ms.empty()) break;
        auto deferred = [&](const RuleMatch &m) { return rules_[m.rule]->rule_class() == RuleClass::PnaDeferred; };
        bool any_normal = std::ranges::any_of(ms, [&](auto &m) { return not deferred(m); });
        for (auto &m : ms) {
            if (any_normal and deferred(m)) continue;
            if (stats.firings >= budget) {
                stats.partial_exploration = true;
                return stats;
            }
            fired_.insert({ m.rule, m.binding });
            ++stats.firings;
            ++stats.per_rule[std::string(rules_[m.rule]->name())];
            if (rules_[m.rule]->apply(memo, m.binding)) ++stats.changes;
            if (not any_normal) break;
        }
    }
    return stats;
}

std::map<int, GroupId> seed(Memo &memo, const Arrivals &arrivals, const OutputRequirement &req,
                            const std::vector<int> &points, const RuleFamilies &families)
{
    if (req.points().empty()) throw ContractError("no required outputs");
    for (auto &[name, input] : arrivals.inputs) {
        auto tvr = memo.base_tvr(name);
        for (auto t : points) memo.register_expr(snapshot_op(name, t), {});
        for (std::size_t i = 0; i + 1 < points.size(); ++i)
            if (points[i + 1] == points[i] + 1) memo.register_expr(delta_op(name, points[i], points[i + 1]), {});
        if (families.im2) memo.register_inter_tvr({ tvr, tvr, InterKind::PositivePart });
    }
    std::map<int, GroupId> roots;
    for (auto t : req.points()) roots[t] = memo.register_tree(*req.queries[t], t);
    return roots;
}

namespace {

Operator shifted(Operator op, int d)
{
    if (op.kind == OpKind::ScanSnapshot or op.kind == OpKind::ScanDelta) {
        op.t += d;
        if (op.kind == OpKind::ScanDelta) op.t2 += d;
    }
    return op;
}

/// Time range of the leaves under each group.
std::map<GroupId, std::pair<int, int>> time_ranges(const Memo &m)
{
    std::map<GroupId, std::pair<int, int>> r;
    constexpr std::pair<int, int> NONE{ 1 << 30, -1 };
    auto ids = m.group_ids();
    for (auto g : ids) r[g] = NONE;
    auto widen = [](std::pair<int, int> &a, std::pair<int, int> b) {
        auto old = a;
        a.first = std::min(a.first, b.first);
        a.second = std::max(a.second, b.second);
        return a != old;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (auto g : ids)
            for (auto e : m.exprs_of(g)) {
                std::pair<int, int> x = NONE;
                if (e->op.kind == OpKind::ScanSnapshot) x = { e->op.t, e->op.t };
                if (e->op.kind == OpKind::ScanDelta) x = { e->op.t, e->op.t2 };
                for (auto c : m.children_of(*e)) widen(x, r[c]);
                changed = widen(r[g], x) or changed;
            }
    }
    return r;
}

}

void copy_by_translation(Memo &memo, int ts)
{
    int k = int(memo.points());
    if (ts < 0 or ts + 1 >= k) throw RangeError("template interval starts outside the timeline");
    auto ranges = time_ranges(memo);
    auto in_window = [&](GroupId g) {
        auto [lo, hi] = ranges.at(memo.find(g));
        return hi >= 0 and lo >= ts and hi <= ts + 1;
    };
    std::vector<ExprId> exprs;
    for (auto id : memo.expr_ids())
        if (in_window(memo.find(memo.expr(id).group))) {
            auto &e = memo.expr(id);
            bool ok = true;
            for (auto c : memo.children_of(e)) ok = ok and in_window(c);
            if (ok) exprs.push_back(id);
        }
    bool seeded = false;
    for (auto id : exprs)
        if (memo.expr(id).op.kind == OpKind::ScanDelta and memo.expr(id).op.t == ts) seeded = true;
    if (not seeded) throw ContractError("template interval has no explored deltas");

    struct SlotRef { TvrId tvr; Slot slot; GroupId group; };
    std::vector<SlotRef> slots;
    for (auto t : memo.tvr_ids())
        for (auto &[s, g] : memo.tvr(t).slots) {
            int hi = s.is_snapshot() ? s.t : s.t2;
            if (s.t >= ts and hi <= ts + 1) slots.push_back({ t, s, g });
        }

    for (int d = -ts; d + ts + 1 < k; ++d) {
        if (d == 0) continue;
        std::map<GroupId, GroupId> gm;
        auto lookup = [&](GroupId g) -> std::optional<GroupId> {
            g = memo.find(g);
            for (auto &[from, to] : gm)
                if (memo.find(from) == g) return memo.find(to);
            return std::nullopt;
        };
        std::set<ExprId> done;
        for (bool progress = true; progress;) {
            progress = false;
            for (auto id : exprs) {
                if (done.contains(id)) continue;
                auto &e = memo.expr(id);
                std::vector<GroupId> children;
                bool ready = true;
                for (auto c : memo.children_of(e)) {
                    auto x = lookup(c);
                    if (not x) { ready = false; break; }
                    children.push_back(*x);
                }
                if (not ready) continue;
                auto op = shifted(e.op, d);
                auto group = memo.find(e.group);
                auto target = lookup(group);
                auto g = memo.register_expr(op, std::move(children), target).first;
                if (not target) gm[group] = g;
                done.insert(id);
                progress = true;
            }
        }
        for (auto &s : slots) {
            auto g = lookup(s.group);
            if (not g) continue;
            Slot shifted_slot = s.slot;
            shifted_slot.t += d;
            if (not s.slot.is_snapshot()) shifted_slot.t2 += d;
            memo.register_tvr_link({ s.tvr, *g, shifted_slot });
        }
    }
}

bool prune_empty_deltas(Memo &memo, const Arrivals &arrivals)
{
    bool changed = false;
    for (auto &[name, input] : arrivals.inputs) {
        auto tvr = memo.base_tvr(name);
        for (int t = 0; t + 1 < int(memo.points()); ++t) {
            if (not delta_between(input, t, t + 1).empty()) continue;
            auto a = memo.slot(tvr, Slot::snapshot(t)), b = memo.slot(tvr, Slot::snapshot(t + 1));
            if (a and b and memo.find(*a) != memo.find(*b)) {
                memo.merge_groups(*a, *b);
                changed = true;
            }
        }
    }
    for (auto id : memo.expr_ids()) {
        auto &e = memo.expr(id);
        if (e.op.kind != OpKind::Union and e.op.kind != OpKind::AttrMerge) continue;
        auto g = memo.find(e.group);
        auto c = memo.children_of(e);
        if (c[0] == g or c[1] == g) {
            memo.kill_expr(id);
            changed = true;
        }
    }
    return changed;
}

GroupId register_state(Memo &memo, const StateDecl &decl)
{
    for (auto e : memo.expr_ids())
        if (memo.expr(e).alive and memo.expr(e).op.kind == OpKind::StateScan and memo.expr(e).op.table == decl.id)
            throw ContractError("state '" + decl.id + "' is already registered");
    Operator op;
    op.kind = OpKind::StateScan;
    op.table = decl.id;
    op.schema = std::make_shared<const Schema>(decl.schema);
    if (decl.slot and not decl.table) throw ContractError("state '" + decl.id + "' declares a slot without a table");
    std::optional<GroupId> into;
    if (decl.table) {
        auto &catalog = memo.catalog();
        auto it = catalog.find(*decl.table);
        if (it == catalog.end()) throw NameError("unknown table '" + *decl.table + "'");
        if (not it->second.compatible(decl.schema))
            throw SchemaError("state '" + decl.id + "' has schema " + decl.schema.to_string() + ", table " + *decl.table +
                              " has " + it->second.to_string());
        if (decl.slot) {
            if (decl.slot->t < 0 or decl.slot->t >= int(memo.points()) or
                (not decl.slot->is_snapshot() and decl.slot->t2 >= int(memo.points())))
                throw RangeError("state '" + decl.id + "' declares slot " + decl.slot->to_string() + " outside the timeline");
            into = memo.slot(memo.base_tvr(*decl.table), *decl.slot);
        }
    }
    auto [g, fresh] = memo.register_expr(op, {}, into);
    if (decl.table and decl.slot) memo.register_tvr_link({ memo.base_tvr(*decl.table), g, *decl.slot });
    return memo.find(g);
}

Exploration explore(const Arrivals &arrivals, const OutputRequirement &req, const ExploreOptions &options)
{
    req.validate(arrivals.timeline);
    int k = int(arrivals.timeline.size());
    Exploration x{ Memo(arrivals.catalog(), std::size_t(k)), {}, {} };
    RuleEngine engine(options.families, options.scoring);
    engine.shuffle_ties(options.shuffle_seed);
    std::vector<int> all(k);
    for (int t = 0; t != k; ++t) all[t] = t;
    auto remaining = [&] { return options.budget > x.stats.firings ? options.budget - x.stats.firings : 0; };

    if (options.translation_copy and k >= 3) {
        int ts = options.seed_interval;
        if (ts < 0 or ts + 1 >= k) throw RangeError("seed interval " + std::to_string(ts) + " outside the timeline");
        x.roots = seed(x.memo, arrivals, req, { ts, ts + 1 }, options.families);
        x.stats += engine.fire_until_fixpoint(x.memo, remaining());
        copy_by_translation(x.memo, ts);
    }
    x.roots = seed(x.memo, arrivals, req, all, options.families);
    for (auto &d : options.states) register_state(x.memo, d);
    x.stats += engine.fire_until_fixpoint(x.memo, remaining());
    for (int round = 0; round != 8 and prune_empty_deltas(x.memo, arrivals); ++round)
        x.stats += engine.fire_until_fixpoint(x.memo, remaining());
    for (auto &[t, g] : x.roots) g = x.memo.find(g);
    return x;
}

std::vector<std::string> verify_memo(const Memo &memo, const Arrivals &arrivals)
{
    std::vector<std::string> bad;
    GroupEvaluator ev(memo, [&](const Operator &op) { return leaf_relation(arrivals, op); });
    auto merge_op_of = [&](GroupId g) {
        for (auto &[t, s] : memo.group(g).links)
            if (memo.tvr(t).attribute()) return memo.tvr(t).merge_operator();
        return MergeOperator::multiplicity();
    };
    auto same = [](const BagRelation &a, const BagRelation &b, const MergeOperator &m) {
        if (m.kind == MergeOperator::Kind::AttributeMerge)
            return approx_equal(drop_zero_states(a, m), drop_zero_states(b, m));
        return approx_equal(a, b);
    };
    for (auto g : memo.group_ids()) {
        auto &ref = ev.relation(g);
        auto m = merge_op_of(g);
        for (auto e : memo.exprs_of(g)) {
            BagRelation v;
            try {
                v = ev.evaluate(*e);
            } catch (const StatsError&) {
                continue;
            }
            if (not same(v, ref, m))
                bad.push_back("G" + std::to_string(g) + ": " + e->signature + " gives " + v.to_string() + ", group " +
                              ref.to_string());
        }
    }
    for (auto t : memo.tvr_ids()) {
        auto &n = memo.tvr(t);
        auto m = n.merge_operator();
        for (auto &[s, g] : n.slots) {
            if (s.is_snapshot()) continue;
            auto a = memo.slot(t, Slot::snapshot(s.t)), b = memo.slot(t, Slot::snapshot(s.t2));
            if (a and b and not same(merge(ev.relation(*a), ev.relation(g), m), ev.relation(*b), m))
                bad.push_back("TVR-" + std::to_string(t) + " " + s.to_string() + " does not compose");
        }
        auto check_parts = [&](InterKind x, InterKind y, bool deltas) {
            auto p = memo.part(t, x), q = memo.part(t, y);
            if (not p or not q or *p == t) return;
            for (auto &[s, g] : n.slots) {
                if (s.is_snapshot() == deltas) continue;
                auto ps = memo.slot(*p, s), qs = memo.slot(*q, s);
                if (ps and qs and not same(additive_union(ev.relation(*ps), ev.relation(*qs).with_schema(ev.relation(*ps).schema())),
                                           ev.relation(g).with_schema(ev.relation(*ps).schema()), m))
                    bad.push_back("TVR-" + std::to_string(t) + " parts do not recombine at " + s.to_string());
            }
        };
        check_parts(InterKind::PositivePart, InterKind::NegativePart, false);
        check_parts(InterKind::DirectPart, InterKind::IndirectPart, true);
    }
    return bad;
}

}
