// Acceptance checks: one PASS/FAIL line per criterion.  Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <tvr/errors.hpp>
#include <tvr/session.hpp>

#include "support.hpp"

using namespace tvr;
using namespace tvr::test;

namespace {

// tolerances
constexpr double cost_tol = 1e-9;
constexpr double float_tol = 1e-9;

// trial counts
constexpr int delta_rule_cases = 1000;
constexpr int decomposition_cases = 500;
constexpr int dp_spaces = 200;
constexpr double dp_time_limit = 60.0;
constexpr double golden_time_limit = 1.0;
constexpr int dominance_random_sessions = 60;
constexpr int store_early_sessions = 100;
constexpr int fuzz_sessions = 300;

std::string data(const std::string &name) { return std::string(TVR_DATA_DIR) + "/" + name; }

const std::vector<std::string> bundled = { "example1.json",       "example1_o4.json", "example1_every.json",
                                           "example1_state.json", "filter.json",      "three_points.json" };

struct Outcome
{
    bool pass = true;
    std::ostringstream detail;
    std::ostringstream errors;
    int failures = 0;

    /// Records a failed check; keeps the first few descriptions.
    void fail(const std::string &what)
    {
        pass = false;
        if (failures++ < 3) errors << (failures > 1 ? "; " : "") << what;
    }

    std::string text() const
    {
        auto d = detail.str(), e = errors.str();
        if (e.empty()) return d;
        return d.empty() ? e : d + " | " + e + (failures > 3 ? " (" + std::to_string(failures) + " failures)" : "");
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool near(double a, double b, double tol = cost_tol) { return std::abs(a - b) <= tol; }

std::string fmt(double v)
{
    std::ostringstream o;
    o << v;
    return o.str();
}

std::string fmt(const CostVector &v)
{
    std::ostringstream o;
    o << "(";
    for (std::size_t i = 0; i != v.size(); ++i) o << (i ? ", " : "") << v[i];
    return o.str() + ")";
}

bool equivalent(const CostFunction &f, const CostVector &a, const CostVector &b)
{
    return not f.less(a, b) and not f.less(b, a);
}

BagRelation oracle(const Session &s, int t)
{
    return evaluate_on_accumulated(*s.requirement.queries.at(s.arrivals.timeline.size() - 1), s.arrivals, t);
}

Exploration explore_session(const Session &s, const char *families)
{
    ExploreOptions o;
    o.families = RuleFamilies::parse(families);
    return explore(s.arrivals, s.requirement, o);
}

GroupEvaluator evaluator(const Exploration &x, const Session &s)
{
    return GroupEvaluator(x.memo, [&s](const Operator &op) { return leaf_relation(s.arrivals, op); });
}

/// The multiplicity TVR whose last snapshot is the query.
std::optional<TvrId> query_tvr(const Exploration &x)
{
    auto last = x.memo.last();
    auto root = x.memo.find(x.roots.at(last));
    for (auto t : x.memo.snapshot_tvrs(root, last))
        if (not x.memo.tvr(t).attribute()) return t;
    return std::nullopt;
}

// 1 -----------------------------------------------------------------------------------------------------------------

Outcome running_example()
{
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    auto rows = compare_methods(load_session(data("example1.json")));
    double secs = seconds_since(t0);
    std::map<std::string, double> cost;
    for (auto &r : rows) cost[r.method] = r.cost;
    o.detail << "IM-1 " << fmt(cost["im1"]) << ", IM-2 " << fmt(cost["im2"]) << ", compare took " << fmt(secs) << " s";
    if (not near(cost["im1"], 11.8)) o.fail("IM-1 is not 11.8");
    if (not near(cost["im2"], 12.2)) o.fail("IM-2 is not 12.2");
    if (secs >= golden_time_limit) o.fail("slower than 1 s");
    return o;
}

// 2 -----------------------------------------------------------------------------------------------------------------

Outcome retraction_variant()
{
    Outcome o;
    auto rows = compare_methods(load_session(data("example1_o4.json")));
    std::map<std::string, double> cost;
    for (auto &r : rows) cost[r.method] = r.cost;
    o.detail << "IM-1 " << fmt(cost["im1"]) << ", IM-2 " << fmt(cost["im2"]) << " (expected 13.8 and 12.2)";
    if (not (cost["im2"] < cost["im1"])) o.fail("ranking did not flip");
    if (not near(cost["im1"], 13.8)) o.fail("IM-1 is not 13.8");
    if (not near(cost["im2"], 12.2)) o.fail("IM-2 is not 12.2");
    return o;
}

// 3 -----------------------------------------------------------------------------------------------------------------

Tuple status_row(const char *o, const char *c, int64_t p, std::optional<std::pair<const char*, int64_t>> ret)
{
    if (ret) return row({ o, c, p, ret->first, ret->second });
    return row({ o, c, p, std::monostate{}, std::monostate{} });
}

Outcome result_goldens()
{
    Outcome o;
    auto s = load_session(data("example1.json"));
    auto e = example1();
    auto status_schema = output_schema(*e.sales_status, e.arrivals.catalog());

    // executed plans reproduce the end snapshots
    BagRelation summary(output_schema(*e.summary, e.arrivals.catalog()));
    summary.add(row({ "c1", int64_t(265) }), 1);
    summary.add(row({ "c2", int64_t(500) }), 1);
    for (auto fam : { "core", "im1", "im2", "ojv", "all" }) {
        PlanOptions po;
        po.rules = RuleFamilies::parse(fam);
        StateStore store;
        auto report = run_session(s, plan_session(s, po).plan, store);
        if (not report.times[1].output or *report.times[1].output != summary)
            o.fail(std::string(fam) + " summary differs");
    }
    auto status = s;
    status.requirement = OutputRequirement::at_every(2, e.sales_status);
    for (auto fam : { "im1", "im2", "all" }) {
        PlanOptions po;
        po.rules = RuleFamilies::parse(fam);
        StateStore store;
        auto report = run_session(status, plan_session(status, po).plan, store, true);
        auto &out = report.times[1].output;
        if (not out or out->distinct() != 7 or out->tuple_count() != 7) o.fail(std::string(fam) + " sales_status is not 7 rows");
    }

    // the IM-1 summary plan computes the delta of sales_status, retracting the null-padded o2 row
    BagRelation im1_delta(status_schema);
    im1_delta.add(status_row("o2", "c2", 150, std::nullopt), -1);
    im1_delta.add(status_row("o2", "c2", 150, std::pair("o2", int64_t(20))), 1);
    im1_delta.add(status_row("o5", "c2", 300, std::nullopt), 1);
    im1_delta.add(status_row("o6", "c1", 150, std::pair("o6", int64_t(15))), 1);
    im1_delta.add(status_row("o7", "c2", 220, std::nullopt), 1);
    {
        PlanOptions po;
        po.rules = RuleFamilies::parse("im1");
        auto r = plan_session(s, po);
        StateStore store;
        auto report = run_session(s, r.plan, store, true);
        bool found = false;
        for (auto &n : r.plan.nodes)
            if (n.time == 1 and n.op.kind == OpKind::DeltaLeftOuterJoin and approx_equal(report.relations.at(n.id), im1_delta))
                found = true;
        if (not found) o.fail("executed IM-1 plan has no delta outer join producing the expected delta");
    }

    // IM-2 holds back unmatched rows: the positive part only ever grows
    {
        auto x = explore_session(status, "im2");
        auto ev = evaluator(x, status);
        auto q = query_tvr(x);
        auto p1 = q ? x.memo.resolve(*q, { InterKind::PositivePart }, Slot::snapshot(0)) : std::nullopt;
        auto n1 = q ? x.memo.resolve(*q, { InterKind::NegativePart }, Slot::snapshot(0)) : std::nullopt;
        auto dp = q ? x.memo.resolve(*q, { InterKind::PositivePart }, Slot::delta(0, 1)) : std::nullopt;
        BagRelation matched(status_schema);
        matched.add(status_row("o1", "c1", 100, std::pair("o1", int64_t(10))), 1);
        if (not p1 or not n1 or not dp) {
            o.fail("IM-2 parts missing");
        } else {
            if (not approx_equal(ev.relation(*p1), matched)) o.fail("IM-2 emits more than the matched row at t1");
            if (ev.relation(*n1).tuple_count() != 3) o.fail("IM-2 does not hold back three rows at t1");
            for (auto &[t, m] : ev.relation(*dp).rows())
                if (m < 0) o.fail("IM-2 positive part retracts");
        }
        PlanOptions po;
        po.rules = RuleFamilies::parse("im2");
        StateStore store;
        run_session(status, plan_session(status, po).plan, store);
    }

    // aggregate state merge: 280 + (-15) = 265 for c1
    {
        auto x = explore_session(s, "im1");
        auto ev = evaluator(x, s);
        bool checked = false;
        for (auto id : x.memo.tvr_ids()) {
            auto &tvr = x.memo.tvr(id);
            if (not tvr.attribute() or not tvr.slots.contains(Slot::delta(0, 1)) or not tvr.slots.contains(Slot::snapshot(0)))
                continue;
            auto &spec = *tvr.agg;
            auto before = agg_final(ev.relation(tvr.slots.at(Slot::snapshot(0))), spec);
            auto change = agg_final(ev.relation(tvr.slots.at(Slot::delta(0, 1))), spec);
            auto after = agg_final(merge(ev.relation(tvr.slots.at(Slot::snapshot(0))),
                                         ev.relation(tvr.slots.at(Slot::delta(0, 1))), tvr.merge_operator()),
                                   spec);
            auto c1 = [](const BagRelation &r) -> std::optional<Value> {
                for (auto &[t, m] : r.rows())
                    if (t[0] == Value(std::string("c1"))) return t[1];
                return std::nullopt;
            };
            if (c1(before) == Value(int64_t(280)) and c1(change) == Value(int64_t(-15)) and
                c1(after) == Value(int64_t(265)) and after == summary)
                checked = true;
        }
        if (not checked) o.fail("no aggregate state merges 280 and -15 into 265");
    }
    if (o.pass) o.detail << "summary {c1:265, c2:500}, 7-row sales_status, IM-1 delta with -1 row, IM-2 held back, 280 + (-15) = 265";
    return o;
}

// 4 -----------------------------------------------------------------------------------------------------------------

struct RuleCase
{
    const char *name;
    Shape shape;
    const char *families;
    OpKind fired;
};

/// Checks every expr of every delta slot of the query (or, for aggregates, of its partial aggregate state) against the
/// difference of the batch snapshots.  Returns an error or an empty string.
std::string check_delta_rule(const RuleCase &rc, const Session &s)
{
    auto x = explore_session(s, rc.families);
    auto ev = evaluator(x, s);
    auto q = query_tvr(x);
    if (not q) return "query TVR not found";
    int k = int(s.arrivals.timeline.size());
    bool fired = false;
    for (int t = 0; t + 1 < k; ++t) {
        auto want = bag_difference(oracle(s, t + 1), oracle(s, t));
        if (rc.shape != Shape::Aggregate) {
            auto g = x.memo.slot(*q, Slot::delta(t, t + 1));
            if (not g) return "no delta for interval " + std::to_string(t);
            for (auto *e : x.memo.exprs_of(*g)) {
                fired |= e->op.kind == rc.fired;
                auto got = ev.evaluate(*e);
                if (not approx_equal(got, want, float_tol))
                    return e->op.signature() + " gives " + got.to_string() + ", expected " + want.to_string();
            }
            continue;
        }
        // aggregates: the delta lives on the partial-aggregate state, merged per key
        auto snap = x.memo.slot(*q, Slot::snapshot(t + 1));
        std::optional<TvrId> state;
        for (auto *e : x.memo.exprs_of(*snap))
            if (e->op.kind == OpKind::AggFinal)
                for (auto id : x.memo.snapshot_tvrs(e->children[0], t + 1))
                    if (x.memo.tvr(id).attribute()) state = id;
        if (not state) return "no partial aggregate state";
        auto &tvr = x.memo.tvr(*state);
        auto g = x.memo.slot(*state, Slot::delta(t, t + 1));
        if (not g) return "no aggregate delta for interval " + std::to_string(t);
        auto &spec = *tvr.agg;
        Operator partial = simple_op(OpKind::AggPartial, nullptr, tvr.agg);
        auto input = [&](int u) { return snapshot_at(s.arrivals.input("a"), u); };
        auto p0 = input(t), p1 = input(t + 1);
        auto s0 = apply_operator(partial, { &p0 }), s1 = apply_operator(partial, { &p1 });
        auto want_state = drop_zero_states(attribute_inverse(s1, s0, tvr.merge_operator()), tvr.merge_operator());
        for (auto *e : x.memo.exprs_of(*g)) {
            fired |= e->op.kind == rc.fired;
            auto got = ev.evaluate(*e);
            if (not approx_equal(drop_zero_states(got, tvr.merge_operator()), want_state, float_tol))
                return e->op.signature() + " gives " + got.to_string() + ", expected " + want_state.to_string();
            if (not approx_equal(agg_final(merge(s0, got, tvr.merge_operator()), spec), oracle(s, t + 1), float_tol))
                return "merged aggregate differs from the batch result";
        }
    }
    return fired ? "" : "the rule did not fire";
}

Outcome delta_rules()
{
    Outcome o;
    const RuleCase cases[] = {
        { "filter", Shape::Filter, "core", OpKind::Filter },
        { "project", Shape::Project, "core", OpKind::Project },
        { "union", Shape::Union, "core", OpKind::Union },
        { "inner join", Shape::Join, "core", OpKind::DeltaInnerJoin },
        { "left outer join", Shape::OuterJoin, "im1", OpKind::DeltaLeftOuterJoin },
        { "SUM/COUNT/AVG aggregate", Shape::Aggregate, "core", OpKind::AggPartial },
    };
    std::mt19937_64 rng(4);
    RandomSessionOptions ro;
    ro.max_points = 3;
    ro.nonempty_deltas = true;
    bool first = true;
    for (auto &rc : cases) {
        int bad = 0;
        for (int i = 0; i != delta_rule_cases; ++i) {
            auto s = random_session(rng, rc.shape, ro);
            s.requirement = OutputRequirement::at_end(s.arrivals.timeline.size(), shape_query(rc.shape));
            std::string err;
            try {
                err = check_delta_rule(rc, s);
            } catch (const Error &e) {
                err = std::string("error: ") + e.what();
            }
            if (not err.empty()) {
                ++bad;
                o.fail(std::string(rc.name) + " case " + std::to_string(i) + ": " + err);
            }
        }
        o.detail << (first ? "" : ", ") << rc.name << " " << delta_rule_cases - bad << "/" << delta_rule_cases;
        first = false;
    }
    return o;
}

// 5 -----------------------------------------------------------------------------------------------------------------

std::string check_im2(const Session &s)
{
    auto x = explore_session(s, "im2");
    auto ev = evaluator(x, s);
    auto q = query_tvr(x);
    if (not q) return "query TVR not found";
    for (int t = 0; t != int(s.arrivals.timeline.size()); ++t) {
        auto p = x.memo.resolve(*q, { InterKind::PositivePart }, Slot::snapshot(t));
        auto n = x.memo.resolve(*q, { InterKind::NegativePart }, Slot::snapshot(t));
        if (not p or not n) return "no positive/negative part at " + std::to_string(t);
        auto sum = additive_union(ev.relation(*p), ev.relation(*n));
        if (not approx_equal(sum, oracle(s, t))) return "Q^P + Q^N differs from the snapshot at " + std::to_string(t);
    }
    return "";
}

std::string check_ojv(const Session &s)
{
    auto x = explore_session(s, "ojv");
    auto ev = evaluator(x, s);
    auto q = query_tvr(x);
    if (not q) return "query TVR not found";
    for (int t = 0; t + 1 < int(s.arrivals.timeline.size()); ++t) {
        auto want = bag_difference(oracle(s, t + 1), oracle(s, t));
        auto d = x.memo.resolve(*q, { InterKind::DirectPart }, Slot::delta(t, t + 1));
        auto i = x.memo.resolve(*q, { InterKind::IndirectPart }, Slot::delta(t, t + 1));
        if (not d or not i) return "no direct/indirect delta for interval " + std::to_string(t);
        if (not approx_equal(additive_union(ev.relation(*d), ev.relation(*i)), want))
            return "direct + indirect delta differs from the snapshot difference";
        auto g = x.memo.slot(*q, Slot::delta(t, t + 1));
        if (not g or not approx_equal(ev.relation(*g), want)) return "outer join delta differs";
    }
    return "";
}

Outcome decompositions()
{
    Outcome o;
    std::mt19937_64 rng(5);
    RandomSessionOptions ro;
    ro.max_points = 3;
    ro.nonempty_deltas = true;
    int im2 = 0, ojv = 0;
    for (int i = 0; i != decomposition_cases; ++i) {
        auto s = random_session(rng, Shape::OuterJoin, ro);
        s.requirement = OutputRequirement::at_end(s.arrivals.timeline.size(), shape_query(Shape::OuterJoin));
        for (auto [check, name, count] : { std::tuple(check_im2, "IM-2", &im2), std::tuple(check_ojv, "OJV", &ojv) }) {
            std::string err;
            try {
                err = check(s);
            } catch (const Error &e) {
                err = std::string("error: ") + e.what();
            }
            if (err.empty()) ++*count;
            else o.fail(std::string(name) + " case " + std::to_string(i) + ": " + err);
        }
    }
    o.detail << "Q^P + Q^N = Q on " << im2 << "/" << decomposition_cases << " sessions, OJV delta identity on " << ojv
             << "/" << decomposition_cases;
    return o;
}

// 6 -----------------------------------------------------------------------------------------------------------------

Outcome dp_optimality()
{
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(6);
    int agreed = 0, compared = 0;
    for (int i = 0; i != dp_spaces; ++i) {
        int classes = std::uniform_int_distribution<int>(2, 12)(rng);
        int points = std::uniform_int_distribution<int>(1, 4)(rng);
        auto space = random_plan_space(rng, classes, points);
        std::vector<double> w;
        for (int t = 0; t != points; ++t) w.push_back(std::uniform_int_distribution<int>(1, 4)(rng) * 0.25);
        for (auto &f : { CostFunction::weighted(w), CostFunction::reverse_lexical() }) {
            ++compared;
            std::optional<CostVector> dp, ex;
            try {
                dp = dp_search(space, f).objective;
            } catch (const UnplannableError&) {
            }
            try {
                ex = exhaustive_search(space, f).objective;
            } catch (const UnplannableError&) {
            } catch (const RangeError&) {
                o.fail("space " + std::to_string(i) + " is too large to enumerate");
                continue;
            }
            if (dp.has_value() != ex.has_value()) {
                o.fail("space " + std::to_string(i) + ": only one search found a plan");
            } else if (dp and not equivalent(f, *dp, *ex)) {
                o.fail("space " + std::to_string(i) + " " + f.to_string() + ": DP " + fmt(*dp) + ", exhaustive " + fmt(*ex));
            } else {
                ++agreed;
            }
        }
    }
    double secs = seconds_since(t0);
    o.detail << agreed << "/" << compared << " searches agree over " << dp_spaces
             << " spaces under weighted sum and reverse lexical, " << fmt(secs) << " s";
    if (secs >= dp_time_limit) o.fail("slower than 60 s");
    return o;
}

// 7 -----------------------------------------------------------------------------------------------------------------

Outcome dominance()
{
    Outcome o;
    std::vector<std::pair<std::string, Session>> sessions;
    for (auto &b : bundled) sessions.emplace_back(b, load_session(data(b)));
    std::mt19937_64 rng(7);
    RandomSessionOptions ro;
    ro.max_points = 3;
    for (int i = 0; i != dominance_random_sessions; ++i) {
        auto shape = Shape(i % shape_count);
        sessions.emplace_back("random " + std::string(to_string(shape)) + " #" + std::to_string(i),
                              random_session(rng, shape, ro));
    }
    int checked = 0;
    for (auto &[name, s] : sessions) {
        std::map<std::string, double> cost;
        for (auto fam : { "im1", "im2", "ojv", "all" }) {
            PlanOptions po;
            po.rules = RuleFamilies::parse(fam);
            auto r = plan_session(s, po);
            cost[fam] = reduce_cost(r.plan.cost, s.cost);
            if (s.cost.less(r.unshared.objective, r.plan.objective))
                o.fail(name + " " + fam + ": sharing made the plan worse");
        }
        double best_single = std::min({ cost["im1"], cost["im2"], cost["ojv"] });
        if (cost["all"] > best_single + cost_tol)
            o.fail(name + ": all rules " + fmt(cost["all"]) + " > best single method " + fmt(best_single));
        ++checked;
    }
    // sharing an Exchange state strictly helps on the running example
    auto s = load_session(data("example1.json"));
    auto r = plan_session(s);
    bool exchange_shared = false;
    for (auto n : r.plan.materialized) exchange_shared |= r.plan.nodes[n].kind == PhysKind::Exchange;
    double before = reduce_cost(r.unshared.objective, s.cost), after = reduce_cost(r.plan.objective, s.cost);
    if (not exchange_shared or not (after < before - cost_tol)) o.fail("no strict improvement from a shared Exchange");
    o.detail << checked << " sessions; example1 sharing an Exchange: " << fmt(before) << " -> "
             << fmt(after);
    return o;
}

// 8 -----------------------------------------------------------------------------------------------------------------

Outcome store_early()
{
    Outcome o;
    std::mt19937_64 rng(8);
    RandomSessionOptions ro;
    ro.min_points = 2;
    ro.max_points = 4;
    int matched = 0, reduced = 0;
    for (int i = 0; i != store_early_sessions; ++i) {
        auto shape = Shape(i % shape_count);
        auto s = random_session(rng, shape, ro);
        int k = int(s.arrivals.timeline.size());
        std::vector<double> w;
        for (int t = 0; t != k; ++t) w.push_back(1.0 + t);
        s.cost = CostFunction::weighted(w);
        PlanOptions po;
        po.share = false;
        auto r = plan_session(s, po);
        auto all = share_candidates(r.space);
        if (store_early_reduction(all, s.cost).size() < all.size()) ++reduced;
        auto early = greedy_mqo(r.space, s.cost, true);
        auto full = greedy_mqo(r.space, s.cost, false);
        double a = reduce_cost(early.objective, s.cost), b = reduce_cost(full.objective, s.cost);
        if (near(a, b)) ++matched;
        else o.fail("session " + std::to_string(i) + " (" + std::string(to_string(shape)) + "): store-early " + fmt(a) +
                    ", full " + fmt(b));
    }
    o.detail << matched << "/" << store_early_sessions << " sessions match (" << reduced
             << " had later-time candidates removed)";
    return o;
}

// 9 -----------------------------------------------------------------------------------------------------------------

Outcome translation()
{
    Outcome o;
    int checked = 0;
    for (auto &b : bundled) {
        auto s = load_session(data(b));
        if (s.arrivals.timeline.size() < 3) continue;
        ++checked;
        PlanOptions with, without;
        without.translation_copy = false;
        auto a = plan_session(s, with), c = plan_session(s, without);
        double x = reduce_cost(a.plan.objective, s.cost), y = reduce_cost(c.plan.objective, s.cost);
        double xc = reduce_cost(a.plan.cost, s.cost), yc = reduce_cost(c.plan.cost, s.cost);
        if (not near(x, y) or not near(xc, yc))
            o.fail(b + ": copy " + fmt(x) + "/" + fmt(xc) + ", no copy " + fmt(y) + "/" + fmt(yc));
        else o.detail << (checked > 1 ? ", " : "") << b << " " << fmt(xc);
    }
    if (checked == 0) o.fail("no bundled session has three points");
    return o;
}

// 10 ----------------------------------------------------------------------------------------------------------------

Outcome fuzz()
{
    Outcome o;
    std::mt19937_64 rng(10);
    RandomSessionOptions ro;
    int validated = 0, outputs = 0, with_retractions = 0;
    for (int i = 0; i != fuzz_sessions; ++i) {
        auto shape = Shape(i % shape_count);
        auto s = random_session(rng, shape, ro);
        bool retracts = false;
        for (auto &[name, in] : s.arrivals.inputs)
            for (auto &[t, d] : in.deltas)
                for (auto &[row, m] : d.rows()) retracts |= m < 0;
        with_retractions += retracts;
        try {
            auto r = plan_session(s);
            StateStore store;
            auto report = run_session(s, r.plan, store);
            bool all = true;
            for (auto t : s.requirement.points()) {
                ++outputs;
                all &= report.times[t].oracle_match == true;
            }
            if (all) ++validated;
            else o.fail("session " + std::to_string(i) + ": missing validation");
        } catch (const ValidationError &e) {
            o.fail("session " + std::to_string(i) + " (" + std::string(to_string(shape)) + "): " + e.what());
        } catch (const Error &e) {
            o.fail("session " + std::to_string(i) + " (" + std::string(to_string(shape)) + "): " + e.what());
        }
    }
    o.detail << validated << "/" << fuzz_sessions << " sessions validated at " << outputs
             << " outputs, " << with_retractions << " with retractions";
    return o;
}

}

int main()
{
    struct Criterion
    {
        int id;
        const char *title;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        { 1, "running-example golden", running_example },
        { 2, "retraction variant golden", retraction_variant },
        { 3, "result correctness goldens", result_goldens },
        { 4, "delta-rule oracle suite", delta_rules },
        { 5, "IM-2 / OJV decomposition suite", decompositions },
        { 6, "DP optimality", dp_optimality },
        { 7, "unification dominance", dominance },
        { 8, "store-early", store_early },
        { 9, "translational symmetry", translation },
        { 10, "end-to-end soundness fuzz", fuzz },
    };
    int failed = 0;
    for (auto &c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o.fail(std::string("uncaught: ") + e.what());
        }
        failed += not o.pass;
        std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.text().c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of 10 criteria passed\n", 10 - failed);
    return failed;
}
