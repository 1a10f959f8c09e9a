#include "support.hpp"

namespace tvr::test {

Tuple row(std::initializer_list<Value> values) { return Tuple(values); }

Example1 example1(bool with_o4_return)
{
    Example1 e;
    e.arrivals.timeline = Timeline(std::vector<std::string>{ "t1", "t2" });
    e.arrivals.declare("sales", Schema({ { "o_id", Kind::Text }, { "cat", Kind::Text }, { "price", Kind::Int } },
                                       std::vector<std::string>{ "o_id" }));
    e.arrivals.declare("returns", Schema({ { "ro_id", Kind::Text }, { "cost", Kind::Int } }));
    auto S = [&](int t, const char *o, const char *c, int64_t p) { e.arrivals.add("sales", t, row({ o, c, p })); };
    auto R = [&](int t, const char *o, int64_t c) { e.arrivals.add("returns", t, row({ o, c })); };
    S(0, "o1", "c1", 100);
    S(0, "o2", "c2", 150);
    S(0, "o3", "c1", 120);
    S(0, "o4", "c1", 170);
    S(1, "o5", "c2", 300);
    S(1, "o6", "c1", 150);
    S(1, "o7", "c2", 220);
    R(0, "o1", 10);
    R(1, "o2", 20);
    R(1, "o6", 15);
    if (with_o4_return) R(1, "o4", 30);

    auto loj = Q::scan("sales").left_outer_join(Q::scan("returns"), eq(col("o_id"), col("ro_id")));
    e.sales_status = loj;
    e.summary = loj.project({ { "o_id", col("o_id") },
                              { "cat", col("cat") },
                              { "gross", if_(is_null(col("cost")), col("price"), neg(col("cost"))) } })
                    .aggregate(AggSpec{ { "cat" }, { { "gross", AggFunc::SUM, "gross" } } });
    return e;
}

namespace {

Value random_value(std::mt19937_64 &rng, const Column &c, int domain)
{
    std::uniform_int_distribution<int> d(0, domain - 1);
    if (c.nullable and std::uniform_int_distribution<int>(0, 5)(rng) == 0) return std::monostate{};
    switch (c.kind) {
        case Kind::Int: return int64_t(d(rng));
        case Kind::Float: return double(d(rng)) * 0.5;
        case Kind::Text: return std::string(1, char('a' + d(rng)));
    }
    return std::monostate{};
}

}

BagRelation random_relation(std::mt19937_64 &rng, const Schema &schema, int rows, int max_mult, int domain)
{
    BagRelation r(schema);
    std::uniform_int_distribution<int> m(1, max_mult);
    for (int i = 0; i != rows; ++i) {
        Tuple t;
        for (auto &c : schema.columns()) t.push_back(random_value(rng, c, domain));
        r.add(std::move(t), m(rng));
    }
    return r;
}

BagRelation random_delta(std::mt19937_64 &rng, const BagRelation &base, int rows, int domain)
{
    BagRelation d(base.schema());
    std::uniform_int_distribution<int> coin(0, 2);
    auto remaining = base;
    for (int i = 0; i != rows; ++i) {
        if (coin(rng) == 0 and not remaining.empty()) {
            auto it = remaining.rows().begin();
            std::advance(it, std::uniform_int_distribution<std::size_t>(0, remaining.distinct() - 1)(rng));
            auto t = it->first;
            remaining.add_unchecked(t, -1);
            d.add_unchecked(t, -1);
        } else {
            Tuple t;
            for (auto &c : base.schema().columns()) t.push_back(random_value(rng, c, domain));
            d.add(t, 1);
            remaining.add_unchecked(t, 1);
        }
    }
    return d;
}

Schema kv_schema(const std::string &prefix, bool nullable)
{
    return Schema({ { prefix + "k", Kind::Int, false }, { prefix + "v", Kind::Int, nullable } });
}

PlanSpace random_plan_space(std::mt19937_64 &rng, int classes, int points)
{
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    PlanSpace s;
    s.points = points;
    s.classes.resize(classes);
    for (int c = 0; c != classes; ++c) {
        auto &cls = s.classes[c];
        cls.group = c;
        cls.cardinality = pick(0, 6);
        cls.save_cost = pick(0, 3) * 0.5;
        cls.load_cost = pick(0, 3) * 0.5;
        int alts = pick(1, 2);
        for (int a = 0; a != alts; ++a) {
            PlanAlt alt;
            alt.kind = PhysKind::FilterExec;
            bool leaf = c >= classes - 2 or pick(0, 3) == 0;
            if (leaf) {
                alt.kind = PhysKind::TableScanAt;
                alt.available = pick(0, points - 1);
            } else {
                int n = pick(1, 2);
                for (int i = 0; i != n; ++i) {
                    // mostly forward edges; a rare back edge makes a cycle
                    int ch = pick(0, 9) == 0 ? pick(0, c) : pick(c + 1, classes - 1);
                    alt.children.push_back(ch);
                }
            }
            alt.by_product = pick(0, 4) == 0;
            for (int t = 0; t != points; ++t) alt.cost.push_back(pick(0, 6) * 0.5);
            cls.alts.push_back(std::move(alt));
        }
    }
    for (int t = 0; t != points; ++t)
        if (t == points - 1 or pick(0, 2) == 0) s.roots[t] = pick(0, 1);
    return s;
}

std::string_view to_string(Shape s)
{
    static const char *names[] = { "filter",    "project",          "union",     "join",
                                   "outer-join", "aggregate", "outer-join-summary", "join-count",
                                   "filtered-outer-join" };
    return names[int(s)];
}

LogicalPtr shape_query(Shape s)
{
    auto a = Q::scan("a"), b = Q::scan("b"), c = Q::scan("c");
    auto on = eq(col("k"), col("bk"));
    switch (s) {
        case Shape::Filter: return a.filter(make(Scalar::Op::Gt, { col("v"), lit(int64_t(1)) }));
        case Shape::Project:
            return a.project({ { "k", col("k") }, { "w", make(Scalar::Op::Add, { col("v"), col("k") }) } });
        case Shape::Union: return a.union_all(c);
        case Shape::Join: return a.join(b, on);
        case Shape::OuterJoin: return a.left_outer_join(b, on);
        case Shape::Aggregate:
            return a.aggregate(AggSpec{ { "k" },
                                        { { "s", AggFunc::SUM, "v" }, { "n", AggFunc::COUNT, "" }, { "m", AggFunc::AVG, "v" } } });
        case Shape::OuterJoinSummary:
            return a.left_outer_join(b, on)
                .project({ { "k", col("k") }, { "g", if_(is_null(col("bv")), col("v"), neg(col("bv"))) } })
                .aggregate(AggSpec{ { "k" }, { { "g", AggFunc::SUM, "g" } } });
        case Shape::JoinCount: return a.join(b, on).aggregate(AggSpec{ { "bk" }, { { "n", AggFunc::COUNT, "" } } });
        case Shape::FilteredOuterJoin:
            return a.left_outer_join(b, on).filter(make(Scalar::Op::Gt, { col("v"), lit(int64_t(0)) }));
    }
    return nullptr;
}

Session random_session(std::mt19937_64 &rng, Shape shape, const RandomSessionOptions &o)
{
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    Session s;
    int k = pick(o.min_points, o.max_points);
    std::vector<std::string> labels;
    for (int t = 0; t != k; ++t) labels.push_back("t" + std::to_string(t + 1));
    s.arrivals.timeline = Timeline(labels);
    s.name = std::string(to_string(shape));
    std::map<std::string, Schema> tables{ { "a", kv_schema("", true) }, { "b", kv_schema("b", true) }, { "c", kv_schema("", true) } };
    for (auto &[name, schema] : tables) {
        s.arrivals.declare(name, schema);
        auto acc = random_relation(rng, schema, pick(1, o.rows), 2, o.domain);
        for (auto &[row, m] : acc.rows()) s.arrivals.add(name, 0, row, m);
        for (int t = 1; t != k; ++t) {
            BagRelation d;
            do {
                d = o.retractions ? random_delta(rng, acc, pick(0, o.rows), o.domain)
                                  : random_relation(rng, schema, pick(0, o.rows), 1, o.domain);
            } while (o.nonempty_deltas and d.empty());
            for (auto &[row, m] : d.rows()) s.arrivals.add(name, t, row, m);
            acc = additive_union(acc, d);
        }
    }
    auto q = shape_query(shape);
    s.requirement = pick(0, 1) ? OutputRequirement::at_end(k, q) : OutputRequirement::at_every(k, q);
    if (pick(0, 1)) {
        s.cost = CostFunction::uniform(k);
    } else {
        std::vector<double> w;
        for (int t = 0; t != k; ++t) w.push_back(0.2 + 0.8 * t / std::max(1, k - 1));
        s.cost = CostFunction::weighted(w);
    }
    s.profile = pick(0, 1) ? CostProfile::shuffle() : CostProfile::output();
    return s;
}

}
