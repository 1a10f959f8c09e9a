#include <gtest/gtest.h>

#include <random>
#include <tvr/errors.hpp>
#include <tvr/memo.hpp>

#include "../support.hpp"

using namespace tvr;
using namespace tvr::test;

namespace {

Memo example_memo(const Example1 &e) { return Memo(e.arrivals.catalog(), e.arrivals.timeline.size()); }

}

TEST(Memo, RegisterTreeCreatesOneGroupPerOperator)
{
    auto e = example1();
    auto m = example_memo(e);
    auto root = m.register_tree(*e.sales_status, 1);
    EXPECT_EQ(m.group_count(), 3u);
    EXPECT_EQ(m.expr_count(), 3u);
    EXPECT_EQ(m.register_tree(*e.sales_status, 1), root);
    EXPECT_EQ(m.group_count(), 3u);
    EXPECT_TRUE(m.check_invariants().empty()) << m.check_invariants();
}

TEST(Memo, SnapshotLinksDeriveOperatorTvrs)
{
    auto e = example1();
    auto m = example_memo(e);
    auto r0 = m.register_tree(*e.sales_status, 0);
    auto r1 = m.register_tree(*e.sales_status, 1);
    ASSERT_NE(r0, r1);
    auto t0 = m.snapshot_tvrs(r0, 0);
    auto t1 = m.snapshot_tvrs(r1, 1);
    ASSERT_EQ(t0.size(), 1u);
    ASSERT_EQ(t1, t0);
    EXPECT_EQ(m.slot(t0[0], Slot::snapshot(0)), r0);
    EXPECT_EQ(m.slot(t0[0], Slot::snapshot(1)), r1);
    auto sales = m.base_tvr("sales");
    EXPECT_TRUE(m.slot(sales, Slot::snapshot(0)).has_value());
    EXPECT_FALSE(m.slot(sales, Slot::delta(0, 1)).has_value());
}

TEST(Memo, ExprIntoOtherGroupMergesGroups)
{
    auto e = example1();
    auto m = example_memo(e);
    auto a = m.register_expr(snapshot_op("sales", 0), {}).first;
    auto b = m.register_expr(snapshot_op("sales", 1), {}).first;
    auto fa = m.register_expr(filter_op(eq(col("cat"), lit("c1"))), { a }).first;
    auto fb = m.register_expr(filter_op(eq(col("cat"), lit("c1"))), { b }).first;
    ASSERT_NE(fa, fb);
    m.register_expr(snapshot_op("sales", 1), {}, a);
    EXPECT_EQ(m.find(a), m.find(b));
    // Congruence: the filters over the merged group collapse too.
    EXPECT_EQ(m.find(fa), m.find(fb));
    EXPECT_EQ(m.exprs_of(fa).size(), 1u);
    EXPECT_TRUE(m.check_invariants().empty()) << m.check_invariants();
}

TEST(Memo, SlotCollisionMergesGroups)
{
    auto e = example1();
    auto m = example_memo(e);
    auto d = m.register_expr(delta_op("sales", 0, 1), {}).first;
    auto other = m.register_expr(empty_op(e.arrivals.catalog().at("sales")), {}).first;
    ASSERT_NE(m.find(d), m.find(other));
    auto sales = m.base_tvr("sales");
    EXPECT_TRUE(m.register_tvr_link({ sales, other, Slot::delta(0, 1) }));
    EXPECT_EQ(m.find(d), m.find(other));
    EXPECT_FALSE(m.register_tvr_link({ sales, other, Slot::delta(0, 1) }));
    EXPECT_TRUE(m.check_invariants().empty()) << m.check_invariants();
}

TEST(Memo, SharedSnapshotMergesTvrs)
{
    auto e = example1();
    auto m = example_memo(e);
    auto s0 = m.register_expr(snapshot_op("sales", 0), {}).first;
    auto x = m.new_tvr("x");
    m.register_tvr_link({ x, s0, Slot::snapshot(0) });
    EXPECT_EQ(m.find_tvr(x), m.find_tvr(m.base_tvr("sales")));
}

TEST(Memo, SlotOutsideTimelineIsRangeError)
{
    auto e = example1();
    auto m = example_memo(e);
    auto s0 = m.register_expr(snapshot_op("sales", 0), {}).first;
    EXPECT_THROW(m.register_tvr_link({ m.base_tvr("sales"), s0, Slot::snapshot(2) }), RangeError);
    EXPECT_THROW(m.register_tvr_link({ m.base_tvr("sales"), s0, Slot::delta(1, 1) }), RangeError);
}

TEST(Memo, SchemaMismatchIntoGroupFails)
{
    auto e = example1();
    auto m = example_memo(e);
    auto s0 = m.register_expr(snapshot_op("sales", 0), {}).first;
    EXPECT_THROW(m.register_expr(snapshot_op("returns", 0), {}, s0), SchemaError);
}

TEST(Memo, TransitiveResolveFollowsPartEdges)
{
    auto e = example1();
    auto m = example_memo(e);
    auto root = m.register_tree(*e.sales_status, 1);
    auto q = m.snapshot_tvrs(root, 1).front();
    auto p = m.new_tvr("p");
    auto pp = m.new_tvr("pp");
    auto d = m.register_expr(delta_op("sales", 0, 1), {}).first;
    m.register_inter_tvr({ q, p, InterKind::PositivePart });
    m.register_inter_tvr({ p, pp, InterKind::DirectPart });
    m.register_tvr_link({ pp, d, Slot::delta(0, 1) });
    EXPECT_EQ(m.resolve(q, { InterKind::PositivePart, InterKind::DirectPart }, Slot::delta(0, 1)), m.find(d));
    EXPECT_FALSE(m.resolve(q, { InterKind::NegativePart }, Slot::delta(0, 1)).has_value());
    // A second positive part of q is the same TVR.
    auto p2 = m.new_tvr("p2");
    m.register_inter_tvr({ q, p2, InterKind::PositivePart });
    EXPECT_EQ(m.find_tvr(p2), m.find_tvr(p));
}

TEST(Memo, MergeStormKeepsInvariants)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial != 30; ++trial) {
        auto e = example1();
        auto m = example_memo(e);
        std::vector<GroupId> gs;
        for (int t = 0; t != 2; ++t) {
            gs.push_back(m.register_tree(*e.summary, t));
            gs.push_back(m.register_tree(*e.sales_status, t));
            gs.push_back(m.register_expr(delta_op("sales", 0, 1), {}).first);
            gs.push_back(m.register_expr(delta_op("returns", 0, 1), {}).first);
        }
        for (int i = 0; i != 6; ++i) {
            auto a = gs[rng() % gs.size()], b = gs[rng() % gs.size()];
            if (m.group(a).schema.compatible(m.group(b).schema)) m.merge_groups(a, b);
            ASSERT_TRUE(m.check_invariants().empty()) << m.check_invariants() << "\n" << m.dump();
        }
    }
}

TEST(Memo, CanonicalDumpIgnoresRegistrationOrder)
{
    auto e = example1();
    auto a = example_memo(e), b = example_memo(e);
    a.register_tree(*e.summary, 0);
    a.register_tree(*e.summary, 1);
    a.register_expr(delta_op("sales", 0, 1), {});
    b.register_expr(delta_op("sales", 0, 1), {});
    b.register_tree(*e.summary, 1);
    b.register_tree(*e.summary, 0);
    EXPECT_EQ(a.canonical_dump(), b.canonical_dump());
    EXPECT_NE(a.dump(), b.dump());
}

TEST(Memo, EvaluatorMatchesBatch)
{
    auto e = example1();
    auto m = example_memo(e);
    auto g = m.register_tree(*e.summary, 1);
    GroupEvaluator ev(m, [&](const Operator &op) { return leaf_relation(e.arrivals, op); });
    EXPECT_EQ(ev.relation(g), evaluate_on_accumulated(*e.summary, e.arrivals, 1));
}
