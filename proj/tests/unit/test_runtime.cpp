#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <tvr/errors.hpp>
#include <tvr/rules.hpp>
#include <tvr/runtime.hpp>
#include <tvr/search.hpp>

#include "../support.hpp"

using namespace tvr;
using namespace tvr::test;

namespace {

const CostFunction example_weights = CostFunction::weighted({ 0.2, 1.0 });

TimedPlan example_plan(const Example1 &e, const OutputRequirement &req, const char *families, const CostProfile &p,
                       bool share = true)
{
    ExploreOptions o;
    o.families = RuleFamilies::parse(families);
    auto x = explore(e.arrivals, req, o);
    auto space = build_plan_space(x.memo, x.roots, exact_stats(x.memo, e.arrivals), p);
    return share ? greedy_mqo(space, example_weights) : dp_search(space, example_weights);
}

std::filesystem::path scratch_dir(const std::string &name)
{
    auto d = std::filesystem::temp_directory_path() / ("tvr_test_" + name);
    std::filesystem::remove_all(d);
    return d;
}

}

TEST(Runtime, ExampleOneOutputsMatchTheOracle)
{
    auto e = example1();
    auto req = OutputRequirement::at_end(2, e.summary);
    for (auto fam : { "core", "im1", "im2", "ojv", "all" }) {
        auto plan = example_plan(e, req, fam, CostProfile::shuffle());
        auto r = execute(plan, e.arrivals, req, { CostProfile::shuffle() });
        ASSERT_TRUE(r.times[1].oracle_match.has_value()) << fam;
        EXPECT_TRUE(*r.times[1].oracle_match) << fam;
        EXPECT_FALSE(r.times[0].output.has_value());
    }
}

TEST(Runtime, MeasuredCostIsThePlanCost)
{
    for (bool o4 : { false, true }) {
        auto e = example1(o4);
        for (auto req : { OutputRequirement::at_end(2, e.summary), OutputRequirement::at_every(2, e.sales_status) })
            for (auto prof : { CostProfile::shuffle(), CostProfile::output() })
                for (auto fam : { "core", "im1", "im2", "ojv", "all" })
                    for (bool share : { false, true }) {
                        auto plan = example_plan(e, req, fam, prof, share);
                        auto r = execute(plan, e.arrivals, req, { prof });
                        EXPECT_TRUE(same_cost(r.cost, plan.cost)) << fam << " " << prof.name << "\n" << plan.to_string();
                    }
    }
}

TEST(Runtime, ExampleOneTupleCounts)
{
    auto e = example1();
    auto req = OutputRequirement::at_end(2, e.summary);
    auto im1 = execute(example_plan(e, req, "im1", CostProfile::shuffle()), e.arrivals, req, { CostProfile::shuffle() });
    auto im2 = execute(example_plan(e, req, "im2", CostProfile::shuffle()), e.arrivals, req, { CostProfile::shuffle() });
    EXPECT_EQ(account_tuples(im1, CostProfile::shuffle()), (std::vector<int64_t>{ 9, 10 }));
    EXPECT_EQ(account_tuples(im2, CostProfile::shuffle()), (std::vector<int64_t>{ 6, 11 }));
}

TEST(Runtime, ReplayIsDeterministic)
{
    auto e = example1(true);
    auto req = OutputRequirement::at_every(2, e.summary);
    auto plan = example_plan(e, req, "all", CostProfile::output());
    ExecOptions o{ CostProfile::output() };
    o.keep_relations = true;
    EXPECT_EQ(execute(plan, e.arrivals, req, o), execute(plan, e.arrivals, req, o));
}

TEST(Runtime, StatesPersistAcrossStores)
{
    auto e = example1();
    auto req = OutputRequirement::at_end(2, e.summary);
    auto plan = example_plan(e, req, "im1", CostProfile::shuffle());
    auto dir = scratch_dir("persist");
    {
        StateStore store(dir);
        ExecOptions o{ CostProfile::shuffle() };
        o.store = &store;
        execute(plan, e.arrivals, req, o);
        EXPECT_FALSE(store.ids().empty());
    }
    StateStore reopened(dir);
    auto ids = reopened.ids();
    ASSERT_FALSE(ids.empty());
    for (auto &id : ids) EXPECT_NO_THROW(reopened.load(id, 1));
    std::filesystem::remove_all(dir);
}

TEST(Runtime, StateErrors)
{
    StateStore store;
    EXPECT_THROW(store.load("missing", 0), StateError);
    store.save("s", BagRelation(kv_schema("")), Trait::none(), 1);
    EXPECT_THROW(store.load("s", 0), StateError) << "a state is not readable before it is saved";
    EXPECT_NO_THROW(store.load("s", 1));

    auto dir = scratch_dir("corrupt");
    StateStore disk(dir);
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(disk.load("bad", 0), StateError);
    std::filesystem::remove_all(dir);
}

TEST(Runtime, ContractViolationsAreRejected)
{
    auto e = example1();
    auto req = OutputRequirement::at_end(2, e.summary);
    auto plan = example_plan(e, req, "im1", CostProfile::shuffle());

    auto wrong_points = plan;
    wrong_points.points = 3;
    EXPECT_THROW(execute(wrong_points, e.arrivals, req, {}), ContractError);

    // a node reading a child that only runs later breaks the temporal order
    auto backwards = plan;
    for (auto &n : backwards.nodes)
        if (n.time == 0 and not n.children.empty()) {
            backwards.nodes[n.children[0]].time = 1;
            break;
        }
    EXPECT_THROW(execute(backwards, e.arrivals, req, {}), ContractError);
}

TEST(Runtime, WrongPlanFailsValidation)
{
    auto e = example1();
    auto req = OutputRequirement::at_end(2, e.summary);
    auto plan = example_plan(e, req, "im1", CostProfile::shuffle());
    auto other = example1(true);
    // stats only price a plan, so it stays correct on other arrivals
    EXPECT_NO_THROW(execute(plan, other.arrivals, req, {}));

    // drop one branch of the final merge: the output loses rows
    auto broken = plan;
    for (auto &n : broken.nodes)
        if (n.kind == PhysKind::MergeUnion) {
            n.op = Operator{};
            n.op.kind = OpKind::Union;
            n.children = { n.children[0], n.children[0] };
        }
    try {
        execute(broken, e.arrivals, req, {});
        FAIL() << "expected a ValidationError";
    } catch (const ValidationError &err) {
        EXPECT_FALSE(err.diff().empty());
    }
}

TEST(Runtime, ExchangesOnlyAccountingNeedsAShuffleProfile)
{
    RunReport r;
    r.times.resize(1);
    r.times[0].exchanged = 3;
    r.times[0].computed = 7;
    EXPECT_EQ(account_tuples(r, CostProfile::shuffle()), std::vector<int64_t>{ 3 });
    EXPECT_EQ(account_tuples(r, CostProfile::output()), std::vector<int64_t>{ 7 });
}
