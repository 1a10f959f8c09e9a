#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <tvr/errors.hpp>
#include <tvr/rules.hpp>
#include <tvr/search.hpp>

#include "../support.hpp"

using namespace tvr;
using namespace tvr::test;

namespace {

PlanSpace example_space(RuleFamilies f, const CostProfile &profile, bool o4 = false)
{
    auto e = example1(o4);
    ExploreOptions o;
    o.families = f;
    auto x = explore(e.arrivals, OutputRequirement::at_end(2, e.summary), o);
    return build_plan_space(x.memo, x.roots, exact_stats(x.memo, e.arrivals), profile);
}

const CostFunction example_weights = CostFunction::weighted({ 0.2, 1.0 });

}

TEST(Search, ExampleOneGoldens)
{
    auto im1 = greedy_mqo(example_space(RuleFamilies::parse("im1"), CostProfile::shuffle()), example_weights);
    auto im2 = greedy_mqo(example_space(RuleFamilies::parse("im2"), CostProfile::shuffle()), example_weights);
    EXPECT_TRUE(same_cost(im1.cost, { 9, 10 })) << im1.to_string();
    EXPECT_TRUE(same_cost(im2.cost, { 6, 11 })) << im2.to_string();
    EXPECT_NEAR(reduce_cost(im1.objective, example_weights), 11.8, 1e-9);
    EXPECT_NEAR(reduce_cost(im2.objective, example_weights), 12.2, 1e-9);
}

TEST(Search, ExampleOneWithoutSharing)
{
    // without shared states, the shuffles of the first snapshot are paid once per consumer
    auto im1 = dp_search(example_space(RuleFamilies::parse("im1"), CostProfile::shuffle()), example_weights);
    EXPECT_TRUE(same_cost(im1.objective, { 14, 10 }));
    EXPECT_TRUE(same_cost(im1.cost, { 9, 10 }));
}

TEST(Search, PlansAreValidAssignments)
{
    for (auto fam : { "core", "im1", "im2", "ojv", "all" })
        for (bool o4 : { false, true })
            for (auto prof : { CostProfile::shuffle(), CostProfile::output() }) {
                auto s = example_space(RuleFamilies::parse(fam), prof, o4);
                auto d = dp_search(s, example_weights);
                auto m = greedy_mqo(s, example_weights);
                EXPECT_TRUE(validate_assignment(d).empty()) << fam;
                EXPECT_TRUE(validate_assignment(m).empty()) << fam;
                EXPECT_FALSE(example_weights.less(d.objective, m.objective)) << fam;
                EXPECT_FALSE(example_weights.less(plan_cost(m), m.objective)) << "a DAG never costs more than its tree";
                EXPECT_TRUE(same_cost(plan_cost(m), m.cost));
            }
}

TEST(Search, AllRulesNeverLoseToOneMethod)
{
    for (bool o4 : { false, true }) {
        double best = 1e100;
        for (auto fam : { "core", "im1", "im2", "ojv" })
            best = std::min(best, reduce_cost(greedy_mqo(example_space(RuleFamilies::parse(fam), CostProfile::shuffle(), o4),
                                                         example_weights).objective,
                                              example_weights));
        auto all = greedy_mqo(example_space(RuleFamilies::all(), CostProfile::shuffle(), o4), example_weights);
        EXPECT_LE(reduce_cost(all.objective, example_weights), best + 1e-9);
    }
}

TEST(Search, DpMatchesExhaustiveOnRandomSpaces)
{
    std::mt19937_64 rng(11);
    int compared = 0;
    for (int i = 0; i != 150; ++i) {
        auto s = random_plan_space(rng, 3 + i % 8, 1 + i % 4);
        for (auto f : { CostFunction::uniform(s.points), CostFunction::reverse_lexical() }) {
            std::optional<TimedPlan> d, x;
            try {
                d = dp_search(s, f);
            } catch (const UnplannableError&) {
            }
            try {
                x = exhaustive_search(s, f);
            } catch (const UnplannableError&) {
            }
            ASSERT_EQ(d.has_value(), x.has_value()) << i;
            if (not d) continue;
            EXPECT_TRUE(not f.less(d->objective, x->objective) and not f.less(x->objective, d->objective))
                << i << " " << f.to_string() << " dp " << ::testing::PrintToString(d->objective) << " exhaustive "
                << ::testing::PrintToString(x->objective) << "\n" << d->to_string() << x->to_string();
            EXPECT_TRUE(validate_assignment(*d).empty()) << i;
            ++compared;
        }
    }
    EXPECT_GT(compared, 150);
}

TEST(Search, ExhaustiveLimitIsRangeError)
{
    std::mt19937_64 rng(5);
    auto s = random_plan_space(rng, 12, 4);
    EXPECT_THROW(exhaustive_search(s, CostFunction::uniform(4), 3), RangeError);
}

TEST(Search, WeightCountMustMatchPoints)
{
    std::mt19937_64 rng(5);
    auto s = random_plan_space(rng, 4, 3);
    EXPECT_THROW(dp_search(s, CostFunction::uniform(2)), ContractError);
}

TEST(Search, StoreEarlyKeepsEarliestTimes)
{
    std::vector<Candidate> c{ { 1, 2 }, { 1, 0 }, { 2, 1 }, { 2, 3 } };
    auto r = store_early_reduction(c, CostFunction::weighted({ 1, 2, 3, 4 }));
    EXPECT_EQ(r, (std::vector<Candidate>{ { 1, 0 }, { 2, 1 } }));
    // not applicable without strictly increasing weights
    EXPECT_EQ(store_early_reduction(c, CostFunction::uniform(4)), c);
    EXPECT_EQ(store_early_reduction(c, CostFunction::reverse_lexical()), c);
}

TEST(Search, GreedyNeverWorseThanNoSharing)
{
    std::mt19937_64 rng(23);
    for (int i = 0; i != 100; ++i) {
        auto s = random_plan_space(rng, 4 + i % 9, 2 + i % 3);
        auto f = CostFunction::uniform(s.points);
        try {
            auto d = dp_search(s, f);
            MqoTrace tr;
            auto m = greedy_mqo(s, f, false, &tr);
            EXPECT_FALSE(f.less(d.objective, m.objective)) << i;
            EXPECT_TRUE(validate_assignment(m).empty()) << i;
        } catch (const UnplannableError&) {
        }
    }
}

TEST(Search, SharingAnExchangeStrictlyHelps)
{
    auto s = example_space(RuleFamilies::parse("im1"), CostProfile::shuffle());
    MqoTrace tr;
    auto m = greedy_mqo(s, example_weights, true, &tr);
    EXPECT_TRUE(example_weights.less(m.objective, tr.initial));
    ASSERT_FALSE(m.materialized.empty());
    EXPECT_TRUE(std::ranges::any_of(m.materialized, [&](int n) { return m.nodes[n].kind == PhysKind::Exchange; }));
}
