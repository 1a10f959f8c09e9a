#include <gtest/gtest.h>

#include <tvr/errors.hpp>
#include <tvr/rules.hpp>

#include "../support.hpp"

using namespace tvr;
using namespace tvr::test;

namespace {

Exploration explore_example(bool o4, RuleFamilies f, bool copy = true)
{
    auto e = example1(o4);
    ExploreOptions o;
    o.families = f;
    o.translation_copy = copy;
    return explore(e.arrivals, OutputRequirement::at_end(2, e.summary), o);
}

}

TEST(Rules, ExampleOneMemoIsSound)
{
    for (auto f : { RuleFamilies::none(), RuleFamilies::parse("im1"), RuleFamilies::parse("im2"),
                    RuleFamilies::parse("ojv"), RuleFamilies::all() }) {
        auto x = explore_example(false, f);
        EXPECT_FALSE(x.stats.partial_exploration);
        EXPECT_TRUE(x.memo.check_invariants().empty()) << x.memo.check_invariants();
        auto bad = verify_memo(x.memo, example1().arrivals);
        EXPECT_TRUE(bad.empty()) << f.to_string() << ": " << bad.size() << " violations, first " << bad.front();
        std::cerr << f.to_string() << ": " << x.memo.group_count() << " groups, " << x.memo.expr_count() << " exprs, "
                  << x.memo.tvr_ids().size() << " tvrs, " << x.stats.firings << " firings\n";
    }
}

TEST(Rules, DumpForInspection)
{
    auto x = explore_example(false, RuleFamilies::parse(std::getenv("TVR_FAM") ? std::getenv("TVR_FAM") : "im1"));
    if (std::getenv("TVR_DUMP")) std::cerr << x.memo.dump();
}
