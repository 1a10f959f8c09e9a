#include <gtest/gtest.h>
#include <tvr/bag.hpp>
#include <tvr/errors.hpp>

#include "support.hpp"

using namespace tvr;
using tvr::test::row;

namespace {

Schema x_schema() { return Schema({ { "x", Kind::Text } }); }

BagRelation bag(std::initializer_list<std::pair<const char*, int64_t>> rows)
{
    BagRelation r(x_schema());
    for (auto [x, m] : rows) r.add(row({ x }), m);
    return r;
}

Schema sum_state_schema()
{
    return Schema({ { "cat", Kind::Text }, { "g", Kind::Int } }, std::vector<std::string>{ "cat" });
}

BagRelation sums(std::initializer_list<std::pair<const char*, int64_t>> rows)
{
    BagRelation r(sum_state_schema());
    for (auto [c, v] : rows) r.add(row({ c, v }));
    return r;
}

MergeOperator sum_merge() { return MergeOperator::attribute({ { "g", Combiner::Sum } }); }

}

TEST(Bag, AnnihilationIsNormalized)
{
    auto r = additive_union(bag({ { "x", 1 } }), bag({ { "x", -1 } }));
    EXPECT_TRUE(r.empty());
}

TEST(Bag, MultiplicitiesAdd)
{
    EXPECT_EQ(additive_union(bag({ { "x", 2 } }), bag({ { "x", 3 }, { "y", 1 } })), bag({ { "x", 5 }, { "y", 1 } }));
}

TEST(Bag, DifferenceOfEmptyNegates)
{
    EXPECT_EQ(bag_difference(bag({}), bag({ { "x", 1 } })), bag({ { "x", -1 } }));
    auto a = bag({ { "x", 3 }, { "y", 1 } });
    EXPECT_TRUE(bag_difference(a, a).empty());
}

TEST(Bag, SchemaMismatch)
{
    BagRelation other(Schema({ { "y", Kind::Int } }));
    EXPECT_THROW(additive_union(bag({}), other), SchemaError);
    EXPECT_THROW(bag_difference(bag({}), other), SchemaError);
}

TEST(Bag, RejectsBadTuples)
{
    BagRelation r(x_schema());
    EXPECT_THROW(r.add(row({ int64_t(1) })), TypeError);
    EXPECT_THROW(r.add(row({ std::monostate{} })), SchemaError);
    EXPECT_THROW(r.add(row({ "a", "b" })), SchemaError);
}

TEST(Bag, UnionLaws)
{
    std::mt19937_64 rng(7);
    auto s = x_schema();
    for (int i = 0; i != 200; ++i) {
        auto a = test::random_delta(rng, BagRelation(s), 5);
        auto b = test::random_delta(rng, BagRelation(s), 5);
        auto c = test::random_delta(rng, BagRelation(s), 5);
        EXPECT_EQ(additive_union(a, b), additive_union(b, a));
        EXPECT_EQ(additive_union(additive_union(a, b), c), additive_union(a, additive_union(b, c)));
        EXPECT_EQ(additive_union(a, BagRelation(s)), a);
        EXPECT_EQ(additive_union(b, bag_difference(a, b)), a);
    }
}

TEST(AttributeMerge, SumsPerKey)
{
    auto merged = attribute_merge(sums({ { "c1", 280 }, { "c2", 150 } }), sums({ { "c1", -15 }, { "c2", 350 } }), sum_merge());
    EXPECT_EQ(merged, sums({ { "c1", 265 }, { "c2", 500 } }));
    auto a = sums({ { "c1", 3 } });
    EXPECT_EQ(attribute_merge(a, sums({}), sum_merge()), a);
}

TEST(AttributeMerge, AvgPairComponentwise)
{
    AggSpec spec{ {}, { { "a", AggFunc::AVG, "v" } } };
    Schema in({ { "v", Kind::Int } });
    BagRelation p1(in), p2(in);
    p1.add(row({ int64_t(4) }));
    p1.add(row({ int64_t(6) }));
    p2.add(row({ int64_t(2) }));
    auto merged = spec.merge(spec.partial(p1), spec.partial(p2));
    ASSERT_EQ(merged.distinct(), 1u);
    auto &t = merged.rows().begin()->first;
    EXPECT_EQ(t[0], Value(int64_t(12)));
    EXPECT_EQ(t[1], Value(int64_t(3)));
    auto out = spec.final(merged);
    EXPECT_EQ(out.rows().begin()->first[0], Value(4.0));
}

TEST(AttributeMerge, Errors)
{
    BagRelation unkeyed(Schema({ { "cat", Kind::Text }, { "g", Kind::Int } }));
    EXPECT_THROW(attribute_merge(unkeyed, unkeyed, sum_merge()), KeyError);
    BagRelation text(Schema({ { "cat", Kind::Text }, { "g", Kind::Text } }, std::vector<std::string>{ "cat" }));
    EXPECT_THROW(attribute_merge(text, text, sum_merge()), TypeError);
}

TEST(AttributeInverse, RoundTripAndErrors)
{
    auto d = attribute_inverse(sums({ { "c1", 265 }, { "c2", 500 } }), sums({ { "c1", 280 }, { "c2", 150 } }), sum_merge());
    EXPECT_EQ(d, sums({ { "c1", -15 }, { "c2", 350 } }));
    auto a = sums({ { "c1", 5 } });
    EXPECT_EQ(attribute_inverse(a, a, sum_merge()), sums({ { "c1", 0 } }));
    EXPECT_THROW(attribute_inverse(a, a, MergeOperator::attribute({ { "g", Combiner::Max } })), NotInvertibleError);
}

TEST(AttributeInverse, RandomizedRoundTrip)
{
    std::mt19937_64 rng(11);
    AggSpec spec{ { "k" }, { { "s", AggFunc::SUM, "v" }, { "c", AggFunc::COUNT, "" }, { "a", AggFunc::AVG, "v" } } };
    auto in = test::kv_schema("", true);
    auto m = spec.merge_operator();
    for (int i = 0; i != 300; ++i) {
        auto a = spec.partial(test::random_relation(rng, in, 6));
        auto b = spec.partial(test::random_relation(rng, in, 6));
        auto d = attribute_inverse(a, b, m);
        EXPECT_EQ(drop_zero_states(attribute_merge(b, d, m), m), drop_zero_states(a, m));
    }
}

TEST(AggFinal, DropsEmptyGroups)
{
    AggSpec spec{ { "cat" }, { { "g", AggFunc::SUM, "g" } } };
    Schema in({ { "cat", Kind::Text }, { "g", Kind::Int } });
    BagRelation ins(in), del(in);
    ins.add(row({ "g0", int64_t(5) }));
    del.add(row({ "g0", int64_t(5) }), -1);
    auto state = spec.merge(spec.partial(ins), spec.partial(del));
    EXPECT_EQ(state.distinct(), 1u);
    EXPECT_TRUE(spec.final(state).empty());

    BagRelation bad(Schema({ { "cat", Kind::Text } }, std::vector<std::string>{ "cat" }));
    EXPECT_THROW(agg_final(bad, spec), ContractError);
}

TEST(AggFinal, SplitInvariance)
{
    std::mt19937_64 rng(3);
    AggSpec spec{ { "k" },
                  { { "s", AggFunc::SUM, "v" }, { "c", AggFunc::COUNT, "v" }, { "a", AggFunc::AVG, "v" },
                    { "lo", AggFunc::MIN, "v" }, { "hi", AggFunc::MAX, "v" } } };
    auto in = test::kv_schema("", true);
    for (int i = 0; i != 300; ++i) {
        auto data = test::random_relation(rng, in, 10);
        BagRelation p1(in), p2(in);
        for (auto &[t, m] : data.rows()) {
            auto m1 = std::uniform_int_distribution<int64_t>(0, m)(rng);
            p1.add(t, m1);
            p2.add(t, m - m1);
        }
        EXPECT_EQ(spec.final(spec.partial(data)), spec.final(spec.merge(spec.partial(p1), spec.partial(p2))));
    }
}

TEST(AggSpec, MinMaxRejectRetractions)
{
    AggSpec spec{ {}, { { "hi", AggFunc::MAX, "v" } } };
    BagRelation d(Schema({ { "v", Kind::Int } }));
    d.add(row({ int64_t(1) }), -1);
    EXPECT_FALSE(spec.invertible());
    EXPECT_THROW(spec.partial(d), NotInvertibleError);
}
