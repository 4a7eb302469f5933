#include "met/subscription.hpp"

#include <gtest/gtest.h>

namespace met {
namespace {

TEST(SubscriptionTable, RoundRobinAlternatesAcrossReplicas) {
    SubscriptionTable table;
    table.subscribe({"t1", {"a"}, {"inv1", "inv2"}});
    auto entries = table.lookup("a");
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0]->next_endpoint(), "inv1");
    EXPECT_EQ(entries[0]->next_endpoint(), "inv2");
    EXPECT_EQ(entries[0]->next_endpoint(), "inv1");
    EXPECT_EQ(entries[0]->next_endpoint(), "inv2");
}

TEST(SubscriptionTable, TriggerTypePairAppearsAtMostOnce) {
    SubscriptionTable table;
    table.subscribe({"t1", {"a", "b"}, {"inv1"}});
    table.subscribe({"t1", {"a"}, {"inv2"}});  // replaces, not duplicates
    auto entries = table.lookup("a");
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0]->next_endpoint(), "inv2");
    EXPECT_TRUE(table.lookup("b").empty());  // old type mapping gone
}

TEST(SubscriptionTable, UnsubscribeRemovesEverywhere) {
    SubscriptionTable table;
    table.subscribe({"t1", {"a", "b"}, {"inv1"}});
    EXPECT_TRUE(table.unsubscribe("t1"));
    EXPECT_FALSE(table.unsubscribe("t1"));
    EXPECT_TRUE(table.lookup("a").empty());
    EXPECT_TRUE(table.lookup("b").empty());
    EXPECT_EQ(table.trigger_count(), 0u);
}

TEST(SubscriptionTable, UnknownTypeHasNoSubscribers) {
    SubscriptionTable table;
    table.subscribe({"t1", {"a"}, {"inv1"}});
    EXPECT_TRUE(table.lookup("humidity").empty());
}

TEST(SubscriptionTable, SharedTypeFansOutToAllTriggers) {
    SubscriptionTable table;
    table.subscribe({"t1", {"a"}, {"inv1"}});
    table.subscribe({"t2", {"a", "b"}, {"inv2"}});
    auto entries = table.lookup("a");
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(table.trigger_count(), 2u);
}

TEST(SubscriptionTable, DumpListsEntries) {
    SubscriptionTable table;
    table.subscribe({"t1", {"a"}, {"inv1"}});
    const Json dump = table.dump();
    ASSERT_TRUE(dump.contains("a"));
    EXPECT_EQ(dump["a"][0]["triggerId"], "t1");
}

}  // namespace
}  // namespace met
