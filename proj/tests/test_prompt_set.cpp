#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fairrag/prompt_set.hpp"

using namespace fairrag;

TEST(PromptSet, EightyUniqueProfessions) {
  const auto set = prompt_set();
  ASSERT_EQ(set.size(), 80u);
  std::set<std::string> texts;
  for (const auto& p : set) texts.insert(p.text);
  EXPECT_EQ(texts.size(), 80u);
}

TEST(PromptSet, CategoryCounts) {
  std::map<std::string_view, int> counts;
  for (const auto& p : kProfessions) ++counts[to_string(p.category)];
  const std::map<std::string_view, int> expected{{"artists", 6}, {"f&b", 6},   {"musicians", 9}, {"security", 6},
                                                 {"sports", 9},  {"stem", 12}, {"workers", 7},   {"others", 25}};
  EXPECT_EQ(counts, expected);
}

TEST(PromptSet, Articles) {
  EXPECT_EQ(make_prompt(kPhotoTemplate, "doctor"), "Photo of a doctor");
  EXPECT_EQ(make_prompt(kHeadshotTemplate, "engineer"), "Headshot of an engineer");
  EXPECT_EQ(make_prompt(kFullBodyTemplate, "astronaut"), "Full body of an astronaut");
  for (const auto& p : prompt_set(kHalfBodyTemplate)) {
    EXPECT_EQ(p.text.rfind("Half body of a", 0), 0u) << p.text;
    EXPECT_EQ(p.template_prefix, "Half body of");
  }
}
