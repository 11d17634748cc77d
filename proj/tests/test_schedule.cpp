#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>

#include "dssync/schedule.hpp"

using namespace dssync;

TEST_CASE("four workers alternate between block pairs and strided pairs") {
  const WorldConfig cfg{4, 2};
  const GroupPartition even = make_partition(cfg, 0);
  REQUIRE(even.groups.size() == 2);
  CHECK(even.groups[0] == std::vector<int>{0, 1});
  CHECK(even.groups[1] == std::vector<int>{2, 3});

  const GroupPartition odd = make_partition(cfg, 1);
  REQUIRE(odd.groups.size() == 2);
  CHECK(odd.groups[0] == std::vector<int>{0, 2});
  CHECK(odd.groups[1] == std::vector<int>{1, 3});

  // period two
  for (long t = 0; t <= 10; ++t) {
    CHECK(make_partition(cfg, t).groups == make_partition(cfg, t % 2).groups);
  }
}

TEST_CASE("nine workers form blocks of three and stride-three combs") {
  const WorldConfig cfg{9, 3};
  const GroupPartition even = make_partition(cfg, 0);
  CHECK(even.groups[0] == std::vector<int>{0, 1, 2});
  CHECK(even.groups[1] == std::vector<int>{3, 4, 5});
  CHECK(even.groups[2] == std::vector<int>{6, 7, 8});

  const GroupPartition odd = make_partition(cfg, 1);
  CHECK(odd.groups[0] == std::vector<int>{0, 3, 6});
  CHECK(odd.groups[1] == std::vector<int>{1, 4, 7});
  CHECK(odd.groups[2] == std::vector<int>{2, 5, 8});
}

TEST_CASE("partitions are disjoint covers with sorted groups") {
  for (int n : {2, 3, 4, 5}) {
    const WorldConfig cfg{n * n, n};
    for (long t = 0; t <= 10; ++t) {
      const GroupPartition p = make_partition(cfg, t);
      REQUIRE(static_cast<int>(p.groups.size()) == n);
      std::set<int> seen;
      for (const auto& g : p.groups) {
        CHECK(static_cast<int>(g.size()) == n);
        CHECK(std::is_sorted(g.begin(), g.end()));
        seen.insert(g.begin(), g.end());
      }
      CHECK(static_cast<int>(seen.size()) == n * n);
      CHECK(*seen.begin() == 0);
      CHECK(*seen.rbegin() == n * n - 1);
    }
  }
}

TEST_CASE("consecutive partitions always intersect in exactly one worker") {
  for (int n : {2, 3, 4, 5}) {
    const WorldConfig cfg{n * n, n};
    for (long t = 0; t <= 10; ++t) {
      CHECK(check_mixing(cfg, t));
    }
  }
}

TEST_CASE("group_of agrees with the partition") {
  const WorldConfig cfg{16, 4};
  for (long t = 0; t <= 3; ++t) {
    const GroupPartition p = make_partition(cfg, t);
    for (int rank = 0; rank < 16; ++rank) {
      const std::vector<int> mine = group_of(cfg, t, rank);
      bool found = false;
      for (const auto& g : p.groups) {
        if (g == mine) {
          CHECK(std::find(g.begin(), g.end(), rank) != g.end());
          found = true;
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("single-group layout holds everyone and never shuffles") {
  const WorldConfig cfg{4, 4};
  CHECK_FALSE(is_square_mode(cfg));
  for (long t = 0; t <= 5; ++t) {
    const GroupPartition p = make_partition(cfg, t);
    REQUIRE(p.groups.size() == 1);
    CHECK(p.groups[0] == std::vector<int>{0, 1, 2, 3});
  }
  CHECK_FALSE(check_mixing(cfg, 0));

  const WorldConfig solo{1, 1};
  validate(solo);
  CHECK(make_partition(solo, 0).groups == std::vector<std::vector<int>>{{0}});
}

TEST_CASE("validate rejects worlds that fit neither shape") {
  CHECK_THROWS_AS(validate(WorldConfig{6, 2}), std::invalid_argument);
  CHECK_THROWS_AS(validate(WorldConfig{4, 3}), std::invalid_argument);
  CHECK_THROWS_AS(validate(WorldConfig{0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(WorldConfig{4, -2}), std::invalid_argument);
  validate(WorldConfig{4, 2});
  validate(WorldConfig{9, 3});
  validate(WorldConfig{9, 9});
  CHECK(is_square_mode(WorldConfig{9, 3}));
  CHECK_FALSE(is_square_mode(WorldConfig{1, 1}));
}

TEST_CASE("group_of checks its rank argument") {
  const WorldConfig cfg{4, 2};
  CHECK_THROWS_AS(group_of(cfg, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(group_of(cfg, 0, -1), std::invalid_argument);
  CHECK_THROWS_AS(make_partition(cfg, -1), std::invalid_argument);
}
