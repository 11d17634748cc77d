#include <doctest.h>

#include <numeric>
#include <stdexcept>
#include <vector>

#include "dssync/comm.hpp"
#include "dssync/param.hpp"
#include "dssync/rng.hpp"

using namespace dssync;

namespace {

std::vector<int> iota_members(int m) {
  std::vector<int> members(m);
  std::iota(members.begin(), members.end(), 0);
  return members;
}

std::vector<ParamVector> random_inputs(int m, int dim, uint64_t seed) {
  Rng rng(seed);
  std::vector<ParamVector> inputs(m, ParamVector(dim));
  for (auto& v : inputs) {
    for (double& x : v) x = rng.gaussian();
  }
  return inputs;
}

}  // namespace

TEST_CASE("ring all-reduce reproduces mean_of bit for bit") {
  for (int m = 1; m <= 8; ++m) {
    const auto members = iota_members(m);
    const auto inputs = random_inputs(m, 5, 100 + m);
    const ParamVector expect = mean_of(inputs);
    const AllReduceResult r = ring_allreduce_avg(members, inputs);
    REQUIRE(static_cast<int>(r.values.size()) == m);
    for (const ParamVector& v : r.values) CHECK(v == expect);
  }
}

TEST_CASE("tree all-reduce reproduces mean_of bit for bit") {
  for (int m : {1, 2, 4, 8, 16}) {
    const auto members = iota_members(m);
    const auto inputs = random_inputs(m, 5, 200 + m);
    const ParamVector expect = mean_of(inputs);
    const AllReduceResult r = tree_allreduce_avg(members, inputs);
    for (const ParamVector& v : r.values) CHECK(v == expect);
  }
}

TEST_CASE("ps all-reduce reproduces mean_of bit for bit") {
  for (int m = 1; m <= 6; ++m) {
    for (int servers : {1, 2, 3, 7}) {
      const auto members = iota_members(m);
      const auto inputs = random_inputs(m, 5, 300 + m);
      const ParamVector expect = mean_of(inputs);
      const AllReduceResult r = ps_allreduce_avg(members, inputs, servers);
      for (const ParamVector& v : r.values) CHECK(v == expect);
    }
  }
}

TEST_CASE("collectives agree with each other on the same input") {
  const auto members = iota_members(4);
  const auto inputs = random_inputs(4, 9, 41);
  const ParamVector a = ring_allreduce_avg(members, inputs).values[0];
  const ParamVector b = tree_allreduce_avg(members, inputs).values[0];
  const ParamVector c = ps_allreduce_avg(members, inputs, 3).values[0];
  CHECK(a == b);
  CHECK(b == c);
}

TEST_CASE("ring serial steps are 2M - 1") {
  for (int m = 2; m <= 9; ++m) {
    const AllReduceResult r =
        ring_allreduce_avg(iota_members(m), random_inputs(m, 3, m));
    CHECK(r.steps.serial_steps == 2 * m - 1);
    CHECK(r.steps.total_messages == 2 * m - 1);
  }
}

TEST_CASE("tree serial steps are 3 log2 M") {
  const int sizes[] = {2, 4, 8, 16};
  const long expect[] = {3, 6, 9, 12};
  for (int i = 0; i < 4; ++i) {
    const int m = sizes[i];
    const AllReduceResult r =
        tree_allreduce_avg(iota_members(m), random_inputs(m, 3, m));
    CHECK(r.steps.serial_steps == expect[i]);
    CHECK(r.steps.serial_steps <= r.steps.total_messages);
  }
}

TEST_CASE("ps serial steps are 2M whatever the server count") {
  for (int m = 2; m <= 6; ++m) {
    for (int servers : {1, 2, 5}) {
      const AllReduceResult r =
          ps_allreduce_avg(iota_members(m), random_inputs(m, 4, m), servers);
      CHECK(r.steps.serial_steps == 2 * m);
    }
  }
}

TEST_CASE("more servers means more messages but the same critical path") {
  const auto members = iota_members(4);
  const auto inputs = random_inputs(4, 8, 55);
  const AllReduceResult one = ps_allreduce_avg(members, inputs, 1);
  const AllReduceResult four = ps_allreduce_avg(members, inputs, 4);
  CHECK(one.steps.serial_steps == four.steps.serial_steps);
  CHECK(four.steps.total_messages > one.steps.total_messages);
  CHECK(one.values == four.values);
}

TEST_CASE("a lone member needs no ring or tree traffic, ps still round-trips") {
  const auto members = iota_members(1);
  const auto inputs = random_inputs(1, 4, 77);
  CHECK(ring_allreduce_avg(members, inputs).steps.serial_steps == 0);
  CHECK(tree_allreduce_avg(members, inputs).steps.serial_steps == 0);
  CHECK(ps_allreduce_avg(members, inputs, 1).steps.serial_steps == 2);
  CHECK(ring_allreduce_avg(members, inputs).values[0] == inputs[0]);
}

TEST_CASE("serial steps never exceed total messages") {
  for (int m : {2, 4, 8}) {
    const auto members = iota_members(m);
    const auto inputs = random_inputs(m, 2, m + 9);
    for (const AllReduceResult& r :
         {ring_allreduce_avg(members, inputs), tree_allreduce_avg(members, inputs),
          ps_allreduce_avg(members, inputs, 3)}) {
      CHECK(r.steps.serial_steps <= r.steps.total_messages);
    }
  }
}

TEST_CASE("ps handles more servers than coordinates") {
  const auto members = iota_members(3);
  const auto inputs = random_inputs(3, 2, 88);
  const AllReduceResult r = ps_allreduce_avg(members, inputs, 5);
  CHECK(r.values[0] == mean_of(inputs));
  CHECK(r.steps.serial_steps == 6);
}

TEST_CASE("collectives validate their arguments") {
  const auto inputs = random_inputs(3, 2, 5);
  CHECK_THROWS_AS(ring_allreduce_avg(std::vector<int>{}, std::vector<ParamVector>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ring_allreduce_avg(std::vector<int>{0, 1}, inputs), std::invalid_argument);
  CHECK_THROWS_AS(tree_allreduce_avg(iota_members(3), inputs), std::invalid_argument);
  CHECK_THROWS_AS(ps_allreduce_avg(iota_members(3), inputs, 0), std::invalid_argument);
  const std::vector<int> unsorted = {2, 0, 1};
  CHECK_THROWS_AS(ring_allreduce_avg(unsorted, inputs), std::invalid_argument);
  std::vector<ParamVector> ragged = inputs;
  ragged[1].pop_back();
  CHECK_THROWS_AS(ring_allreduce_avg(iota_members(3), ragged), std::invalid_argument);
}

TEST_CASE("endpoints deliver in fifo order and refuse empty receives") {
  Endpoint ep(3);
  CHECK(ep.empty());
  CHECK_THROWS_AS(ep.receive(), std::runtime_error);
  ep.deliver(Message{0, 0, 1, {1.0}});
  ep.deliver(Message{1, 0, 2, {2.0}});
  CHECK_FALSE(ep.empty());
  CHECK(ep.receive().payload == ParamVector{1.0});
  CHECK(ep.receive().payload == ParamVector{2.0});
  CHECK(ep.empty());
}

TEST_CASE("transport stamps and counts messages") {
  Transport t(2);
  t.send(0, 1, {4.0, 5.0}, 7, 3);
  CHECK(t.messages_sent() == 1);
  const Message m = t.endpoint(1).receive();
  CHECK(m.sender == 0);
  CHECK(m.segment == 7);
  CHECK(m.step_tag == 3);
  CHECK(m.payload == ParamVector{4.0, 5.0});
  CHECK_THROWS_AS(t.send(0, 1, {}, 0, 1), std::invalid_argument);
}
