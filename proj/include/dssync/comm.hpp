#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dssync/param.hpp"

namespace dssync {

// One payload on the wire.  `sender` is a transport node id, `segment`
// distinguishes payload pieces travelling together (origin position in a
// tree gather, slice index under a parameter server), and `step_tag` is the
// serial step in which the message was sent.
struct Message {
  int sender = -1;
  int segment = 0;
  long step_tag = 0;
  ParamVector payload;
};

// FIFO inbox of one transport node.  Enqueue and dequeue are mutex-guarded,
// and senders enqueue in program order, so delivery between any fixed
// sender/receiver pair is first-in first-out.
class Endpoint {
 public:
  explicit Endpoint(int id) : id_(id) {}

  int id() const { return id_; }
  void deliver(Message m);
  Message receive();  // throws std::runtime_error on an empty inbox
  bool empty() const;

 private:
  int id_;
  mutable std::mutex mu_;
  std::deque<Message> inbox_;
};

// Serial steps model the critical path: message hops that must happen one
// after another.  Hops that can overlap share a step, so serial_steps never
// exceeds total_messages.
struct StepCounter {
  long serial_steps = 0;
  long total_messages = 0;
};

// Message fabric for one collective.  Node ids 0..node_count-1 are assigned
// by the collective; they may include infrastructure nodes (tree aggregators,
// parameter servers) in addition to the group members.
class Transport {
 public:
  explicit Transport(int node_count);

  Endpoint& endpoint(int id);
  void send(int from, int to, ParamVector payload, int segment, long step_tag);
  long messages_sent() const { return messages_; }

 private:
  std::vector<std::unique_ptr<Endpoint>> nodes_;
  long messages_ = 0;
};

struct AllReduceResult {
  std::vector<ParamVector> values;  // averaged vector per member, input order
  StepCounter steps;
};

// All three collectives return, on every member, exactly the bits of
// mean_of(inputs): partial sums accumulate in ascending member order and a
// single division happens at the end.  `members` are the participating
// ranks, strictly ascending, aligned with `inputs`.
//
// Ring: a token starts at the first member, travels the full ring gathering
// every vector, is averaged back at the start, then forwarded around again.
// 2M - 1 serial steps; a single member needs none.
AllReduceResult ring_allreduce_avg(std::span<const int> members,
                                   std::span<const ParamVector> inputs);

// Complete binary tree with the members as leaves and M - 1 aggregator
// nodes.  Contributions travel to the root unsummed (one message per origin,
// two sequential receives per level), the root folds and averages, and the
// mean flows back down.  M must be a power of two; 3 * log2(M) serial steps,
// zero for a single member.
AllReduceResult tree_allreduce_avg(std::span<const int> members,
                                   std::span<const ParamVector> inputs);

// Parameter servers: the vector is split into num_servers contiguous slices,
// every member pushes each slice to its server, servers fold in member order
// and average, every member pulls each averaged slice.  The servers are the
// serialization point, so adding servers never reduces the per-element
// critical path: 2M serial steps regardless of num_servers (2 for a single
// member).
AllReduceResult ps_allreduce_avg(std::span<const int> members,
                                 std::span<const ParamVector> inputs, int num_servers);

}  // namespace dssync
