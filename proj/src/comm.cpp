#include "dssync/comm.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace dssync {

void Endpoint::deliver(Message m) {
  std::lock_guard<std::mutex> lock(mu_);
  inbox_.push_back(std::move(m));
}

Message Endpoint::receive() {
  std::lock_guard<std::mutex> lock(mu_);
  if (inbox_.empty()) {
    throw std::runtime_error("receive on empty inbox at node " + std::to_string(id_));
  }
  Message m = std::move(inbox_.front());
  inbox_.pop_front();
  return m;
}

bool Endpoint::empty() const {
  std::lock_guard<std::mutex> lock(mu_);
  return inbox_.empty();
}

Transport::Transport(int node_count) {
  if (node_count < 1) throw std::invalid_argument("transport needs at least one node");
  nodes_.reserve(static_cast<size_t>(node_count));
  for (int i = 0; i < node_count; ++i) nodes_.push_back(std::make_unique<Endpoint>(i));
}

Endpoint& Transport::endpoint(int id) {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
    throw std::invalid_argument("unknown transport node " + std::to_string(id));
  }
  return *nodes_[static_cast<size_t>(id)];
}

void Transport::send(int from, int to, ParamVector payload, int segment, long step_tag) {
  endpoint(from);  // validate the sender exists
  if (payload.empty()) throw std::invalid_argument("message payload must be non-empty");
  Message m;
  m.sender = from;
  m.segment = segment;
  m.step_tag = step_tag;
  m.payload = std::move(payload);
  endpoint(to).deliver(std::move(m));
  ++messages_;
}

namespace {

void check_collective_args(std::span<const int> members, std::span<const ParamVector> inputs) {
  if (members.empty()) throw std::invalid_argument("collective needs at least one member");
  if (members.size() != inputs.size()) {
    throw std::invalid_argument("collective: members and inputs size mismatch");
  }
  for (size_t i = 1; i < members.size(); ++i) {
    if (members[i] <= members[i - 1]) {
      throw std::invalid_argument("collective members must be strictly ascending");
    }
  }
  for (const auto& v : inputs) {
    if (v.empty()) throw std::invalid_argument("collective vectors must be non-empty");
    if (v.size() != inputs[0].size()) {
      throw std::invalid_argument("collective vectors must all have the same length");
    }
  }
}

bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

AllReduceResult ring_allreduce_avg(std::span<const int> members,
                                   std::span<const ParamVector> inputs) {
  check_collective_args(members, inputs);
  const size_t m = members.size();

  AllReduceResult out;
  out.values.resize(m);
  if (m == 1) {
    out.values[0] = inputs[0];
    return out;
  }

  Transport tp(static_cast<int>(m));
  StepCounter& sc = out.steps;

  // Reduction: the token leaves position 0 with that member's vector and
  // traverses the whole ring, 0 -> 1 -> ... -> m-1 -> 0, picking up each
  // host's vector on arrival.  m hops.
  ParamVector token = inputs[0];
  for (size_t hop = 1; hop <= m; ++hop) {
    const size_t from = hop - 1;
    const size_t to = hop % m;
    ++sc.serial_steps;
    tp.send(static_cast<int>(from), static_cast<int>(to), std::move(token), 0, sc.serial_steps);
    token = tp.endpoint(static_cast<int>(to)).receive().payload;
    if (to != 0) {
      for (size_t i = 0; i < token.size(); ++i) token[i] += inputs[to][i];
    }
  }

  const double inv = 1.0 / static_cast<double>(m);
  for (double& x : token) x *= inv;
  require_finite(token, "ring_allreduce_avg");

  // Broadcast: the averaged vector follows the ring once more, m - 1 hops.
  out.values[0] = token;
  for (size_t to = 1; to < m; ++to) {
    ++sc.serial_steps;
    tp.send(static_cast<int>(to - 1), static_cast<int>(to), std::move(token), 0, sc.serial_steps);
    token = tp.endpoint(static_cast<int>(to)).receive().payload;
    out.values[to] = token;
  }

  sc.total_messages = tp.messages_sent();
  return out;
}

AllReduceResult tree_allreduce_avg(std::span<const int> members,
                                   std::span<const ParamVector> inputs) {
  check_collective_args(members, inputs);
  const size_t m = members.size();
  if (!is_power_of_two(m)) {
    throw std::invalid_argument("tree_allreduce_avg requires a power-of-two member count (got " +
                                std::to_string(m) + ")");
  }

  AllReduceResult out;
  out.values.resize(m);
  if (m == 1) {
    out.values[0] = inputs[0];
    return out;
  }

  // Complete binary tree in heap layout: node 0 is the root, node i has
  // children 2i+1 and 2i+2, the m leaves are nodes m-1 .. 2m-2 and leaf
  // m-1+p hosts member position p.  Internal nodes are aggregators, not
  // members.
  const size_t node_count = 2 * m - 1;
  const size_t leaf_base = m - 1;
  int depth = 0;
  while ((size_t(1) << depth) < m) ++depth;

  Transport tp(static_cast<int>(node_count));
  StepCounter& sc = out.steps;

  // held[n] = contributions at node n as (origin position, vector), kept in
  // ascending origin order.  Left subtrees cover lower positions, so
  // appending left child then right child preserves the order.
  std::vector<std::vector<std::pair<int, ParamVector>>> held(node_count);
  for (size_t p = 0; p < m; ++p) {
    held[leaf_base + p].push_back({static_cast<int>(p), inputs[p]});
  }

  // Reduction, leaves to root.  Each level costs two serial steps: a parent
  // takes its children's uploads one after the other.
  for (int d = depth; d >= 1; --d) {
    const size_t first = (size_t(1) << d) - 1;
    const size_t count = size_t(1) << d;
    const long left_step = sc.serial_steps + 1;
    const long right_step = sc.serial_steps + 2;
    sc.serial_steps += 2;
    for (size_t n = first; n < first + count; ++n) {
      const size_t parent = (n - 1) / 2;
      const long step = (n % 2 == 1) ? left_step : right_step;
      for (auto& [origin, vec] : held[n]) {
        tp.send(static_cast<int>(n), static_cast<int>(parent), std::move(vec), origin, step);
      }
      held[n].clear();
    }
    for (size_t parent = first / 2; parent < first; ++parent) {
      while (!tp.endpoint(static_cast<int>(parent)).empty()) {
        Message msg = tp.endpoint(static_cast<int>(parent)).receive();
        held[parent].push_back({msg.segment, std::move(msg.payload)});
      }
    }
  }

  // The root now holds all m contributions in position order; fold left to
  // right and divide once.
  ParamVector mean = std::move(held[0][0].second);
  for (size_t p = 1; p < m; ++p) {
    const ParamVector& v = held[0][p].second;
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (double& x : mean) x *= inv;
  require_finite(mean, "tree_allreduce_avg");

  // Broadcast, root to leaves, one serial step per level.
  std::vector<ParamVector> down(node_count);
  down[0] = mean;
  for (int d = 0; d < depth; ++d) {
    const size_t first = (size_t(1) << d) - 1;
    const size_t count = size_t(1) << d;
    ++sc.serial_steps;
    for (size_t n = first; n < first + count; ++n) {
      tp.send(static_cast<int>(n), static_cast<int>(2 * n + 1), down[n], 0, sc.serial_steps);
      tp.send(static_cast<int>(n), static_cast<int>(2 * n + 2), down[n], 0, sc.serial_steps);
      down[2 * n + 1] = tp.endpoint(static_cast<int>(2 * n + 1)).receive().payload;
      down[2 * n + 2] = tp.endpoint(static_cast<int>(2 * n + 2)).receive().payload;
    }
  }
  for (size_t p = 0; p < m; ++p) out.values[p] = std::move(down[leaf_base + p]);

  sc.total_messages = tp.messages_sent();
  return out;
}

AllReduceResult ps_allreduce_avg(std::span<const int> members,
                                 std::span<const ParamVector> inputs, int num_servers) {
  check_collective_args(members, inputs);
  if (num_servers < 1) {
    throw std::invalid_argument("ps_allreduce_avg needs at least one server (got " +
                                std::to_string(num_servers) + ")");
  }
  const size_t m = members.size();
  const size_t dim = inputs[0].size();
  const size_t p = static_cast<size_t>(num_servers);

  // Contiguous slices with sizes differing by at most one; servers past the
  // vector length receive nothing.
  std::vector<size_t> slice_begin(p + 1, 0);
  {
    const size_t base = dim / p;
    const size_t rem = dim % p;
    for (size_t s = 0; s < p; ++s) {
      slice_begin[s + 1] = slice_begin[s] + base + (s < rem ? 1 : 0);
    }
  }

  // Node ids: members first, then servers.
  Transport tp(static_cast<int>(m + p));
  AllReduceResult out;
  out.values.assign(m, ParamVector(dim));
  StepCounter& sc = out.steps;

  // Push phase: one serial step per member.  A member's slices go to
  // different servers in parallel, but each server must ingest the m
  // members one after the other.
  for (size_t pos = 0; pos < m; ++pos) {
    ++sc.serial_steps;
    for (size_t s = 0; s < p; ++s) {
      if (slice_begin[s] == slice_begin[s + 1]) continue;
      ParamVector slice(inputs[pos].begin() + static_cast<long>(slice_begin[s]),
                        inputs[pos].begin() + static_cast<long>(slice_begin[s + 1]));
      tp.send(static_cast<int>(pos), static_cast<int>(m + s), std::move(slice),
              static_cast<int>(s), sc.serial_steps);
    }
  }

  // Servers fold pushes in arrival order (ascending member) and average.
  std::vector<ParamVector> server_mean(p);
  const double inv = 1.0 / static_cast<double>(m);
  for (size_t s = 0; s < p; ++s) {
    if (slice_begin[s] == slice_begin[s + 1]) continue;
    Endpoint& ep = tp.endpoint(static_cast<int>(m + s));
    ParamVector acc = ep.receive().payload;
    for (size_t k = 1; k < m; ++k) {
      Message msg = ep.receive();
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += msg.payload[i];
    }
    for (double& x : acc) x *= inv;
    require_finite(acc, "ps_allreduce_avg");
    server_mean[s] = std::move(acc);
  }

  // Pull phase: one serial step per member, mirroring the push.
  for (size_t pos = 0; pos < m; ++pos) {
    ++sc.serial_steps;
    for (size_t s = 0; s < p; ++s) {
      if (slice_begin[s] == slice_begin[s + 1]) continue;
      tp.send(static_cast<int>(m + s), static_cast<int>(pos), server_mean[s],
              static_cast<int>(s), sc.serial_steps);
      Message msg = tp.endpoint(static_cast<int>(pos)).receive();
      std::copy(msg.payload.begin(), msg.payload.end(),
                out.values[pos].begin() + static_cast<long>(slice_begin[msg.segment]));
    }
  }

  sc.total_messages = tp.messages_sent();
  return out;
}

}  // namespace dssync
