#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedchan/bytes.hpp"
#include "fedchan/lstm.hpp"
#include "fedchan/rng.hpp"

namespace fedchan {

struct codec_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// ModelMessage: the broadcast packet carrying one node's flat parameters.
//   magic "FCMM" | u32 version | u32 node_id | u32 channel_id |
//   u32 m | u32 p | u32 q | u32 param_count | param_count f32 little-endian
// The same layout is used for model files on disk.
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kModelMagic[4] = {'F', 'C', 'M', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

struct ModelMessage {
  std::uint32_t version = kModelVersion;
  std::uint32_t node_id = 0;
  std::uint32_t channel_id = 0;
  std::uint32_t m = 2;
  std::uint32_t p = 0;
  std::uint32_t q = 0;
  std::vector<float> payload;

  Architecture arch() const {
    return Architecture{static_cast<int>(m), static_cast<int>(p), static_cast<int>(q), 2};
  }
};

// Quantizes a trained model to the 32-bit wire precision.
inline ModelMessage make_message(std::uint32_t node_id, std::uint32_t channel_id, const ParamVector& params) {
  ModelMessage msg;
  msg.node_id = node_id;
  msg.channel_id = channel_id;
  msg.m = static_cast<std::uint32_t>(params.arch.input_dim);
  msg.p = static_cast<std::uint32_t>(params.arch.p_units);
  msg.q = static_cast<std::uint32_t>(params.arch.q_units);
  msg.payload.reserve(params.values.size());
  for (double v : params.values) msg.payload.push_back(static_cast<float>(v));
  return msg;
}

inline ParamVector to_params(const ModelMessage& msg) {
  ParamVector pv{msg.arch(), {}};
  pv.values.reserve(msg.payload.size());
  for (float v : msg.payload) pv.values.push_back(static_cast<double>(v));
  return pv;
}

inline std::vector<std::uint8_t> serialize(const ModelMessage& msg) {
  const Architecture arch = msg.arch();
  arch.validate();
  if (msg.payload.size() != arch.param_count()) {
    throw std::invalid_argument("serialize: payload does not match the declared architecture");
  }
  std::vector<std::uint8_t> out;
  out.reserve(32 + 4 * msg.payload.size());
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  put_u32le(out, msg.version);
  put_u32le(out, msg.node_id);
  put_u32le(out, msg.channel_id);
  put_u32le(out, msg.m);
  put_u32le(out, msg.p);
  put_u32le(out, msg.q);
  put_u32le(out, static_cast<std::uint32_t>(msg.payload.size()));
  for (float v : msg.payload) put_f32le(out, v);
  return out;
}

inline ModelMessage deserialize(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  try {
    for (std::uint8_t m : kModelMagic) {
      if (r.u8() != m) throw codec_error("model message: bad magic");
    }
    ModelMessage msg;
    msg.version = r.u32le();
    if (msg.version != kModelVersion) throw codec_error("model message: unsupported version");
    msg.node_id = r.u32le();
    msg.channel_id = r.u32le();
    msg.m = r.u32le();
    msg.p = r.u32le();
    msg.q = r.u32le();
    const std::uint32_t count = r.u32le();
    const Architecture arch = msg.arch();
    arch.validate();
    if (count != arch.param_count()) throw codec_error("model message: param_count does not match architecture");
    if (r.remaining() != static_cast<std::size_t>(count) * 4) throw codec_error("model message: payload size mismatch");
    msg.payload.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) msg.payload.push_back(r.f32le());
    return msg;
  } catch (const codec_error&) {
    throw;
  } catch (const std::exception& e) {
    throw codec_error(e.what());
  }
}

inline void write_model(const std::string& path, const ModelMessage& msg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  const auto bytes = serialize(msg);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + path);
}

inline ModelMessage read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

// ---------------------------------------------------------------------------
// One-hop topology and broadcast
// ---------------------------------------------------------------------------

struct Topology {
  std::vector<std::vector<std::uint32_t>> adj;

  explicit Topology(std::size_t n_nodes = 0) : adj(n_nodes) {}

  std::size_t size() const { return adj.size(); }

  void add_edge(std::uint32_t a, std::uint32_t b) {
    if (a >= adj.size() || b >= adj.size() || a == b) throw std::invalid_argument("Topology: bad edge");
    if (std::find(adj[a].begin(), adj[a].end(), b) == adj[a].end()) {
      adj[a].push_back(b);
      adj[b].push_back(a);
      std::sort(adj[a].begin(), adj[a].end());
      std::sort(adj[b].begin(), adj[b].end());
    }
  }

  const std::vector<std::uint32_t>& neighbors(std::uint32_t v) const {
    if (v >= adj.size()) throw std::invalid_argument("Topology: unknown node");
    return adj[v];
  }
};

// Delivery set of a local-model broadcast: exactly the sender's one-hop
// neighbors, never relayed further.
inline std::vector<std::uint32_t> broadcast(const Topology& topo, std::uint32_t sender,
                                            const ModelMessage& msg) {
  if (sender >= topo.size()) throw std::invalid_argument("broadcast: unknown sender");
  if (msg.node_id != sender) throw std::invalid_argument("broadcast: message node_id does not match sender");
  return topo.neighbors(sender);
}

// Zero-mean Gaussian perturbation of each parameter; models a corrupted
// control channel. noise_std = 0 is the identity.
inline ParamVector corrupt(const ParamVector& params, double noise_std, std::uint64_t seed) {
  if (noise_std < 0.0) throw std::invalid_argument("corrupt: negative noise std");
  if (noise_std == 0.0) return params;
  ParamVector out = params;
  Rng rng(seed);
  for (double& v : out.values) v += rng.gaussian(0.0, noise_std);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct GlobalModel {
  std::uint32_t owner = 0;
  Architecture arch;
  std::vector<double> values;
  std::vector<std::uint32_t> contributors;  // sorted, includes owner

  ParamVector as_params() const { return {arch, values}; }
};

// Weighted average over the node's own model and the received ones:
//   theta = (own + sum_l w_l * received_l) / (1 + sum_l w_l)
// With unit weights this is the uniform mean over self plus neighbors.
inline GlobalModel aggregate_average(std::uint32_t owner, const ParamVector& own,
                                     const std::vector<std::pair<std::uint32_t, ParamVector>>& received,
                                     const std::vector<double>& weights) {
  if (weights.size() != received.size()) throw std::invalid_argument("aggregate_average: weights/received length mismatch");
  for (const auto& [id, pv] : received) {
    if (!(pv.arch == own.arch)) throw std::invalid_argument("aggregate_average: architecture mismatch");
    if (pv.values.size() != own.values.size()) throw std::invalid_argument("aggregate_average: parameter length mismatch");
  }

  GlobalModel gm;
  gm.owner = owner;
  gm.arch = own.arch;
  gm.values = own.values;
  gm.contributors.push_back(owner);

  double weight_sum = 1.0;
  for (std::size_t l = 0; l < received.size(); ++l) {
    const auto& [id, pv] = received[l];
    for (std::size_t k = 0; k < gm.values.size(); ++k) gm.values[k] += weights[l] * pv.values[k];
    weight_sum += weights[l];
    gm.contributors.push_back(id);
  }
  for (double& v : gm.values) v /= weight_sum;
  std::sort(gm.contributors.begin(), gm.contributors.end());
  return gm;
}

inline GlobalModel aggregate_average(std::uint32_t owner, const ParamVector& own,
                                     const std::vector<std::pair<std::uint32_t, ParamVector>>& received) {
  return aggregate_average(owner, own, received, std::vector<double>(received.size(), 1.0));
}

// ---------------------------------------------------------------------------
// Registry of models for channels the node does not sense itself. Those
// parameters are uncorrelated with the local ones, so they are stored side
// by side instead of averaged. Bounded capacity with LRU eviction.
// ---------------------------------------------------------------------------

class ChannelModelRegistry {
 public:
  explicit ChannelModelRegistry(std::size_t capacity = 8) : capacity_(capacity) {
    if (capacity_ < 1) throw std::invalid_argument("ChannelModelRegistry: capacity must be >= 1");
  }

  void insert(std::uint32_t channel_id, ParamVector params) {
    for (auto& e : entries_) {
      if (e.channel == channel_id) {
        e.params = std::move(params);
        e.last_used = ++tick_;
        return;
      }
    }
    if (entries_.size() == capacity_) {
      std::size_t victim = 0;
      for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (entries_[i].last_used < entries_[victim].last_used) victim = i;
      }
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    entries_.push_back({channel_id, std::move(params), ++tick_});
  }

  // Lookup counts as a use for eviction purposes.
  const ParamVector* lookup(std::uint32_t channel_id) {
    for (auto& e : entries_) {
      if (e.channel == channel_id) {
        e.last_used = ++tick_;
        return &e.params;
      }
    }
    return nullptr;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  struct Entry {
    std::uint32_t channel;
    ParamVector params;
    std::uint64_t last_used;
  };

  std::size_t capacity_;
  std::uint64_t tick_ = 0;
  std::vector<Entry> entries_;
};

// Prediction routing: queries on the node's own channel use its aggregated
// global model; queries on a foreign channel use the stored foreign model.
inline ParamVector select_model(ChannelModelRegistry& registry, const GlobalModel& own_global,
                                std::uint32_t sensed_channel, std::uint32_t query_channel) {
  if (query_channel == sensed_channel) return own_global.as_params();
  const ParamVector* foreign = registry.lookup(query_channel);
  if (foreign == nullptr) throw std::invalid_argument("select_model: no stored model for channel");
  return *foreign;
}

}  // namespace fedchan
