#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedchan/bytes.hpp"
#include "fedchan/traffic.hpp"

namespace fedchan {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary busy/idle time series at slot resolution delta.
struct ChannelTrace {
  std::vector<std::uint8_t> slots;  // 0 = idle, 1 = busy
  double delta = 20e-6;             // seconds per slot
  std::uint32_t channel_id = 0;
};

// floor(horizon / delta), snapping quotients that sit within representation
// error of an integer (5s / 20us must give exactly 250000).
inline std::size_t slot_count(double horizon, double delta) {
  const double q = horizon / delta;
  const double r = std::nearbyint(q);
  if (std::abs(q - r) < 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::floor(q));
}

// Slot k is busy iff the busy set intersects [k*delta, (k+1)*delta) with
// nonzero measure.
inline ChannelTrace sense(const BusyIntervalSet& busy, double delta, std::uint32_t channel_id = 0) {
  if (delta <= 0.0) throw std::invalid_argument("sense: non-positive delta");
  if (delta >= busy.horizon) throw std::invalid_argument("sense: delta must be smaller than the horizon");

  ChannelTrace trace;
  trace.delta = delta;
  trace.channel_id = channel_id;
  const std::size_t n = slot_count(busy.horizon, delta);
  trace.slots.assign(n, 0);

  for (const auto& [s, e] : busy.intervals) {
    auto k0 = static_cast<std::size_t>(std::max(0.0, std::floor(s / delta)));
    auto k1 = static_cast<std::size_t>(std::ceil(e / delta));
    if (k1 == 0) continue;
    k1 -= 1;
    if (k1 >= n) k1 = n - 1;
    // End slots can have zero-measure overlap when an interval endpoint falls
    // exactly on a slot boundary; those do not count as busy.
    while (k0 <= k1 && std::min(e, (k0 + 1) * delta) - std::max(s, k0 * delta) <= 0.0) ++k0;
    while (k1 > k0 && std::min(e, (k1 + 1) * delta) - std::max(s, k1 * delta) <= 0.0) --k1;
    if (k0 > k1) continue;
    if (std::min(e, (k1 + 1) * delta) - std::max(s, k1 * delta) <= 0.0) continue;
    for (std::size_t k = k0; k <= k1; ++k) trace.slots[k] = 1;
  }
  return trace;
}

// One-of-m encoding; the result is a valid probability mass function.
inline std::vector<double> one_hot(int state, int m) {
  if (m <= 0) throw std::invalid_argument("one_hot: non-positive m");
  if (state < 0 || state >= m) throw std::invalid_argument("one_hot: state out of range");
  std::vector<double> v(static_cast<std::size_t>(m), 0.0);
  v[static_cast<std::size_t>(state)] = 1.0;
  return v;
}

// Supervised next-slot dataset over non-overlapping windows. Inputs are kept
// as class indices; one_hot() expands them when a window is fed to a model.
// The target at step j of a window is the raw slot value one slot ahead.
struct Dataset {
  int window_len = 0;
  int m = 2;
  std::vector<std::uint8_t> inputs;   // n_windows * window_len class indices
  std::vector<std::uint8_t> targets;  // same shape as inputs

  std::size_t n_windows() const {
    return window_len > 0 ? inputs.size() / static_cast<std::size_t>(window_len) : 0;
  }

  const std::uint8_t* window_inputs(std::size_t w) const {
    return inputs.data() + w * static_cast<std::size_t>(window_len);
  }
  const std::uint8_t* window_targets(std::size_t w) const {
    return targets.data() + w * static_cast<std::size_t>(window_len);
  }
};

inline Dataset build_dataset(const ChannelTrace& trace, int window_len) {
  if (window_len <= 0) throw std::invalid_argument("build_dataset: non-positive window length");
  const std::size_t len = trace.slots.size();
  if (len <= static_cast<std::size_t>(window_len) + 1) throw std::invalid_argument("build_dataset: trace too short");

  Dataset ds;
  ds.window_len = window_len;
  ds.m = 2;
  const std::size_t count = (len - 1) / static_cast<std::size_t>(window_len);
  ds.inputs.reserve(count * window_len);
  ds.targets.reserve(count * window_len);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t base = w * static_cast<std::size_t>(window_len);
    for (int j = 0; j < window_len; ++j) {
      ds.inputs.push_back(trace.slots[base + j]);
      ds.targets.push_back(trace.slots[base + j + 1]);
    }
  }
  return ds;
}

// What it takes to regenerate a node's trace: the traffic components it
// senses, each paired with a stream tag. Two recipes that list a component
// under the same tag see the same sample path for a given master seed.
struct TraceRecipe {
  std::vector<std::pair<ArrivalProcess, std::uint64_t>> components;
  double delta = 20e-6;
  double horizon = 1.0;
  std::uint32_t channel_id = 0;
};

inline ChannelTrace make_trace(const TraceRecipe& recipe, std::uint64_t master_seed) {
  std::vector<std::vector<Packet>> sampled;
  sampled.reserve(recipe.components.size());
  for (const auto& [proc, tag] : recipe.components) {
    sampled.push_back(sample_arrivals(proc, recipe.horizon, mix_seed(master_seed, tag)));
  }
  const BusyIntervalSet busy = compose_node_traffic(sampled, {}, recipe.horizon);
  return sense(busy, recipe.delta, recipe.channel_id);
}

// Validation trace: same traffic processes, different seed, 10% of the
// training horizon.
inline std::pair<ChannelTrace, ChannelTrace> split_validation_traces(const TraceRecipe& recipe,
                                                                     std::uint64_t train_seed,
                                                                     std::uint64_t val_seed) {
  if (train_seed == val_seed) throw std::invalid_argument("split_validation: train and validation seeds must differ");
  TraceRecipe val_recipe = recipe;
  val_recipe.horizon = recipe.horizon / 10.0;
  return {make_trace(recipe, train_seed), make_trace(val_recipe, val_seed)};
}

inline std::pair<Dataset, Dataset> split_validation(const TraceRecipe& recipe, int window_len,
                                                    std::uint64_t train_seed, std::uint64_t val_seed) {
  auto [train_trace, val_trace] = split_validation_traces(recipe, train_seed, val_seed);
  return {build_dataset(train_trace, window_len), build_dataset(val_trace, window_len)};
}

// ---------------------------------------------------------------------------
// Trace files: packed bitstream with a small header.
//   magic "FCTR" | u32 version | u32 channel_id | u64 slot count |
//   f64 delta | slots packed LSB-first
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kTraceMagic[4] = {'F', 'C', 'T', 'R'};
inline constexpr std::uint32_t kTraceVersion = 1;

inline std::vector<std::uint8_t> encode_trace(const ChannelTrace& trace) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kTraceMagic, kTraceMagic + 4);
  put_u32le(out, kTraceVersion);
  put_u32le(out, trace.channel_id);
  put_u64le(out, trace.slots.size());
  put_f64le(out, trace.delta);
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < trace.slots.size(); ++i) {
    acc |= static_cast<std::uint8_t>((trace.slots[i] & 1u) << (i % 8));
    if (i % 8 == 7) {
      out.push_back(acc);
      acc = 0;
    }
  }
  if (trace.slots.size() % 8 != 0) out.push_back(acc);
  return out;
}

inline ChannelTrace decode_trace(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8 + 8;
  ByteReader r(bytes.data(), bytes.size());
  try {
    for (std::uint8_t m : kTraceMagic) {
      if (r.u8() != m) throw io_error("trace file: bad magic");
    }
    if (r.u32le() != kTraceVersion) throw io_error("trace file: unsupported version");
    ChannelTrace trace;
    trace.channel_id = r.u32le();
    const std::uint64_t n = r.u64le();
    trace.delta = r.f64le();
    if (r.remaining() != (n + 7) / 8) throw io_error("trace file: payload size mismatch");
    trace.slots.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      trace.slots[i] = (bytes[kHeaderSize + i / 8] >> (i % 8)) & 1u;
    }
    return trace;
  } catch (const std::runtime_error& e) {
    throw io_error(e.what());
  }
}

inline void write_trace(const std::string& path, const ChannelTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  const auto bytes = encode_trace(trace);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + path);
}

inline ChannelTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

}  // namespace fedchan
