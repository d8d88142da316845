#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedchan/rng.hpp"

namespace fedchan {

// One traffic component: a set of Poisson arrival rates transmitting packets
// with uniformly distributed lengths on a channel at a fixed PHY rate.
struct ArrivalProcess {
  std::vector<double> rates;  // mean arrivals per second, one entry per flow
  int pkt_len_min = 2000;     // bytes, headers included
  int pkt_len_max = 2364;     // bytes
  double phy_rate = 24e6;     // bits per second
  std::string source_id;

  void validate() const {
    for (double r : rates) {
      if (r < 0.0) throw std::invalid_argument("ArrivalProcess: negative rate");
    }
    if (pkt_len_min > pkt_len_max) throw std::invalid_argument("ArrivalProcess: pkt_len_min > pkt_len_max");
    if (pkt_len_min <= 0) throw std::invalid_argument("ArrivalProcess: non-positive packet length");
    if (phy_rate <= 0.0) throw std::invalid_argument("ArrivalProcess: non-positive phy_rate");
  }

  double total_rate() const {
    double sum = 0.0;
    for (double r : rates) sum += r;
    return sum;
  }

  double mean_airtime() const {
    return (pkt_len_min + pkt_len_max) * 0.5 * 8.0 / phy_rate;
  }
};

struct Packet {
  double start;    // seconds
  double airtime;  // seconds
};

// Union-normalized set of busy intervals on [0, horizon].
struct BusyIntervalSet {
  std::vector<std::pair<double, double>> intervals;  // sorted, disjoint
  double horizon = 0.0;

  double busy_time() const {
    double sum = 0.0;
    for (const auto& [s, e] : intervals) sum += e - s;
    return sum;
  }

  // Busy measure restricted to [from, horizon]; used for stationary estimates
  // that exclude the ramp-up at the start of a trace.
  double busy_time_after(double from) const {
    double sum = 0.0;
    for (const auto& [s, e] : intervals) {
      if (e <= from) continue;
      sum += e - std::max(s, from);
    }
    return sum;
  }
};

// One homogeneous Poisson flow: exponential inter-arrival gaps, uniform
// packet lengths converted to airtime at the process PHY rate.
inline std::vector<Packet> sample_single_rate(const ArrivalProcess& proc, double rate,
                                              double horizon, std::uint64_t rng_seed) {
  proc.validate();
  if (rate < 0.0) throw std::invalid_argument("sample_single_rate: negative rate");
  if (horizon <= 0.0) throw std::invalid_argument("sample_single_rate: non-positive horizon");
  std::vector<Packet> packets;
  if (rate == 0.0) return packets;
  Rng rng(rng_seed);
  double t = rng.exponential(rate);
  while (t < horizon) {
    const auto len_bytes = rng.uniform_int(proc.pkt_len_min, proc.pkt_len_max);
    packets.push_back({t, static_cast<double>(len_bytes) * 8.0 / proc.phy_rate});
    t += rng.exponential(rate);
  }
  return packets;
}

// Samples all flows of a process over [0, horizon]. Rate index k draws from
// the derived stream mix_seed(rng_seed, k), so a multi-rate process is the
// exact superposition of its single-rate parts sampled with those seeds.
inline std::vector<Packet> sample_arrivals(const ArrivalProcess& proc, double horizon,
                                           std::uint64_t rng_seed) {
  proc.validate();
  if (horizon <= 0.0) throw std::invalid_argument("sample_arrivals: non-positive horizon");

  std::vector<Packet> packets;
  for (std::size_t k = 0; k < proc.rates.size(); ++k) {
    const auto flow = sample_single_rate(proc, proc.rates[k], horizon, mix_seed(rng_seed, k));
    packets.insert(packets.end(), flow.begin(), flow.end());
  }
  std::sort(packets.begin(), packets.end(), [](const Packet& a, const Packet& b) {
    return a.start != b.start ? a.start < b.start : a.airtime < b.airtime;
  });
  return packets;
}

// Union of [start, start+airtime] intervals, clipped to [0, horizon].
inline BusyIntervalSet occupancy_union(const std::vector<Packet>& packets, double horizon) {
  if (horizon <= 0.0) throw std::invalid_argument("occupancy_union: non-positive horizon");
  std::vector<std::pair<double, double>> raw;
  raw.reserve(packets.size());
  for (const auto& p : packets) {
    if (p.start < 0.0 || p.start > horizon) throw std::invalid_argument("occupancy_union: packet start outside [0, horizon]");
    const double end = std::min(p.start + p.airtime, horizon);
    if (end > p.start) raw.emplace_back(p.start, end);
  }
  std::sort(raw.begin(), raw.end());

  BusyIntervalSet out;
  out.horizon = horizon;
  for (const auto& iv : raw) {
    if (!out.intervals.empty() && iv.first <= out.intervals.back().second) {
      out.intervals.back().second = std::max(out.intervals.back().second, iv.second);
    } else {
      out.intervals.push_back(iv);
    }
  }
  return out;
}

// Combined occupancy of shared components (sample paths common to several
// nodes) and components private to this node.
inline BusyIntervalSet compose_node_traffic(const std::vector<std::vector<Packet>>& shared,
                                            const std::vector<std::vector<Packet>>& own,
                                            double horizon) {
  std::vector<Packet> all;
  for (const auto& list : shared) all.insert(all.end(), list.begin(), list.end());
  for (const auto& list : own) all.insert(all.end(), list.begin(), list.end());
  return occupancy_union(all, horizon);
}

}  // namespace fedchan
