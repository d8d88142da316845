#include "fedchan/traffic.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"

using namespace fedchan;

namespace {

ArrivalProcess make_process(std::vector<double> rates) {
  ArrivalProcess proc;
  proc.rates = std::move(rates);
  proc.source_id = "test";
  return proc;
}

}  // namespace

TEST(ArrivalProcess, ValidationRejectsBadFields) {
  ArrivalProcess proc = make_process({5.0});
  proc.rates.push_back(-1.0);
  EXPECT_THROW(proc.validate(), std::invalid_argument);

  proc = make_process({5.0});
  proc.pkt_len_min = 3000;
  EXPECT_THROW(proc.validate(), std::invalid_argument);

  proc = make_process({5.0});
  proc.phy_rate = 0.0;
  EXPECT_THROW(proc.validate(), std::invalid_argument);
}

TEST(SampleArrivals, ZeroRateYieldsEmpty) {
  EXPECT_TRUE(sample_arrivals(make_process({0.0}), 5.0, 42).empty());
}

TEST(SampleArrivals, EmptyRateListYieldsEmpty) {
  EXPECT_TRUE(sample_arrivals(make_process({}), 5.0, 42).empty());
}

TEST(SampleArrivals, NonPositiveHorizonThrows) {
  EXPECT_THROW(sample_arrivals(make_process({5.0}), 0.0, 42), std::invalid_argument);
  EXPECT_THROW(sample_arrivals(make_process({5.0}), -1.0, 42), std::invalid_argument);
}

TEST(SampleArrivals, DeterministicGivenSeed) {
  const ArrivalProcess proc = make_process({5.0, 9.5});
  const auto a = sample_arrivals(proc, 5.0, 7);
  const auto b = sample_arrivals(proc, 5.0, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].start, b[i].start);
    EXPECT_EQ(a[i].airtime, b[i].airtime);
  }
  const auto c = sample_arrivals(proc, 5.0, 8);
  EXPECT_NE(a.size(), c.size());  // different seed, different realization
}

TEST(SampleArrivals, PacketAirtimesWithinConfiguredRange) {
  const ArrivalProcess proc = make_process({20.0});
  const double lo = 2000.0 * 8.0 / proc.phy_rate;
  const double hi = 2364.0 * 8.0 / proc.phy_rate;
  for (const auto& pkt : sample_arrivals(proc, 5.0, 3)) {
    EXPECT_GE(pkt.airtime, lo);
    EXPECT_LE(pkt.airtime, hi);
  }
}

// Mean arrival count over 10,000 seeded runs stays within three standard
// errors of rate * horizon (sigma = sqrt(25), so 3 * 5 / 100 = 0.15).
TEST(SampleArrivals, MeanCountMatchesIntensity) {
  const ArrivalProcess proc = make_process({5.0});
  const int runs = 10000;
  double total = 0.0;
  for (int r = 0; r < runs; ++r) {
    total += static_cast<double>(sample_arrivals(proc, 5.0, 1000 + static_cast<std::uint64_t>(r)).size());
  }
  EXPECT_NEAR(total / runs, 25.0, 0.15);
}

// The three-rate neighbor mix superposes to intensity 26.5/s.
TEST(SampleArrivals, NeighborMixSuperposedIntensity) {
  const ArrivalProcess proc = make_process({5.0, 9.5, 12.0});
  const int runs = 4000;
  const double expected = 26.5 * 5.0;
  double total = 0.0;
  for (int r = 0; r < runs; ++r) {
    total += static_cast<double>(sample_arrivals(proc, 5.0, 5000 + static_cast<std::uint64_t>(r)).size());
  }
  const double se = std::sqrt(expected) / std::sqrt(static_cast<double>(runs));
  EXPECT_NEAR(total / runs, expected, 3.0 * se);
}

TEST(SampleArrivals, MultiRateIsSuperpositionOfSingleRates) {
  const ArrivalProcess proc = make_process({5.0, 9.5});
  const std::uint64_t seed = 99;
  const auto combined = sample_arrivals(proc, 5.0, seed);

  auto merged = sample_single_rate(proc, 5.0, 5.0, mix_seed(seed, 0));
  const auto second = sample_single_rate(proc, 9.5, 5.0, mix_seed(seed, 1));
  merged.insert(merged.end(), second.begin(), second.end());
  std::sort(merged.begin(), merged.end(), [](const Packet& a, const Packet& b) {
    return a.start != b.start ? a.start < b.start : a.airtime < b.airtime;
  });

  ASSERT_EQ(combined.size(), merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    EXPECT_EQ(combined[i].start, merged[i].start);
    EXPECT_EQ(combined[i].airtime, merged[i].airtime);
  }
}

TEST(OccupancyUnion, MergesOverlappingIntervals) {
  const std::vector<Packet> packets = {{0.0, 10e-6}, {5e-6, 15e-6}};
  const auto busy = occupancy_union(packets, 80e-6);
  ASSERT_EQ(busy.intervals.size(), 1u);
  EXPECT_DOUBLE_EQ(busy.intervals[0].first, 0.0);
  EXPECT_DOUBLE_EQ(busy.intervals[0].second, 20e-6);
}

TEST(OccupancyUnion, EmptyInput) {
  const auto busy = occupancy_union({}, 1.0);
  EXPECT_TRUE(busy.intervals.empty());
  EXPECT_DOUBLE_EQ(busy.busy_time(), 0.0);
}

TEST(OccupancyUnion, RejectsStartOutsideHorizon) {
  EXPECT_THROW(occupancy_union({{2.0, 1e-3}}, 1.0), std::invalid_argument);
  EXPECT_THROW(occupancy_union({{-0.1, 1e-3}}, 1.0), std::invalid_argument);
}

TEST(OccupancyUnion, ClipsToHorizon) {
  const auto busy = occupancy_union({{0.9e-3, 0.5e-3}}, 1e-3);
  ASSERT_EQ(busy.intervals.size(), 1u);
  EXPECT_DOUBLE_EQ(busy.intervals[0].second, 1e-3);
}

// 1000 random packets: the normalized union must rasterize to the same
// 1us-resolution mask as the raw packets.
TEST(OccupancyUnion, MatchesRasterizationOracle) {
  Rng rng(123);
  std::vector<Packet> packets;
  const double horizon = 0.02;
  for (int i = 0; i < 1000; ++i) {
    packets.push_back({rng.uniform(0.0, horizon), rng.uniform(1e-6, 40e-6)});
  }
  const auto busy = occupancy_union(packets, horizon);

  for (std::size_t i = 1; i < busy.intervals.size(); ++i) {
    EXPECT_GT(busy.intervals[i].first, busy.intervals[i - 1].second);  // disjoint and sorted
  }
  const auto expected = oracle::rasterize_packets(packets, horizon, 1e-6);
  const auto actual = oracle::rasterize(busy.intervals, horizon, 1e-6);
  EXPECT_EQ(actual, expected);
}

TEST(ComposeNodeTraffic, EmptyInputsGiveEmptySet) {
  EXPECT_TRUE(compose_node_traffic({}, {}, 1.0).intervals.empty());
}

TEST(ComposeNodeTraffic, SharedSamplePathGivesIdenticalSets) {
  const auto shared = sample_arrivals(make_process({5.0}), 2.0, 11);
  const auto node_a = compose_node_traffic({shared}, {}, 2.0);
  const auto node_b = compose_node_traffic({shared}, {}, 2.0);
  EXPECT_EQ(node_a.intervals, node_b.intervals);
}

// Table-style setup: the neighbor senses the primary's component plus its own
// extra traffic, so its busy set must cover the primary's.
TEST(ComposeNodeTraffic, NeighborBusySetCoversPrimary) {
  const double horizon = 0.5;
  const auto shared = sample_arrivals(make_process({5.0}), horizon, 21);
  const auto own1 = sample_arrivals(make_process({9.5}), horizon, 22);
  const auto own2 = sample_arrivals(make_process({12.0}), horizon, 23);

  const auto primary = compose_node_traffic({shared}, {}, horizon);
  const auto neighbor = compose_node_traffic({shared}, {own1, own2}, horizon);

  const auto mask_primary = oracle::rasterize(primary.intervals, horizon, 1e-6);
  const auto mask_neighbor = oracle::rasterize(neighbor.intervals, horizon, 1e-6);
  for (std::size_t j = 0; j < mask_primary.size(); ++j) {
    if (mask_primary[j]) EXPECT_TRUE(mask_neighbor[j]) << "cell " << j;
  }
  EXPECT_GT(neighbor.busy_time(), primary.busy_time());
}

// Long-run busy fraction converges to the M/G/inf stationary probability.
// Measured after a 5ms warmup so edge effects at t=0 do not bias the test.
TEST(TrafficProperties, BusyFractionMatchesStationaryProbability) {
  const ArrivalProcess proc = make_process({5.0, 9.5, 12.0});
  const double horizon = 2.0;
  const double warmup = 5e-3;
  const int runs = 200;

  const double theory = oracle::stationary_busy_probability({{5.0, proc.mean_airtime()},
                                                             {9.5, proc.mean_airtime()},
                                                             {12.0, proc.mean_airtime()}});
  std::vector<double> fractions;
  for (int r = 0; r < runs; ++r) {
    const auto busy = occupancy_union(sample_arrivals(proc, horizon, 40000 + static_cast<std::uint64_t>(r)), horizon);
    fractions.push_back(busy.busy_time_after(warmup) / (horizon - warmup));
  }
  double mean = 0.0;
  for (double f : fractions) mean += f;
  mean /= runs;
  double var = 0.0;
  for (double f : fractions) var += (f - mean) * (f - mean);
  var /= (runs - 1);
  const double se = std::sqrt(var / runs);
  EXPECT_NEAR(mean, theory, 3.0 * se);
}
