#include "fedchan/sensing.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "support/oracles.hpp"

using namespace fedchan;

TEST(SlotCount, SnapsRepresentationError) {
  EXPECT_EQ(slot_count(5.0, 20e-6), 250000u);
  EXPECT_EQ(slot_count(1.0, 20e-6), 50000u);
  EXPECT_EQ(slot_count(0.1, 20e-6), 5000u);
  EXPECT_EQ(slot_count(90e-6, 20e-6), 4u);  // genuine floor
}

TEST(Sense, MarksSlotsWithNonzeroOverlap) {
  BusyIntervalSet busy;
  busy.horizon = 80e-6;
  busy.intervals = {{30e-6, 50e-6}};
  const auto trace = sense(busy, 20e-6);
  EXPECT_EQ(trace.slots, (std::vector<std::uint8_t>{0, 1, 1, 0}));
}

TEST(Sense, EmptySetGivesAllZeros) {
  BusyIntervalSet busy;
  busy.horizon = 1e-3;
  const auto trace = sense(busy, 20e-6);
  EXPECT_EQ(trace.slots.size(), 50u);
  for (auto s : trace.slots) EXPECT_EQ(s, 0);
}

TEST(Sense, BoundaryTouchDoesNotMarkNextSlot) {
  BusyIntervalSet busy;
  busy.horizon = 80e-6;
  busy.intervals = {{0.0, 20e-6}};  // ends exactly on the slot boundary
  const auto trace = sense(busy, 20e-6);
  EXPECT_EQ(trace.slots, (std::vector<std::uint8_t>{1, 0, 0, 0}));
}

TEST(Sense, RejectsBadDelta) {
  BusyIntervalSet busy;
  busy.horizon = 1e-3;
  EXPECT_THROW(sense(busy, 0.0), std::invalid_argument);
  EXPECT_THROW(sense(busy, 1e-3), std::invalid_argument);
  EXPECT_THROW(sense(busy, 2e-3), std::invalid_argument);
}

// Random interval set against a 0.1us rasterization oracle collapsed to the
// sensing slot size.
TEST(Sense, MatchesFineRasterizationOracle) {
  Rng rng(77);
  std::vector<Packet> packets;
  const double horizon = 0.02;  // 1000 slots of 20us
  for (int i = 0; i < 300; ++i) {
    packets.push_back({rng.uniform(0.0, horizon), rng.uniform(0.5e-6, 120e-6)});
  }
  const auto busy = occupancy_union(packets, horizon);
  const auto trace = sense(busy, 20e-6);

  const auto fine = oracle::rasterize(busy.intervals, horizon, 0.1e-6);
  const auto expected = oracle::collapse(fine, 200);
  ASSERT_EQ(trace.slots.size(), expected.size());
  EXPECT_EQ(trace.slots, expected);
}

// Adding intervals can only turn idle slots busy, never the reverse.
TEST(Sense, MonotoneInBusySet) {
  Rng rng(78);
  const double horizon = 0.01;
  std::vector<Packet> packets;
  for (int i = 0; i < 50; ++i) packets.push_back({rng.uniform(0.0, horizon), rng.uniform(1e-6, 60e-6)});
  const auto base = sense(occupancy_union(packets, horizon), 20e-6);

  for (int i = 0; i < 50; ++i) packets.push_back({rng.uniform(0.0, horizon), rng.uniform(1e-6, 60e-6)});
  const auto extended = sense(occupancy_union(packets, horizon), 20e-6);

  ASSERT_EQ(base.slots.size(), extended.slots.size());
  for (std::size_t k = 0; k < base.slots.size(); ++k) {
    EXPECT_LE(base.slots[k], extended.slots[k]) << "slot " << k;
  }
}

TEST(OneHot, MatchesDefinition) {
  EXPECT_EQ(one_hot(0, 2), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(one_hot(1, 2), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(one_hot(3, 5), (std::vector<double>{0.0, 0.0, 0.0, 1.0, 0.0}));
}

TEST(OneHot, RejectsOutOfRange) {
  EXPECT_THROW(one_hot(2, 2), std::invalid_argument);
  EXPECT_THROW(one_hot(-1, 2), std::invalid_argument);
  EXPECT_THROW(one_hot(0, 0), std::invalid_argument);
}

TEST(OneHot, ArgmaxRoundTrip) {
  for (int m = 1; m <= 6; ++m) {
    for (int state = 0; state < m; ++state) {
      const auto v = one_hot(state, m);
      int arg = 0;
      for (int j = 1; j < m; ++j) {
        if (v[static_cast<std::size_t>(j)] > v[static_cast<std::size_t>(arg)]) arg = j;
      }
      EXPECT_EQ(arg, state);
      double sum = 0.0;
      for (double x : v) sum += x;
      EXPECT_DOUBLE_EQ(sum, 1.0);  // valid PMF
    }
  }
}

TEST(BuildDataset, WindowsAndNextSlotTargets) {
  ChannelTrace trace;
  trace.slots = {0, 1, 1, 0, 1};
  const auto ds = build_dataset(trace, 2);
  ASSERT_EQ(ds.n_windows(), 2u);
  // window 0 inputs [0,1], per-step targets [1,1]; window 1 inputs [1,0], targets [0,1]
  EXPECT_EQ(ds.inputs, (std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(ds.targets, (std::vector<std::uint8_t>{1, 1, 0, 1}));
  EXPECT_EQ(ds.window_targets(0)[ds.window_len - 1], 1);
  EXPECT_EQ(ds.window_targets(1)[ds.window_len - 1], 1);
}

TEST(BuildDataset, ConstantZeroTraceGivesZeroTargets) {
  ChannelTrace trace;
  trace.slots.assign(500, 0);
  const auto ds = build_dataset(trace, 100);
  for (auto t : ds.targets) EXPECT_EQ(t, 0);
}

TEST(BuildDataset, WindowCountArithmetic) {
  ChannelTrace trace;
  trace.slots.assign(250000, 0);
  EXPECT_EQ(build_dataset(trace, 100).n_windows(), 2499u);
}

TEST(BuildDataset, RejectsShortTrace) {
  ChannelTrace trace;
  trace.slots.assign(101, 0);
  EXPECT_THROW(build_dataset(trace, 100), std::invalid_argument);
}

TEST(BuildDataset, TargetsAreValidClasses) {
  Rng rng(5);
  ChannelTrace trace;
  for (int i = 0; i < 1000; ++i) trace.slots.push_back(rng.uniform01() < 0.3 ? 1 : 0);
  const auto ds = build_dataset(trace, 25);
  ASSERT_EQ(ds.inputs.size(), ds.targets.size());
  for (auto t : ds.targets) EXPECT_LT(t, ds.m);
}

namespace {

TraceRecipe three_rate_recipe(double horizon) {
  TraceRecipe recipe;
  ArrivalProcess proc;
  proc.rates = {5.0, 9.5, 12.0};
  recipe.components = {{proc, 0}};
  recipe.delta = 20e-6;
  recipe.horizon = horizon;
  return recipe;
}

double busy_fraction(const ChannelTrace& trace) {
  double busy = 0.0;
  for (auto s : trace.slots) busy += s;
  return busy / static_cast<double>(trace.slots.size());
}

}  // namespace

TEST(SplitValidation, FullScaleTraceProducesQuarterMillionSlots) {
  const auto recipe = three_rate_recipe(5.0);
  auto [train_trace, val_trace] = split_validation_traces(recipe, 10, 20);
  EXPECT_EQ(train_trace.slots.size(), 250000u);
  EXPECT_EQ(val_trace.slots.size(), 25000u);  // 10% of the training slots
}

TEST(SplitValidation, DeterministicGivenSeeds) {
  const auto recipe = three_rate_recipe(1.0);
  auto [a_train, a_val] = split_validation(recipe, 100, 10, 20);
  auto [b_train, b_val] = split_validation(recipe, 100, 10, 20);
  EXPECT_EQ(a_train.inputs, b_train.inputs);
  EXPECT_EQ(a_train.targets, b_train.targets);
  EXPECT_EQ(a_val.inputs, b_val.inputs);
  EXPECT_EQ(a_val.targets, b_val.targets);
}

TEST(SplitValidation, RejectsEqualSeeds) {
  const auto recipe = three_rate_recipe(1.0);
  EXPECT_THROW(split_validation(recipe, 100, 10, 10), std::invalid_argument);
}

// Train and validation traces differ in content but are statistically alike:
// busy fractions agree within three standard errors of the slot-level rate.
TEST(SplitValidation, ValidationSharesBusyStatistics) {
  const auto recipe = three_rate_recipe(5.0);
  auto [train_trace, val_trace] = split_validation_traces(recipe, 10, 20);
  EXPECT_NE(train_trace.slots, val_trace.slots);

  const double p_train = busy_fraction(train_trace);
  const double p_val = busy_fraction(val_trace);
  // Slots within one packet are correlated; a packet spans ~39 slots, so the
  // effective sample size is slots / 39.
  const double eff = static_cast<double>(val_trace.slots.size()) / 39.0;
  const double se = std::sqrt(p_train * (1.0 - p_train) / eff);
  EXPECT_NEAR(p_val, p_train, 3.0 * se);
}

TEST(TraceIo, RoundTripsThroughFile) {
  Rng rng(9);
  ChannelTrace trace;
  trace.delta = 20e-6;
  trace.channel_id = 3;
  for (int i = 0; i < 12345; ++i) trace.slots.push_back(rng.uniform01() < 0.1 ? 1 : 0);

  const auto path = (std::filesystem::temp_directory_path() / "fedchan_trace_test.bin").string();
  write_trace(path, trace);
  const auto loaded = read_trace(path);
  EXPECT_EQ(loaded.slots, trace.slots);
  EXPECT_EQ(loaded.channel_id, trace.channel_id);
  EXPECT_DOUBLE_EQ(loaded.delta, trace.delta);
  std::remove(path.c_str());
}

TEST(TraceIo, RejectsCorruptedHeader) {
  Rng rng(10);
  ChannelTrace trace;
  for (int i = 0; i < 100; ++i) trace.slots.push_back(0);
  auto bytes = encode_trace(trace);
  bytes[0] = 'X';
  EXPECT_THROW(decode_trace(bytes), io_error);

  auto truncated = encode_trace(trace);
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(decode_trace(truncated), io_error);
}
