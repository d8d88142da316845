#pragma once

// Umbrella header: peer-to-peer federated prediction of wireless channel
// availability. Traffic synthesis, channel sensing, LSTM training, one-hop
// model exchange and aggregation, scenario orchestration.

#include "fedchan/bytes.hpp"
#include "fedchan/federation.hpp"
#include "fedchan/lstm.hpp"
#include "fedchan/report.hpp"
#include "fedchan/rng.hpp"
#include "fedchan/runner.hpp"
#include "fedchan/scenario.hpp"
#include "fedchan/sensing.hpp"
#include "fedchan/traffic.hpp"
