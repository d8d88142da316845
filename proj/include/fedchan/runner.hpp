#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedchan/federation.hpp"
#include "fedchan/report.hpp"
#include "fedchan/scenario.hpp"
#include "fedchan/sensing.hpp"

namespace fedchan {

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& targets) {
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
  if (predictions.size() != targets.size()) throw std::invalid_argument("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == targets[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

// Repeats the last observed slot: prediction for slot t+1 is slot t. Any
// trained model has to at least match this on its own trace.
inline std::vector<int> baseline_persistence(const ChannelTrace& trace) {
  if (trace.slots.size() < 2) throw std::invalid_argument("baseline_persistence: trace too short");
  std::vector<int> preds(trace.slots.begin(), trace.slots.end() - 1);
  return preds;
}

inline double persistence_accuracy(const ChannelTrace& trace) {
  const auto preds = baseline_persistence(trace);
  std::vector<int> targets(trace.slots.begin() + 1, trace.slots.end());
  return accuracy(preds, targets);
}

struct RunResult {
  EvalReport report;
  std::vector<ParamVector> local_models;
  std::vector<GlobalModel> global_models;
  std::vector<ChannelTrace> train_traces;
  std::vector<ChannelTrace> val_traces;
  std::vector<ChannelModelRegistry> registries;  // foreign-channel models per node
};

namespace detail {
inline constexpr std::uint64_t kNoiseStreamTag = 0x6c696e6b;

inline double now_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

// Full pipeline: generate per-node traffic, sense, train local models,
// broadcast one hop, aggregate, evaluate local and global models on each
// node's held-out validation trace. Deterministic given the scenario seeds.
inline RunResult run(const Scenario& sc) {
  sc.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t n = sc.nodes.size();
  const Topology topo = sc.topology();

  RunResult rr;
  rr.report.scenario = sc.name;
  rr.report.primary = sc.nodes[sc.primary_index()].id;
  rr.report.arch = sc.arch;
  rr.local_models.reserve(n);
  rr.registries.assign(n, ChannelModelRegistry(sc.registry_capacity));

  // Per-node traces, datasets, local training.
  std::vector<Dataset> val_datasets(n);
  std::vector<TrainResult> train_results(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto t0 = std::chrono::steady_clock::now();
    const TraceRecipe recipe = sc.recipe_for(v);
    auto [train_trace, val_trace] = split_validation_traces(recipe, sc.seeds.traffic, sc.seeds.validation);
    const Dataset train_ds = build_dataset(train_trace, sc.window_len);
    val_datasets[v] = build_dataset(val_trace, sc.window_len);

    const ParamVector init = init_params(sc.arch, sc.seeds.init);
    TrainOptions opts;
    opts.epochs = sc.epochs;
    opts.learning_rate = sc.learning_rate;
    opts.clip_norm = sc.clip_norm;
    opts.shuffle_seed = sc.seeds.shuffle;
    train_results[v] = train(init, train_ds, &val_datasets[v], opts);

    NodeReport node;
    node.id = sc.nodes[v].id;
    node.index = static_cast<std::uint32_t>(v);
    node.channel = sc.nodes[v].channel;
    node.diverged = train_results[v].diverged;
    node.diverged_epoch = train_results[v].diverged_epoch;
    node.train_slots = train_trace.slots.size();
    node.val_slots = val_trace.slots.size();
    node.epochs = train_results[v].metrics;
    node.persistence_acc = persistence_accuracy(val_trace);
    rr.report.nodes.push_back(std::move(node));

    rr.local_models.push_back(train_results[v].params);
    rr.train_traces.push_back(std::move(train_trace));
    rr.val_traces.push_back(std::move(val_trace));
    rr.report.wall_ms["train." + sc.nodes[v].id] = detail::now_ms(t0);
  }

  // Model exchange: each healthy node broadcasts its local model once to its
  // one-hop neighbors at wire (32-bit) precision. Same-channel models feed
  // the neighbor's average; foreign-channel models go to its registry.
  std::vector<std::vector<std::pair<std::uint32_t, ParamVector>>> inbox(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (train_results[s].diverged) continue;
    const ModelMessage msg =
        make_message(static_cast<std::uint32_t>(s), sc.nodes[s].channel, rr.local_models[s]);
    for (const std::uint32_t r : broadcast(topo, static_cast<std::uint32_t>(s), msg)) {
      ParamVector received = to_params(msg);
      if (sc.noise_std > 0.0) {
        const std::uint64_t link_seed =
            mix_seed(mix_seed(sc.seeds.traffic, detail::kNoiseStreamTag), (static_cast<std::uint64_t>(s) << 32) | r);
        received = corrupt(received, sc.noise_std, link_seed);
      }
      if (msg.channel_id == sc.nodes[r].channel) {
        inbox[r].emplace_back(static_cast<std::uint32_t>(s), std::move(received));
      } else {
        rr.registries[r].insert(msg.channel_id, std::move(received));
      }
    }
  }

  // Aggregate and evaluate.
  for (std::size_t v = 0; v < n; ++v) {
    rr.global_models.push_back(aggregate_average(static_cast<std::uint32_t>(v), rr.local_models[v], inbox[v]));
    NodeReport& node = rr.report.nodes[v];
    if (train_results[v].diverged) continue;
    const EvalResult local = evaluate(rr.local_models[v], val_datasets[v]);
    const EvalResult global = evaluate(rr.global_models[v].as_params(), val_datasets[v]);
    node.local_val_acc = local.accuracy;
    node.local_val_loss = local.mean_loss;
    node.global_val_acc = global.accuracy;
    node.global_val_loss = global.mean_loss;
  }

  for (const auto& [model_id, trace_id] : sc.cross_eval) {
    const std::size_t mv = sc.node_index(model_id);
    const std::size_t tv = sc.node_index(trace_id);
    CrossEval ce;
    ce.model_node = model_id;
    ce.trace_node = trace_id;
    ce.local_acc = evaluate(rr.local_models[mv], val_datasets[tv]).accuracy;
    ce.global_acc = evaluate(rr.global_models[mv].as_params(), val_datasets[tv]).accuracy;
    rr.report.cross_evals.push_back(std::move(ce));
  }

  const NodeReport& primary = rr.report.nodes[sc.primary_index()];
  rr.report.eta1 = 1.0 - primary.local_val_acc;
  rr.report.eta2 = 1.0 - primary.global_val_acc;
  rr.report.wall_ms["total"] = detail::now_ms(t_start);
  return rr;
}

// True iff the primary's aggregated model beats its purely local model on the
// neighbor trace that contains the hidden terminal's traffic, by at least
// min_margin of accuracy. Requires a report whose scenario recorded that
// cross evaluation (the hidden-terminal builtin does).
inline bool hidden_terminal_check(const EvalReport& report, double min_margin = 0.01) {
  for (const auto& ce : report.cross_evals) {
    if (ce.model_node == report.primary && ce.trace_node != report.primary) {
      return ce.global_acc - ce.local_acc >= min_margin;
    }
  }
  throw std::invalid_argument("hidden_terminal_check: report has no primary cross evaluation");
}

}  // namespace fedchan
