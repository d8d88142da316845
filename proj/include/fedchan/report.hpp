#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedchan/lstm.hpp"

namespace fedchan {

struct NodeReport {
  std::string id;
  std::uint32_t index = 0;
  std::uint32_t channel = 0;
  bool diverged = false;
  int diverged_epoch = -1;
  double local_val_acc = 0.0;
  double local_val_loss = 0.0;
  double global_val_acc = 0.0;
  double global_val_loss = 0.0;
  double persistence_acc = 0.0;
  std::size_t train_slots = 0;
  std::size_t val_slots = 0;
  std::vector<EpochMetrics> epochs;
};

struct CrossEval {
  std::string model_node;
  std::string trace_node;
  double local_acc = 0.0;   // model node's local model on the trace node's validation trace
  double global_acc = 0.0;  // model node's global model on the same trace
};

struct EvalReport {
  std::string scenario;
  std::string primary;
  Architecture arch;
  std::vector<NodeReport> nodes;
  double eta1 = 0.0;  // primary's local validation error rate
  double eta2 = 0.0;  // primary's global validation error rate
  std::vector<CrossEval> cross_evals;
  std::map<std::string, double> wall_ms;  // informational, excluded from equivalence
};

// Equality over every reproducible field; wall-clock timings are excluded.
inline bool reports_equivalent(const EvalReport& a, const EvalReport& b) {
  if (a.scenario != b.scenario || a.primary != b.primary || !(a.arch == b.arch)) return false;
  if (a.eta1 != b.eta1 || a.eta2 != b.eta2) return false;
  if (a.nodes.size() != b.nodes.size() || a.cross_evals.size() != b.cross_evals.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const NodeReport& x = a.nodes[i];
    const NodeReport& y = b.nodes[i];
    if (x.id != y.id || x.index != y.index || x.channel != y.channel) return false;
    if (x.diverged != y.diverged || x.diverged_epoch != y.diverged_epoch) return false;
    if (x.local_val_acc != y.local_val_acc || x.local_val_loss != y.local_val_loss) return false;
    if (x.global_val_acc != y.global_val_acc || x.global_val_loss != y.global_val_loss) return false;
    if (x.persistence_acc != y.persistence_acc) return false;
    if (x.train_slots != y.train_slots || x.val_slots != y.val_slots) return false;
    if (x.epochs.size() != y.epochs.size()) return false;
    for (std::size_t e = 0; e < x.epochs.size(); ++e) {
      const EpochMetrics& p = x.epochs[e];
      const EpochMetrics& q = y.epochs[e];
      const bool val_equal = (std::isnan(p.val_acc) && std::isnan(q.val_acc)) || p.val_acc == q.val_acc;
      if (p.epoch != q.epoch || p.mean_loss != q.mean_loss || p.train_acc != q.train_acc || !val_equal) return false;
    }
  }
  for (std::size_t i = 0; i < a.cross_evals.size(); ++i) {
    const CrossEval& x = a.cross_evals[i];
    const CrossEval& y = b.cross_evals[i];
    if (x.model_node != y.model_node || x.trace_node != y.trace_node) return false;
    if (x.local_acc != y.local_acc || x.global_acc != y.global_acc) return false;
  }
  return true;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = report.scenario;
  j["primary"] = report.primary;
  j["arch"] = {{"m", report.arch.input_dim},
               {"p", report.arch.p_units},
               {"q", report.arch.q_units},
               {"params", report.arch.param_count()}};
  j["eta1"] = report.eta1;
  j["eta2"] = report.eta2;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& node : report.nodes) {
    nlohmann::ordered_json n;
    n["id"] = node.id;
    n["index"] = node.index;
    n["channel"] = node.channel;
    n["diverged"] = node.diverged;
    if (node.diverged) n["diverged_epoch"] = node.diverged_epoch;
    n["local_val_acc"] = node.local_val_acc;
    n["local_val_loss"] = node.local_val_loss;
    n["global_val_acc"] = node.global_val_acc;
    n["global_val_loss"] = node.global_val_loss;
    n["persistence_acc"] = node.persistence_acc;
    n["train_slots"] = node.train_slots;
    n["val_slots"] = node.val_slots;
    n["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : node.epochs) {
      n["epochs"].push_back({{"epoch", e.epoch},
                             {"loss", e.mean_loss},
                             {"train_acc", e.train_acc},
                             {"val_acc", e.val_acc},
                             {"wall_ms", e.wall_ms}});
    }
    j["nodes"].push_back(std::move(n));
  }
  j["cross_evals"] = nlohmann::ordered_json::array();
  for (const auto& ce : report.cross_evals) {
    j["cross_evals"].push_back({{"model_node", ce.model_node},
                                {"trace_node", ce.trace_node},
                                {"local_acc", ce.local_acc},
                                {"global_acc", ce.global_acc}});
  }
  j["wall_ms"] = report.wall_ms;
  return j;
}

// Per-epoch training metrics, one row per (node, epoch).
inline std::string metrics_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "node_id,epoch,loss,train_acc,val_acc,wall_time_ms\n";
  out.precision(17);
  for (const auto& node : report.nodes) {
    for (const auto& e : node.epochs) {
      out << node.id << ',' << e.epoch << ',' << e.mean_loss << ',' << e.train_acc << ',' << e.val_acc
          << ',' << e.wall_ms << '\n';
    }
  }
  return out.str();
}

}  // namespace fedchan
