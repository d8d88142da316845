#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedchan/federation.hpp"
#include "fedchan/lstm.hpp"
#include "fedchan/sensing.hpp"
#include "fedchan/traffic.hpp"

namespace fedchan {

struct ScenarioSeeds {
  std::uint64_t traffic = 1001;
  std::uint64_t init = 2002;
  std::uint64_t shuffle = 3003;
  std::uint64_t validation = 4004;
};

struct NodeSpec {
  std::string id;
  std::uint32_t channel = 0;
};

// A traffic component is sensed by every node in `sensors` as the same
// sample path. One sensor = private traffic, several = shared traffic.
struct TrafficComponentSpec {
  std::string name;
  ArrivalProcess proc;
  std::vector<std::string> sensors;
};

struct Scenario {
  std::string name;
  std::vector<NodeSpec> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<TrafficComponentSpec> components;
  Architecture arch{2, 5, 5, 2};
  double delta = 20e-6;
  double horizon = 1.0;
  int window_len = 100;
  int epochs = 40;
  double learning_rate = 0.05;
  double clip_norm = 5.0;
  double noise_std = 0.0;
  std::size_t registry_capacity = 8;
  ScenarioSeeds seeds;
  std::string primary;  // defaults to the first node
  std::vector<std::pair<std::string, std::string>> cross_eval;  // (model node, trace node)

  std::size_t node_index(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id == id) return i;
    }
    throw std::invalid_argument("scenario '" + name + "': unknown node '" + id + "'");
  }

  std::size_t primary_index() const { return primary.empty() ? 0 : node_index(primary); }

  Topology topology() const {
    Topology topo(nodes.size());
    for (const auto& [a, b] : edges) {
      topo.add_edge(static_cast<std::uint32_t>(node_index(a)), static_cast<std::uint32_t>(node_index(b)));
    }
    return topo;
  }

  // Everything needed to regenerate one node's trace. The component index in
  // this scenario serves as the seed stream tag, so nodes sensing the same
  // component see the same sample path.
  TraceRecipe recipe_for(std::size_t node_idx) const {
    if (node_idx >= nodes.size()) throw std::invalid_argument("recipe_for: node index out of range");
    TraceRecipe recipe;
    recipe.delta = delta;
    recipe.horizon = horizon;
    recipe.channel_id = nodes[node_idx].channel;
    for (std::size_t c = 0; c < components.size(); ++c) {
      for (const auto& sensor : components[c].sensors) {
        if (node_index(sensor) == node_idx) {
          recipe.components.emplace_back(components[c].proc, static_cast<std::uint64_t>(c));
          break;
        }
      }
    }
    return recipe;
  }

  void validate() const {
    if (nodes.empty()) throw std::invalid_argument("scenario: no nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (std::size_t j = i + 1; j < nodes.size(); ++j) {
        if (nodes[i].id == nodes[j].id) throw std::invalid_argument("scenario: duplicate node id " + nodes[i].id);
      }
    }
    for (const auto& [a, b] : edges) {
      node_index(a);
      node_index(b);
      if (a == b) throw std::invalid_argument("scenario: self edge on " + a);
    }
    for (const auto& comp : components) {
      comp.proc.validate();
      if (comp.sensors.empty()) throw std::invalid_argument("scenario: component " + comp.name + " has no sensors");
      const std::uint32_t chan = nodes[node_index(comp.sensors.front())].channel;
      for (const auto& sensor : comp.sensors) {
        if (nodes[node_index(sensor)].channel != chan) {
          throw std::invalid_argument("scenario: component " + comp.name + " spans multiple channels");
        }
      }
    }
    arch.validate();
    if (delta <= 0.0 || horizon <= 0.0) throw std::invalid_argument("scenario: delta and horizon must be positive");
    if (window_len <= 0) throw std::invalid_argument("scenario: non-positive window length");
    if (slot_count(horizon, delta) <= static_cast<std::size_t>(window_len) + 1) {
      throw std::invalid_argument("scenario: training horizon too short for the window length");
    }
    if (slot_count(horizon / 10.0, delta) <= static_cast<std::size_t>(window_len) + 1) {
      throw std::invalid_argument("scenario: validation horizon too short for the window length");
    }
    if (epochs < 0) throw std::invalid_argument("scenario: negative epochs");
    if (learning_rate <= 0.0) throw std::invalid_argument("scenario: non-positive learning rate");
    if (noise_std < 0.0) throw std::invalid_argument("scenario: negative noise std");
    if (seeds.traffic == seeds.validation) throw std::invalid_argument("scenario: traffic and validation seeds must differ");
    if (!primary.empty()) node_index(primary);
    for (const auto& [model_node, trace_node] : cross_eval) {
      node_index(model_node);
      node_index(trace_node);
    }
  }
};

// ---------------------------------------------------------------------------
// Builtin scenarios and profiles
// ---------------------------------------------------------------------------

enum class Profile { desk, paper_full };
enum class ArchChoice { t_s, t_b };

inline Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper-full") return Profile::paper_full;
  throw std::invalid_argument("unknown profile: " + s);
}

inline ArchChoice parse_arch(const std::string& s) {
  if (s == "t_s") return ArchChoice::t_s;
  if (s == "t_b") return ArchChoice::t_b;
  throw std::invalid_argument("unknown arch: " + s);
}

inline Architecture make_arch(ArchChoice choice) {
  return choice == ArchChoice::t_s ? Architecture{2, 5, 5, 2} : Architecture{2, 60, 120, 2};
}

namespace detail {

inline void apply_training_defaults(Scenario& sc, ArchChoice arch, Profile profile) {
  sc.arch = make_arch(arch);
  sc.horizon = profile == Profile::desk ? 1.0 : 5.0;
  if (arch == ArchChoice::t_s) {
    sc.learning_rate = 0.05;
    sc.epochs = profile == Profile::desk ? 40 : 400;
  } else {
    sc.learning_rate = 0.01;
    sc.epochs = profile == Profile::desk ? 10 : 40;
  }
}

inline TrafficComponentSpec component(std::string name, std::vector<double> rates,
                                      std::vector<std::string> sensors) {
  TrafficComponentSpec comp;
  comp.name = std::move(name);
  comp.proc.rates = std::move(rates);
  comp.proc.source_id = comp.name;
  comp.sensors = std::move(sensors);
  return comp;
}

}  // namespace detail

// The star topologies follow the published arrival-rate table: one primary
// node sensing the common traffic, each neighbor sensing the common traffic
// plus a private two-rate mix. The hidden-terminal line puts heavy traffic
// next to n3 that n1 cannot sense but n2 can.
inline std::vector<Scenario> builtin_scenarios(ArchChoice arch = ArchChoice::t_s,
                                               Profile profile = Profile::desk) {
  std::vector<Scenario> out;

  {
    Scenario sc;
    sc.name = "three-neighbor";
    sc.nodes = {{"primary"}, {"n1"}, {"n2"}, {"n3"}};
    sc.edges = {{"primary", "n1"}, {"primary", "n2"}, {"primary", "n3"}};
    sc.primary = "primary";
    sc.components = {
        detail::component("common", {5.0}, {"primary", "n1", "n2", "n3"}),
        detail::component("n1-local", {9.5, 12.0}, {"n1"}),
        detail::component("n2-local", {8.6, 10.5}, {"n2"}),
        detail::component("n3-local", {16.0, 6.0}, {"n3"}),
    };
    detail::apply_training_defaults(sc, arch, profile);
    out.push_back(std::move(sc));
  }

  {
    Scenario sc;
    sc.name = "five-neighbor";
    sc.nodes = {{"primary"}, {"n1"}, {"n2"}, {"n3"}, {"n4"}, {"n5"}};
    sc.edges = {{"primary", "n1"}, {"primary", "n2"}, {"primary", "n3"},
                {"primary", "n4"}, {"primary", "n5"}};
    sc.primary = "primary";
    sc.components = {
        detail::component("common", {5.0}, {"primary", "n1", "n2", "n3", "n4", "n5"}),
        detail::component("n1-local", {9.5, 12.0}, {"n1"}),
        detail::component("n2-local", {8.6, 10.5}, {"n2"}),
        detail::component("n3-local", {16.0, 6.0}, {"n3"}),
        detail::component("n4-local", {15.8, 21.0}, {"n4"}),
        detail::component("n5-local", {2.8, 13.0}, {"n5"}),
    };
    detail::apply_training_defaults(sc, arch, profile);
    out.push_back(std::move(sc));
  }

  {
    Scenario sc;
    sc.name = "hidden-terminal";
    sc.nodes = {{"n1"}, {"n2"}, {"n3"}};
    sc.edges = {{"n1", "n2"}, {"n2", "n3"}};
    sc.primary = "n1";
    sc.components = {
        detail::component("west", {5.0}, {"n1", "n2"}),
        detail::component("east", {20.0}, {"n2", "n3"}),
    };
    sc.cross_eval = {{"n1", "n2"}};
    detail::apply_training_defaults(sc, arch, profile);
    out.push_back(std::move(sc));
  }

  return out;
}

inline Scenario find_builtin(const std::string& name, ArchChoice arch = ArchChoice::t_s,
                             Profile profile = Profile::desk) {
  for (auto& sc : builtin_scenarios(arch, profile)) {
    if (sc.name == name) return sc;
  }
  throw std::invalid_argument("unknown builtin scenario: " + name);
}

// ---------------------------------------------------------------------------
// Scenario file format: one directive per line, '#' starts a comment.
//
//   scenario <name>
//   delta <seconds> | horizon <seconds> | window <slots> | epochs <n>
//   lr <x> | clip <x> | noise-std <x> | registry-capacity <n>
//   arch <P> <Q>
//   seed traffic|init|shuffle|validation <n>
//   node <id> [channel <c>]
//   edge <a> <b>
//   traffic <name> rates <r...> sensors <id...> [packets <min> <max>] [phy <bps>]
//   primary <id>
//   cross-eval <model-node> <trace-node>
// ---------------------------------------------------------------------------

namespace detail {
struct parse_fail : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
}  // namespace detail

inline Scenario parse_scenario(std::istream& in) {
  Scenario sc;
  sc.name = "custom";
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const auto fail = [&](const std::string& what) {
      throw detail::parse_fail("scenario file line " + std::to_string(line_no) + ": " + what);
    };
    const auto need = [&](std::size_t n) {
      if (tok.size() < n + 1) fail("missing arguments for '" + tok[0] + "'");
    };

    try {
      if (tok[0] == "scenario") {
        need(1);
        sc.name = tok[1];
      } else if (tok[0] == "delta") {
        need(1);
        sc.delta = std::stod(tok[1]);
      } else if (tok[0] == "horizon") {
        need(1);
        sc.horizon = std::stod(tok[1]);
      } else if (tok[0] == "window") {
        need(1);
        sc.window_len = std::stoi(tok[1]);
      } else if (tok[0] == "epochs") {
        need(1);
        sc.epochs = std::stoi(tok[1]);
      } else if (tok[0] == "lr") {
        need(1);
        sc.learning_rate = std::stod(tok[1]);
      } else if (tok[0] == "clip") {
        need(1);
        sc.clip_norm = std::stod(tok[1]);
      } else if (tok[0] == "noise-std") {
        need(1);
        sc.noise_std = std::stod(tok[1]);
      } else if (tok[0] == "registry-capacity") {
        need(1);
        sc.registry_capacity = static_cast<std::size_t>(std::stoul(tok[1]));
      } else if (tok[0] == "arch") {
        need(2);
        sc.arch.p_units = std::stoi(tok[1]);
        sc.arch.q_units = std::stoi(tok[2]);
      } else if (tok[0] == "seed") {
        need(2);
        const std::uint64_t v = std::stoull(tok[2]);
        if (tok[1] == "traffic") sc.seeds.traffic = v;
        else if (tok[1] == "init") sc.seeds.init = v;
        else if (tok[1] == "shuffle") sc.seeds.shuffle = v;
        else if (tok[1] == "validation") sc.seeds.validation = v;
        else fail("unknown seed kind '" + tok[1] + "'");
      } else if (tok[0] == "node") {
        need(1);
        NodeSpec node;
        node.id = tok[1];
        if (tok.size() >= 4 && tok[2] == "channel") node.channel = static_cast<std::uint32_t>(std::stoul(tok[3]));
        sc.nodes.push_back(std::move(node));
      } else if (tok[0] == "edge") {
        need(2);
        sc.edges.emplace_back(tok[1], tok[2]);
      } else if (tok[0] == "primary") {
        need(1);
        sc.primary = tok[1];
      } else if (tok[0] == "cross-eval") {
        need(2);
        sc.cross_eval.emplace_back(tok[1], tok[2]);
      } else if (tok[0] == "traffic") {
        need(1);
        TrafficComponentSpec comp;
        comp.name = tok[1];
        comp.proc.source_id = comp.name;
        std::string mode;
        std::vector<std::string> packet_args;
        for (std::size_t i = 2; i < tok.size(); ++i) {
          if (tok[i] == "rates" || tok[i] == "sensors" || tok[i] == "packets" || tok[i] == "phy") {
            mode = tok[i];
            continue;
          }
          if (mode == "rates") comp.proc.rates.push_back(std::stod(tok[i]));
          else if (mode == "sensors") comp.sensors.push_back(tok[i]);
          else if (mode == "packets") packet_args.push_back(tok[i]);
          else if (mode == "phy") comp.proc.phy_rate = std::stod(tok[i]);
          else fail("unexpected token '" + tok[i] + "' in traffic line");
        }
        if (packet_args.size() == 2) {
          comp.proc.pkt_len_min = std::stoi(packet_args[0]);
          comp.proc.pkt_len_max = std::stoi(packet_args[1]);
        } else if (!packet_args.empty()) {
          fail("'packets' expects <min> <max>");
        }
        sc.components.push_back(std::move(comp));
      } else {
        fail("unknown directive '" + tok[0] + "'");
      }
    } catch (const detail::parse_fail&) {
      throw;
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open scenario file: " + path);
  return parse_scenario(in);
}

}  // namespace fedchan
