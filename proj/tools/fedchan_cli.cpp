// fedchan command line: generate channel traces, run federated prediction
// scenarios, inspect model files.
//
// Exit codes: 0 success, 1 report invariant failure, 64 usage error,
// 74 I/O or malformed-file error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedchan/fedchan.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariantFailure = 1;
constexpr int kExitUsage = 64;
constexpr int kExitIo = 74;

constexpr double kEtaSlack = 0.005;       // tolerated eta2 excess over eta1
constexpr double kBaselineSlack = 0.01;   // tolerated shortfall vs persistence

struct Options {
  std::string scenario = "three-neighbor";
  std::string config_path;
  std::string arch = "t_s";
  std::string profile = "desk";
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_std;
  std::string model_path;  // inspect-model
};

fedchan::Scenario resolve_scenario(const Options& opt) {
  fedchan::Scenario sc;
  if (!opt.config_path.empty()) {
    sc = fedchan::load_scenario(opt.config_path);
  } else {
    sc = fedchan::find_builtin(opt.scenario, fedchan::parse_arch(opt.arch),
                               fedchan::parse_profile(opt.profile));
  }
  if (opt.seed) {
    sc.seeds.traffic = fedchan::mix_seed(*opt.seed, 1);
    sc.seeds.init = fedchan::mix_seed(*opt.seed, 2);
    sc.seeds.shuffle = fedchan::mix_seed(*opt.seed, 3);
    sc.seeds.validation = fedchan::mix_seed(*opt.seed, 4);
  }
  if (opt.noise_std) sc.noise_std = *opt.noise_std;
  sc.validate();
  return sc;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw fedchan::io_error("cannot create output directory: " + dir);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fedchan::io_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw fedchan::io_error("write failed: " + path);
}

nlohmann::ordered_json seeds_json(const fedchan::ScenarioSeeds& seeds) {
  return {{"traffic", seeds.traffic},
          {"init", seeds.init},
          {"shuffle", seeds.shuffle},
          {"validation", seeds.validation}};
}

int cmd_generate(const Options& opt) {
  const fedchan::Scenario sc = resolve_scenario(opt);
  ensure_out_dir(opt.out_dir);

  nlohmann::ordered_json manifest;
  manifest["scenario"] = sc.name;
  manifest["delta"] = sc.delta;
  manifest["horizon"] = sc.horizon;
  manifest["seeds"] = seeds_json(sc.seeds);
  manifest["files"] = nlohmann::ordered_json::array();

  for (std::size_t v = 0; v < sc.nodes.size(); ++v) {
    const fedchan::ChannelTrace trace = fedchan::make_trace(sc.recipe_for(v), sc.seeds.traffic);
    const std::string file_name = "trace_" + sc.nodes[v].id + ".bin";
    fedchan::write_trace((fs::path(opt.out_dir) / file_name).string(), trace);
    double busy = 0.0;
    for (auto s : trace.slots) busy += s;
    manifest["files"].push_back({{"node", sc.nodes[v].id},
                                 {"channel", sc.nodes[v].channel},
                                 {"path", file_name},
                                 {"slots", trace.slots.size()},
                                 {"busy_fraction", busy / static_cast<double>(trace.slots.size())}});
    std::cout << "wrote " << file_name << " (" << trace.slots.size() << " slots)\n";
  }
  write_text((fs::path(opt.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << "wrote manifest.json\n";
  return kExitOk;
}

int cmd_run(const Options& opt) {
  const fedchan::Scenario sc = resolve_scenario(opt);
  ensure_out_dir(opt.out_dir);

  const fedchan::RunResult rr = fedchan::run(sc);
  write_text((fs::path(opt.out_dir) / "report.json").string(),
             fedchan::report_to_json(rr.report).dump(2) + "\n");
  write_text((fs::path(opt.out_dir) / "metrics.csv").string(), fedchan::metrics_csv(rr.report));
  for (std::size_t v = 0; v < sc.nodes.size(); ++v) {
    const auto local = fedchan::make_message(static_cast<std::uint32_t>(v), sc.nodes[v].channel,
                                             rr.local_models[v]);
    fedchan::write_model((fs::path(opt.out_dir) / ("model_local_" + sc.nodes[v].id + ".bin")).string(), local);
    const auto global = fedchan::make_message(static_cast<std::uint32_t>(v), sc.nodes[v].channel,
                                              rr.global_models[v].as_params());
    fedchan::write_model((fs::path(opt.out_dir) / ("model_global_" + sc.nodes[v].id + ".bin")).string(), global);
  }

  bool ok = true;
  for (const auto& node : rr.report.nodes) {
    if (node.diverged) {
      std::cout << "node " << node.id << ": training diverged at epoch " << node.diverged_epoch << "\n";
      ok = false;
      continue;
    }
    std::cout << "node " << node.id << ": local_val_acc=" << node.local_val_acc
              << " global_val_acc=" << node.global_val_acc
              << " persistence=" << node.persistence_acc << "\n";
    if (node.local_val_acc < node.persistence_acc - kBaselineSlack) {
      std::cout << "  INVARIANT FAILED: local model below persistence baseline\n";
      ok = false;
    }
  }
  std::cout << "eta1=" << rr.report.eta1 << " eta2=" << rr.report.eta2 << "\n";
  if (rr.report.eta2 > rr.report.eta1 + kEtaSlack) {
    std::cout << "INVARIANT FAILED: eta2 > eta1 + " << kEtaSlack << "\n";
    ok = false;
  }
  std::cout << (ok ? "all report invariants hold\n" : "report invariants violated\n");
  return ok ? kExitOk : kExitInvariantFailure;
}

int cmd_inspect_model(const Options& opt) {
  const fedchan::ModelMessage msg = fedchan::read_model(opt.model_path);
  double mn = INFINITY, mx = -INFINITY, sum = 0.0, sum_sq = 0.0;
  for (float v : msg.payload) {
    mn = std::min(mn, static_cast<double>(v));
    mx = std::max(mx, static_cast<double>(v));
    sum += v;
    sum_sq += static_cast<double>(v) * v;
  }
  const double mean = sum / static_cast<double>(msg.payload.size());
  const double var = sum_sq / static_cast<double>(msg.payload.size()) - mean * mean;
  std::cout << "node: " << msg.node_id << "  channel: " << msg.channel_id << "\n"
            << "arch: m=" << msg.m << " P=" << msg.p << " Q=" << msg.q << "\n"
            << "params: " << msg.payload.size() << ", payload: " << msg.payload.size() * 4 << " bytes\n"
            << "values: min=" << mn << " max=" << mx << " mean=" << mean
            << " std=" << std::sqrt(std::max(0.0, var)) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer-to-peer federated wireless channel availability prediction"};
  app.require_subcommand(1);

  Options opt;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario, "Builtin scenario name");
    cmd->add_option("--config", opt.config_path, "Scenario file (overrides --scenario/--arch/--profile)");
    cmd->add_option("--arch", opt.arch, "Model size: t_s or t_b")->check(CLI::IsMember({"t_s", "t_b"}));
    cmd->add_option("--profile", opt.profile, "desk or paper-full")->check(CLI::IsMember({"desk", "paper-full"}));
    cmd->add_option("--seed", opt.seed, "Master seed override");
    cmd->add_option("--out", opt.out_dir, "Output directory");
  };

  CLI::App* generate = app.add_subcommand("generate", "Generate per-node channel traces");
  add_common(generate);

  CLI::App* run_cmd = app.add_subcommand("run", "Run a full scenario and write the report");
  add_common(run_cmd);
  run_cmd->add_option("--noise-std", opt.noise_std, "Gaussian parameter corruption on every link");

  CLI::App* inspect = app.add_subcommand("inspect-model", "Print a model file summary");
  inspect->add_option("path", opt.model_path, "Model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(opt);
    if (run_cmd->parsed()) return cmd_run(opt);
    if (inspect->parsed()) return cmd_inspect_model(opt);
    return kExitUsage;
  } catch (const fedchan::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fedchan::codec_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
