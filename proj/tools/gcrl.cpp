// gcrl: command-line front end for training runs, the difficulty grid,
// multi-arm comparisons, agent evaluation and competent adversary pools.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime abort.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcrl/config.hpp"
#include "gcrl/harness.hpp"
#include "gcrl/log.hpp"
#include "gcrl/trainer.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct CommonFlags {
  std::vector<std::string> configs;
  std::string preset;
  std::string seeds;
  std::string out;
  std::vector<std::string> sets;
  int jobs = 1;
  std::string manifest;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool many_configs) {
  if (many_configs)
    cmd->add_option("--config", f.configs, "Arm config file (repeat once per arm)");
  else
    cmd->add_option("--config", f.configs, "Config file")->expected(0, 1);
  cmd->add_option("--preset", f.preset, "easy | medium | hard");
  cmd->add_option("--seed", f.seeds, "Seed or comma-separated seed list");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--set", f.sets, "section.key=value override (repeatable)");
  cmd->add_option("--jobs", f.jobs, "Worker threads for seed runs")->check(CLI::PositiveNumber);
  cmd->add_flag("-v,--verbose", f.verbose, "Progress logging");
}

void apply_overrides(gcrl::ExperimentConfig& cfg, const CommonFlags& f) {
  if (!f.preset.empty()) cfg.set("experiment.preset", f.preset);
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw gcrl::ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!f.seeds.empty()) cfg.set("run.seeds", f.seeds);
  cfg.validate();
}

gcrl::ExperimentConfig build_config(const std::optional<std::string>& path, const CommonFlags& f) {
  gcrl::ExperimentConfig cfg = path ? gcrl::load_config(*path) : gcrl::ExperimentConfig{};
  apply_overrides(cfg, f);
  return cfg;
}

std::filesystem::path output_dir(const gcrl::ExperimentConfig& cfg, const CommonFlags& f) {
  std::optional<std::filesystem::path> override_dir;
  if (!f.out.empty()) override_dir = f.out;
  return gcrl::resolve_output_dir(cfg, override_dir);
}

gcrl::HarnessOptions harness_options(const CommonFlags& f) {
  gcrl::HarnessOptions o;
  o.jobs = f.jobs;
  return o;
}

void print_files(const std::vector<std::filesystem::path>& files, const std::filesystem::path& manifest) {
  for (const auto& p : files) std::cout << p.string() << '\n';
  if (!manifest.empty()) std::cout << manifest.string() << '\n';
}

int cmd_train(const CommonFlags& f) {
  std::vector<gcrl::ExperimentConfig> configs;
  if (!f.manifest.empty()) {
    auto m = gcrl::load_manifest(f.manifest);
    if (m.kind != "train") throw gcrl::ConfigError("train: manifest is a " + m.kind + " manifest");
    configs = std::move(m.configs);
    apply_overrides(configs.front(), f);
  } else {
    configs.push_back(build_config(f.configs.empty() ? std::nullopt : std::optional(f.configs.front()), f));
  }
  const auto& cfg = configs.front();
  const auto result = gcrl::run_experiment(cfg, output_dir(cfg, f), harness_options(f));
  if (!result.success.empty()) {
    const auto& last = result.success.back();
    std::cout << cfg.name << ": step " << last.stamp << " median " << last.median << " [" << last.lq
              << ", " << last.uq << "]\n";
  }
  print_files(result.files, result.manifest);
  for (const auto& run : result.runs)
    if (!run.ok) return kRuntimeError;
  return 0;
}

int cmd_grid(const CommonFlags& f) {
  gcrl::ExperimentConfig cfg;
  if (!f.manifest.empty()) {
    auto m = gcrl::load_manifest(f.manifest);
    if (m.kind != "grid") throw gcrl::ConfigError("grid: manifest is a " + m.kind + " manifest");
    cfg = std::move(m.configs.front());
    apply_overrides(cfg, f);
  } else {
    cfg = build_config(f.configs.empty() ? std::nullopt : std::optional(f.configs.front()), f);
  }
  const auto result = gcrl::difficulty_grid(cfg, output_dir(cfg, f), harness_options(f));
  for (const auto& c : result.cells)
    std::cout << "n=" << c.n << " r=" << c.r << " success " << c.mean_success << " variance "
              << c.success_variance << '\n';
  print_files(result.files, result.manifest);
  return 0;
}

int cmd_compare(const CommonFlags& f, std::string name, double threshold) {
  std::vector<gcrl::ExperimentConfig> arms;
  if (!f.manifest.empty()) {
    auto m = gcrl::load_manifest(f.manifest);
    if (m.kind != "compare") throw gcrl::ConfigError("compare: manifest is a " + m.kind + " manifest");
    arms = std::move(m.configs);
    if (name.empty()) name = m.name;
    for (auto& arm : arms) apply_overrides(arm, f);
  } else {
    if (f.configs.empty()) throw gcrl::ConfigError("compare: give one --config per arm");
    for (const auto& path : f.configs) arms.push_back(build_config(path, f));
  }
  if (name.empty()) name = "compare";
  const auto out = output_dir(arms.front(), f);
  const auto result = gcrl::compare_arms(arms, name, out, harness_options(f), threshold);
  for (const auto& s : result.summary) {
    std::cout << s.arm << ": final median " << s.final_median << " IQR [" << s.final_lq << ", "
              << s.final_uq << "] reaches " << threshold << " at ";
    if (s.steps_to_threshold) std::cout << *s.steps_to_threshold;
    else std::cout << "never";
    std::cout << '\n';
  }
  print_files(result.files, result.manifest);
  return 0;
}

gcrl::AdversaryPolicy eval_opponent(const std::string& kind, const std::string& pool) {
  if (kind == "none") return gcrl::AdversaryPolicy::none();
  if (kind == "random") return gcrl::AdversaryPolicy::random();
  if (kind == "competent") return gcrl::AdversaryPolicy::competent_greedy();
  if (kind == "pool") {
    if (pool.empty()) throw gcrl::ConfigError("eval: --adversary pool needs --pool");
    return gcrl::AdversaryPolicy::external(gcrl::load_pool(pool));
  }
  throw gcrl::ConfigError("eval: unknown adversary '" + kind + "'");
}

int cmd_eval(const CommonFlags& f, const std::string& agent_path, const std::string& adversary,
             const std::string& pool, int episodes) {
  auto cfg = build_config(f.configs.empty() ? std::nullopt : std::optional(f.configs.front()), f);
  const auto opponent = eval_opponent(adversary, pool);
  if (opponent.kind != gcrl::AdversaryKind::none && !cfg.env.has_adversary())
    cfg.env.adversary_mode = gcrl::AdversaryMode::random;
  if (opponent.kind == gcrl::AdversaryKind::none) cfg.env.adversary_mode = gcrl::AdversaryMode::none;
  const auto agent = gcrl::load_mlp(agent_path);
  if (static_cast<std::size_t>(agent.input_width()) != static_cast<std::size_t>(gcrl::encoded_width(cfg.env)))
    throw gcrl::ConfigError("eval: agent input width " + std::to_string(agent.input_width()) +
                            " does not match the environment encoding");
  const int n = episodes > 0 ? episodes : cfg.eval_episodes;
  const auto res = gcrl::evaluate(agent, cfg.env, opponent, n, cfg.seeds.front());
  std::cout << "success_rate," << res.success_rate << '\n' << "mean_successful_length,";
  if (res.mean_successful_length) std::cout << *res.mean_successful_length;
  std::cout << '\n' << "episodes," << res.episodes << '\n';
  return 0;
}

int cmd_pool(const CommonFlags& f, int count, double threshold, const std::string& pool_out) {
  auto cfg = build_config(f.configs.empty() ? std::nullopt : std::optional(f.configs.front()), f);
  if (!cfg.env.has_adversary()) cfg.env.adversary_mode = gcrl::AdversaryMode::policy;
  auto igoal = cfg.igoal_config(cfg.seeds.front());
  igoal.snapshot_interval = cfg.snapshot_interval;
  igoal.track_td_error = false;
  const auto pool = gcrl::train_competent_adversaries(count, cfg.env, cfg.agent, igoal,
                                                      cfg.relabel_config(), threshold,
                                                      cfg.eval_episodes);
  for (std::size_t c = 0; c < pool.candidate_rates.size(); ++c)
    std::cout << "candidate " << c << " seed " << pool.candidate_seeds[c] << " success "
              << pool.candidate_rates[c] << '\n';
  std::filesystem::path path = pool_out.empty() ? output_dir(cfg, f) / (cfg.name + "_pool.bin")
                                                : std::filesystem::path(pool_out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  gcrl::save_pool(path, pool.members);
  std::cout << path.string() << '\n';
  if (pool.shortfall > 0) {
    std::cerr << "adversary-pool: " << pool.shortfall << " of " << count
              << " candidates missed the competence threshold\n";
    return kRuntimeError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned RL on DigitFlip: HER/EHER/CHER relabelling and IGOAL training"};
  app.require_subcommand(1);

  CommonFlags train_f, grid_f, compare_f, eval_f, pool_f;
  auto* train = app.add_subcommand("train", "Train every seed of one arm and aggregate");
  add_common(train, train_f, false);
  train->add_option("--manifest", train_f.manifest, "Rerun the config recorded in a manifest");

  auto* grid = app.add_subcommand("grid", "Difficulty grid over (n, r)");
  add_common(grid, grid_f, false);
  grid->add_option("--manifest", grid_f.manifest, "Rerun the config recorded in a manifest");

  std::string compare_name;
  double compare_threshold = 0.9;
  auto* compare = app.add_subcommand("compare", "Run several arms and summarise them side by side");
  add_common(compare, compare_f, true);
  compare->add_option("--manifest", compare_f.manifest, "Rerun the arms recorded in a manifest");
  compare->add_option("--name", compare_name, "Prefix of the combined output files");
  compare->add_option("--threshold", compare_threshold, "Success level for steps-to-threshold");

  std::string agent_path, adversary = "none", pool_path;
  int episodes = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved agent snapshot");
  add_common(eval, eval_f, false);
  eval->add_option("--agent", agent_path, "Agent snapshot file")->required();
  eval->add_option("--adversary", adversary, "none | random | competent | pool");
  eval->add_option("--pool", pool_path, "Adversary pool file");
  eval->add_option("--episodes", episodes, "Episodes (default run.eval_episodes)");

  int count = 6;
  double threshold = 0.98;
  std::string pool_out;
  auto* pool = app.add_subcommand("adversary-pool", "Train competent IGOAL adversaries into a pool file");
  add_common(pool, pool_f, false);
  pool->add_option("--count", count, "Pool size")->check(CLI::PositiveNumber);
  pool->add_option("--threshold", threshold, "Competence threshold vs a random adversary");
  pool->add_option("--pool-out", pool_out, "Pool file path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    for (const CommonFlags* f : {&train_f, &grid_f, &compare_f, &eval_f, &pool_f})
      if (f->verbose) gcrl::set_log_level(gcrl::LogLevel::info);
    if (*train) return cmd_train(train_f);
    if (*grid) return cmd_grid(grid_f);
    if (*compare) return cmd_compare(compare_f, compare_name, compare_threshold);
    if (*eval) return cmd_eval(eval_f, agent_path, adversary, pool_path, episodes);
    if (*pool) return cmd_pool(pool_f, count, threshold, pool_out);
  } catch (const gcrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
