#include "gcrl/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include "json.hpp"
#include <sstream>
#include <thread>

#include "gcrl/log.hpp"

namespace gcrl {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

AdversaryPolicy resolve_eval_adversary(const ExperimentConfig& cfg) {
  switch (cfg.eval_adversary) {
    case EvalAdversary::none: return AdversaryPolicy::none();
    case EvalAdversary::random: return AdversaryPolicy::random();
    case EvalAdversary::competent: return AdversaryPolicy::competent_greedy();
    case EvalAdversary::pool: return AdversaryPolicy::external(load_pool(cfg.pool_file));
    case EvalAdversary::automatic: break;
  }
  if (!cfg.env.has_adversary()) return AdversaryPolicy::none();
  if (cfg.variant != IgoalVariant::none) return AdversaryPolicy::random();
  switch (cfg.env.adversary_mode) {
    case AdversaryMode::competent: return AdversaryPolicy::competent_greedy();
    default: return AdversaryPolicy::random();
  }
}

SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  try {
    IgoalConfig igoal = cfg.igoal_config(seed);
    igoal.track_td_error = cfg.track_td_error;
    const RelabelConfig relabel = cfg.relabel_config();
    const AdversaryPolicy eval = resolve_eval_adversary(cfg);
    if (cfg.variant == IgoalVariant::parallel) {
      auto result = parallel_igoal_train(cfg.env, cfg.agent, igoal, relabel, false, eval);
      run.metrics = std::move(result.learner.metrics);
      run.agent = std::move(result.learner.agent);
      run.control_metrics = std::move(result.control.metrics);
      run.control_agent = std::move(result.control.agent);
    } else {
      TrainingOpponent opponent = TrainingOpponent::none;
      if (cfg.variant == IgoalVariant::igoal) opponent = TrainingOpponent::igoal;
      else if (cfg.env.adversary_mode == AdversaryMode::random) opponent = TrainingOpponent::random;
      else if (cfg.env.adversary_mode == AdversaryMode::competent)
        opponent = TrainingOpponent::competent_greedy;
      auto result = train(cfg.env, cfg.agent, relabel, igoal, opponent, eval);
      run.metrics = std::move(result.metrics);
      run.agent = std::move(result.agent);
    }
    run.ok = true;
  } catch (const std::exception& e) {
    run.error = e.what();
    log(LogLevel::error, "seed " + std::to_string(seed) + " aborted: " + run.error);
  }
  return run;
}

std::vector<MetricRow> aggregate_success(const std::vector<const TrainingMetrics*>& runs) {
  std::vector<MetricRow> rows;
  if (runs.empty()) return rows;
  std::size_t count = runs.front()->evaluations.size();
  for (const auto* r : runs) count = std::min(count, r->evaluations.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> values;
    for (const auto* r : runs) values.push_back(r->evaluations[i].success_rate);
    rows.push_back(summarize(runs.front()->evaluations[i].step, values));
  }
  return rows;
}

std::vector<MetricRow> aggregate_td_error(const std::vector<const TrainingMetrics*>& runs,
                                          std::size_t window) {
  std::vector<std::vector<double>> smoothed;
  for (const auto* r : runs) {
    std::vector<double> series;
    for (const auto& v : r->episode_td_error)
      if (v) series.push_back(*v);
    smoothed.push_back(rolling_average(series, window));
  }
  std::vector<MetricRow> rows;
  if (smoothed.empty()) return rows;
  std::size_t count = smoothed.front().size();
  for (const auto& s : smoothed) count = std::min(count, s.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> values;
    for (const auto& s : smoothed) values.push_back(s[i]);
    rows.push_back(summarize(static_cast<long>(i), values));
  }
  return rows;
}

void write_metric_csv(const std::filesystem::path& path, const char* header,
                      const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  out << header << '\n';
  for (const auto& row : rows)
    out << row.stamp << ',' << fmt(row.median) << ',' << fmt(row.lq) << ',' << fmt(row.uq) << '\n';
}

std::vector<MetricRow> read_metric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kSuccessHeader && line != kTdErrorHeader)
    throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    rows.push_back({std::stol(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
  }
  return rows;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg,
                                         const std::optional<std::filesystem::path>& override_dir) {
  if (override_dir) return *override_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output_dir;
}

std::string content_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

namespace {

void write_runs_csv(const std::filesystem::path& path, const std::vector<SeedRun>& runs) {
  auto out = open_out(path);
  out << "seed,step,success_rate,mean_successful_length\n";
  for (const auto& run : runs) {
    if (!run.ok) continue;
    for (const auto& e : run.metrics.evaluations) {
      out << run.seed << ',' << e.step << ',' << fmt(e.success_rate) << ',';
      if (e.mean_successful_length) out << fmt(*e.mean_successful_length);
      out << '\n';
    }
  }
}

nlohmann::json file_entries(const std::vector<std::filesystem::path>& files) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    out.push_back({{"path", f.filename().string()}, {"hash", content_hash(buf.str())}});
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::string& kind,
                    const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& files,
                    const std::string& started_at, std::chrono::steady_clock::time_point started,
                    nlohmann::json manifest) {
  const std::string text = cfg.to_text();
  manifest["kind"] = kind;
  manifest["name"] = cfg.name;
  manifest["config"] = text;
  manifest["config_hash"] = content_hash(text);
  manifest["seeds"] = cfg.seeds;
  manifest["files"] = file_entries(files);
  manifest["started_at"] = started_at;
  manifest["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  open_out(path) << manifest.dump(2) << '\n';
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const HarnessOptions& options) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_timestamp();
  // Resolve the evaluation opponent up front so a bad pool file is a config
  // error rather than a failure in every seed.
  try {
    resolve_eval_adversary(cfg);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }

  ExperimentResult result;
  result.runs.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), options.jobs,
               [&](std::size_t i) { result.runs[i] = run_seed(cfg, cfg.seeds[i]); });

  std::vector<const TrainingMetrics*> completed;
  std::vector<const TrainingMetrics*> control;
  for (const auto& run : result.runs) {
    if (!run.ok) continue;
    completed.push_back(&run.metrics);
    if (run.control_metrics) control.push_back(&*run.control_metrics);
  }
  if (completed.size() < result.runs.size())
    log_warning(cfg.name + ": aggregating over " + std::to_string(completed.size()) + " of " +
                std::to_string(result.runs.size()) + " seeds");
  result.success = aggregate_success(completed);
  result.td_error = aggregate_td_error(completed, cfg.td_window);
  result.control_success = aggregate_success(control);

  if (options.write_files) {
    std::filesystem::create_directories(out_dir);
    auto emit = [&](const std::string& suffix) {
      result.files.push_back(out_dir / (cfg.name + suffix));
      return result.files.back();
    };
    write_metric_csv(emit("_succ.csv"), kSuccessHeader, result.success);
    write_metric_csv(emit("_tderr.csv"), kTdErrorHeader, result.td_error);
    write_runs_csv(emit("_runs.csv"), result.runs);
    if (cfg.variant == IgoalVariant::parallel)
      write_metric_csv(emit("_control_succ.csv"), kSuccessHeader, result.control_success);
    if (cfg.save_agents) {
      for (const auto& run : result.runs)
        if (run.ok && run.agent)
          save_mlp(emit("_seed" + std::to_string(run.seed) + ".snap"), *run.agent);
    }

    nlohmann::json completed_seeds = nlohmann::json::array();
    nlohmann::json failed = nlohmann::json::array();
    for (const auto& run : result.runs) {
      if (run.ok) completed_seeds.push_back(run.seed);
      else failed.push_back({{"seed", run.seed}, {"error", run.error}});
    }
    nlohmann::json manifest;
    manifest["completed_seeds"] = completed_seeds;
    manifest["failed_seeds"] = failed;
    result.manifest = out_dir / (cfg.name + "_manifest.json");
    write_manifest(result.manifest, "train", cfg, result.files, started_at, started, manifest);
  }
  if (completed.empty()) throw std::runtime_error(cfg.name + ": every seed aborted");
  return result;
}

GridResult difficulty_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           const HarnessOptions& options) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_timestamp();
  const auto& grid = cfg.grid;
  GridResult result;
  for (int n : grid.n_values)
    for (int r : grid.r_values) {
      GridCell cell;
      cell.n = n;
      cell.r = r;
      cell.success_rates.assign(grid.models, 0.0);
      result.cells.push_back(std::move(cell));
    }

  struct Task {
    std::size_t cell;
    int model;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < result.cells.size(); ++c)
    for (int m = 0; m < grid.models; ++m) tasks.push_back({c, m});
  std::vector<std::optional<double>> lengths(tasks.size());
  const std::uint64_t base_seed = cfg.seeds.front();
  RelabelConfig relabel = cfg.relabel_config();
  relabel.strategy = RelabelStrategy::her;

  parallel_for(tasks.size(), options.jobs, [&](std::size_t t) {
    auto& cell = result.cells[tasks[t].cell];
    const auto env = DigitFlipConfig::make(cell.n, cell.r);
    IgoalConfig run;
    run.total_steps = grid.train_steps;
    run.snapshot_interval = grid.train_steps;
    run.eval_every = grid.train_steps;
    run.eval_episodes = grid.test_episodes;
    run.track_td_error = false;
    run.seed = derive_seed(base_seed, static_cast<std::uint64_t>(cell.n) * 1'000'000 +
                                          static_cast<std::uint64_t>(cell.r) * 1'000 +
                                          static_cast<std::uint64_t>(tasks[t].model));
    const auto trained =
        train(env, cfg.agent, relabel, run, TrainingOpponent::none, AdversaryPolicy::none());
    const auto& final_eval = trained.metrics.evaluations.back();
    cell.success_rates[tasks[t].model] = final_eval.success_rate;
    lengths[t] = final_eval.mean_successful_length;
  });

  for (std::size_t t = 0, c = 0; c < result.cells.size(); ++c) {
    auto& cell = result.cells[c];
    cell.mean_success = mean(cell.success_rates);
    cell.success_variance = variance(cell.success_rates);
    cell.magnitude = state_space_magnitude(cell.n, cell.r);
    std::vector<double> present;
    for (int m = 0; m < grid.models; ++m, ++t)
      if (lengths[t]) present.push_back(*lengths[t]);
    if (!present.empty()) cell.mean_successful_length = mean(present);
  }

  if (options.write_files) {
    std::filesystem::create_directories(out_dir);
    auto write_grid = [&](const std::string& suffix, auto value_of) {
      const auto path = out_dir / (cfg.name + suffix);
      auto out = open_out(path);
      out << 'n';
      for (int r : grid.r_values) out << ",r=" << r;
      out << '\n';
      std::size_t c = 0;
      for (int n : grid.n_values) {
        out << n;
        for (std::size_t j = 0; j < grid.r_values.size(); ++j, ++c) {
          out << ',';
          const std::optional<double> v = value_of(result.cells[c]);
          if (v) out << fmt(*v);
        }
        out << '\n';
      }
      result.files.push_back(path);
    };
    write_grid("_grid_success.csv", [](const GridCell& c) -> std::optional<double> { return c.mean_success; });
    write_grid("_grid_variance.csv", [](const GridCell& c) -> std::optional<double> { return c.success_variance; });
    write_grid("_grid_length.csv", [](const GridCell& c) { return c.mean_successful_length; });
    write_grid("_grid_magnitude.csv", [](const GridCell& c) -> std::optional<double> { return c.magnitude; });
    result.manifest = out_dir / (cfg.name + "_grid_manifest.json");
    write_manifest(result.manifest, "grid", cfg, result.files, started_at, started, {});
  }
  return result;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  Manifest m;
  try {
    const auto doc = nlohmann::json::parse(in);
    m.kind = doc.at("kind").get<std::string>();
    m.name = doc.at("name").get<std::string>();
    if (m.kind == "compare") {
      for (const auto& arm : doc.at("arms")) m.configs.push_back(parse_config(arm.at("config")));
    } else {
      m.configs.push_back(parse_config(doc.at("config").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (m.kind != "train" && m.kind != "grid" && m.kind != "compare")
    throw ConfigError("manifest " + path.string() + " has unknown kind '" + m.kind + "'");
  return m;
}

std::optional<long> first_step_reaching(const std::vector<MetricRow>& rows, double threshold) {
  for (const auto& row : rows)
    if (row.median >= threshold) return row.stamp;
  return std::nullopt;
}

CompareResult compare_arms(const std::vector<ExperimentConfig>& arms, const std::string& name,
                           const std::filesystem::path& out_dir, const HarnessOptions& options,
                           double threshold) {
  if (arms.empty()) throw ConfigError("compare: no arms given");
  for (const auto& arm : arms) {
    if (arm.eval_every != arms.front().eval_every || arm.total_steps != arms.front().total_steps)
      throw ConfigError("compare: arm '" + arm.name + "' has a different evaluation cadence");
  }
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_timestamp();
  CompareResult result;
  for (const auto& arm : arms) {
    result.arms.push_back(run_experiment(arm, out_dir, options));
    const auto& rows = result.arms.back().success;
    ArmSummary s;
    s.arm = arm.name;
    if (!rows.empty()) {
      s.final_median = rows.back().median;
      s.final_lq = rows.back().lq;
      s.final_uq = rows.back().uq;
    }
    s.steps_to_threshold = first_step_reaching(rows, threshold);
    result.summary.push_back(s);
  }
  if (options.write_files) {
    std::filesystem::create_directories(out_dir);
    const auto combined = out_dir / (name + "_compare.csv");
    {
      auto out = open_out(combined);
      out << "arm," << kSuccessHeader << '\n';
      for (std::size_t a = 0; a < arms.size(); ++a)
        for (const auto& row : result.arms[a].success)
          out << arms[a].name << ',' << row.stamp << ',' << fmt(row.median) << ',' << fmt(row.lq)
              << ',' << fmt(row.uq) << '\n';
    }
    const auto summary = out_dir / (name + "_summary.csv");
    {
      auto out = open_out(summary);
      out << "arm,final_median,final_lq,final_uq,final_iqr,steps_to_" << fmt(threshold) << '\n';
      for (const auto& s : result.summary) {
        out << s.arm << ',' << fmt(s.final_median) << ',' << fmt(s.final_lq) << ','
            << fmt(s.final_uq) << ',' << fmt(s.final_uq - s.final_lq) << ',';
        if (s.steps_to_threshold) out << *s.steps_to_threshold;
        out << '\n';
      }
    }
    result.files = {combined, summary};
    nlohmann::json manifest;
    manifest["kind"] = "compare";
    manifest["name"] = name;
    nlohmann::json arm_entries = nlohmann::json::array();
    for (const auto& arm : arms) {
      const std::string text = arm.to_text();
      arm_entries.push_back({{"name", arm.name}, {"config", text}, {"config_hash", content_hash(text)}});
    }
    manifest["arms"] = arm_entries;
    manifest["files"] = file_entries(result.files);
    manifest["started_at"] = started_at;
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.manifest = out_dir / (name + "_compare_manifest.json");
    open_out(result.manifest) << manifest.dump(2) << '\n';
  }
  return result;
}

}  // namespace gcrl
