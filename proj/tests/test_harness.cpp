#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gcrl/config.hpp"
#include "gcrl/harness.hpp"
#include "gcrl/stats.hpp"
#include "json.hpp"

using namespace gcrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gcrl_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.set("env.n", "3");
  cfg.set("env.r", "1");
  cfg.set("agent.hidden", "16");
  cfg.set("agent.batch_size", "16");
  cfg.set("agent.warmup_transitions", "64");
  cfg.set("agent.buffer_capacity", "20000");
  cfg.set("run.seeds", "0,1,2");
  cfg.set("run.total_steps", "900");
  cfg.set("run.eval_every", "200");
  cfg.set("run.eval_episodes", "10");
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GCRL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Stats, LinearInterpolationQuantiles) {
  const std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(median(v), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.75), 3.25);
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_THROW(median(std::vector<double>{}), std::invalid_argument);
  EXPECT_DOUBLE_EQ(mean(v), 2.5);
  EXPECT_DOUBLE_EQ(variance(v), 1.25);
}

TEST(Stats, SingleSampleRowsCollapse) {
  const auto row = summarize(4000, std::vector<double>{0.7});
  EXPECT_EQ(row.stamp, 4000);
  EXPECT_EQ(row.median, 0.7);
  EXPECT_EQ(row.lq, 0.7);
  EXPECT_EQ(row.uq, 0.7);
}

TEST(Stats, QuartilesBracketMedian) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(1 + rng.index(10));
    for (auto& x : v) x = rng.uniform();
    const auto row = summarize(0, v);
    ASSERT_LE(row.lq, row.median);
    ASSERT_LE(row.median, row.uq);
  }
}

TEST(Stats, RollingAverage) {
  const std::vector<double> s = {3.0, 1.0, 4.0, 1.0, 5.0};
  EXPECT_EQ(rolling_average(s, 1), s);
  const std::vector<double> c(30, 2.5);
  EXPECT_EQ(rolling_average(c, 20), c);
  std::vector<double> spike(21, 0.0);
  spike.back() = 20.0;
  EXPECT_DOUBLE_EQ(rolling_average(spike, 20).back(), 1.0);
  const auto r = rolling_average(s, 2);
  EXPECT_EQ(r, (std::vector<double>{3.0, 2.0, 2.5, 2.5, 3.0}));
  EXPECT_THROW(rolling_average(s, 0), std::invalid_argument);
}

TEST(Config, PresetsAndPrecedence) {
  EXPECT_EQ(preset_dimensions("easy"), (std::pair{4, 2}));
  EXPECT_EQ(preset_dimensions("medium"), (std::pair{9, 3}));
  EXPECT_EQ(preset_dimensions("hard"), (std::pair{9, 4}));
  EXPECT_THROW(preset_dimensions("nightmare"), ConfigError);
  const auto cfg = parse_config("[env]\nr = 5\n[experiment]\npreset = hard\nname = x\n");
  EXPECT_EQ(cfg.env.n, 9);
  EXPECT_EQ(cfg.env.r, 5);  // explicit key wins over the preset
  const auto minimal = parse_config("[experiment]\npreset = easy\n");
  EXPECT_EQ(minimal.env.n, 4);
  EXPECT_EQ(minimal.env.steps(), DigitFlipConfig::default_max_steps(4, 2));
  EXPECT_EQ(minimal.seeds.size(), 6u);
  EXPECT_EQ(minimal.eval_every, 4000);
  EXPECT_EQ(minimal.eval_episodes, 200);
  EXPECT_EQ(minimal.snapshot_interval, 4000);
}

TEST(Config, TextRoundTrip) {
  auto cfg = tiny("roundtrip");
  cfg.set("replay.strategy", "cher");
  cfg.set("replay.mixin", "linear_decreasing");
  cfg.set("agent.learning_rate", "0.00031");
  cfg.set("env.adversary_mode", "policy");
  cfg.set("igoal.variant", "igoal");
  cfg.set("igoal.h", "300");
  cfg.set("grid.n_values", "3,4");
  const auto back = parse_config(cfg.to_text());
  EXPECT_EQ(back.to_text(), cfg.to_text());
  EXPECT_EQ(back.agent.learning_rate, 0.00031);
  EXPECT_EQ(back.replay.strategy, RelabelStrategy::cher);
  EXPECT_EQ(back.variant, IgoalVariant::igoal);
  EXPECT_EQ(back.grid.n_values, (std::vector<int>{3, 4}));
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig cfg;
  EXPECT_THROW(cfg.set("env.colour", "blue"), ConfigError);
  EXPECT_THROW(cfg.set("env.n", "four"), ConfigError);
  EXPECT_THROW(cfg.set("replay.strategy", "magic"), ConfigError);
  EXPECT_THROW(parse_config("[env\nn=3"), ConfigError);
  auto dup = ExperimentConfig{};
  dup.set("run.seeds", "1,1");
  EXPECT_THROW(dup.validate(), ConfigError);
  auto igoal_no_adv = ExperimentConfig{};
  igoal_no_adv.set("igoal.variant", "igoal");
  EXPECT_THROW(igoal_no_adv.validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST(ContentHash, MatchesGitBlobHash) {
  EXPECT_EQ(content_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(content_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(OutputDir, Precedence) {
  ExperimentConfig cfg;
  cfg.output_dir = "from_config";
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(resolve_output_dir(cfg, std::nullopt), fs::path("from_config"));
  ::setenv(kOutputDirEnv, "from_env", 1);
  EXPECT_EQ(resolve_output_dir(cfg, std::nullopt), fs::path("from_env"));
  EXPECT_EQ(resolve_output_dir(cfg, fs::path("explicit")), fs::path("explicit"));
  ::unsetenv(kOutputDirEnv);
}

TEST(ParallelFor, CoversEveryIndexAndPropagatesErrors) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(RunExperiment, FilesSchemaAndDeterminism) {
  const auto dir = scratch("run");
  const auto cfg = tiny("tiny");
  const auto res = run_experiment(cfg, dir / "a");
  ASSERT_EQ(res.success.size(), 900u / 200u);
  for (std::size_t i = 0; i < res.success.size(); ++i) {
    EXPECT_EQ(res.success[i].stamp, 200 * long(i + 1));
    EXPECT_LE(res.success[i].lq, res.success[i].median);
    EXPECT_LE(res.success[i].median, res.success[i].uq);
  }
  ASSERT_FALSE(res.td_error.empty());
  for (std::size_t i = 0; i < res.td_error.size(); ++i) EXPECT_EQ(res.td_error[i].stamp, long(i));

  const auto succ = slurp(dir / "a" / "tiny_succ.csv");
  EXPECT_EQ(succ.substr(0, succ.find('\n')), "episode,median,lq,uq");
  const auto td = slurp(dir / "a" / "tiny_tderr.csv");
  EXPECT_EQ(td.substr(0, td.find('\n')), "s,median,lq,uq");
  const auto back = read_metric_csv(dir / "a" / "tiny_succ.csv");
  ASSERT_EQ(back.size(), res.success.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].stamp, res.success[i].stamp);
    EXPECT_EQ(back[i].median, res.success[i].median);  // shortest round-trip formatting
    EXPECT_EQ(back[i].uq, res.success[i].uq);
  }

  const auto manifest = nlohmann::json::parse(slurp(res.manifest));
  EXPECT_EQ(manifest["config_hash"], content_hash(cfg.to_text()));
  EXPECT_EQ(manifest["seeds"].size(), 3u);
  EXPECT_EQ(manifest["completed_seeds"].size(), 3u);
  EXPECT_TRUE(manifest["failed_seeds"].empty());
  EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
  EXPECT_EQ(manifest["files"].size(), res.files.size());

  // Rerun from the manifest's config text, sequentially and with threads.
  const auto again = parse_config(manifest["config"].get<std::string>());
  run_experiment(again, dir / "b", {1, true});
  run_experiment(again, dir / "c", {3, true});
  for (const char* f : {"tiny_succ.csv", "tiny_tderr.csv", "tiny_runs.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "c" / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(RunExperiment, TdErrorAggregatesOverCommonPrefix) {
  TrainingMetrics a, b;
  a.episode_td_error = {1.0, std::nullopt, 3.0, 5.0};
  b.episode_td_error = {2.0, 4.0};
  const auto rows = aggregate_td_error({&a, &b}, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].median, 1.5);
  EXPECT_EQ(rows[1].median, 3.5);
}

TEST(RunExperiment, ParallelVariantWritesControlCurve) {
  const auto dir = scratch("parallel");
  auto cfg = tiny("par");
  cfg.set("run.seeds", "4");
  cfg.set("env.adversary_mode", "policy");
  cfg.set("igoal.variant", "parallel");
  cfg.set("igoal.h", "300");
  const auto res = run_experiment(cfg, dir);
  EXPECT_TRUE(fs::exists(dir / "par_control_succ.csv"));
  ASSERT_EQ(res.control_success.size(), res.success.size());
  EXPECT_TRUE(res.runs[0].control_agent.has_value());
  fs::remove_all(dir);
}

TEST(DifficultyGrid, LayoutAndMagnitude) {
  const auto dir = scratch("grid");
  auto cfg = tiny("g");
  cfg.set("grid.n_values", "2,3");
  cfg.set("grid.r_values", "1,2");
  cfg.set("grid.models", "2");
  cfg.set("grid.train_steps", "300");
  cfg.set("grid.test_episodes", "10");
  const auto res = difficulty_grid(cfg, dir, {2, true});
  ASSERT_EQ(res.cells.size(), 4u);
  for (const auto& c : res.cells) {
    EXPECT_EQ(c.magnitude, state_space_magnitude(c.n, c.r));
    EXPECT_EQ(c.success_rates.size(), 2u);
  }
  const auto success = slurp(dir / "g_grid_success.csv");
  EXPECT_EQ(success.substr(0, success.find('\n')), "n,r=1,r=2");
  std::istringstream mag(slurp(dir / "g_grid_magnitude.csv"));
  std::string line;
  std::getline(mag, line);
  std::getline(mag, line);
  EXPECT_EQ(line.substr(0, 2), "2,");
  EXPECT_EQ(std::stod(line.substr(2)), state_space_magnitude(2, 1));
  EXPECT_TRUE(fs::exists(dir / "g_grid_variance.csv"));
  EXPECT_TRUE(fs::exists(dir / "g_grid_length.csv"));
  EXPECT_TRUE(fs::exists(res.manifest));
  const auto seq = difficulty_grid(cfg, dir / "seq", {1, true});
  EXPECT_EQ(slurp(dir / "g_grid_success.csv"), slurp(dir / "seq" / "g_grid_success.csv"));
  fs::remove_all(dir);
}

TEST(CompareArms, OrderCadenceAndSingleArm) {
  const auto dir = scratch("compare");
  auto her = tiny("her");
  her.set("replay.strategy", "her");
  her.set("run.seeds", "0,1");
  auto eher = tiny("eher");
  eher.set("run.seeds", "0,1");
  const auto res = compare_arms({eher, her}, "cmp", dir);
  ASSERT_EQ(res.summary.size(), 2u);
  EXPECT_EQ(res.summary[0].arm, "eher");
  EXPECT_EQ(res.summary[1].arm, "her");
  EXPECT_EQ(res.summary[1].final_median, res.arms[1].success.back().median);
  const auto combined = slurp(dir / "cmp_compare.csv");
  EXPECT_EQ(combined.substr(0, combined.find('\n')), "arm,episode,median,lq,uq");
  EXPECT_TRUE(fs::exists(dir / "cmp_summary.csv"));

  const auto single = compare_arms({her}, "one", dir / "single");
  const auto direct = run_experiment(her, dir / "direct");
  ASSERT_EQ(single.arms[0].success.size(), direct.success.size());
  for (std::size_t i = 0; i < direct.success.size(); ++i)
    EXPECT_EQ(single.arms[0].success[i].median, direct.success[i].median);

  auto odd = tiny("odd");
  odd.set("run.eval_every", "300");
  EXPECT_THROW(compare_arms({her, odd}, "bad", dir), ConfigError);
  fs::remove_all(dir);
}

TEST(FirstStepReaching, Threshold) {
  const std::vector<MetricRow> rows = {{100, 0.2, 0, 0}, {200, 0.9, 0, 0}, {300, 0.95, 0, 0}};
  EXPECT_EQ(first_step_reaching(rows, 0.9), 200);
  EXPECT_FALSE(first_step_reaching(rows, 0.99).has_value());
}

TEST(Cli, ExitCodesAndManifestRerun) {
  const auto dir = scratch("cli");
  const std::string common = " --set env.n=3 --set env.r=1 --set agent.hidden=16 --set run.total_steps=400"
                             " --set run.eval_every=200 --set run.eval_episodes=5 --seed 3,4"
                             " --set agent.warmup_transitions=64 --set agent.batch_size=16";
  EXPECT_EQ(run_cli("train --set experiment.name=c --out " + (dir / "a").string() + common), 0);
  EXPECT_TRUE(fs::exists(dir / "a" / "c_succ.csv"));
  EXPECT_EQ(run_cli("train --manifest " + (dir / "a" / "c_manifest.json").string() + " --out " +
                    (dir / "b").string()),
            0);
  EXPECT_EQ(slurp(dir / "a" / "c_succ.csv"), slurp(dir / "b" / "c_succ.csv"));
  EXPECT_EQ(slurp(dir / "a" / "c_tderr.csv"), slurp(dir / "b" / "c_tderr.csv"));
  EXPECT_EQ(run_cli("train --set env.bogus=1"), 2);
  EXPECT_EQ(run_cli("train --preset impossible"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("eval --agent " + (dir / "missing.snap").string()), 3);
  EXPECT_EQ(run_cli("--help"), 0);
  ::setenv(kOutputDirEnv, (dir / "env").string().c_str(), 1);
  EXPECT_EQ(run_cli("train --set experiment.name=e" + common), 0);
  ::unsetenv(kOutputDirEnv);
  EXPECT_TRUE(fs::exists(dir / "env" / "e_succ.csv"));
  fs::remove_all(dir);
}
