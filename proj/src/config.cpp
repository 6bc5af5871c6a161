#include "gcrl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace gcrl {

std::string to_string(IgoalVariant v) {
  switch (v) {
    case IgoalVariant::none: return "none";
    case IgoalVariant::igoal: return "igoal";
    case IgoalVariant::parallel: return "parallel";
  }
  return "none";
}

std::string to_string(EvalAdversary e) {
  switch (e) {
    case EvalAdversary::automatic: return "auto";
    case EvalAdversary::none: return "none";
    case EvalAdversary::random: return "random";
    case EvalAdversary::competent: return "competent";
    case EvalAdversary::pool: return "pool";
  }
  return "auto";
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("invalid value '" + value + "' for " + key);
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, value);
  return out;
}

long parse_long(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value);
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(static_cast<T>(parse_long(key, item)));
  }
  if (out.empty()) bad_value(key, value);
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

template <class F>
auto wrap(const std::string& key, const std::string& value, F&& f) {
  try {
    return f(trim(value));
  } catch (const std::invalid_argument&) {
    bad_value(key, value);
  }
}

}  // namespace

std::pair<int, int> preset_dimensions(const std::string& preset) {
  if (preset == "easy") return {4, 2};
  if (preset == "medium") return {9, 3};
  if (preset == "hard") return {9, 4};
  throw ConfigError("unknown preset '" + preset + "' (expected easy, medium or hard)");
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "experiment.name") {
    if (value.empty()) bad_value(key, raw);
    name = value;
  } else if (key == "experiment.preset") {
    const auto [n, r] = preset_dimensions(value);
    preset = value;
    env.n = n;
    env.r = r;
  } else if (key == "experiment.output_dir") {
    output_dir = value;
  } else if (key == "env.n") {
    env.n = static_cast<int>(parse_long(key, value));
  } else if (key == "env.r") {
    env.r = static_cast<int>(parse_long(key, value));
  } else if (key == "env.max_steps") {
    env.max_steps = static_cast<int>(parse_long(key, value));
  } else if (key == "env.adversary_mode") {
    env.adversary_mode = wrap(key, value, adversary_mode_from_string);
  } else if (key == "agent.learning_rate") {
    agent.learning_rate = parse_double(key, value);
  } else if (key == "agent.gamma") {
    agent.gamma = parse_double(key, value);
  } else if (key == "agent.tau") {
    agent.tau = parse_double(key, value);
  } else if (key == "agent.batch_size") {
    agent.batch_size = static_cast<int>(parse_long(key, value));
  } else if (key == "agent.buffer_capacity") {
    agent.buffer_capacity = static_cast<std::size_t>(parse_long(key, value));
  } else if (key == "agent.epsilon_start") {
    agent.epsilon_start = parse_double(key, value);
  } else if (key == "agent.epsilon_floor") {
    agent.epsilon_floor = parse_double(key, value);
  } else if (key == "agent.epsilon_decay") {
    agent.epsilon_decay = parse_double(key, value);
  } else if (key == "agent.target_copy_interval") {
    agent.target_copy_interval = parse_long(key, value);
  } else if (key == "agent.warmup_transitions") {
    agent.warmup_transitions = static_cast<std::size_t>(parse_long(key, value));
  } else if (key == "agent.updates_per_env_step") {
    agent.updates_per_env_step = static_cast<int>(parse_long(key, value));
  } else if (key == "agent.hidden") {
    agent.hidden = parse_list<int>(key, value);
  } else if (key == "agent.optimizer") {
    if (value == "adam") agent.optimizer = OptimizerKind::adam;
    else if (value == "sgd") agent.optimizer = OptimizerKind::sgd;
    else bad_value(key, raw);
  } else if (key == "agent.polyak") {
    agent.use_polyak = parse_bool(key, value);
  } else if (key == "agent.hard_copy") {
    agent.use_hard_copy = parse_bool(key, value);
  } else if (key == "replay.strategy") {
    replay.strategy = wrap(key, value, relabel_strategy_from_string);
  } else if (key == "replay.k") {
    replay.k = static_cast<std::size_t>(parse_long(key, value));
  } else if (key == "replay.mixin") {
    replay.schedule.kind = wrap(key, value, mixin_kind_from_string);
  } else if (key == "replay.mixin_horizon") {
    mixin_horizon = parse_long(key, value);
  } else if (key == "igoal.h") {
    snapshot_interval = parse_long(key, value);
  } else if (key == "igoal.variant") {
    if (value == "none") variant = IgoalVariant::none;
    else if (value == "igoal") variant = IgoalVariant::igoal;
    else if (value == "parallel") variant = IgoalVariant::parallel;
    else bad_value(key, raw);
  } else if (key == "run.seeds") {
    seeds = parse_list<std::uint64_t>(key, value);
  } else if (key == "run.total_steps") {
    total_steps = parse_long(key, value);
  } else if (key == "run.eval_every") {
    eval_every = parse_long(key, value);
  } else if (key == "run.eval_episodes") {
    eval_episodes = static_cast<int>(parse_long(key, value));
  } else if (key == "run.eval_adversary") {
    if (value == "auto") eval_adversary = EvalAdversary::automatic;
    else if (value == "none") eval_adversary = EvalAdversary::none;
    else if (value == "random") eval_adversary = EvalAdversary::random;
    else if (value == "competent") eval_adversary = EvalAdversary::competent;
    else if (value == "pool") eval_adversary = EvalAdversary::pool;
    else bad_value(key, raw);
  } else if (key == "run.pool_file") {
    pool_file = value;
  } else if (key == "run.td_window") {
    td_window = static_cast<std::size_t>(parse_long(key, value));
  } else if (key == "run.track_td_error") {
    track_td_error = parse_bool(key, value);
  } else if (key == "run.save_agents") {
    save_agents = parse_bool(key, value);
  } else if (key == "grid.n_values") {
    grid.n_values = parse_list<int>(key, value);
  } else if (key == "grid.r_values") {
    grid.r_values = parse_list<int>(key, value);
  } else if (key == "grid.models") {
    grid.models = static_cast<int>(parse_long(key, value));
  } else if (key == "grid.train_steps") {
    grid.train_steps = parse_long(key, value);
  } else if (key == "grid.test_episodes") {
    grid.test_episodes = static_cast<int>(parse_long(key, value));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  try {
    env.validate();
    agent.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("run.seeds must be distinct");
  if (total_steps < 1) throw ConfigError("run.total_steps must be >= 1");
  if (eval_every < 1) throw ConfigError("run.eval_every must be > 0");
  if (eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  if (td_window < 1) throw ConfigError("run.td_window must be >= 1");
  if (snapshot_interval < 1) throw ConfigError("igoal.h must be >= 1");
  if (mixin_horizon < 0) throw ConfigError("replay.mixin_horizon must be >= 0");
  if (variant != IgoalVariant::none) {
    if (!env.has_adversary())
      throw ConfigError("igoal.variant " + to_string(variant) + " needs env.adversary_mode != none");
    if (snapshot_interval > total_steps) throw ConfigError("igoal.h must be <= run.total_steps");
  } else if (env.adversary_mode == AdversaryMode::policy) {
    throw ConfigError("env.adversary_mode = policy requires igoal.variant igoal or parallel");
  }
  const bool eval_needs_adversary = eval_adversary != EvalAdversary::none &&
                                    eval_adversary != EvalAdversary::automatic;
  if (eval_needs_adversary && !env.has_adversary())
    throw ConfigError("run.eval_adversary " + to_string(eval_adversary) +
                      " needs an environment with an adversary");
  if (eval_adversary == EvalAdversary::none && env.has_adversary())
    throw ConfigError("run.eval_adversary none is invalid for an environment with an adversary");
  if (eval_adversary == EvalAdversary::pool && pool_file.empty())
    throw ConfigError("run.eval_adversary pool needs run.pool_file");
  if (grid.models < 1 || grid.train_steps < 1 || grid.test_episodes < 1)
    throw ConfigError("grid.models, grid.train_steps and grid.test_episodes must be >= 1");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << '\n'; };
  out << "[experiment]\n";
  kv("name", name);
  if (!preset.empty()) kv("preset", preset);
  kv("output_dir", output_dir.string());
  out << "\n[env]\n";
  kv("n", std::to_string(env.n));
  kv("r", std::to_string(env.r));
  kv("max_steps", std::to_string(env.max_steps));
  kv("adversary_mode", to_string(env.adversary_mode));
  out << "\n[agent]\n";
  kv("learning_rate", fmt_double(agent.learning_rate));
  kv("gamma", fmt_double(agent.gamma));
  kv("tau", fmt_double(agent.tau));
  kv("batch_size", std::to_string(agent.batch_size));
  kv("buffer_capacity", std::to_string(agent.buffer_capacity));
  kv("epsilon_start", fmt_double(agent.epsilon_start));
  kv("epsilon_floor", fmt_double(agent.epsilon_floor));
  kv("epsilon_decay", fmt_double(agent.epsilon_decay));
  kv("target_copy_interval", std::to_string(agent.target_copy_interval));
  kv("warmup_transitions", std::to_string(agent.warmup_transitions));
  kv("updates_per_env_step", std::to_string(agent.updates_per_env_step));
  kv("hidden", join(agent.hidden));
  kv("optimizer", agent.optimizer == OptimizerKind::adam ? "adam" : "sgd");
  kv("polyak", agent.use_polyak ? "true" : "false");
  kv("hard_copy", agent.use_hard_copy ? "true" : "false");
  out << "\n[replay]\n";
  kv("strategy", to_string(replay.strategy));
  kv("k", std::to_string(replay.k));
  kv("mixin", to_string(replay.schedule.kind));
  kv("mixin_horizon", std::to_string(mixin_horizon));
  out << "\n[igoal]\n";
  kv("h", std::to_string(snapshot_interval));
  kv("variant", to_string(variant));
  out << "\n[run]\n";
  kv("seeds", join(seeds));
  kv("total_steps", std::to_string(total_steps));
  kv("eval_every", std::to_string(eval_every));
  kv("eval_episodes", std::to_string(eval_episodes));
  kv("eval_adversary", to_string(eval_adversary));
  if (!pool_file.empty()) kv("pool_file", pool_file.string());
  kv("td_window", std::to_string(td_window));
  kv("track_td_error", track_td_error ? "true" : "false");
  kv("save_agents", save_agents ? "true" : "false");
  out << "\n[grid]\n";
  kv("n_values", join(grid.n_values));
  kv("r_values", join(grid.r_values));
  kv("models", std::to_string(grid.models));
  kv("train_steps", std::to_string(grid.train_steps));
  kv("test_episodes", std::to_string(grid.test_episodes));
  return out.str();
}

IgoalConfig ExperimentConfig::igoal_config(std::uint64_t seed) const {
  IgoalConfig c;
  c.snapshot_interval = variant == IgoalVariant::none ? total_steps : snapshot_interval;
  c.total_steps = total_steps;
  c.eval_every = eval_every;
  c.eval_episodes = eval_episodes;
  c.seed = seed;
  return c;
}

RelabelConfig ExperimentConfig::relabel_config() const {
  RelabelConfig r = replay;
  r.schedule.horizon = mixin_horizon > 0 ? mixin_horizon : total_steps;
  return r;
}

ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries) {
  ExperimentConfig cfg;
  cfg.env.max_steps = 0;
  if (auto it = entries.find("experiment.preset"); it != entries.end())
    cfg.set(it->first, it->second);
  for (const auto& [key, value] : entries)
    if (key != "experiment.preset") cfg.set(key, value);
  return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  std::map<std::string, std::string> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' outside of a section");
    for (const auto& [key, node] : body) entries[section + "." + key] = node.data();
  }
  return config_from_entries(entries);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace gcrl
