#include "scoreflow/config.hpp"

#include <fstream>
#include <sstream>

namespace scoreflow {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: value for '" + key + "' is not a number: '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: value for '" + key + "' is not an integer: '" + v + "'");
  }
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " of '" + path +
                        "' is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key on line " + std::to_string(lineno));
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: override '" + s + "' is not key=value");
    kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  return kv;
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "sde.dimension")
      cfg.sde.dimension = static_cast<int>(to_long(key, value));
    else if (key == "sde.horizon")
      cfg.sde.horizon = to_double(key, value);
    else if (key == "sde.diffusion")
      cfg.sde.diffusion = to_double(key, value);
    else if (key == "mlp.hidden") {
      cfg.mlp.hidden.clear();
      for (const auto& h : split_list(value))
        cfg.mlp.hidden.push_back(static_cast<int>(to_long(key, h)));
    } else if (key == "train.iterations")
      cfg.train.iterations = to_long(key, value);
    else if (key == "train.lr_start")
      cfg.train.lr_start = to_double(key, value);
    else if (key == "train.lr_end")
      cfg.train.lr_end = to_double(key, value);
    else if (key == "train.beta1")
      cfg.train.beta1 = to_double(key, value);
    else if (key == "train.beta2")
      cfg.train.beta2 = to_double(key, value);
    else if (key == "train.eps_adam")
      cfg.train.eps_adam = to_double(key, value);
    else if (key == "train.dsm_batch")
      cfg.train.dsm_batch = to_long(key, value);
    else if (key == "train.colloc_batch")
      cfg.train.colloc_batch = to_long(key, value);
    else if (key == "train.w_R")
      cfg.train.w_R = to_double(key, value);
    else if (key == "train.seed")
      cfg.train.seed = static_cast<uint64_t>(to_long(key, value));
    else if (key == "train.t_eps")
      cfg.train.t_eps = to_double(key, value);
    else if (key == "train.record_every")
      cfg.train.record_every = to_long(key, value);
    else if (key == "sampler.n")
      cfg.sampler.n = to_long(key, value);
    else if (key == "sampler.steps")
      cfg.sampler.steps = static_cast<int>(to_long(key, value));
    else if (key == "sampler.seed")
      cfg.sampler.seed = static_cast<uint64_t>(to_long(key, value));
    else if (key == "domain.lo")
      cfg.omega_lo = to_double(key, value);
    else if (key == "domain.hi")
      cfg.omega_hi = to_double(key, value);
    else if (key == "grid.resolution")
      cfg.grid_resolution = static_cast<int>(to_long(key, value));
    else if (key == "metrics.downsample")
      cfg.metric_downsample = static_cast<int>(to_long(key, value));
    else if (key == "metrics.density_sub")
      cfg.density_grid_sub = static_cast<int>(to_long(key, value));
    else if (key == "metrics.clip_allowance")
      cfg.grid_clip_allowance = to_double(key, value);
    else if (key == "w2.epsilon")
      cfg.w2.epsilon = to_double(key, value);
    else if (key == "w2.tol")
      cfg.w2.tol = to_double(key, value);
    else if (key == "w2.max_iters")
      cfg.w2.max_iters = static_cast<int>(to_long(key, value));
    else if (key == "experiment.datasets")
      cfg.datasets = split_list(value);
    else if (key == "experiment.weights") {
      cfg.weights.clear();
      for (const auto& w : split_list(value)) cfg.weights.push_back(to_double(key, w));
    } else if (key == "experiment.seeds") {
      cfg.seeds.clear();
      for (const auto& s : split_list(value))
        cfg.seeds.push_back(static_cast<uint64_t>(to_long(key, s)));
    } else if (key == "experiment.workers")
      cfg.workers = static_cast<int>(to_long(key, value));
    else if (key == "experiment.out")
      cfg.out_dir = value;
    else if (key == "experiment.heldout_colloc")
      cfg.heldout_colloc = to_long(key, value);
    else if (key == "experiment.heldout_dsm")
      cfg.heldout_dsm = to_long(key, value);
    else if (key == "experiment.eval_seed")
      cfg.eval_seed = static_cast<uint64_t>(to_long(key, value));
    else
      throw ConfigError("config: unknown key '" + key + "'");
  }
}

ExperimentConfig make_config(const std::string& preset, const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (preset == "desk" || preset.empty())
    cfg = desk_preset();
  else if (preset == "paper")
    cfg = paper_preset();
  else
    throw ConfigError("config: unknown preset '" + preset + "'");
  if (!config_path.empty()) apply_config(cfg, parse_config_file(config_path));
  apply_config(cfg, parse_overrides(overrides));
  cfg.validate();
  return cfg;
}

}  // namespace scoreflow
