#pragma once

// Plain-text run configuration: "key = value" lines, '#' comments. Every key has a default.

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "pedpred/autoencoder.hpp"
#include "pedpred/environments.hpp"
#include "pedpred/io.hpp"
#include "pedpred/predictor.hpp"
#include "pedpred/simforces.hpp"

namespace pedpred {

struct EnvironmentSpec {
  std::string kind = "cluttered";  // corridor | cluttered | file
  double length = 30.0;             // corridor
  double width = 20.0;
  double height = 20.0;
  int obstacles = 12;
  std::uint64_t layout_seed = 1;
  double resolution = 0.1;
  std::string map_file;  // kind = file
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "out";
  std::string dataset;
  std::string weights;
  std::string ae_weights;

  EnvironmentSpec environment;
  int n_agents = 20;
  double duration = 300.0;
  double dt = 0.3;
  sim::SfParams sf;

  pred::PredictorConfig predictor;
  pred::TrainConfig train;
  ae::PretrainConfig ae;
  int ae_grids = 200;

  int bench_queries = 100;
  std::vector<int> bench_sizes = {5, 10, 20, 40};
};

inline env::Environment build_environment(const EnvironmentSpec& e) {
  if (e.kind == "corridor") return env::corridor(e.length, e.width, e.resolution);
  if (e.kind == "cluttered") return env::cluttered(e.width, e.height, e.obstacles, e.layout_seed, e.resolution);
  if (e.kind == "file") {
    if (e.map_file.empty()) throw ConfigError("environment.kind = file needs environment.map_file");
    env::Environment out;
    out.name = e.map_file;
    out.map = io::load_map(e.map_file);
    return out;
  }
  throw ConfigError("unknown environment kind '" + e.kind + "'");
}

namespace detail {

class ConfigTable {
 public:
  using Setter = std::function<void(const std::string&)>;
  using Getter = std::function<std::string()>;

  void add(const std::string& key, Setter set, Getter get) { entries_[key] = {std::move(set), std::move(get)}; }

  void set(const std::string& key, const std::string& value) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second.first(value);
    } catch (const IoError& e) {
      throw ConfigError("bad value for '" + key + "': " + e.what());
    }
  }

  std::map<std::string, std::string> dump() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, e] : entries_) out[k] = e.second();
    return out;
  }

 private:
  std::map<std::string, std::pair<Setter, Getter>> entries_;
};

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

inline ConfigTable table_for(RunConfig& c) {
  ConfigTable t;
  auto num = [&t](const std::string& k, double& v) {
    t.add(k, [&v](const std::string& s) { v = io::parse_double(s, "number"); }, [&v] { return io::format_double(v); });
  };
  auto integer = [&t](const std::string& k, int& v) {
    t.add(k, [&v](const std::string& s) { v = static_cast<int>(io::parse_int(s, "integer")); },
          [&v] { return std::to_string(v); });
  };
  auto u64 = [&t](const std::string& k, std::uint64_t& v) {
    t.add(
        k,
        [&v](const std::string& s) {
          const auto x = io::parse_int(s, "integer");
          if (x < 0) throw ConfigError("seed must be non-negative");
          v = static_cast<std::uint64_t>(x);
        },
        [&v] { return std::to_string(v); });
  };
  auto str = [&t](const std::string& k, std::string& v) {
    t.add(k, [&v](const std::string& s) { v = s; }, [&v] { return v; });
  };
  auto flag = [&t](const std::string& k, bool& v) {
    t.add(k, [&v](const std::string& s) { v = parse_bool(s); }, [&v] { return std::string(v ? "true" : "false"); });
  };

  u64("seed", c.seed);
  str("out", c.out);
  str("dataset", c.dataset);
  str("weights", c.weights);
  str("ae_weights", c.ae_weights);

  str("environment.kind", c.environment.kind);
  num("environment.length", c.environment.length);
  num("environment.width", c.environment.width);
  num("environment.height", c.environment.height);
  integer("environment.obstacles", c.environment.obstacles);
  u64("environment.layout_seed", c.environment.layout_seed);
  num("environment.resolution", c.environment.resolution);
  str("environment.map_file", c.environment.map_file);

  integer("sim.agents", c.n_agents);
  num("sim.duration", c.duration);
  num("sim.dt", c.dt);

  num("sf.desired_speed_mean", c.sf.desired_speed_mean);
  num("sf.desired_speed_std", c.sf.desired_speed_std);
  num("sf.desired_speed_min", c.sf.desired_speed_min);
  num("sf.desired_speed_max", c.sf.desired_speed_max);
  num("sf.relaxation_time", c.sf.relaxation_time);
  num("sf.agent_repulsion_strength", c.sf.agent_repulsion_strength);
  num("sf.agent_repulsion_range", c.sf.agent_repulsion_range);
  num("sf.obstacle_repulsion_strength", c.sf.obstacle_repulsion_strength);
  num("sf.obstacle_repulsion_range", c.sf.obstacle_repulsion_range);
  num("sf.agent_radius", c.sf.agent_radius);
  num("sf.noise_std", c.sf.force_noise_std);
  num("sf.max_speed_factor", c.sf.max_speed_factor);
  num("sf.goal_radius", c.sf.goal_radius);
  num("sf.goal_timeout", c.sf.goal_timeout);

  integer("predictor.horizon", c.predictor.horizon);
  num("predictor.dt", c.predictor.dt);
  integer("predictor.trunc", c.predictor.trunc);
  num("predictor.grid_extent", c.predictor.grid_extent);
  num("predictor.grid_resolution", c.predictor.grid_resolution);
  integer("predictor.apg_cones", c.predictor.apg_cones);
  num("predictor.apg_range", c.predictor.apg_range);
  flag("predictor.use_grid", c.predictor.use_grid);

  integer("train.steps", c.train.steps);
  integer("train.streams", c.train.streams);
  num("train.lr", c.train.adam.lr);
  num("train.l2", c.train.l2);
  num("train.dropout", c.train.dropout);
  integer("train.log_every", c.train.log_every);

  integer("ae.steps", c.ae.steps);
  integer("ae.batch", c.ae.batch);
  num("ae.lr", c.ae.adam.lr);
  integer("ae.grids", c.ae_grids);
  integer("ae.log_every", c.ae.log_every);

  integer("bench.queries", c.bench_queries);
  t.add(
      "bench.sizes",
      [&c](const std::string& s) {
        c.bench_sizes.clear();
        std::string item;
        for (char ch : s + ",") {
          if (ch == ',') {
            if (!item.empty()) c.bench_sizes.push_back(static_cast<int>(io::parse_int(item, "crowd size")));
            item.clear();
          } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            item.push_back(ch);
          }
        }
      },
      [&c] {
        std::string s;
        for (std::size_t i = 0; i < c.bench_sizes.size(); ++i) s += (i ? "," : "") + std::to_string(c.bench_sizes[i]);
        return s;
      });
  return t;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Applies one "key=value" override.
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  detail::table_for(c).set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

inline void validate(const RunConfig& c) {
  if (c.n_agents < 1) throw ConfigError("sim.agents must be at least 1");
  if (!(c.duration >= 0.0)) throw ConfigError("sim.duration must be non-negative");
  if (!(c.dt > 0.0)) throw ConfigError("sim.dt must be positive");
  c.sf.validate();
  c.predictor.validate();
  c.train.validate();
  if (c.ae.steps < 0 || c.ae.batch < 1 || c.ae_grids < 1) throw ConfigError("invalid autoencoder settings");
  if (c.bench_queries < 1 || c.bench_sizes.empty()) throw ConfigError("invalid benchmark settings");
  for (int n : c.bench_sizes)
    if (n < 1) throw ConfigError("benchmark crowd sizes must be positive");
}

inline RunConfig parse_config(std::istream& is) {
  RunConfig c;
  auto table = detail::table_for(c);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    table.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  return parse_config(f);
}

/// Every key with its current value, in key order.
inline std::map<std::string, std::string> dump_config(RunConfig c) { return detail::table_for(c).dump(); }

}  // namespace pedpred
