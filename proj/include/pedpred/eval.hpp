#pragma once

// Receding-horizon evaluation harness and inference timing.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pedpred/core.hpp"
#include "pedpred/forecaster.hpp"

namespace pedpred::eval {

/// e_k = ||pred_k - gt_k||
inline std::vector<double> prediction_error(const std::vector<Vec2>& pred, const std::vector<Vec2>& gt) {
  if (pred.size() != gt.size()) throw ShapeError("prediction_error: sequences differ in length");
  std::vector<double> e(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) e[k] = (pred[k] - gt[k]).norm();
  return e;
}

/// Linear-interpolation quantile of an unsorted sample (q in [0, 1]).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return v[lo] + w * (v[hi] - v[lo]);
}

struct StepStats {
  int step = 0;  // 1..K_H
  double mean = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  std::size_t n = 0;
};

struct ErrorReport {
  std::string predictor;
  double dt = 0.3;
  std::vector<StepStats> steps;
  double average = 0.0;  // over agents, timesteps and horizon steps
  std::size_t samples = 0;
  std::map<std::string, std::string> metadata;

  /// One row per horizon step.
  void write_csv(std::ostream& os) const {
    os << "step,mean,p25,p50,p75,n\n";
    char buf[256];
    for (const auto& s : steps) {
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%zu\n", s.step, s.mean, s.p25, s.p50, s.p75, s.n);
      os << buf;
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["predictor"] = predictor;
    j["dt"] = dt;
    j["average_error"] = average;
    j["samples"] = samples;
    j["horizon"] = steps.size();
    auto& arr = j["steps"] = nlohmann::json::array();
    for (const auto& s : steps)
      arr.push_back({{"step", s.step}, {"mean", s.mean}, {"p25", s.p25}, {"p50", s.p50}, {"p75", s.p75}, {"n", s.n}});
    j["metadata"] = metadata;
    return j;
  }
};

struct EvalConfig {
  int horizon = 10;
  double dt = 0.3;
  // Declared provenance of the dataset; the harness cannot check it.
  bool held_out = true;
  std::string environment;
};

/// Per-step errors collected over many predictions.
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(int horizon) : errors_(static_cast<std::size_t>(horizon)) {}

  void add(const std::vector<double>& e) {
    if (e.size() != errors_.size()) throw ShapeError("error vector length differs from horizon");
    for (std::size_t k = 0; k < e.size(); ++k) errors_[k].push_back(e[k]);
  }

  std::size_t samples() const { return errors_.empty() ? 0 : errors_[0].size(); }

  ErrorReport report(const std::string& name, double dt) const {
    ErrorReport r;
    r.predictor = name;
    r.dt = dt;
    r.samples = samples();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < errors_.size(); ++k) {
      const auto& e = errors_[k];
      StepStats s;
      s.step = static_cast<int>(k + 1);
      s.n = e.size();
      double acc = 0.0;
      for (double v : e) acc += v;
      s.mean = e.empty() ? 0.0 : acc / static_cast<double>(e.size());
      s.p25 = quantile(e, 0.25);
      s.p50 = quantile(e, 0.50);
      s.p75 = quantile(e, 0.75);
      r.steps.push_back(s);
      total += acc;
      count += e.size();
    }
    r.average = count == 0 ? 0.0 : total / static_cast<double>(count);
    return r;
  }

 private:
  std::vector<std::vector<double>> errors_;
};

/// Walks the dataset one time index at a time. Every present agent is queried so recurrent
/// sessions stay current; only agents with K_H future samples are scored.
inline ErrorReport evaluate(Forecaster& predictor, const Dataset& ds, const EvalConfig& cfg) {
  if (cfg.horizon < 1) throw InvalidArgument("evaluation horizon must be at least 1");
  if (std::abs(ds.dt - cfg.dt) > 1e-12) throw InvalidArgument("dataset dt differs from evaluation dt; resample first");
  predictor.reset();
  ErrorAccumulator acc(cfg.horizon);
  std::vector<Vec2> gt(static_cast<std::size_t>(cfg.horizon));
  for (std::int64_t t = ds.first_index(); t <= ds.last_index(); ++t) {
    const WorldState scene = ds.scene_at(t);
    if (scene.agents.empty()) continue;
    const SceneQuery q{ds, t, scene, cfg.horizon, cfg.dt};
    const auto forecasts = predictor.forecast(q);
    for (const auto& tr : ds.trajectories) {
      if (!tr.covers(t) || !tr.covers(t + cfg.horizon)) continue;
      auto it = forecasts.find(tr.agent_id);
      if (it == forecasts.end())
        throw InvalidArgument(predictor.name() + " returned no forecast for agent " + std::to_string(tr.agent_id));
      for (int k = 1; k <= cfg.horizon; ++k) gt[static_cast<std::size_t>(k - 1)] = tr.at_time(t + k).position;
      acc.add(prediction_error(it->second, gt));
    }
  }
  ErrorReport r = acc.report(predictor.name(), cfg.dt);
  r.metadata["held_out"] = cfg.held_out ? "true" : "false";
  if (!cfg.environment.empty()) r.metadata["environment"] = cfg.environment;
  r.metadata["trajectories"] = std::to_string(ds.trajectories.size());
  return r;
}

/// Reads the future straight from the dataset; positions past a trajectory's end repeat its last sample.
class GroundTruthForecaster : public Forecaster {
 public:
  std::string name() const override { return "oracle"; }
  std::map<int, std::vector<Vec2>> forecast(const SceneQuery& q) override {
    std::map<int, std::vector<Vec2>> out;
    for (const auto& a : q.scene.agents) {
      const Trajectory* tr = q.dataset.find(a.id);
      auto& v = out[a.id];
      for (int k = 1; k <= q.horizon; ++k) {
        const std::int64_t t = std::min<std::int64_t>(q.time_index + k, tr->end_index() - 1);
        v.push_back(tr->at_time(t).position);
      }
    }
    return out;
  }
};

struct TimingPoint {
  int agents = 0;
  std::size_t queries = 0;
  double total_ms_mean = 0.0;  // one forecast over the whole scene
  double total_ms_std = 0.0;
  double per_agent_ms_mean = 0.0;
  double per_agent_ms_std = 0.0;
};

struct TimingReport {
  std::vector<TimingPoint> points;
  double slope_ms_per_agent = 0.0;  // least-squares fit of total latency against N
  double intercept_ms = 0.0;
  double r_squared = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    auto& arr = j["points"] = nlohmann::json::array();
    for (const auto& p : points)
      arr.push_back({{"agents", p.agents},
                     {"queries", p.queries},
                     {"total_ms_mean", p.total_ms_mean},
                     {"total_ms_std", p.total_ms_std},
                     {"per_agent_ms_mean", p.per_agent_ms_mean},
                     {"per_agent_ms_std", p.per_agent_ms_std}});
    j["slope_ms_per_agent"] = slope_ms_per_agent;
    j["intercept_ms"] = intercept_ms;
    j["r_squared"] = r_squared;
    return j;
  }
};

/// Ordinary least squares y = a + b x; returns (a, b, R^2).
inline std::array<double, 3> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("linear_fit needs two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("linear_fit: x values are all equal");
  const double b = sxy / sxx;
  const double a = my - b * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (a + b * x[i]);
    ss_res += r * r;
  }
  const double r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return {a, b, r2};
}

struct TimingConfig {
  std::size_t queries = 100;
  std::size_t warmup = 5;
  int horizon = 10;
};

/// `scene_for(n)` supplies a dataset with n agents; consecutive time indices are queried so
/// recurrent predictors run with live sessions.
inline TimingReport timing_benchmark(Forecaster& predictor, const std::vector<int>& crowd_sizes,
                                     const std::function<Dataset(int)>& scene_for, const TimingConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  TimingReport rep;
  std::vector<double> xs, ys;
  for (int n : crowd_sizes) {
    if (n < 1) throw InvalidArgument("crowd sizes must be positive");
    const Dataset ds = scene_for(n);
    const std::int64_t first = ds.first_index();
    const std::int64_t span = ds.last_index() - first + 1;
    if (span < 1) throw InvalidArgument("timing dataset is empty");
    predictor.reset();
    std::vector<double> totals;
    std::size_t agents_seen = 0;
    for (std::size_t i = 0; i < cfg.warmup + cfg.queries; ++i) {
      const std::int64_t t = first + static_cast<std::int64_t>(i % static_cast<std::size_t>(span));
      if (t == first) predictor.reset();
      const WorldState scene = ds.scene_at(t);
      const SceneQuery q{ds, t, scene, cfg.horizon, ds.dt};
      const auto t0 = clock::now();
      auto out = predictor.forecast(q);
      const auto t1 = clock::now();
      if (out.size() != scene.agents.size()) throw InvalidArgument("forecast size differs from scene size");
      if (i < cfg.warmup) continue;
      totals.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      agents_seen += scene.agents.size();
    }
    TimingPoint p;
    p.agents = n;
    p.queries = totals.size();
    double m = 0.0;
    for (double v : totals) m += v;
    m /= static_cast<double>(totals.size());
    double var = 0.0;
    for (double v : totals) var += (v - m) * (v - m);
    var /= static_cast<double>(std::max<std::size_t>(1, totals.size() - 1));
    const double mean_agents = static_cast<double>(agents_seen) / static_cast<double>(totals.size());
    p.total_ms_mean = m;
    p.total_ms_std = std::sqrt(var);
    p.per_agent_ms_mean = m / mean_agents;
    p.per_agent_ms_std = p.total_ms_std / mean_agents;
    rep.points.push_back(p);
    xs.push_back(mean_agents);
    ys.push_back(m);
  }
  if (xs.size() >= 2) {
    const auto [a, b, r2] = linear_fit(xs, ys);
    rep.intercept_ms = a;
    rep.slope_ms_per_agent = b;
    rep.r_squared = r2;
  }
  return rep;
}

}  // namespace pedpred::eval
