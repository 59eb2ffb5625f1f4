// pedpred command-line front end: simulate, pretrain-ae, train, predict, evaluate, bench.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "pedpred/pedpred.hpp"

namespace fs = std::filesystem;
using namespace pedpred;

namespace {

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kIo = 4, kRuntime = 5 };

struct Options {
  std::string config;
  std::int64_t seed = -1;
  std::string out;
  std::string weights;
  std::vector<std::string> datasets;
  std::string predictor = "lstm";
  std::vector<std::string> overrides;
  std::int64_t time_index = -1;
  bool quiet = false;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  for (const auto& s : o.overrides) apply_override(c, s);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.out.empty()) c.out = o.out;
  if (!o.weights.empty()) c.weights = o.weights;
  if (!o.datasets.empty()) c.dataset = o.datasets.front();
  validate(c);
  return c;
}

fs::path ensure_out(const RunConfig& c) {
  fs::path p(c.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory '" + c.out + "': " + ec.message());
  return p;
}

std::vector<std::string> dataset_list(const Options& o, const RunConfig& c) {
  if (!o.datasets.empty()) return o.datasets;
  if (!c.dataset.empty()) return {c.dataset};
  throw ConfigError("no dataset given (use --dataset or the 'dataset' key)");
}

void log(const Options& o, const char* fmt, auto... args) {
  if (o.quiet) return;
  std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

int cmd_simulate(const Options& o) {
  RunConfig c = resolve(o);
  const auto env = build_environment(c.environment);
  sim::SimConfig sc;
  sc.dt = c.dt;
  sc.n_agents = c.n_agents;
  sc.duration = c.duration;
  sc.rng_seed = c.seed;
  sc.environment = env.map;
  sc.goal_regions = env.goal_regions;
  const Dataset ds = sim::generate_dataset(sc, c.sf);
  const fs::path out = ensure_out(c);
  io::save_dataset(out / "dataset.txt", ds, "dataset.map");
  log(o, "simulated %d agents for %.1f s in %s: %zu samples -> %s", c.n_agents, c.duration, env.name.c_str(),
      ds.sample_count(), (out / "dataset.txt").c_str());
  return kOk;
}

int cmd_pretrain_ae(const Options& o) {
  RunConfig c = resolve(o);
  std::vector<enc::LocalGrid> grids;
  const auto paths = dataset_list(o, c);
  const std::size_t per = (static_cast<std::size_t>(c.ae_grids) + paths.size() - 1) / paths.size();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Dataset ds = io::load_dataset(paths[i]);
    auto g = ae::harvest_grids(ds, per, c.seed + i, c.predictor.grid_extent, c.predictor.grid_resolution);
    grids.insert(grids.end(), g.begin(), g.end());
  }
  grids.resize(static_cast<std::size_t>(c.ae_grids));
  ae::PretrainConfig pc = c.ae;
  pc.seed = c.seed;
  pc.on_log = [&](int step, double loss) { log(o, "ae step %d loss %.4f", step, loss); };
  const double before = ae::mean_loss(ae::ConvAutoencoder(grids.front().size, c.seed), grids);
  auto result = ae::pretrain(grids, pc);
  const double after = ae::mean_loss(result.params, grids);
  const fs::path out = ensure_out(c);
  io::WeightArchive a;
  io::store_autoencoder(a, result.params);
  io::save_weights(out / "ae.weights", a);
  std::ofstream curve(out / "ae_curve.csv");
  curve << "point,loss\n";
  for (std::size_t i = 0; i < result.curve.size(); ++i) curve << i << "," << io::format_double(result.curve[i]) << "\n";
  log(o, "mean reconstruction loss %.4f -> %.4f; wrote %s", before, after, (out / "ae.weights").c_str());
  return kOk;
}

int cmd_train(const Options& o) {
  RunConfig c = resolve(o);
  std::unique_ptr<ae::ConvAutoencoder> ae_model;
  if (c.predictor.use_grid) {
    const std::string path = !c.ae_weights.empty() ? c.ae_weights : c.weights;
    if (path.empty()) throw ConfigError("training with the grid channel needs --weights <ae archive>");
    ae_model = std::make_unique<ae::ConvAutoencoder>(io::restore_autoencoder(io::load_weights(path, io::known_sections())));
  }
  pred::ModelParams m = pred::make_model(c.predictor, ae_model.get(), c.seed);
  pred::TrainConfig tc = c.train;
  tc.seed = c.seed;
  tc.on_log = [&](int step, double err) { log(o, "train step %d mean step error %.4f", step, err); };
  pred::Trainer trainer(m, tc);
  // Datasets are trained in the order given (curriculum).
  for (const auto& path : dataset_list(o, c)) {
    const Dataset ds = io::load_dataset(path);
    log(o, "stage %s: %zu trajectories", path.c_str(), ds.trajectories.size());
    trainer.fit(pred::prepare_sequences(ds, m));
  }
  const fs::path out = ensure_out(c);
  io::WeightArchive a;
  if (ae_model) io::store_autoencoder(a, *ae_model);
  io::store_predictor(a, m);
  io::save_weights(out / "predictor.weights", a);
  log(o, "wrote %s", (out / "predictor.weights").c_str());
  return kOk;
}

std::unique_ptr<Forecaster> make_forecaster(const std::string& name, const RunConfig& c,
                                            std::unique_ptr<pred::ModelParams>& model) {
  if (name == "cv") return std::make_unique<baseline::CvForecaster>();
  if (name == "cacc") return std::make_unique<baseline::CaccForecaster>();
  if (name == "sf") return std::make_unique<baseline::SfForecaster>(c.sf);
  if (name == "oracle") return std::make_unique<eval::GroundTruthForecaster>();
  if (name == "lstm") {
    if (c.weights.empty()) throw ConfigError("the lstm predictor needs --weights <predictor archive>");
    model = std::make_unique<pred::ModelParams>(
        io::restore_predictor(io::load_weights(c.weights, io::known_sections())));
    return std::make_unique<pred::LstmForecaster>(*model, model->use_grid() ? "lstm" : "lstm-nogrid");
  }
  throw ConfigError("unknown predictor '" + name + "' (lstm, cv, cacc, sf, oracle)");
}

int cmd_evaluate(const Options& o) {
  RunConfig c = resolve(o);
  std::unique_ptr<pred::ModelParams> model;
  auto f = make_forecaster(o.predictor, c, model);
  const Dataset ds = io::load_dataset(dataset_list(o, c).front());
  eval::EvalConfig ec;
  ec.horizon = c.predictor.horizon;
  ec.dt = c.predictor.dt;
  ec.environment = c.dataset.empty() ? o.datasets.front() : c.dataset;
  const auto r = eval::evaluate(*f, ds, ec);
  const fs::path out = ensure_out(c);
  {
    std::ofstream csv(out / ("report_" + o.predictor + ".csv"));
    r.write_csv(csv);
    std::ofstream js(out / ("report_" + o.predictor + ".json"));
    js << r.to_json().dump(2) << "\n";
  }
  std::printf("%s average error %.6f m over %zu predictions\n", r.predictor.c_str(), r.average, r.samples);
  return kOk;
}

int cmd_predict(const Options& o) {
  RunConfig c = resolve(o);
  std::unique_ptr<pred::ModelParams> model;
  auto f = make_forecaster(o.predictor, c, model);
  const Dataset ds = io::load_dataset(dataset_list(o, c).front());
  if (ds.trajectories.empty()) throw InvalidArgument("dataset has no trajectories");
  const std::int64_t target = o.time_index >= 0 ? o.time_index : ds.last_index();
  if (target < ds.first_index() || target > ds.last_index()) throw InvalidArgument("--time lies outside the dataset");
  // Sessions are warmed up on every earlier snapshot.
  f->reset();
  std::map<int, std::vector<Vec2>> result;
  for (std::int64_t t = ds.first_index(); t <= target; ++t) {
    const WorldState scene = ds.scene_at(t);
    if (scene.agents.empty()) continue;
    const SceneQuery q{ds, t, scene, c.predictor.horizon, ds.dt};
    auto r = f->forecast(q);
    if (t == target) result = std::move(r);
  }
  std::FILE* fp = stdout;
  if (!o.out.empty()) {
    const fs::path out = ensure_out(c);
    fp = std::fopen((out / "prediction.csv").c_str(), "w");
    if (!fp) throw IoError("cannot write prediction.csv");
  }
  std::fprintf(fp, "agent_id,time_index,step,x,y\n");
  for (const auto& [id, pts] : result)
    for (std::size_t k = 0; k < pts.size(); ++k)
      std::fprintf(fp, "%d,%lld,%zu,%.17g,%.17g\n", id, static_cast<long long>(target), k + 1, pts[k].x, pts[k].y);
  if (fp != stdout) std::fclose(fp);
  return kOk;
}

int cmd_bench(const Options& o) {
  RunConfig c = resolve(o);
  std::unique_ptr<pred::ModelParams> model;
  auto f = make_forecaster(o.predictor, c, model);
  const auto env = build_environment(c.environment);
  auto scene_for = [&](int n) {
    sim::SimConfig sc;
    sc.dt = c.dt;
    sc.n_agents = n;
    sc.duration = 60.0;
    sc.rng_seed = c.seed;
    sc.environment = env.map;
    sc.goal_regions = env.goal_regions;
    return sim::generate_dataset(sc, c.sf);
  };
  eval::TimingConfig tc;
  tc.queries = static_cast<std::size_t>(c.bench_queries);
  tc.horizon = c.predictor.horizon;
  const auto rep = eval::timing_benchmark(*f, c.bench_sizes, scene_for, tc);
  for (const auto& p : rep.points)
    std::printf("N=%d per-agent %.4f ms (std %.4f), total %.4f ms\n", p.agents, p.per_agent_ms_mean,
                p.per_agent_ms_std, p.total_ms_mean);
  std::printf("total latency fit: %.4f ms/agent, R^2 = %.4f\n", rep.slope_ms_per_agent, rep.r_squared);
  const fs::path out = ensure_out(c);
  std::ofstream js(out / ("bench_" + o.predictor + ".json"));
  js << rep.to_json().dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pedestrian motion prediction toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* s) {
    s->add_option("--config", o.config, "Run configuration file");
    s->add_option("--seed", o.seed, "Random seed")->check(CLI::NonNegativeNumber);
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--set", o.overrides, "Override a config key (key=value)");
    s->add_flag("--quiet", o.quiet, "No progress output");
  };

  auto* sim = app.add_subcommand("simulate", "Generate a social-forces dataset");
  common(sim);
  auto* pre = app.add_subcommand("pretrain-ae", "Pretrain the occupancy-grid autoencoder");
  common(pre);
  pre->add_option("--dataset", o.datasets, "Dataset file(s) to harvest grids from");
  auto* train = app.add_subcommand("train", "Train the predictor (datasets in curriculum order)");
  common(train);
  train->add_option("--dataset", o.datasets, "Dataset file(s), trained in order");
  train->add_option("--weights", o.weights, "Autoencoder weight archive");
  auto* predict = app.add_subcommand("predict", "Forecast every agent at one time index");
  common(predict);
  predict->add_option("--dataset", o.datasets, "Dataset file");
  predict->add_option("--weights", o.weights, "Predictor weight archive");
  predict->add_option("--predictor", o.predictor, "lstm, cv, cacc, sf or oracle");
  predict->add_option("--time", o.time_index, "Time index (default: last)");
  auto* evaluate = app.add_subcommand("evaluate", "Score a predictor on a held-out dataset");
  common(evaluate);
  evaluate->add_option("--dataset", o.datasets, "Dataset file");
  evaluate->add_option("--weights", o.weights, "Predictor weight archive");
  evaluate->add_option("--predictor", o.predictor, "lstm, cv, cacc, sf or oracle");
  auto* bench = app.add_subcommand("bench", "Inference latency versus crowd size");
  common(bench);
  bench->add_option("--weights", o.weights, "Predictor weight archive");
  bench->add_option("--predictor", o.predictor, "lstm, cv, cacc, sf or oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (pre->parsed()) return cmd_pretrain_ae(o);
    if (train->parsed()) return cmd_train(o);
    if (predict->parsed()) return cmd_predict(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (bench->parsed()) return cmd_bench(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
