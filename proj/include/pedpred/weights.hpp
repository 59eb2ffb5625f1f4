#pragma once

// Model <-> weight-archive conversion. Sections: "autoencoder" and "predictor"; the
// predictor's architecture settings travel in the archive metadata.

#include <string>
#include <vector>

#include "pedpred/autoencoder.hpp"
#include "pedpred/io.hpp"
#include "pedpred/predictor.hpp"

namespace pedpred::io {

inline const std::vector<std::string>& known_sections() {
  static const std::vector<std::string> names = {"autoencoder", "predictor"};
  return names;
}

inline void store_autoencoder(WeightArchive& a, ae::ConvAutoencoder& model) {
  a.meta["autoencoder.grid_size"] = std::to_string(model.grid_size());
  a.sections["autoencoder"] = nn::export_params(model);
}

inline ae::ConvAutoencoder restore_autoencoder(const WeightArchive& a) {
  auto it = a.sections.find("autoencoder");
  if (it == a.sections.end()) throw IoError("weight archive has no autoencoder section");
  auto gs = a.meta.find("autoencoder.grid_size");
  if (gs == a.meta.end()) throw IoError("weight archive lacks autoencoder.grid_size");
  ae::ConvAutoencoder model(static_cast<int>(parse_int(gs->second, "grid size")));
  try {
    nn::import_params(model, it->second);
  } catch (const ShapeError& e) {
    throw IoError(std::string("autoencoder section does not fit: ") + e.what());
  }
  return model;
}

inline void store_predictor(WeightArchive& a, pred::ModelParams& model) {
  const auto& c = model.config;
  a.meta["predictor.horizon"] = std::to_string(c.horizon);
  a.meta["predictor.dt"] = format_double(c.dt);
  a.meta["predictor.trunc"] = std::to_string(c.trunc);
  a.meta["predictor.grid_extent"] = format_double(c.grid_extent);
  a.meta["predictor.grid_resolution"] = format_double(c.grid_resolution);
  a.meta["predictor.apg_cones"] = std::to_string(c.apg_cones);
  a.meta["predictor.apg_range"] = format_double(c.apg_range);
  a.meta["predictor.use_grid"] = c.use_grid ? "1" : "0";
  a.sections["predictor"] = nn::export_params(model);
}

inline pred::PredictorConfig predictor_config(const WeightArchive& a) {
  auto get = [&](const std::string& k) {
    auto it = a.meta.find("predictor." + k);
    if (it == a.meta.end()) throw IoError("weight archive lacks predictor." + k);
    return it->second;
  };
  pred::PredictorConfig c;
  c.horizon = static_cast<int>(parse_int(get("horizon"), "horizon"));
  c.dt = parse_double(get("dt"), "dt");
  c.trunc = static_cast<int>(parse_int(get("trunc"), "trunc"));
  c.grid_extent = parse_double(get("grid_extent"), "grid extent");
  c.grid_resolution = parse_double(get("grid_resolution"), "grid resolution");
  c.apg_cones = static_cast<int>(parse_int(get("apg_cones"), "apg cones"));
  c.apg_range = parse_double(get("apg_range"), "apg range");
  c.use_grid = get("use_grid") == "1";
  return c;
}

inline pred::ModelParams restore_predictor(const WeightArchive& a) {
  auto it = a.sections.find("predictor");
  if (it == a.sections.end()) throw IoError("weight archive has no predictor section");
  pred::ModelParams model(predictor_config(a), 0);
  try {
    nn::import_params(model, it->second);
  } catch (const ShapeError& e) {
    throw IoError(std::string("predictor section does not fit: ") + e.what());
  }
  if (model.use_grid()) model.grid_conv.set_trainable(false);
  return model;
}

}  // namespace pedpred::io
