#include "train_config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "gom/error.hpp"

namespace gom::app {

using nlohmann::json;

namespace {

const std::set<std::string> kKeys{"total_iterations", "lr_main",       "lr_refiner",   "lr",
                                  "refiner_start",    "deformer_start", "subdivide_at", "anneal_iterations",
                                  "frozen",           "refine",         "seed",         "background",
                                  "weights"};

ParamGroup group_named(const std::string& name) {
  const auto g = parse_param_group(name);
  if (!g || *g == ParamGroup::pose_correction) {
    throw FormatError("fit config: unknown parameter group \"" + name + "\"");
  }
  return *g;
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig c = TrainConfig::desk_scale();
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw FormatError("fit config: expected an object");
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.count(key)) throw FormatError("fit config: unknown key \"" + key + "\"");
    }
    c.total_iterations = j.value("total_iterations", c.total_iterations);
    c.lr_main = j.value("lr_main", c.lr_main);
    c.lr_refiner = j.value("lr_refiner", c.lr_refiner);
    c.refiner_start = j.value("refiner_start", c.refiner_start);
    c.deformer_start = j.value("deformer_start", c.deformer_start);
    c.subdivide_at = j.value("subdivide_at", c.subdivide_at);
    c.anneal_iterations = j.value("anneal_iterations", c.anneal_iterations);
    c.refine = j.value("refine", c.refine);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lr")) {
      for (const auto& [name, lr] : j.at("lr").items()) {
        c.lr_override[static_cast<std::size_t>(group_named(name))] = lr.get<double>();
      }
    }
    if (j.contains("frozen")) {
      for (const auto& name : j.at("frozen")) {
        c.frozen[static_cast<std::size_t>(group_named(name.get<std::string>()))] = true;
      }
    }
    if (j.contains("background")) {
      const auto bg = j.at("background").get<std::vector<double>>();
      if (bg.size() != 3) throw FormatError("fit config: background needs 3 values");
      c.render.background = Vec3(bg[0], bg[1], bg[2]);
    }
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      for (const auto& [key, _] : w.items()) {
        static const std::set<std::string> names{"lpips", "mask", "reg", "laplacian", "normal", "color"};
        if (!names.count(key)) throw FormatError("fit config: unknown loss weight \"" + key + "\"");
      }
      c.weights.lpips = w.value("lpips", c.weights.lpips);
      c.weights.mask = w.value("mask", c.weights.mask);
      c.weights.reg = w.value("reg", c.weights.reg);
      c.weights.laplacian = w.value("laplacian", c.weights.laplacian);
      c.weights.normal = w.value("normal", c.weights.normal);
      c.weights.color = w.value("color", c.weights.color);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("fit config: ") + e.what());
  }
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["total_iterations"] = c.total_iterations;
  j["lr_main"] = c.lr_main;
  j["lr_refiner"] = c.lr_refiner;
  j["lr"] = json::object();
  j["frozen"] = json::array();
  for (ParamGroup g : kTrainableGroups) {
    const auto i = static_cast<std::size_t>(g);
    if (c.lr_override[i]) j["lr"][std::string(to_string(g))] = *c.lr_override[i];
    if (c.frozen[i]) j["frozen"].push_back(std::string(to_string(g)));
  }
  j["refiner_start"] = c.refiner_start;
  j["deformer_start"] = c.deformer_start;
  j["subdivide_at"] = c.subdivide_at;
  j["anneal_iterations"] = c.anneal_iterations;
  j["refine"] = c.refine;
  j["seed"] = c.seed;
  j["background"] = {c.render.background.x(), c.render.background.y(), c.render.background.z()};
  j["weights"] = {{"lpips", c.weights.lpips},         {"mask", c.weights.mask},
                  {"reg", c.weights.reg},             {"laplacian", c.weights.laplacian},
                  {"normal", c.weights.normal},       {"color", c.weights.color}};
  return j.dump(2);
}

}  // namespace gom::app
