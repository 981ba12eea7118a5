#pragma once

#include <string>

#include "gom/fit.hpp"

namespace gom::app {

// Fit configuration file (JSON). Every key is optional and defaults to the
// desk-scale schedule:
//   {"total_iterations": 3000, "lr_main": 5e-4, "lr_refiner": 5e-5,
//    "lr": {"colors": 1e-2}, "refiner_start": 1000, "deformer_start": 1500,
//    "subdivide_at": 500, "anneal_iterations": -1, "frozen": ["refiner"],
//    "refine": true, "seed": 0, "background": [0, 0, 0],
//    "weights": {"lpips": 1, "mask": 5, "reg": 1, "laplacian": 10, "normal": 0.1, "color": 0.05}}
// Unknown keys are a FormatError.
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& config);

}  // namespace gom::app
