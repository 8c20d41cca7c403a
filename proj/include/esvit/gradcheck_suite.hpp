#pragma once

// Finite-difference checks over every differentiable primitive and the full
// ES-ViT forward pass. Shared by `esvit gradcheck` and the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "esvit/model.hpp"

namespace esvit {

struct GradSuiteResult {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

struct GradSuiteOptions {
  std::uint64_t seed = 7;
  double primitive_tolerance = 1e-4;
  double model_tolerance = 1e-3;
  std::size_t model_coordinates = 50;
};

std::vector<GradSuiteResult> run_primitive_gradchecks(const GradSuiteOptions& options = {});

// Cross-entropy of a random image through `cfg` with every parameter drawn at
// random (zero-initialised gates and projections included), sampling
// `model_coordinates` parameter coordinates.
GradSuiteResult run_model_gradcheck(const ModelConfig& cfg, const GradSuiteOptions& options = {});

}  // namespace esvit
