// Central-difference gradient verification. Everything runs in the double
// instantiation of the engine: a 1e-4 step is below float's noise floor.
// The suite covers every differentiable op, the layer compositions, and the
// full network + loss, each with a pinned tolerance; the CLI's gradcheck
// subcommand and the test binaries both run it.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "latis/tensor.hpp"

namespace latis {

// Max over all elements of all inputs of
//   |analytic - central_difference| / max(|analytic|, |cd|, 1e-8),
// where f builds a fresh scalar graph from the given leaves on every call.
// The leaves are mutated in place during probing and restored afterwards.
double finite_difference_check(
    const std::function<Tensor<double>(std::vector<Tensor<double>>&)>& f,
    std::vector<Tensor<double>>& inputs, double h = 1e-4);

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;   // relative for gradient rows, absolute for the
                            // forward-oracle rows
  double threshold = 0.0;
  bool pass = false;
};

// Run every check whose name contains `filter` (empty = all). Deterministic:
// all inputs come from the counter RNG with fixed seeds.
std::vector<GradCheckResult> run_gradcheck_suite(const std::string& filter);

}  // namespace latis
