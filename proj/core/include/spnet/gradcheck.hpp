#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "spnet/tensor.hpp"

namespace spnet {

inline constexpr double kGradcheckStep = 1e-6;
inline constexpr double kGradcheckTolerance = 1e-5;
// Relative errors are |a - n| / max(|a|, |n|, floor * max(1, G)), G being the
// largest analytic gradient magnitude of the problem. Central differences
// carry rounding noise of order eps * |loss| / step, the same for every
// entry, so entries far below the problem's gradient scale are compared on
// that scale instead of their own.
inline constexpr double kGradcheckFloor = 1e-3;

struct GradcheckEntry {
  std::string name;
  std::size_t size = 0;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  double max_abs_gradient = 0.0;
  // Entries whose +-step crossed a rectifier kink: compared with a one-sided
  // difference, or skipped when both sides crossed.
  std::size_t one_sided = 0;
  std::size_t skipped = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::string target;
  double tolerance = kGradcheckTolerance;
  std::vector<GradcheckEntry> entries;
  bool passed() const;
  std::string to_text() const;
};

// A scalar function of a set of double tensors with an analytic gradient.
class GradcheckProblem {
 public:
  virtual ~GradcheckProblem() = default;
  // Tensors to check (parameters and, where meaningful, the inputs).
  virtual ParameterList<double> tensors() = 0;
  // Loss value at the current tensor values.
  virtual double loss() = 0;
  // Fills every tensor's grad (overwriting) at the current values.
  virtual void gradients() = 0;
};

struct GradcheckOptions {
  double step = kGradcheckStep;
  double tolerance = kGradcheckTolerance;
  double floor = kGradcheckFloor;
  // Check at most this many seeded-random entries per tensor (0 = all).
  std::size_t max_entries = 0;
  std::uint64_t entry_seed = 0;
  // Hook applied to the analytic gradients before comparison; tests use it to
  // inject faults.
  std::function<void(ParameterList<double>&)> tamper;
};

GradcheckReport gradcheck(GradcheckProblem& problem, const GradcheckOptions& options = {});

// Built-in reduced instances: "spconv" (SPConv with mlp3 attention, 32
// points), "attention" (3-layer attention MLP), "gaussian" (SPConv with
// Gaussian attention), "block" (residual block, 64 points, C_in 4, C_out 8),
// "batchnorm" (train-mode batch norm), "loss" (cross-entropy), "model" (the
// full network at reduced width). Batch norm runs in identity mode except
// in "batchnorm". Throws ParameterError for an unknown name.
std::unique_ptr<GradcheckProblem> make_gradcheck_problem(std::string_view target, std::uint64_t seed);
std::vector<std::string> gradcheck_targets();

}  // namespace spnet
