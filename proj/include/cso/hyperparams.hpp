#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cso/estimators_cso.hpp"
#include "cso/estimators_fcco.hpp"
#include "cso/extrapolation.hpp"
#include "cso/problems.hpp"

namespace cso {

/// Union of the CSO and FCCO hyperparameters. Batch sizes are 64-bit because
/// suggested values can exceed the int range at small epsilon.
struct HyperParams {
  double gamma = 0.01;
  std::int64_t m = 1;
  std::int64_t B1 = 1;
  std::int64_t B2 = 1;
  double p_out = 1.0;
  std::int64_t S1 = 1;
  std::int64_t S2 = 1;
  double p_in = 1.0;
  ExtrapolationOrder order = ExtrapolationOrder::second;
  DrawMode draw_mode = DrawMode::independent;

  CsoHyperParams cso() const;
  FccoHyperParams fcco() const;
};

enum class Theorem { ebsgd, ebsb, envr_small_n, envr_large_n, nvr };

std::string theorem_name(Theorem theorem);
Theorem theorem_from_name(const std::string& name);

/// (8 a3 sigma3 + 18 a4 sigma2^2 + 5 a4 sigma4) / 96.
double compute_Ce(double a3, double a4, double sigma2, double sigma3, double sigma4);

struct SuggestOptions {
  /// Scales every Theta-formula batch size before the ceiling.
  double multiplier = 1.0;
  /// Replaces C_e * C_g computed from the constants.
  std::optional<double> ce_cg;
};

/// Hyperparameters from the convergence theorems with every hidden constant
/// set to 1. The FCCO theorems need n; "envr" picks the branch from n vs
/// epsilon^(-2/3) through suggest_envr.
HyperParams suggest_hyperparams(Theorem theorem, const SmoothnessConstants& constants, double epsilon,
                                std::optional<std::size_t> n = std::nullopt, const SuggestOptions& options = {});

/// E-NestedVR with the branch chosen by n <= epsilon^(-2/3).
HyperParams suggest_envr(const SmoothnessConstants& constants, double epsilon, std::size_t n,
                         const SuggestOptions& options = {});

}  // namespace cso
