#include "cso/hyperparams.hpp"

#include <cmath>
#include <limits>

namespace cso {

namespace {

int narrow(std::int64_t v, const char* field) {
  if (v < 1 || v > std::numeric_limits<int>::max())
    throw ParameterError(std::string(field) + " = " + std::to_string(v) + " is outside [1, INT_MAX]");
  return static_cast<int>(v);
}

std::int64_t ceil_count(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v) || v > 9.0e18)
    throw ParameterError(std::string("suggested ") + field + " is not a finite positive count");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(v)));
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be positive");
}

}  // namespace

CsoHyperParams HyperParams::cso() const {
  CsoHyperParams p;
  p.m = narrow(m, "m");
  p.B1 = narrow(B1, "B1");
  p.B2 = narrow(B2, "B2");
  p.p_out = p_out;
  p.gamma = gamma;
  p.order = order;
  p.draw_mode = draw_mode;
  return p;
}

FccoHyperParams HyperParams::fcco() const {
  FccoHyperParams p;
  p.B1 = narrow(B1, "B1");
  p.B2 = narrow(B2, "B2");
  p.p_out = p_out;
  p.S1 = narrow(S1, "S1");
  p.S2 = narrow(S2, "S2");
  p.p_in = p_in;
  p.gamma = gamma;
  p.order = order;
  return p;
}

std::string theorem_name(Theorem theorem) {
  switch (theorem) {
    case Theorem::ebsgd: return "ebsgd";
    case Theorem::ebsb: return "ebsb";
    case Theorem::envr_small_n: return "envr_small_n";
    case Theorem::envr_large_n: return "envr_large_n";
    case Theorem::nvr: return "nvr";
  }
  return "";
}

Theorem theorem_from_name(const std::string& name) {
  for (Theorem t : {Theorem::ebsgd, Theorem::ebsb, Theorem::envr_small_n, Theorem::envr_large_n, Theorem::nvr})
    if (theorem_name(t) == name) return t;
  throw ParameterError("unknown theorem '" + name + "' (ebsgd, ebsb, envr, envr_small_n, envr_large_n, nvr)");
}

double compute_Ce(double a3, double a4, double sigma2, double sigma3, double sigma4) {
  require(a3 >= 0.0 && a4 >= 0.0 && sigma2 >= 0.0 && sigma3 >= 0.0 && sigma4 >= 0.0,
          "C_e inputs must be nonnegative");
  return (8.0 * a3 * sigma3 + 18.0 * a4 * sigma2 * sigma2 + 5.0 * a4 * sigma4) / 96.0;
}

HyperParams suggest_hyperparams(Theorem theorem, const SmoothnessConstants& c, double epsilon,
                                std::optional<std::size_t> n, const SuggestOptions& options) {
  require_positive(epsilon, "epsilon");
  require_positive(options.multiplier, "multiplier");
  const double k = options.multiplier;
  const double ce_cg = options.ce_cg ? *options.ce_cg : compute_Ce(c.a[2], c.a[3], c.sigma2, c.sigma3, c.sigma4) * c.C_g;
  auto need_n = [&]() {
    if (!n || *n == 0) throw ParameterError("this theorem needs the finite-sum size n");
    return *n;
  };

  HyperParams h;
  h.order = ExtrapolationOrder::second;
  switch (theorem) {
    case Theorem::ebsgd:
      require_positive(ce_cg, "C_e * C_g");
      require_positive(c.L_F, "L_F");
      h.m = ceil_count(k * ce_cg / std::sqrt(epsilon), "m");
      h.gamma = 1.0 / (2.0 * c.L_F);
      break;
    case Theorem::ebsb: {
      require_positive(ce_cg, "C_e * C_g");
      require_positive(c.L_F, "L_F");
      require_positive(c.Ltilde_F, "Ltilde_F");
      h.m = ceil_count(k * ce_cg / std::sqrt(epsilon), "m");
      const double b1 = (c.Ltilde_F * c.Ltilde_F / static_cast<double>(h.m) + c.C_F * c.C_F) / (epsilon * epsilon);
      h.B1 = ceil_count(k * b1, "B1");
      h.B2 = ceil_count(std::sqrt(static_cast<double>(h.B1)), "B2");
      h.p_out = 1.0 / static_cast<double>(h.B2);
      h.gamma = 1.0 / (13.0 * c.L_F);
      break;
    }
    case Theorem::envr_small_n: {
      const auto nn = need_n();
      require_positive(c.L_F, "L_F");
      require_positive(c.Ltilde_F, "Ltilde_F");
      h.B1 = h.B2 = static_cast<std::int64_t>(nn);
      h.p_out = 1.0;
      h.S1 = ceil_count(k * c.Ltilde_F * c.Ltilde_F / (epsilon * epsilon), "S1");
      h.S2 = std::min(h.S1, ceil_count(k * c.Ltilde_F / epsilon, "S2"));
      h.p_in = std::min(1.0, epsilon / c.Ltilde_F);
      h.gamma = 1.0 / c.L_F;
      break;
    }
    case Theorem::envr_large_n: {
      const auto nn = need_n();
      require_positive(ce_cg, "C_e * C_g");
      require_positive(c.L_F, "L_F");
      const double nd = static_cast<double>(nn);
      h.B1 = static_cast<std::int64_t>(nn);
      h.B2 = ceil_count(std::sqrt(nd), "B2");
      h.p_out = 1.0 / static_cast<double>(h.B2);
      const double s = std::max(ce_cg / std::sqrt(epsilon), c.Ltilde_F * c.Ltilde_F / (nd * epsilon * epsilon));
      h.S1 = h.S2 = ceil_count(k * s, "S1");
      h.p_in = 1.0;
      h.gamma = 1.0 / c.L_F;
      break;
    }
    case Theorem::nvr: {
      const auto nn = need_n();
      require_positive(c.L_F, "L_F");
      require_positive(c.Ltilde_F, "Ltilde_F");
      const double nd = static_cast<double>(nn);
      h.order = ExtrapolationOrder::first;
      h.B1 = static_cast<std::int64_t>(nn);
      h.B2 = ceil_count(std::sqrt(nd), "B2");
      h.p_out = 1.0 / static_cast<double>(h.B2);
      h.S1 = ceil_count(k * c.Ltilde_F * c.Ltilde_F / (epsilon * epsilon), "S1");
      h.S2 = std::min(h.S1, ceil_count(k * c.Ltilde_F / epsilon, "S2"));
      h.p_in = 1.0 / static_cast<double>(h.S2);
      h.gamma = 1.0 / (std::sqrt(nd) * c.L_F);
      break;
    }
  }
  return h;
}

HyperParams suggest_envr(const SmoothnessConstants& constants, double epsilon, std::size_t n,
                         const SuggestOptions& options) {
  require_positive(epsilon, "epsilon");
  const bool small = static_cast<double>(n) <= std::pow(epsilon, -2.0 / 3.0);
  return suggest_hyperparams(small ? Theorem::envr_small_n : Theorem::envr_large_n, constants, epsilon, n, options);
}

}  // namespace cso
