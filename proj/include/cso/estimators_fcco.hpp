#pragma once

#include <cstdint>
#include <vector>

#include "cso/common.hpp"
#include "cso/estimators_cso.hpp"
#include "cso/extrapolation.hpp"
#include "cso/problems.hpp"

namespace cso {

/// Per-index trackers of NestedVR. y and z follow E[g_eta(x; i)] and
/// E[grad g_eta(x; i)]; phi is the iterate at which i was last selected.
/// With split batches, y1 and y2 are two independent half-batch trackers and
/// y is their average.
struct InnerState {
  Vector y;
  Vector y1;
  Vector y2;
  Matrix z;
  Vector phi;
  long last_visit = -1;

  // The last value-tracker update, kept so that an i.i.d. copy of y can be
  // redrawn: the trackers it started from, its anchor, and its branch.
  Vector prev_y;
  Vector prev_y1;
  Vector prev_y2;
  Vector prev_phi;
  bool prev_fresh = true;

  bool visited() const { return last_visit >= 0; }
};

struct FccoHyperParams {
  int B1 = 1;
  int B2 = 1;
  double p_out = 1.0;
  int S1 = 1;
  int S2 = 1;
  double p_in = 1.0;
  double gamma = 0.01;
  ExtrapolationOrder order = ExtrapolationOrder::second;

  void validate(std::size_t n) const;
};

struct NestedVrState {
  std::vector<InnerState> inner;
  Vector last_grad;
  Vector last_x;
  bool valid = false;
  bool last_was_large = true;
};

/// A value-tracker update y at x. With `split`, the batch is cut into two
/// halves and each half yields its own tracker; `y` is then their average.
struct TrackerDraw {
  Vector y;
  Vector half1;
  Vector half2;
};

/// Eq. y-update: fresh -> mean of S1 draws of g at x; otherwise
/// y + mean over S2 draws of g_eta(x) - g_eta(phi) with one eta per term.
/// With `split` each half of the batch advances its own half tracker.
/// Updates the trackers, phi, last_visit and the redraw record.
TrackerDraw update_inner_value(InnerState& state, const FccoProblem& problem, std::size_t i, const Vector& x,
                               const FccoHyperParams& params, bool fresh, long t, bool split, RngStream& rng,
                               SampleCounter* counter = nullptr);

/// Same two-branch rule for the Jacobian tracker z, on its own draws. Does
/// not move phi; call before update_inner_value.
void update_inner_jacobian(InnerState& state, const FccoProblem& problem, std::size_t i, const Vector& x,
                           const FccoHyperParams& params, bool fresh, RngStream& rng,
                           SampleCounter* counter = nullptr);

/// Uniform sample of `count` distinct indices from {0..n-1}, sorted.
std::vector<std::size_t> sample_indices(std::size_t n, int count, RngStream& rng);

Vector nestedvr_step(NestedVrState& state, const FccoProblem& problem, const Vector& x, const FccoHyperParams& params,
                     long t, const RngStream& rng, SampleCounter* counter = nullptr);

/// NestedVR with grad f_i(y_i) replaced by the second-order extrapolation
/// over two half-batch trackers.
Vector enestedvr_step(NestedVrState& state, const FccoProblem& problem, const Vector& x,
                      const FccoHyperParams& params, long t, const RngStream& rng, SampleCounter* counter = nullptr);

}  // namespace cso
