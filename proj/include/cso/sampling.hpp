#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "cso/common.hpp"

namespace cso {

/// Counter-based random stream.
///
/// The output is a pure function of (seed, stream_id, position), so a stream
/// can be re-created anywhere to replay the same draws. Substreams are derived
/// from the stream key only, never from the current position, which lets
/// callers key draws by (iteration, role, sample index) independent of the
/// order in which work is scheduled.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);

  RngStream substream(std::uint64_t tag) const;
  template <class... Tags>
  RngStream substream(std::uint64_t tag, std::uint64_t next, Tags... rest) const {
    return substream(tag).substream(next, rest...);
  }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.seed_ == b.seed_ && a.stream_id_ == b.stream_id_ && a.counter_ == b.counter_ &&
           a.has_spare_ == b.has_spare_ && (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x);

struct NormalLaw {
  double mean;
  double variance;
};

struct UniformLaw {
  double lo;
  double hi;
};

/// Exponential law parameterized by rate (mean 1/rate).
struct ExponentialLaw {
  double rate;
};

struct DensityLaw {
  std::function<double(double)> pdf;
  double lo;
  double hi;
  /// Closed-form inverse CDF; numeric inversion is used when empty.
  std::function<double(double)> inverse_cdf;
  struct CdfTable;
  std::shared_ptr<const CdfTable> table;
};

struct MultivariateNormalDiagLaw {
  Vector mean;
  double variance;
};

struct DegenerateLaw {
  double value;
};

class Distribution {
 public:
  using Kind = std::variant<NormalLaw, UniformLaw, ExponentialLaw, DensityLaw,
                            MultivariateNormalDiagLaw, DegenerateLaw>;

  static Distribution normal(double mean, double variance);
  static Distribution uniform(double lo, double hi);
  static Distribution exponential(double rate);
  static Distribution density(std::function<double(double)> pdf, double lo, double hi,
                              std::function<double(double)> inverse_cdf = {});
  static Distribution normal_diag(Vector mean, double variance);
  static Distribution degenerate(double value);
  /// The law with density t/2 on [0, 2].
  static Distribution ramp();

  const Kind& kind() const { return kind_; }
  int dimension() const;
  bool is_scalar() const { return dimension() == 1; }

  /// One scalar draw; throws ShapeError for vector laws.
  double sample(RngStream& rng) const;
  Vector sample_vector(RngStream& rng) const;

  std::optional<double> mean() const;
  Vector mean_vector() const;
  /// Closed-form (or quadrature) central moment E[(X - EX)^k], k in 2..6.
  /// Vector laws return the coordinate sum of the per-coordinate moments.
  double exact_central_moment(int k) const;
  std::string describe() const;

 private:
  explicit Distribution(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// The law of the mean of m i.i.d. draws from `base`.
struct SampleAverage {
  Distribution base;
  int m = 1;
};

double draw(const Distribution& dist, RngStream& rng);
Vector draw_vector(const Distribution& dist, RngStream& rng);
double draw_mean(const SampleAverage& avg, RngStream& rng);
Vector draw_mean_vector(const SampleAverage& avg, RngStream& rng);

/// Empirical central moment of a sample (two-pass).
double sample_central_moment(std::span<const double> xs, int k);
double central_moment(const Distribution& dist, int k, RngStream& rng, std::size_t n_samples);
double central_moment(const SampleAverage& avg, int k, RngStream& rng, std::size_t n_samples);
double exact_central_moment(const Distribution& dist, int k);
/// Exact central moment of the averaged law, obtained through cumulant scaling.
double exact_central_moment(const SampleAverage& avg, int k);

/// Moments of the averaged law in terms of the base moments:
/// k=2: s2/m, k=3: s3/m^2, k=4: s4/m^3 + 3(m-1)s2^2/m^3.
double predicted_moment_of_average(double sigma2, double sigma3, double sigma4, int m, int k);

}  // namespace cso
