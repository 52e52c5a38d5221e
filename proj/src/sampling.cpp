#include "cso/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace cso {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

constexpr int kCdfCells = 4096;
constexpr double kInversionTolerance = 1e-12;

template <class F>
double gauss_legendre(const F& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) acc += kGlWeights[i] * f(mid + half * kGlNodes[i]);
  return acc * half;
}

template <class F>
double integrate(const F& f, double lo, double hi, int cells = kCdfCells) {
  const double h = (hi - lo) / cells;
  double acc = 0.0;
  for (int c = 0; c < cells; ++c) acc += gauss_legendre(f, lo + c * h, lo + (c + 1) * h);
  return acc;
}

double double_factorial(int k) {
  double r = 1.0;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

void check_order(int k) { require(k >= 2 && k <= 6, "central moment order must be in 2..6"); }

// Central moments of the mean of m i.i.d. copies, via cumulant scaling.
double averaged_moment(const std::array<double, 7>& mu, int m, int k) {
  const double mm = m;
  std::array<double, 7> kappa{};
  kappa[2] = mu[2];
  kappa[3] = mu[3];
  kappa[4] = mu[4] - 3 * mu[2] * mu[2];
  kappa[5] = mu[5] - 10 * mu[3] * mu[2];
  kappa[6] = mu[6] - 15 * mu[4] * mu[2] - 10 * mu[3] * mu[3] + 30 * mu[2] * mu[2] * mu[2];
  for (int j = 2; j <= 6; ++j) kappa[j] /= std::pow(mm, j - 1);
  switch (k) {
    case 2: return kappa[2];
    case 3: return kappa[3];
    case 4: return kappa[4] + 3 * kappa[2] * kappa[2];
    case 5: return kappa[5] + 10 * kappa[3] * kappa[2];
    default:
      return kappa[6] + 15 * kappa[4] * kappa[2] + 10 * kappa[3] * kappa[3] +
             15 * kappa[2] * kappa[2] * kappa[2];
  }
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------- RngStream

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), key_(mix64(seed + kGolden) ^ mix64(stream_id * kGolden + 0x632BE59BD9B4E019ULL)) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ ^ mix64(counter_ * kGolden));
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform_open()));
  const double theta = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  require(n > 0, "below(n) requires n > 0");
  // Lemire's nearly-divisionless method with rejection for exact uniformity.
  std::uint64_t x = next_u64();
  __uint128_t prod = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(prod);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      prod = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(prod);
    }
  }
  return static_cast<std::uint64_t>(prod >> 64);
}

bool RngStream::bernoulli(double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return uniform() < p;
}

RngStream RngStream::substream(std::uint64_t tag) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(tag + kGolden)) + 0xD1B54A32D192ED03ULL);
}

// ---------------------------------------------------------------- Distribution

struct DensityLaw::CdfTable {
  std::vector<double> cumulative;  // cumulative[c] = P(X < lo + c*h)
  double h;
};

Distribution Distribution::normal(double mean, double variance) {
  require(std::isfinite(mean), "normal: mean must be finite");
  require(variance >= 0.0 && std::isfinite(variance), "normal: variance must be >= 0");
  return Distribution(NormalLaw{mean, variance});
}

Distribution Distribution::uniform(double lo, double hi) {
  require(lo < hi, "uniform: requires lo < hi");
  return Distribution(UniformLaw{lo, hi});
}

Distribution Distribution::exponential(double rate) {
  require(rate > 0.0 && std::isfinite(rate), "exponential: rate must be > 0");
  return Distribution(ExponentialLaw{rate});
}

Distribution Distribution::density(std::function<double(double)> pdf, double lo, double hi,
                                   std::function<double(double)> inverse_cdf) {
  require(static_cast<bool>(pdf), "density: pdf handle is empty");
  require(lo < hi && std::isfinite(lo) && std::isfinite(hi), "density: requires finite lo < hi");
  auto table = std::make_shared<DensityLaw::CdfTable>();
  table->h = (hi - lo) / kCdfCells;
  table->cumulative.resize(kCdfCells + 1, 0.0);
  for (int c = 0; c < kCdfCells; ++c) {
    const double a = lo + c * table->h;
    table->cumulative[c + 1] = table->cumulative[c] + gauss_legendre(pdf, a, a + table->h);
  }
  const double total = table->cumulative.back();
  require(std::abs(total - 1.0) < 1e-6, "density: pdf does not integrate to 1 on [lo, hi]");
  return Distribution(DensityLaw{std::move(pdf), lo, hi, std::move(inverse_cdf), std::move(table)});
}

Distribution Distribution::normal_diag(Vector mean, double variance) {
  require(mean.size() >= 1, "normal_diag: mean must be non-empty");
  require(variance >= 0.0 && std::isfinite(variance), "normal_diag: variance must be >= 0");
  return Distribution(MultivariateNormalDiagLaw{std::move(mean), variance});
}

Distribution Distribution::degenerate(double value) { return Distribution(DegenerateLaw{value}); }

Distribution Distribution::ramp() {
  // F(t) = t^2/4 on [0, 2], so F^{-1}(u) = 2 sqrt(u).
  return density([](double t) { return 0.5 * t; }, 0.0, 2.0,
                 [](double u) { return 2.0 * std::sqrt(u); });
}

int Distribution::dimension() const {
  if (const auto* mvn = std::get_if<MultivariateNormalDiagLaw>(&kind_)) return static_cast<int>(mvn->mean.size());
  return 1;
}

namespace {

double numeric_inverse_cdf(const DensityLaw& law, double u) {
  const auto& cum = law.table->cumulative;
  const double target = u * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), target);
  std::size_t cell = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
  cell = std::min<std::size_t>(cell, cum.size() - 2);
  double a = law.lo + cell * law.table->h;
  double b = a + law.table->h;
  const double base = cum[cell];
  const double cell_start = a;
  while (b - a > kInversionTolerance) {
    const double mid = 0.5 * (a + b);
    const double cdf = base + gauss_legendre(law.pdf, cell_start, mid);
    if (cdf < target) a = mid; else b = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace

double Distribution::sample(RngStream& rng) const {
  return std::visit(
      [&rng](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, NormalLaw>) {
          return law.mean + std::sqrt(law.variance) * rng.normal();
        } else if constexpr (std::is_same_v<T, UniformLaw>) {
          return law.lo + (law.hi - law.lo) * rng.uniform();
        } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
          return -std::log(rng.uniform_open()) / law.rate;
        } else if constexpr (std::is_same_v<T, DensityLaw>) {
          const double u = rng.uniform();
          return law.inverse_cdf ? law.inverse_cdf(u) : numeric_inverse_cdf(law, u);
        } else if constexpr (std::is_same_v<T, DegenerateLaw>) {
          return law.value;
        } else {
          if (law.mean.size() != 1) throw ShapeError("scalar draw requested from a vector law");
          return law.mean[0] + std::sqrt(law.variance) * rng.normal();
        }
      },
      kind_);
}

Vector Distribution::sample_vector(RngStream& rng) const {
  if (const auto* mvn = std::get_if<MultivariateNormalDiagLaw>(&kind_)) {
    const double sd = std::sqrt(mvn->variance);
    Vector out(mvn->mean.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = mvn->mean[i] + sd * rng.normal();
    return out;
  }
  Vector out(1);
  out[0] = sample(rng);
  return out;
}

std::optional<double> Distribution::mean() const {
  return std::visit(
      [](const auto& law) -> std::optional<double> {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, NormalLaw>) return law.mean;
        else if constexpr (std::is_same_v<T, UniformLaw>) return 0.5 * (law.lo + law.hi);
        else if constexpr (std::is_same_v<T, ExponentialLaw>) return 1.0 / law.rate;
        else if constexpr (std::is_same_v<T, DensityLaw>)
          return integrate([&](double t) { return t * law.pdf(t); }, law.lo, law.hi);
        else if constexpr (std::is_same_v<T, DegenerateLaw>) return law.value;
        else {
          if (law.mean.size() == 1) return law.mean[0];
          return std::nullopt;
        }
      },
      kind_);
}

Vector Distribution::mean_vector() const {
  if (const auto* mvn = std::get_if<MultivariateNormalDiagLaw>(&kind_)) return mvn->mean;
  Vector out(1);
  out[0] = *mean();
  return out;
}

double Distribution::exact_central_moment(int k) const {
  check_order(k);
  return std::visit(
      [k](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, NormalLaw>) {
          return k % 2 ? 0.0 : std::pow(law.variance, k / 2) * double_factorial(k - 1);
        } else if constexpr (std::is_same_v<T, UniformLaw>) {
          return k % 2 ? 0.0 : std::pow(0.5 * (law.hi - law.lo), k) / (k + 1);
        } else if constexpr (std::is_same_v<T, ExponentialLaw>) {
          // Subfactorials !k give the central moments of Exp(1).
          constexpr std::array<double, 7> derangements = {1, 0, 1, 2, 9, 44, 265};
          return derangements[k] / std::pow(law.rate, k);
        } else if constexpr (std::is_same_v<T, DensityLaw>) {
          const double mu = integrate([&](double t) { return t * law.pdf(t); }, law.lo, law.hi);
          return integrate([&](double t) { return std::pow(t - mu, k) * law.pdf(t); }, law.lo, law.hi);
        } else if constexpr (std::is_same_v<T, DegenerateLaw>) {
          return 0.0;
        } else {
          const double per = k % 2 ? 0.0 : std::pow(law.variance, k / 2) * double_factorial(k - 1);
          return per * static_cast<double>(law.mean.size());
        }
      },
      kind_);
}

std::string Distribution::describe() const {
  std::ostringstream os;
  std::visit(
      [&os](const auto& law) {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, NormalLaw>) os << "Normal(" << law.mean << ", " << law.variance << ")";
        else if constexpr (std::is_same_v<T, UniformLaw>) os << "Uniform(" << law.lo << ", " << law.hi << ")";
        else if constexpr (std::is_same_v<T, ExponentialLaw>) os << "Exponential(rate=" << law.rate << ")";
        else if constexpr (std::is_same_v<T, DensityLaw>) os << "Density[" << law.lo << ", " << law.hi << "]";
        else if constexpr (std::is_same_v<T, DegenerateLaw>) os << "Degenerate(" << law.value << ")";
        else os << "NormalDiag(d=" << law.mean.size() << ", " << law.variance << ")";
      },
      kind_);
  return os.str();
}

// ---------------------------------------------------------------- free functions

double draw(const Distribution& dist, RngStream& rng) { return dist.sample(rng); }

Vector draw_vector(const Distribution& dist, RngStream& rng) { return dist.sample_vector(rng); }

double draw_mean(const SampleAverage& avg, RngStream& rng) {
  require(avg.m >= 1, "sample average requires m >= 1");
  if (avg.m == 1) return avg.base.sample(rng);
  double acc = 0.0;
  for (int i = 0; i < avg.m; ++i) acc += avg.base.sample(rng);
  return acc / avg.m;
}

Vector draw_mean_vector(const SampleAverage& avg, RngStream& rng) {
  require(avg.m >= 1, "sample average requires m >= 1");
  Vector acc = avg.base.sample_vector(rng);
  if (avg.m == 1) return acc;
  for (int i = 1; i < avg.m; ++i) acc += avg.base.sample_vector(rng);
  return acc / avg.m;
}

double sample_central_moment(std::span<const double> xs, int k) {
  check_order(k);
  require(xs.size() >= 2, "central moment needs at least two samples");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) {
    const double c = x - mean;
    double p = c * c;
    for (int j = 2; j < k; ++j) p *= c;
    acc += p;
  }
  return acc / static_cast<double>(xs.size());
}

double central_moment(const Distribution& dist, int k, RngStream& rng, std::size_t n_samples) {
  return central_moment(SampleAverage{dist, 1}, k, rng, n_samples);
}

double central_moment(const SampleAverage& avg, int k, RngStream& rng, std::size_t n_samples) {
  check_order(k);
  require(n_samples >= 2, "central moment needs n_samples >= 2");
  if (avg.base.is_scalar()) {
    std::vector<double> xs(n_samples);
    for (auto& x : xs) x = draw_mean(avg, rng);
    return sample_central_moment(xs, k);
  }
  const int dim = avg.base.dimension();
  std::vector<std::vector<double>> coords(dim, std::vector<double>(n_samples));
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector v = draw_mean_vector(avg, rng);
    for (int i = 0; i < dim; ++i) coords[i][s] = v[i];
  }
  double acc = 0.0;
  for (const auto& c : coords) acc += sample_central_moment(c, k);
  return acc;
}

double exact_central_moment(const Distribution& dist, int k) { return dist.exact_central_moment(k); }

double exact_central_moment(const SampleAverage& avg, int k) {
  check_order(k);
  require(avg.m >= 1, "sample average requires m >= 1");
  if (!avg.base.is_scalar()) {
    const auto& mvn = std::get<MultivariateNormalDiagLaw>(avg.base.kind());
    const double v = mvn.variance / avg.m;
    const double per = k % 2 ? 0.0 : std::pow(v, k / 2) * double_factorial(k - 1);
    return per * static_cast<double>(mvn.mean.size());
  }
  std::array<double, 7> mu{};
  for (int j = 2; j <= 6; ++j) mu[j] = avg.base.exact_central_moment(j);
  return averaged_moment(mu, avg.m, k);
}

double predicted_moment_of_average(double sigma2, double sigma3, double sigma4, int m, int k) {
  require(m >= 1, "predicted moment requires m >= 1");
  const double mm = m;
  switch (k) {
    case 2: return sigma2 / mm;
    case 3: return sigma3 / (mm * mm);
    case 4: return sigma4 / (mm * mm * mm) + 3.0 * (mm - 1.0) * sigma2 * sigma2 / (mm * mm * mm);
    default: throw ParameterError("predicted moment supports k in {2, 3, 4}");
  }
}

}  // namespace cso
