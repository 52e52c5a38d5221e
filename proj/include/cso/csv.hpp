#pragma once

#include <string>
#include <vector>

#include "cso/runner.hpp"

namespace cso {

/// Write failures (missing directory, full disk, permissions).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// 17 significant digits, '.' decimal separator, independent of the locale.
std::string format_double(double value);

using CsvRow = std::vector<std::string>;

void write_csv(const std::string& path, const CsvRow& header, const std::vector<CsvRow>& rows);

namespace csv_header {
inline const CsvRow trace{"iter", "inner_samples", "outer_samples", "error"};
inline const CsvRow error_curve{"n_estimates", "abs_error"};
inline const CsvRow bias_sweep{"m", "bias", "ci_halfwidth", "variance", "reps"};
inline const CsvRow moments{"law", "m", "k", "empirical", "predicted", "rel_error"};
inline const CsvRow measure_bias{"order", "m", "bias", "ci_halfwidth", "variance", "reps"};
}  // namespace csv_header

std::vector<CsvRow> trace_rows(const RunTrace& trace);
void write_trace_csv(const std::string& path, const RunTrace& trace);

}  // namespace cso
