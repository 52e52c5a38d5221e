#include "cso/csv.hpp"

#include <charconv>
#include <fstream>

namespace cso {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  auto line = [&](const CsvRow& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  };
  line(header);
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw IoError("row width does not match the header of '" + path + "'");
    line(row);
  }
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<CsvRow> trace_rows(const RunTrace& trace) {
  std::vector<CsvRow> rows;
  rows.reserve(trace.rows.size());
  for (const auto& r : trace.rows)
    rows.push_back({std::to_string(r.iteration), std::to_string(r.inner_samples), std::to_string(r.outer_samples),
                    format_double(r.metric)});
  return rows;
}

void write_trace_csv(const std::string& path, const RunTrace& trace) {
  write_csv(path, csv_header::trace, trace_rows(trace));
}

}  // namespace cso
