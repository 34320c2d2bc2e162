#include "fedmuon/csv.hpp"

#include "fedmuon/error.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace fedmuon {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_metrics_csv(std::ostream& out, const Trajectory& rows) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.t << ',' << format_double(r.f_mean) << ',' << format_double(r.grad_norm) << ','
        << format_double(r.consensus_x) << ',' << format_double(r.consensus_m) << ','
        << format_double(r.grad_est_err) << '\n';
  }
}

std::string metrics_csv(const Trajectory& rows) {
  std::ostringstream out;
  write_metrics_csv(out, rows);
  return out.str();
}

Trajectory read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader)
    throw Error(ErrorCode::Io, "metrics csv: missing or unexpected header");
  Trajectory rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    long long t = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf", &t, &r.f_mean, &r.grad_norm, &r.consensus_x,
                    &r.consensus_m, &r.grad_est_err) != 6) {
      throw Error(ErrorCode::Io, "metrics csv: malformed line '" + line + "'");
    }
    r.t = t;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace fedmuon
