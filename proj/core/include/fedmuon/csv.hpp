#pragma once

#include "fedmuon/metrics.hpp"

#include <iosfwd>
#include <string>

namespace fedmuon {

// %.17g: round-trips every double.
std::string format_double(double value);

inline constexpr const char* kMetricsCsvHeader =
    "t,f_mean,grad_norm,consensus_x,consensus_m,grad_est_err";

// Header plus one LF-terminated line per row.
void write_metrics_csv(std::ostream& out, const Trajectory& rows);
std::string metrics_csv(const Trajectory& rows);

// Parses what write_metrics_csv produced. Throws Error(Io) on malformed input.
Trajectory read_metrics_csv(std::istream& in);

}  // namespace fedmuon
