#include "lpm/csv.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lpm {
namespace {

constexpr char kMeasurementHeader[] = "frame,station,pseudo_range_m";

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw std::runtime_error("measurements csv, line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_measurements_csv(std::ostream& out, const Trajectory& trajectory) {
  out << kMeasurementHeader << '\n';
  for (const Frame& frame : trajectory.frames) {
    for (std::size_t s = 0; s < frame.pseudo_ranges.size(); ++s) {
      out << frame.frame_index << ',' << s << ','
          << format_double(frame.pseudo_ranges[s]) << '\n';
    }
  }
}

Trajectory read_measurements_csv(std::istream& in) {
  std::string line;
  std::size_t line_number = 1;
  if (!std::getline(in, line)) {
    fail_line(line_number, "empty input");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMeasurementHeader) {
    fail_line(line_number, "expected header '" + std::string(kMeasurementHeader) + "'");
  }

  Trajectory trajectory;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const char* p = line.c_str();
    char* end = nullptr;
    const long long frame_index = std::strtoll(p, &end, 10);
    if (end == p || *end != ',') fail_line(line_number, "bad frame index");
    p = end + 1;
    const long long station = std::strtoll(p, &end, 10);
    if (end == p || *end != ',' || station < 0) fail_line(line_number, "bad station index");
    p = end + 1;
    const double value = std::strtod(p, &end);
    if (end == p || *end != '\0') fail_line(line_number, "bad pseudo-range value");

    if (trajectory.frames.empty() ||
        trajectory.frames.back().frame_index != frame_index) {
      if (!trajectory.frames.empty() &&
          frame_index <= trajectory.frames.back().frame_index) {
        fail_line(line_number, "frame indices must ascend");
      }
      Frame frame;
      frame.frame_index = frame_index;
      trajectory.frames.push_back(std::move(frame));
    }
    Frame& frame = trajectory.frames.back();
    if (static_cast<std::size_t>(station) != frame.pseudo_ranges.size()) {
      fail_line(line_number, "station indices must ascend from 0 within a frame");
    }
    frame.pseudo_ranges.push_back(value);
  }

  if (trajectory.frames.empty()) {
    throw std::runtime_error("measurements csv: no data rows");
  }
  const std::size_t station_count = trajectory.frames.front().pseudo_ranges.size();
  for (const Frame& frame : trajectory.frames) {
    if (frame.pseudo_ranges.size() != station_count) {
      throw std::runtime_error("measurements csv: frame " +
                               std::to_string(frame.frame_index) +
                               " has an inconsistent station count");
    }
  }
  return trajectory;
}

void write_fixes_csv(std::ostream& out, std::span<const Fix> fixes, int dimension) {
  if (dimension != 2 && dimension != 3) {
    throw std::invalid_argument("write_fixes_csv: dimension must be 2 or 3");
  }
  out << "frame,x_m,y_m";
  if (dimension == 3) out << ",z_m";
  out << ",offset_m,residual_norm,condition,converged,degenerate,warmup\n";

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const Fix& fix : fixes) {
    out << fix.frame_index;
    for (int c = 0; c < dimension; ++c) {
      const double v = fix.position && fix.position->size() == dimension
                           ? (*fix.position)(c)
                           : nan;
      out << ',' << format_double(v);
    }
    out << ',' << format_double(fix.offset.value_or(nan));
    out << ',' << format_double(fix.residual_norm);
    out << ',' << format_double(fix.condition_number.value_or(nan));
    out << ',' << (fix.converged ? 1 : 0);
    out << ',' << (fix.degenerate ? 1 : 0);
    out << ',' << (fix.warmup ? 1 : 0);
    out << '\n';
  }
}

}  // namespace lpm
