#pragma once

#include "lpm/geometry.hpp"
#include "lpm/solvers.hpp"

#include <iosfwd>
#include <span>
#include <string>

namespace lpm {

// 17 significant digits; shortest text that survives a double round-trip.
std::string format_double(double value);

// Header frame,station,pseudo_range_m. One row per station per frame, frames
// ascending, stations ascending inside a frame. LF line endings, UTF-8.
void write_measurements_csv(std::ostream& out, const Trajectory& trajectory);

// Strict reader for the writer's layout. Throws std::runtime_error with the
// offending line number on malformed rows, header mismatch, or out-of-order
// frames/stations. The returned trajectory carries no truth.
Trajectory read_measurements_csv(std::istream& in);

// Header frame,x_m,y_m[,z_m],offset_m,residual_norm,condition,converged,
// degenerate,warmup. Missing numeric fields are written as nan, flags as 0/1.
void write_fixes_csv(std::ostream& out, std::span<const Fix> fixes, int dimension);

}  // namespace lpm
