// Copyright 2026 The gavg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GAVG_TRACE_HPP
#define GAVG_TRACE_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gavg/core.hpp"

namespace gavg {

/// Formats a double with 12 significant digits in the C locale.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct TraceEntry {
  std::int64_t k = 0;
  double f_gap = 0.0;
  double grad_norm_sq = 0.0;
  std::optional<Vector> iterate;
  // Search direction used by the step taken at iteration k, when the method
  // has one and snapshots are on.
  std::optional<Vector> direction;
};

enum class SnapshotPolicy { none, iterate };

/// Per-trial record of the optimality gap at checkpoint iterations.
struct Trace {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string method_id;
  std::string schedule_id;
  SnapshotPolicy snapshots = SnapshotPolicy::none;
  std::vector<TraceEntry> entries;

  std::optional<std::int64_t> last_k() const {
    if (entries.empty()) return std::nullopt;
    return entries.back().k;
  }
};

/// Appends (k, F(x) - F*, |grad F(x)|^2) evaluated with the problem's exact
/// full objective, plus an iterate snapshot when the policy asks for one.
template <Objective P>
TraceEntry& record(Trace& trace, std::int64_t k, const P& problem, const Vector& x) {
  if (auto last = trace.last_k(); last && k <= *last)
    throw UsageError("record: iteration " + std::to_string(k) +
                     " does not follow last recorded " + std::to_string(*last));
  check_dim(x, problem.dim(), "record");
  TraceEntry e;
  e.k = k;
  e.f_gap = problem.gap(x);
  e.grad_norm_sq = problem.full_gradient(x).squaredNorm();
  if (trace.snapshots == SnapshotPolicy::iterate) e.iterate = x;
  trace.entries.push_back(std::move(e));
  return trace.entries.back();
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "k,f_gap,grad_norm_sq\n";
  for (const auto& e : trace.entries)
    os << e.k << ',' << format_real(e.f_gap) << ',' << format_real(e.grad_norm_sq) << '\n';
}

/// Parses the `k,f_gap,grad_norm_sq` CSV back into entries (no snapshots).
inline Trace read_trace_csv(std::istream& is) {
  Trace trace;
  std::string line;
  if (!std::getline(is, line) || line != "k,f_gap,grad_norm_sq")
    throw DataError("trace csv: missing or unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    TraceEntry e;
    char c1 = 0, c2 = 0;
    if (!(row >> e.k >> c1 >> e.f_gap >> c2 >> e.grad_norm_sq) || c1 != ',' || c2 != ',')
      throw DataError("trace csv: malformed row '" + line + "'");
    if (auto last = trace.last_k(); last && e.k <= *last)
      throw DataError("trace csv: iterations not strictly increasing");
    trace.entries.push_back(std::move(e));
  }
  return trace;
}

}  // namespace gavg

#endif  // GAVG_TRACE_HPP
