#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcn/oracle.hpp"

namespace dcn {

// One randomized instance: the largest relative error per checked gradient,
// in the report's column order.
struct GradCheckRow {
  int case_index = 0;
  std::vector<double> max_rel_err;
  bool pass = false;
};

struct GradCheckReport {
  std::string op;
  std::vector<std::string> gradient_names;  // CSV columns after "case"
  std::vector<GradCheckRow> rows;
  int failures = 0;
  double worst = 0.0;
};

// Valid ops: deform-conv (gradients input, weights, offsets), deform-roi and
// deform-ps-roi (gradients input, bin_offsets, normalized_offsets). Offsets
// are drawn with sampling fractions at least kink_margin + 2h away from
// integers, so every finite difference stays on one smooth piece. Throws on
// an unknown op name.
GradCheckReport gradcheck_run(const std::string& op, int cases,
                              std::uint64_t seed,
                              const oracle::FiniteDiffConfig& cfg);

}  // namespace dcn
