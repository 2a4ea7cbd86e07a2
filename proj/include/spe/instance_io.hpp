#pragma once

#include "spe/problem.hpp"

#include <string>

namespace spe {

/// Folder layout of a generic instance:
///   leader.csv               name, kind (z|x), integer, cost, ub
///   leader_constraints.csv   row, var, coeff, rhs        (var empty for a row without entries)
///   follower_matrices.csv    block (G0|G1|H0|H1), row, col, value
///   follower_rhs.csv         family (h0|h1), row, value, price_free, scenario
///   vi_cost.csv              kind (R|r), row, col, value  (col empty for r)
///   follower_bounds.csv      family (y|w), index, ub, scenario   (ub may be "inf")
/// Optional:
///   coupling.csv             row, col, value             (absent: identity)
///   scenarios.csv            scenario, weight            (absent: one scenario of weight 1)
void write_problem(const BilevelSpeProblem& p, const std::string& dir);
BilevelSpeProblem read_problem(const std::string& dir);

enum class InstanceKind { Generic, Efl, Rgup, Unknown };

InstanceKind detect_instance(const std::string& dir);

/// Loads any of the three layouts. RGUP folders need a sample file; when `samples` is empty
/// the first samples_K*.csv in the folder is used.
BilevelSpeProblem load_instance(const std::string& dir, const std::string& samples = "");

}  // namespace spe
