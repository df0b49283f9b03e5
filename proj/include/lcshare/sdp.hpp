#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace lcshare::sdp {

// Affine symmetric-matrix expression F(y) = F0 + sum_i y_i * F[i].
struct MatExpr {
  Eigen::MatrixXd F0;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;
  int dim() const { return static_cast<int>(F0.rows()); }
  Eigen::MatrixXd eval(const Eigen::VectorXd& y) const;
};

// minimize c'y  subject to  F_b(y) <= 0 (each block, in the PSD order),
//                           eq_A y = eq_b,  |y_i| <= var_bound.
struct Problem {
  int num_vars = 0;
  Eigen::VectorXd c;       // empty or zero => feasibility problem
  std::vector<MatExpr> blocks;
  Eigen::MatrixXd eq_A;    // 0x0 when absent
  Eigen::VectorXd eq_b;
  double var_bound = 1e7;
};

enum class Status { optimal, infeasible, numerical_failure };

struct Options {
  double gap_tol = 1e-7;        // stop when barrier gap bound theta/t drops below
  double center_tol = 0.05;     // Newton decrement target per centering
  double mu = 10.0;             // barrier parameter growth
  double t0 = 1.0;
  int max_center_iters = 200;
  int max_outer = 80;
  double feas_eig = -1e-6;      // phase-I exit: max eigenvalue below this
  std::optional<Eigen::VectorXd> y0;  // warm start (skips phase I if interior)
  bool center_only = false;     // analytic centering from y0, no path following
};

struct Solution {
  Status status = Status::numerical_failure;
  Eigen::VectorXd y;
  double objective = 0.0;
  double gap = 0.0;         // final barrier gap bound
  double min_margin = 0.0;  // min over blocks of -lambda_max(F_b(y))
  int newton_iters = 0;
  std::string message;
};

Solution solve(const Problem& prob, const Options& opts = {});

const char* status_name(Status s);

nlohmann::json problem_to_json(const Problem& prob);
Problem problem_from_json(const nlohmann::json& j);
nlohmann::json solution_to_json(const Solution& sol);

}  // namespace lcshare::sdp
