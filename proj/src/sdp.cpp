#include "lcshare/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcshare/errors.hpp"
#include "lcshare/matjson.hpp"

namespace lcshare::sdp {

Eigen::MatrixXd MatExpr::eval(const Eigen::VectorXd& y) const {
  Eigen::MatrixXd m = F0;
  for (const auto& [idx, coef] : terms) m += y(idx) * coef;
  return m;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    default: return "numerical_failure";
  }
}

namespace {

struct Workspace {
  int nv = 0;                      // reduced variable count
  Eigen::VectorXd c;               // reduced objective
  std::vector<MatExpr> blocks;     // reduced blocks
  double bound = 1e7;
  double theta = 0.0;              // total barrier degree

  // Barrier value; returns infinity when not strictly interior.
  double barrier(const Eigen::VectorXd& z, std::vector<Eigen::LLT<Eigen::MatrixXd>>* llts) const {
    double phi = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      Eigen::MatrixXd S = -blocks[b].eval(z);
      Eigen::LLT<Eigen::MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      double logdet = 0.0;
      for (int i = 0; i < S.rows(); ++i) {
        double l = llt.matrixLLT()(i, i);
        if (!(l > 0.0)) return std::numeric_limits<double>::infinity();
        logdet += std::log(l);
      }
      phi -= 2.0 * logdet;
      if (llts) (*llts)[b] = std::move(llt);
    }
    for (int j = 0; j < nv; ++j) {
      double lo = bound + z(j), hi = bound - z(j);
      if (!(lo > 0.0) || !(hi > 0.0)) return std::numeric_limits<double>::infinity();
      phi -= std::log(lo) + std::log(hi);
    }
    return phi;
  }

  bool interior(const Eigen::VectorXd& z) const {
    return std::isfinite(barrier(z, nullptr));
  }

  double max_eig(const Eigen::VectorXd& z) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.eval(z), Eigen::EigenvaluesOnly);
      worst = std::max(worst, es.eigenvalues().maxCoeff());
    }
    return worst;
  }
};

// One Newton centering pass for psi(z) = t c'z + phi(z).
// Returns false on a line-search stall.
bool center(const Workspace& w, double t, Eigen::VectorXd& z, const Options& opts,
            int& newton_iters) {
  const int nv = w.nv;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts(w.blocks.size());
  for (int it = 0; it < opts.max_center_iters; ++it) {
    double psi = w.barrier(z, &llts);
    if (!std::isfinite(psi)) return false;
    psi += t * w.c.dot(z);

    Eigen::VectorXd g = t * w.c;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nv, nv);
    for (std::size_t b = 0; b < w.blocks.size(); ++b) {
      const auto& blk = w.blocks[b];
      int n = blk.dim();
      Eigen::MatrixXd Sinv = llts[b].solve(Eigen::MatrixXd::Identity(n, n));
      std::size_t na = blk.terms.size();
      std::vector<Eigen::MatrixXd> G(na);
      for (std::size_t a = 0; a < na; ++a) {
        const auto& [idx, F] = blk.terms[a];
        Eigen::MatrixXd W = Sinv * F;
        g(idx) += W.trace();
        G[a] = W * Sinv;  // S^-1 F S^-1, symmetric
      }
      for (std::size_t a = 0; a < na; ++a) {
        int ia = blk.terms[a].first;
        for (std::size_t d = a; d < na; ++d) {
          int id = blk.terms[d].first;
          double h = G[a].cwiseProduct(blk.terms[d].second).sum();
          H(ia, id) += h;
          if (ia != id) H(id, ia) += h;
        }
      }
    }
    for (int j = 0; j < nv; ++j) {
      double lo = w.bound + z(j), hi = w.bound - z(j);
      g(j) += 1.0 / hi - 1.0 / lo;
      H(j, j) += 1.0 / (hi * hi) + 1.0 / (lo * lo);
    }

    Eigen::LDLT<Eigen::MatrixXd> hd(H);
    Eigen::VectorXd dz = hd.solve(-g);
    if (hd.info() != Eigen::Success || !dz.allFinite()) {
      H.diagonal().array() += 1e-10 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
      dz = H.ldlt().solve(-g);
      if (!dz.allFinite()) return false;
    }
    double decr2 = -g.dot(dz);
    ++newton_iters;
    if (decr2 <= opts.center_tol * opts.center_tol) return true;

    double alpha = 1.0;
    bool stepped = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd zn = z + alpha * dz;
      double psin = w.barrier(zn, nullptr);
      if (std::isfinite(psin)) {
        psin += t * w.c.dot(zn);
        if (psin <= psi + 0.25 * alpha * g.dot(dz)) {
          z = zn;
          stepped = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!stepped) return decr2 <= 1e-6;  // stalled: accept only near-centered points
  }
  return true;  // iteration cap: hand back the best point found
}

// Path following from a strictly interior z.
void follow_path(const Workspace& w, Eigen::VectorXd& z, const Options& opts, Solution& sol,
                 double* t_out) {
  double t = opts.t0;
  double cnorm = std::max(1.0, w.c.cwiseAbs().maxCoeff());
  t = std::max(t, w.theta / std::max(1.0, 10.0 * cnorm));
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    if (!center(w, t, z, opts, sol.newton_iters)) break;
    if (w.theta / t < opts.gap_tol) break;
    t *= opts.mu;
  }
  if (t_out) *t_out = t;
}

}  // namespace

Solution solve(const Problem& prob, const Options& opts) {
  Solution sol;
  if (prob.num_vars <= 0) throw ValidationError("sdp: problem has no variables");
  for (const auto& blk : prob.blocks) {
    if (blk.F0.rows() != blk.F0.cols()) throw ValidationError("sdp: block F0 must be square");
    for (const auto& [idx, F] : blk.terms) {
      if (idx < 0 || idx >= prob.num_vars) throw ValidationError("sdp: term index out of range");
      if (F.rows() != blk.F0.rows() || F.cols() != blk.F0.cols())
        throw ValidationError("sdp: term shape mismatch");
    }
  }

  // Eliminate equality constraints: y = y_p + N z.
  Eigen::VectorXd y_p = Eigen::VectorXd::Zero(prob.num_vars);
  Eigen::MatrixXd N;
  bool reduced = prob.eq_A.rows() > 0;
  if (reduced) {
    if (prob.eq_A.cols() != prob.num_vars)
      throw ValidationError("sdp: equality matrix has wrong column count");
    y_p = prob.eq_A.completeOrthogonalDecomposition().solve(prob.eq_b);
    double resid = (prob.eq_A * y_p - prob.eq_b).norm();
    if (resid > 1e-9 * (1.0 + prob.eq_b.norm())) {
      sol.status = Status::infeasible;
      sol.message = "inconsistent equality constraints";
      return sol;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(prob.eq_A);
    N = lu.kernel();
    if (N.cols() == 0) {
      // Fully determined point: just evaluate.
      sol.y = y_p;
      sol.objective = prob.c.size() ? prob.c.dot(y_p) : 0.0;
      double me = -std::numeric_limits<double>::infinity();
      for (const auto& blk : prob.blocks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.eval(y_p), Eigen::EigenvaluesOnly);
        me = std::max(me, es.eigenvalues().maxCoeff());
      }
      sol.min_margin = -me;
      sol.status = me < 0 ? Status::optimal : Status::infeasible;
      return sol;
    }
  } else {
    N = Eigen::MatrixXd::Identity(prob.num_vars, prob.num_vars);
  }
  const int nz = static_cast<int>(N.cols());

  Workspace w;
  w.nv = nz;
  w.bound = prob.var_bound;
  w.c = prob.c.size() ? Eigen::VectorXd(N.transpose() * prob.c) : Eigen::VectorXd::Zero(nz);
  w.blocks.reserve(prob.blocks.size());
  for (const auto& blk : prob.blocks) {
    MatExpr r;
    r.F0 = blk.F0;
    for (const auto& [idx, F] : blk.terms)
      if (y_p(idx) != 0.0) r.F0 += y_p(idx) * F;
    if (reduced) {
      for (int j = 0; j < nz; ++j) {
        Eigen::MatrixXd Fj = Eigen::MatrixXd::Zero(blk.dim(), blk.dim());
        bool nonzero = false;
        for (const auto& [idx, F] : blk.terms) {
          double nij = N(idx, j);
          if (std::abs(nij) > 1e-14) {
            Fj += nij * F;
            nonzero = true;
          }
        }
        if (nonzero) r.terms.emplace_back(j, std::move(Fj));
      }
    } else {
      r.terms = blk.terms;
    }
    w.blocks.push_back(std::move(r));
  }
  w.theta = 2.0 * nz;
  for (const auto& blk : w.blocks) w.theta += blk.dim();

  // Starting point.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nz);
  bool have_interior = false;
  if (opts.y0) {
    Eigen::VectorXd z0 = N.completeOrthogonalDecomposition().solve(*opts.y0 - y_p);
    if (w.interior(z0)) {
      z = z0;
      have_interior = true;
    }
  }
  if (!have_interior && w.interior(z)) have_interior = true;

  if (!have_interior) {
    // Phase I: minimize s with F_b(z) - s I <= 0.
    Workspace w1;
    w1.nv = nz + 1;
    w1.bound = prob.var_bound;
    w1.c = Eigen::VectorXd::Zero(nz + 1);
    w1.c(nz) = 1.0;
    double s0 = w.max_eig(z);
    for (const auto& blk : w.blocks) {
      MatExpr e = blk;
      e.terms.emplace_back(nz, -Eigen::MatrixXd::Identity(blk.dim(), blk.dim()));
      w1.blocks.push_back(std::move(e));
    }
    w1.theta = 2.0 * w1.nv;
    for (const auto& blk : w1.blocks) w1.theta += blk.dim();

    Eigen::VectorXd zs(nz + 1);
    zs.head(nz) = z;
    zs(nz) = s0 + 1.0 + 0.1 * std::abs(s0);
    double scale = std::max(1.0, std::abs(s0));
    double t = 1.0;
    bool feasible = false;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
      if (!center(w1, t, zs, opts, sol.newton_iters)) break;
      double me = w.max_eig(zs.head(nz));
      if (me < opts.feas_eig * scale || (me < 0.0 && w1.theta / t < opts.gap_tol * scale)) {
        feasible = me < 0.0;
        break;
      }
      if (w1.theta / t < opts.gap_tol * scale) break;
      t *= opts.mu;
    }
    z = zs.head(nz);
    if (!feasible || !w.interior(z)) {
      sol.status = Status::infeasible;
      sol.y = y_p + N * z;
      sol.min_margin = -w.max_eig(z);
      sol.message = "phase I ended with max eigenvalue " + std::to_string(w.max_eig(z));
      return sol;
    }
  }

  // Phase II.
  double t_final = opts.t0;
  if (opts.center_only || w.c.cwiseAbs().maxCoeff() == 0.0) {
    Options copts = opts;
    copts.center_tol = std::min(opts.center_tol, 1e-3);
    center(w, 1.0, z, copts, sol.newton_iters);
    sol.gap = 0.0;
  } else {
    follow_path(w, z, opts, sol, &t_final);
    sol.gap = w.theta / t_final;
  }

  sol.y = y_p + N * z;
  sol.objective = prob.c.size() ? prob.c.dot(sol.y) : 0.0;
  sol.min_margin = -w.max_eig(z);
  sol.status = sol.min_margin > 0 ? Status::optimal : Status::numerical_failure;
  if (sol.status != Status::optimal) sol.message = "final point not strictly interior";
  return sol;
}

nlohmann::json problem_to_json(const Problem& prob) {
  nlohmann::json j;
  j["num_vars"] = prob.num_vars;
  j["c"] = prob.c.size() ? vec_to_json(prob.c) : vec_to_json(Eigen::VectorXd::Zero(prob.num_vars));
  j["var_bound"] = prob.var_bound;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& blk : prob.blocks) {
    nlohmann::json b;
    b["F0"] = mat_to_json(blk.F0);
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [idx, F] : blk.terms) terms.push_back({{"var", idx}, {"F", mat_to_json(F)}});
    b["terms"] = terms;
    blocks.push_back(b);
  }
  j["blocks"] = blocks;
  if (prob.eq_A.rows() > 0) {
    j["eq_A"] = mat_to_json(prob.eq_A);
    j["eq_b"] = vec_to_json(prob.eq_b);
  }
  return j;
}

Problem problem_from_json(const nlohmann::json& j) {
  Problem prob;
  prob.num_vars = j.at("num_vars").get<int>();
  prob.c = vec_from_json(j.at("c"));
  if (j.contains("var_bound")) prob.var_bound = j.at("var_bound").get<double>();
  for (const auto& b : j.at("blocks")) {
    MatExpr blk;
    blk.F0 = mat_from_json(b.at("F0"));
    for (const auto& t : b.at("terms"))
      blk.terms.emplace_back(t.at("var").get<int>(), mat_from_json(t.at("F")));
    prob.blocks.push_back(std::move(blk));
  }
  if (j.contains("eq_A")) {
    prob.eq_A = mat_from_json(j.at("eq_A"));
    prob.eq_b = vec_from_json(j.at("eq_b"));
  }
  return prob;
}

nlohmann::json solution_to_json(const Solution& sol) {
  nlohmann::json j;
  j["status"] = status_name(sol.status);
  j["y"] = vec_to_json(sol.y);
  j["objective"] = sol.objective;
  j["gap"] = sol.gap;
  j["min_margin"] = sol.min_margin;
  j["newton_iters"] = sol.newton_iters;
  if (!sol.message.empty()) j["message"] = sol.message;
  return j;
}

}  // namespace lcshare::sdp
