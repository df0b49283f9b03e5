#include "lcshare/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lcshare/matjson.hpp"
#include "lcshare/parallel.hpp"

namespace lcshare {

namespace lmi_layout {

namespace {
constexpr int kTriOffset[4] = {0, 4, 7, 9};
}

int x_index(int z, int p, int q) { return 10 * z + kTriOffset[p] + (q - p); }
int g_index(int k, int r, int c) { return 40 + 16 * k + 4 * r + c; }
int v_index(int k, int c) { return 72 + 4 * k + c; }
int l_index(int k) { return 80 + k; }

Eigen::VectorXd pack(const LmiVars& v) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(kNumVars);
  for (int z = 0; z < 4; ++z)
    for (int p = 0; p < 4; ++p)
      for (int q = p; q < 4; ++q) y(x_index(z, p, q)) = v.X[z](p, q);
  for (int k = 0; k < 2; ++k) {
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) y(g_index(k, r, c)) = v.G[k](r, c);
    for (int c = 0; c < 4; ++c) y(v_index(k, c)) = v.V[k](c);
    y(l_index(k)) = v.L[k];
  }
  y(kMuIndex) = v.mu;
  return y;
}

LmiVars unpack(const Eigen::VectorXd& y) {
  LmiVars v;
  for (int z = 0; z < 4; ++z) {
    for (int p = 0; p < 4; ++p)
      for (int q = p; q < 4; ++q) {
        double val = y(x_index(z, p, q));
        v.X[z](p, q) = val;
        v.X[z](q, p) = val;
      }
  }
  for (int k = 0; k < 2; ++k) {
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) v.G[k](r, c) = y(g_index(k, r, c));
    for (int c = 0; c < 4; ++c) v.V[k](c) = y(v_index(k, c));
    v.L[k] = y(l_index(k));
  }
  v.mu = y(kMuIndex);
  return v;
}

}  // namespace lmi_layout

namespace {

LmiVars zero_vars() {
  LmiVars v;
  for (auto& m : v.X) m.setZero();
  for (auto& m : v.G) m.setZero();
  for (auto& m : v.V) m.setZero();
  v.L = {0.0, 0.0};
  v.mu = 0.0;
  return v;
}

Eigen::MatrixXd scalar1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

}  // namespace

Eigen::MatrixXd theorem_block(const LinearMjls& sys, const JointGenerator& gen, int z,
                              double epsilon, double beta, bool mic, const LmiVars& vars) {
  if (z < 0 || z > 3) throw ValidationError("theorem_block: joint index out of range");
  int i = eta_of(z), k = etahat_of(z);
  std::vector<int> W = gen.targets(z);
  int tau = static_cast<int>(W.size());
  int n = (mic ? 11 : 10) + 4 * tau;

  const Eigen::Matrix4d& G = vars.G[k - 1];
  const Eigen::RowVector4d& V = vars.V[k - 1];
  double L = vars.L[k - 1];
  const Eigen::Matrix4d& X = vars.X[z];

  Eigen::Matrix4d Omega = (sys.A + sys.B * sys.K_H[i - 1]) * G + sys.B * V;
  Eigen::Vector4d Phi = sys.D + sys.B * (sys.D_H[i - 1] + L);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  const int r0 = 0, r1 = 4, r2 = 5;
  const int r3 = mic ? 6 : -1;
  const int rG = mic ? 7 : 6;
  const int rP = rG + 4;

  auto put = [&](int r, int c, const Eigen::MatrixXd& S) {
    M.block(r, c, S.rows(), S.cols()) += S;
    if (r != c) M.block(c, r, S.cols(), S.rows()) += S.transpose();
  };

  put(r0, r0, gen.nu(z, z) * X + epsilon * (Omega + Omega.transpose()));
  put(r0, r1, Phi);
  put(r0, r2, epsilon * G.transpose() * sys.C.transpose());
  if (mic) put(r0, r3, epsilon * beta * V.transpose());
  put(r0, rG, X + Omega - epsilon * G.transpose());
  for (int m = 0; m < tau; ++m)
    put(r0, rP + 4 * m, std::sqrt(gen.nu(z, W[static_cast<std::size_t>(m)])) * X);
  put(r1, r1, scalar1(-vars.mu));
  if (mic) put(r1, r3, scalar1(beta * L));
  put(r2, r2, scalar1(-1.0));
  put(r2, rG, sys.C * G);
  if (mic) {
    put(r3, r3, scalar1(-1.0));
    put(r3, rG, beta * V);
  }
  put(rG, rG, -(G + G.transpose()));
  for (int m = 0; m < tau; ++m) {
    int w = W[static_cast<std::size_t>(m)];
    put(rP + 4 * m, rP + 4 * m, -vars.X[w]);
  }

  double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) throw std::logic_error("theorem_block: assembled matrix asymmetric");
  return (M + M.transpose()) / 2.0;
}

namespace {

sdp::Problem assemble_core(const LinearMjls& sys, const JointGenerator& gen, double epsilon,
                           double beta, bool mic, const Eigen::MatrixXd& R,
                           std::optional<double> fixed_gamma_sq, double x_min,
                           double feas_shift = 0.0) {
  if (!(epsilon > 0.0)) throw ValidationError("assemble: epsilon must be positive");
  if (mic && !(beta >= 0.0)) throw ValidationError("assemble: beta must be nonnegative");
  sdp::Problem prob;
  prob.num_vars = lmi_layout::kNumVars;
  prob.c = Eigen::VectorXd::Zero(prob.num_vars);
  if (!fixed_gamma_sq) prob.c(lmi_layout::kMuIndex) = 1.0;

  // Theorem blocks, probed from the direct formula.
  LmiVars zeros = zero_vars();
  for (int z = 0; z < 4; ++z) {
    sdp::MatExpr blk;
    Eigen::MatrixXd F0 = theorem_block(sys, gen, z, epsilon, beta, mic, zeros);
    for (int v = 0; v < prob.num_vars; ++v) {
      Eigen::VectorXd unit = Eigen::VectorXd::Zero(prob.num_vars);
      unit(v) = 1.0;
      Eigen::MatrixXd F =
          theorem_block(sys, gen, z, epsilon, beta, mic, lmi_layout::unpack(unit)) - F0;
      if (F.cwiseAbs().maxCoeff() > 0.0) blk.terms.emplace_back(v, std::move(F));
    }
    blk.F0 = feas_shift > 0.0
                 ? Eigen::MatrixXd(F0 - feas_shift * Eigen::MatrixXd::Identity(F0.rows(), F0.cols()))
                 : F0;
    prob.blocks.push_back(std::move(blk));
  }

  // X_z >= x_min I.
  for (int z = 0; z < 4; ++z) {
    sdp::MatExpr pd;
    pd.F0 = x_min * Eigen::MatrixXd::Identity(4, 4);
    for (int p = 0; p < 4; ++p)
      for (int q = p; q < 4; ++q) {
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(4, 4);
        E(p, q) = -1.0;
        E(q, p) = -1.0;
        pd.terms.emplace_back(lmi_layout::x_index(z, p, q), std::move(E));
      }
    prob.blocks.push_back(std::move(pd));
  }

  // mu >= 0.
  {
    sdp::MatExpr mg;
    mg.F0 = scalar1(0.0);
    mg.terms.emplace_back(lmi_layout::kMuIndex, scalar1(-1.0));
    prob.blocks.push_back(std::move(mg));
  }

  // Equalities: V_k R = 0 and optionally mu = gamma^2.
  int n_eq = 2 * static_cast<int>(R.cols()) + (fixed_gamma_sq ? 1 : 0);
  if (n_eq > 0) {
    prob.eq_A = Eigen::MatrixXd::Zero(n_eq, prob.num_vars);
    prob.eq_b = Eigen::VectorXd::Zero(n_eq);
    int row = 0;
    for (int k = 0; k < 2; ++k)
      for (int rc = 0; rc < R.cols(); ++rc, ++row)
        for (int p = 0; p < 4; ++p) prob.eq_A(row, lmi_layout::v_index(k, p)) = R(p, rc);
    if (fixed_gamma_sq) {
      prob.eq_A(row, lmi_layout::kMuIndex) = 1.0;
      prob.eq_b(row) = *fixed_gamma_sq;
    }
  }
  return prob;
}

}  // namespace

sdp::Problem assemble_nominal(const LinearMjls& sys, const JointGenerator& gen, double epsilon,
                              const Eigen::MatrixXd& R, std::optional<double> fixed_gamma_sq) {
  return assemble_core(sys, gen, epsilon, 0.0, false, R, fixed_gamma_sq, 1e-9);
}

sdp::Problem assemble_mic(const LinearMjls& sys, const JointGenerator& gen, double epsilon,
                          double beta, const Eigen::MatrixXd& R,
                          std::optional<double> fixed_gamma_sq) {
  return assemble_core(sys, gen, epsilon, beta, true, R, fixed_gamma_sq, 1e-9);
}

Eigen::MatrixXd regularization_basis(const LinearMjls& sys, int rank) {
  if (rank <= 0) return Eigen::MatrixXd(4, 0);
  Eigen::MatrixXd stacked(2, 4);
  stacked.row(0) = sys.K_H[0];
  stacked.row(1) = sys.K_H[1];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullV);
  double smax = svd.singularValues()(0);
  if (smax < 1e-12) return Eigen::MatrixXd(4, 0);  // degenerate human gains
  int r = std::min(rank, 2);
  int keep = 0;
  for (int c = 0; c < r; ++c)
    if (svd.singularValues()(c) > 1e-12 * smax) ++keep;
  return svd.matrixV().leftCols(keep);
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  for (int j = 0; j <= 10; ++j) grid.push_back(std::pow(10.0, -3.0 + 0.5 * j));
  return grid;
}

namespace {

SynthesisResult synthesize_core(const LinearMjls& sys, const JointGenerator& gen, double beta,
                                bool mic, const SynthOptions& opts) {
  for (int m = 0; m < 2; ++m) {
    Eigen::Matrix4d A_i = sys.A + sys.B * sys.K_H[m];
    if (!pbh_stabilizable(A_i, sys.B))
      throw InfeasibleError("PBH stabilizability test failed for mode " + std::to_string(m + 1));
    if (!pbh_detectable(A_i, sys.C))
      throw InfeasibleError("PBH detectability test failed for mode " + std::to_string(m + 1));
  }

  Eigen::MatrixXd R = regularization_basis(sys, opts.regularization_rank);
  std::vector<double> grid = opts.epsilon_grid.empty() ? default_epsilon_grid() : opts.epsilon_grid;

  // Stage 1: minimize mu per epsilon on the tolerance-relaxed blocks; the
  // smallest optimum is the reported bound gamma0 = sqrt(mu*).
  std::vector<sdp::Solution> sols(grid.size());
  parallel_for(grid.size(), opts.jobs, [&](std::size_t gi) {
    sdp::Problem prob =
        assemble_core(sys, gen, grid[gi], beta, mic, R, {}, opts.x_min, opts.feas_shift);
    prob.var_bound = opts.var_bound;
    sdp::Options so;
    so.gap_tol = opts.gap_tol;
    sols[gi] = sdp::solve(prob, so);
  });

  SynthesisResult result;
  result.diagnostics.resize(grid.size());
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    EpsilonDiag& d = result.diagnostics[gi];
    d.epsilon = grid[gi];
    d.status = sols[gi].status;
    d.margin = sols[gi].min_margin;
    d.newton_iters = sols[gi].newton_iters;
    d.message = sols[gi].message;
    if (sols[gi].status == sdp::Status::optimal)
      d.gamma0 = std::sqrt(std::max(0.0, sols[gi].objective));
  }

  std::vector<std::size_t> order;
  for (std::size_t gi = 0; gi < grid.size(); ++gi)
    if (sols[gi].status == sdp::Status::optimal) order.push_back(gi);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sols[a].objective < sols[b].objective;
  });

  // Stage 2: extract gains from a strictly feasible analytic center. The
  // relaxed optimum may sit below the strict feasible set, so the pinned mu
  // escalates until the strict problem admits an interior point.
  for (std::size_t gi : order) {
    double mu_star = std::max(sols[gi].objective, 0.0);
    LmiVars vars;
    double mu_cert = 0.0;
    bool centered_ok = false;
    double mu_try = mu_star * (1.0 + opts.backoff) + 1e-10;
    for (int attempt = 0; attempt < 8 && !centered_ok; ++attempt) {
      sdp::Problem prob = assemble_core(sys, gen, grid[gi], beta, mic, R, mu_try, opts.x_min);
      prob.var_bound = opts.var_bound;
      sdp::Options so;
      so.gap_tol = opts.gap_tol;
      Eigen::VectorXd y0 = sols[gi].y;
      y0(lmi_layout::kMuIndex) = mu_try;
      so.y0 = y0;
      sdp::Solution centered = sdp::solve(prob, so);
      if (centered.status == sdp::Status::optimal) {
        vars = lmi_layout::unpack(centered.y);
        mu_cert = mu_try;
        centered_ok = true;
      } else {
        mu_try *= 1.0 + 10.0 * opts.backoff;
      }
    }
    if (!centered_ok) {
      result.diagnostics[gi].message = "strict recentring failed";
      continue;
    }

    ControllerGains gains;
    bool ok = true;
    for (int k = 0; k < 2 && ok; ++k) {
      Eigen::JacobiSVD<Eigen::Matrix4d> svd(vars.G[k]);
      double cond = svd.singularValues()(0) / svd.singularValues()(3);
      if (!(cond < opts.cond_limit)) {
        result.diagnostics[gi].status = sdp::Status::numerical_failure;
        result.diagnostics[gi].message = "G conditioning guard tripped";
        ok = false;
        break;
      }
      gains.K_AV[k] = vars.G[k].transpose().partialPivLu().solve(vars.V[k].transpose()).transpose();
      gains.D_AV[k] = vars.L[k];
    }
    if (!ok) continue;
    for (int z = 0; z < 4 && ok; ++z) {
      Eigen::Matrix4d X = (vars.X[z] + vars.X[z].transpose()) / 2.0;
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(X, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > 0.0)) {
        result.diagnostics[gi].message = "certificate X not positive definite";
        ok = false;
        break;
      }
      gains.X[z] = X;
    }
    if (!ok) continue;
    if (R.cols() > 0) {
      for (int k = 0; k < 2; ++k) {
        double resid = (vars.V[k] * R).cwiseAbs().maxCoeff();
        if (resid > 1e-9) throw std::logic_error("regularization equality violated after solve");
      }
    }
    gains.gamma0 = std::sqrt(mu_star);
    gains.gamma_cert = std::sqrt(mu_cert);
    gains.epsilon = grid[gi];
    gains.beta = mic ? beta : 0.0;
    gains.mic = mic;
    gains.R = R;
    result.diagnostics[gi].gamma0 = gains.gamma0;
    result.gains = gains;
    return result;
  }

  std::ostringstream msg;
  msg << "synthesis infeasible on the epsilon grid:";
  for (const auto& d : result.diagnostics)
    msg << " [eps=" << d.epsilon << " " << sdp::status_name(d.status)
        << (d.message.empty() ? "" : " " + d.message) << "]";
  throw InfeasibleError(msg.str());
}

}  // namespace

SynthesisResult synthesize_nominal(const LinearMjls& sys, const JointGenerator& gen,
                                   const SynthOptions& opts) {
  return synthesize_core(sys, gen, 0.0, false, opts);
}

SynthesisResult synthesize_mic(const LinearMjls& sys, const JointGenerator& gen, double beta,
                               const SynthOptions& opts) {
  return synthesize_core(sys, gen, beta, true, opts);
}

Eigen::MatrixXd dissipation_matrix(const LinearMjls& sys, const JointGenerator& gen,
                                   const ControllerGains& gains, int z, double gamma,
                                   double beta) {
  if (z < 0 || z > 3) throw ValidationError("dissipation_matrix: joint index out of range");
  std::array<Eigen::Matrix4d, 4> P;
  for (int w = 0; w < 4; ++w) {
    Eigen::LLT<Eigen::Matrix4d> llt(gains.X[w]);
    if (llt.info() != Eigen::Success)
      throw ValidationError("dissipation_matrix: certificate X not positive definite");
    P[w] = llt.solve(Eigen::Matrix4d::Identity());
    P[w] = (P[w] + P[w].transpose()).eval() / 2.0;
  }
  int i = eta_of(z), k = etahat_of(z);
  ClosedLoop cl = closed_loop(sys, i, k, gains.K_AV, gains.D_AV);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(6, 6);
  Eigen::Matrix4d top = cl.A.transpose() * P[z] + P[z] * cl.A;
  for (int w = 0; w < 4; ++w) top += gen.nu(z, w) * P[w];
  Eigen::Vector4d pd = P[z] * cl.D;
  double m22 = -gamma * gamma;
  if (beta > 0.0) {
    const Eigen::RowVector4d& K = gains.K_AV[k - 1];
    top += beta * beta * K.transpose() * K;
    pd += beta * beta * K.transpose() * gains.D_AV[k - 1];
    m22 += beta * beta * gains.D_AV[k - 1] * gains.D_AV[k - 1];
  }
  M.block<4, 4>(0, 0) = (top + top.transpose()) / 2.0;
  M.block<4, 1>(0, 4) = pd;
  M.block<1, 4>(4, 0) = pd.transpose();
  M(4, 4) = m22;
  M.block<4, 1>(0, 5) = sys.C.transpose();
  M.block<1, 4>(5, 0) = sys.C;
  M(5, 5) = -1.0;
  return M;
}

CertReport certify_dissipation(const LinearMjls& sys, const JointGenerator& gen,
                               const ControllerGains& gains, double beta) {
  CertReport report;
  report.gamma = gains.gamma_cert > 0.0 ? gains.gamma_cert : gains.gamma0;
  report.beta = beta;
  report.pass = true;
  for (int z = 0; z < 4; ++z) {
    Eigen::MatrixXd M = dissipation_matrix(sys, gen, gains, z, report.gamma, beta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    report.max_eig[static_cast<std::size_t>(z)] = es.eigenvalues().maxCoeff();
    if (!(report.max_eig[static_cast<std::size_t>(z)] < report.tol)) report.pass = false;
  }
  return report;
}

AnalysisResult find_best_certificate(const LinearMjls& sys, const JointGenerator& gen,
                                     const std::array<Eigen::RowVector4d, 2>& K_AV,
                                     const std::array<double, 2>& D_AV, double gamma,
                                     double beta) {
  // Variables: P_z symmetric (10 each) plus the offset t.
  constexpr int kNv = 41;
  constexpr int kT = 40;
  constexpr int tri[4] = {0, 4, 7, 9};
  auto p_index = [&](int z, int p, int q) { return 10 * z + tri[p] + (q - p); };

  auto eval_diss = [&](int z, const Eigen::VectorXd& y) {
    std::array<Eigen::Matrix4d, 4> P;
    for (int w = 0; w < 4; ++w)
      for (int p = 0; p < 4; ++p)
        for (int q = p; q < 4; ++q) {
          P[w](p, q) = y(p_index(w, p, q));
          P[w](q, p) = y(p_index(w, p, q));
        }
    int i = eta_of(z), k = etahat_of(z);
    ClosedLoop cl = closed_loop(sys, i, k, K_AV, D_AV);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(6, 6);
    Eigen::Matrix4d top = cl.A.transpose() * P[z] + P[z] * cl.A;
    for (int w = 0; w < 4; ++w) top += gen.nu(z, w) * P[w];
    Eigen::Vector4d pd = P[z] * cl.D;
    double m22 = -gamma * gamma;
    if (beta > 0.0) {
      const Eigen::RowVector4d& K = K_AV[static_cast<std::size_t>(k - 1)];
      top += beta * beta * K.transpose() * K;
      pd += beta * beta * K.transpose() * D_AV[static_cast<std::size_t>(k - 1)];
      m22 += beta * beta * D_AV[static_cast<std::size_t>(k - 1)] * D_AV[static_cast<std::size_t>(k - 1)];
    }
    M.block<4, 4>(0, 0) = (top + top.transpose()) / 2.0;
    M.block<4, 1>(0, 4) = pd;
    M.block<1, 4>(4, 0) = pd.transpose();
    M(4, 4) = m22;
    M.block<4, 1>(0, 5) = sys.C.transpose();
    M.block<1, 4>(5, 0) = sys.C;
    M(5, 5) = -1.0;
    M -= y(kT) * Eigen::MatrixXd::Identity(6, 6);
    return M;
  };

  sdp::Problem prob;
  prob.num_vars = kNv;
  prob.c = Eigen::VectorXd::Zero(kNv);
  prob.c(kT) = 1.0;
  prob.var_bound = 1e6;
  for (int z = 0; z < 4; ++z) {
    sdp::MatExpr blk;
    blk.F0 = eval_diss(z, Eigen::VectorXd::Zero(kNv));
    for (int v = 0; v < kNv; ++v) {
      Eigen::VectorXd unit = Eigen::VectorXd::Zero(kNv);
      unit(v) = 1.0;
      Eigen::MatrixXd F = eval_diss(z, unit) - blk.F0;
      if (F.cwiseAbs().maxCoeff() > 0.0) blk.terms.emplace_back(v, std::move(F));
    }
    prob.blocks.push_back(std::move(blk));
  }
  for (int z = 0; z < 4; ++z) {
    sdp::MatExpr pd;
    pd.F0 = 1e-8 * Eigen::MatrixXd::Identity(4, 4);
    for (int p = 0; p < 4; ++p)
      for (int q = p; q < 4; ++q) {
        Eigen::MatrixXd E = Eigen::MatrixXd::Zero(4, 4);
        E(p, q) = -1.0;
        E(q, p) = -1.0;
        pd.terms.emplace_back(p_index(z, p, q), std::move(E));
      }
    prob.blocks.push_back(std::move(pd));
  }

  sdp::Solution sol = sdp::solve(prob);
  AnalysisResult out;
  out.status = sol.status;
  out.t_star = sol.objective;
  for (int z = 0; z < 4; ++z) {
    Eigen::Matrix4d P;
    for (int p = 0; p < 4; ++p)
      for (int q = p; q < 4; ++q) {
        P(p, q) = sol.y(p_index(z, p, q));
        P(q, p) = P(p, q);
      }
    out.X[z] = P.llt().solve(Eigen::Matrix4d::Identity());
    out.X[z] = (out.X[z] + out.X[z].transpose()).eval() / 2.0;
  }
  return out;
}

json gains_to_json(const ControllerGains& gains) {
  json j;
  j["gamma0"] = gains.gamma0;
  j["gamma_cert"] = gains.gamma_cert;
  j["epsilon"] = gains.epsilon;
  j["beta"] = gains.beta;
  j["mic"] = gains.mic;
  j["K_AV"] = {vec_to_json(gains.K_AV[0].transpose()), vec_to_json(gains.K_AV[1].transpose())};
  j["D_AV"] = {gains.D_AV[0], gains.D_AV[1]};
  json xs = json::array();
  for (const auto& X : gains.X) xs.push_back(mat_to_json(X));
  j["X"] = xs;
  j["R"] = mat_to_json(gains.R);
  return j;
}

ControllerGains gains_from_json(const json& j) {
  ControllerGains g;
  g.gamma0 = j.at("gamma0").get<double>();
  g.gamma_cert = j.value("gamma_cert", g.gamma0);
  g.epsilon = j.at("epsilon").get<double>();
  g.beta = j.at("beta").get<double>();
  g.mic = j.at("mic").get<bool>();
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = vec_from_json(j.at("K_AV").at(k));
    if (v.size() != 4) throw ValidationError("gains json: K_AV rows must have 4 entries");
    g.K_AV[k] = v.transpose();
    g.D_AV[k] = j.at("D_AV").at(k).get<double>();
  }
  for (int z = 0; z < 4; ++z) {
    Eigen::MatrixXd X = mat_from_json(j.at("X").at(z));
    if (X.rows() != 4 || X.cols() != 4) throw ValidationError("gains json: X must be 4x4");
    g.X[z] = X;
  }
  g.R = mat_from_json(j.at("R"));
  return g;
}

json cert_report_to_json(const CertReport& report) {
  json j;
  j["pass"] = report.pass;
  j["gamma"] = report.gamma;
  j["beta"] = report.beta;
  j["tol"] = report.tol;
  j["max_eig"] = report.max_eig;
  return j;
}

json diagnostics_to_json(const std::vector<EpsilonDiag>& diags) {
  json arr = json::array();
  for (const auto& d : diags) {
    json j;
    j["epsilon"] = d.epsilon;
    j["status"] = sdp::status_name(d.status);
    if (std::isfinite(d.gamma0)) j["gamma0"] = d.gamma0;
    j["margin"] = d.margin;
    j["newton_iters"] = d.newton_iters;
    if (!d.message.empty()) j["message"] = d.message;
    arr.push_back(j);
  }
  return arr;
}

}  // namespace lcshare
