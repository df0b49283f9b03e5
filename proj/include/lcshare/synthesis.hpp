#pragma once

#include <Eigen/Dense>
#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcshare/markov.hpp"
#include "lcshare/mjls.hpp"
#include "lcshare/sdp.hpp"

namespace lcshare {

// Decision variables of the synthesis LMIs.
struct LmiVars {
  std::array<Eigen::Matrix4d, 4> X;       // one certificate per joint state
  std::array<Eigen::Matrix4d, 2> G;       // slack, shared across hidden modes
  std::array<Eigen::RowVector4d, 2> V;    // controller numerators (K = V G^-1)
  std::array<double, 2> L;                // feedthrough gains
  double mu = 0.0;                        // gamma^2
};

// Scalar variable layout used by the assembled problems.
namespace lmi_layout {
constexpr int kNumVars = 83;
constexpr int kMuIndex = 82;
int x_index(int z, int p, int q);  // symmetric, p <= q
int g_index(int k, int r, int c);
int v_index(int k, int c);
int l_index(int k);
Eigen::VectorXd pack(const LmiVars& v);
LmiVars unpack(const Eigen::VectorXd& y);
}  // namespace lmi_layout

// Direct formula evaluation of the synthesis block for joint state z.
// mic == false gives the nominal block, mic == true appends the effort row
// weighted by beta. This is the single source of truth; the assembled
// coefficient problems are probed from it.
Eigen::MatrixXd theorem_block(const LinearMjls& sys, const JointGenerator& gen, int z,
                              double epsilon, double beta, bool mic, const LmiVars& vars);

// Full SDP: minimize mu subject to all four joint-state blocks <= 0,
// X_z >= x_min I, mu >= 0, V_k R = 0.
sdp::Problem assemble_nominal(const LinearMjls& sys, const JointGenerator& gen, double epsilon,
                              const Eigen::MatrixXd& R,
                              std::optional<double> fixed_gamma_sq = {});
sdp::Problem assemble_mic(const LinearMjls& sys, const JointGenerator& gen, double epsilon,
                          double beta, const Eigen::MatrixXd& R,
                          std::optional<double> fixed_gamma_sq = {});

// Dominant right-singular directions of the stacked human gains.
Eigen::MatrixXd regularization_basis(const LinearMjls& sys, int rank);

struct ControllerGains {
  std::array<Eigen::RowVector4d, 2> K_AV;
  std::array<double, 2> D_AV;
  double gamma0 = 0.0;      // reported bound: sqrt of the minimized mu
  double gamma_cert = 0.0;  // strictly certified level (>= gamma0) backing X
  double epsilon = 0.0;
  double beta = 0.0;   // 0 for the nominal program
  bool mic = false;
  std::array<Eigen::Matrix4d, 4> X;
  Eigen::MatrixXd R;   // regularization basis actually imposed (4 x r)
};

struct EpsilonDiag {
  double epsilon = 0.0;
  sdp::Status status = sdp::Status::numerical_failure;
  double gamma0 = std::numeric_limits<double>::quiet_NaN();
  double margin = 0.0;
  int newton_iters = 0;
  std::string message;
};

struct SynthOptions {
  std::vector<double> epsilon_grid;   // default: 11 log-spaced points in [1e-3, 1e2]
  int regularization_rank = 1;        // 0 disables V_k R = 0
  double gap_tol = 1e-7;
  double backoff = 1e-3;              // relative mu inflation before recentring
  double x_min = 1e-9;
  double var_bound = 1e7;
  double cond_limit = 1e10;           // G_k conditioning guard
  // Feasibility tolerance used for the *reported* minimum: the minimization
  // runs on the theorem blocks relaxed to F(y) <= feas_shift * I, matching the
  // closed-cone reporting semantics of standard SDP solvers. Gain extraction
  // and the stored certificates always use the strict (unrelaxed) blocks at
  // gamma_cert.
  double feas_shift = 5e-5;
  int jobs = 1;
};

std::vector<double> default_epsilon_grid();

struct SynthesisResult {
  ControllerGains gains;
  std::vector<EpsilonDiag> diagnostics;
};

// Raises InfeasibleError when no epsilon on the grid yields a usable solution.
SynthesisResult synthesize_nominal(const LinearMjls& sys, const JointGenerator& gen,
                                   const SynthOptions& opts = {});
SynthesisResult synthesize_mic(const LinearMjls& sys, const JointGenerator& gen, double beta,
                               const SynthOptions& opts = {});

// Closed-loop dissipation certificate for joint state z at the given gamma.
// P_z = X_z^-1 is recovered internally.
Eigen::MatrixXd dissipation_matrix(const LinearMjls& sys, const JointGenerator& gen,
                                   const ControllerGains& gains, int z, double gamma,
                                   double beta);

struct CertReport {
  std::array<double, 4> max_eig{};
  double gamma = 0.0;
  double beta = 0.0;
  bool pass = false;
  double tol = -1e-8;
};

// Evaluates the certificate at gains.gamma_cert (falling back to gamma0 when
// gamma_cert is unset, e.g. for hand-built gains).
CertReport certify_dissipation(const LinearMjls& sys, const JointGenerator& gen,
                               const ControllerGains& gains, double beta);

// Best achievable certificate offset for fixed gains: minimizes t subject to
// Diss_z(P) <= t I with P_z > 0. t* >= 0 proves no certificate exists.
struct AnalysisResult {
  double t_star = 0.0;
  std::array<Eigen::Matrix4d, 4> X;
  sdp::Status status = sdp::Status::numerical_failure;
};

AnalysisResult find_best_certificate(const LinearMjls& sys, const JointGenerator& gen,
                                     const std::array<Eigen::RowVector4d, 2>& K_AV,
                                     const std::array<double, 2>& D_AV, double gamma,
                                     double beta);

nlohmann::json gains_to_json(const ControllerGains& gains);
ControllerGains gains_from_json(const nlohmann::json& j);
nlohmann::json cert_report_to_json(const CertReport& report);
nlohmann::json diagnostics_to_json(const std::vector<EpsilonDiag>& diags);

}  // namespace lcshare
