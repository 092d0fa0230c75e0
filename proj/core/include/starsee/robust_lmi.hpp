#pragma once

#include "starsee/channel.hpp"
#include "starsee/conic.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace starsee::robust {

using conic::ProgramBuilder;
using Linear = ProgramBuilder::Linear;

// ---------------------------------------------------------------------------
// Affine expressions in the real decision variables of one conic program.

struct AffineReal {
  Linear terms;
  double c = 0.0;

  double eval(const Eigen::VectorXd& x) const;
  AffineReal& add(int var, double coef);
  AffineReal& add(const AffineReal& o, double scale = 1.0);
};

struct AffineScalar {
  Cplx c{0.0, 0.0};
  std::vector<std::pair<int, Cplx>> t;

  Cplx eval(const Eigen::VectorXd& x) const;
  bool is_constant() const { return t.empty(); }
};

struct AffineVector {
  CVec c;
  std::vector<std::pair<int, CVec>> t;

  static AffineVector constant(const CVec& v) { return {v, {}}; }
  // Complex vector whose real and imaginary parts are 2n consecutive
  // variables starting at first_var (re0, im0, re1, im1, ...).
  static AffineVector variables(int n, int first_var);
  int size() const { return static_cast<int>(c.size()); }
  bool is_constant() const { return t.empty(); }
  CVec eval(const Eigen::VectorXd& x) const;
  AffineVector scaled(Cplx s) const;
  AffineVector with_var_scale(int var, const CVec& v) const;
};

struct AffineHermitian {
  CMat c;
  std::vector<std::pair<int, CMat>> t;

  CMat eval(const Eigen::VectorXd& x) const;
};

// Affine vector times a constant vector: w * scalar variable.
AffineVector scale_by_variable(const CVec& v, int var);

// row * w with a constant row.
AffineScalar row_times(const CRow& row, const AffineVector& w);

// h^H w + u^H G w where at most one of (w, u) is non-constant.
AffineScalar observe(const CVec& h, const CMat& G, const AffineVector& u, const AffineVector& w);

// ---------------------------------------------------------------------------
// Error stacking x = [dh; vec(dG^*)], vec taken column major so that entry
// (m, n) of dG sits at index n * M + m of the second part. Parts with a zero
// radius are dropped.

struct ErrorLayout {
  int N = 0;
  int M = 0;
  bool with_h = true;
  bool with_g = true;

  static ErrorLayout for_radii(int N, int M, double xi, double zeta);
  int size() const { return (with_h ? N : 0) + (with_g ? M * N : 0); }
  int g_offset() const { return with_h ? N : 0; }
};

CVec stack_error(const ErrorLayout& lay, const CVec& dh, const CMat& dG);

// [w; w kron conj(u)] restricted to the layout; x^H of it gives the error part
// of h^H w + u^H G w.
CVec surface_stack(const ErrorLayout& lay, const CVec& w, const CVec& u);
AffineVector surface_stack(const ErrorLayout& lay, const AffineVector& w, const AffineVector& u);

// f(x) = x^H A x + 2 Re(a^H x) + a0
struct QuadraticForm {
  CMat A;
  CVec a;
  double a0 = 0.0;

  double eval(const CVec& x) const;
};

struct AffineQuadratic {
  AffineHermitian A;
  AffineVector a;
  AffineReal a0;

  QuadraticForm eval(const Eigen::VectorXd& x) const;
  void accumulate(const AffineQuadratic& o);
};

// First-order lower bound of |(h + dh)^H w + u^H (G + dG) w|^2 around the
// iterate (w0, u0), written as a quadratic form in the stacked error. The
// bound is tight at (w, u) = (w0, u0) for every error.
AffineQuadratic linearize_gain(const ErrorLayout& lay, const CVec& h_hat, const CMat& G_hat,
                               const AffineVector& w, const AffineVector& u, const CVec& w0,
                               const CVec& u0);

// Numeric version with fixed (w, u).
QuadraticForm gain_lower_bound(const ErrorLayout& lay, const CVec& h_hat, const CMat& G_hat, const CVec& w,
                               const CVec& u, const CVec& w0, const CVec& u0);

// ---------------------------------------------------------------------------
// Numeric certificate blocks.

// [[A0, a0], [a0^H, c0]] - sum_i mult_i [[Ai, ai], [ai^H, ci]].
CMat s_procedure_matrix(const QuadraticForm& f0, const std::vector<QuadraticForm>& constraints,
                        const std::vector<double>& multipliers);

// Ball constraint xi^2 - x^H C x >= 0 for the selector C of one layout part.
QuadraticForm ball_constraint(const ErrorLayout& lay, bool direct_part, double radius);

struct SignDefiniteTerm {
  CMat E;  // rows = rows of the perturbation
  CMat F;  // rows = columns of the perturbation
  double radius = 0.0;
};

// Bordered block certifying A >= sum_i (E_i^H D_i F_i + F_i^H D_i^H E_i) for
// all ||D_i||_F <= radius_i.
CMat sign_definiteness_matrix(const CMat& A, const std::vector<SignDefiniteTerm>& terms,
                              const std::vector<double>& multipliers);

// Interference-plus-noise certificate: the uncertainty-free part
// [[eta - noise, pi^H], [pi, I]] and the error coupling.
struct SchurExpansion {
  CMat core;  // (1 + c) x (1 + c)
  CMat W;     // N x c
  CVec u;     // M
  // Full matrix for a given error pair.
  CMat with_error(const CVec& dh, const CMat& dG) const;
};
SchurExpansion schur_expand(const CMat& W, const CVec& u, const CVec& h_hat, const CMat& G_hat, double eta,
                            double noise);

// ---------------------------------------------------------------------------
// Scalar surrogates.

// Tangent-plane surrogate of eta * 2^r at (eta0, r0).
double sca_eta_bound(double eta, double r, double eta0, double r0);

// (t/2) psi^2 + rho^2 / (2t), an upper bound of psi * rho for t > 0.
double bilinear_upper_bound(double psi, double rho, double t);

// Convex upper bound of eta * 2^r, tight with matching gradient at (eta0, r0),
// valid for r <= r0 + r_step.
double eta_pow2_majorant(double eta, double r, double eta0, double r0, double r_step);
// Concave lower bound of eta * 2^r (eta > 0), tight with matching gradient.
double eta_pow2_minorant(double eta, double r, double eta0, double r0);

// Second-order cone vector [(rho - P0 + g)/(2g); (rho - P0 - g)/(2g); Re f; Im f]
// for the power bound g * sum ||f||^2 + P0 <= rho (g = amplifier factor).
Eigen::VectorXd soc_power_constraint(double rho, const CVec& f_t, const CVec& f_r, double amp, double p0);
bool soc_holds(const Eigen::VectorXd& v, double tol = 0.0);

// ---------------------------------------------------------------------------
// Program-level builders. Each returns the index of the conic block it added
// and creates its own nonnegative multipliers.

struct BlockInfo {
  std::string label;
  int order = 0;  // complex order of the Hermitian block, 0 for scalar fallbacks
  std::vector<int> multipliers;
};

// f(x) - rhs >= 0 for all x in the two balls.
BlockInfo add_s_procedure_lmi(ProgramBuilder& pb, const ErrorLayout& lay, const AffineQuadratic& f,
                              const AffineReal& rhs, double xi, double zeta, const std::string& label);

// bound >= || (h + dh)^H W + u^H (G + dG) W ||^2 for all errors in the balls,
// W given column by column. Either u or all of W must be constant.
BlockInfo add_sign_definite_lmi(ProgramBuilder& pb, const AffineReal& bound, const std::vector<AffineVector>& W,
                                const CVec& h_hat, const CMat& G_hat, double xi, double zeta,
                                const AffineVector& u, const std::string& label);

// s >= (c/2) eta^2 + q(r)/(2c) with the majorant constants above. Adds the
// trust-region cap r <= r0 + r_step.
void add_majorant_epigraph(ProgramBuilder& pb, int s, int eta, int r, double eta0, double r0, double r_step);

// Returns the affine minorant in (eta, r, p) and adds p * eta >= 1.
AffineReal add_minorant(ProgramBuilder& pb, int eta, int r, double eta0, double r0);

// bound >= sum of squares of affine rows: rotated cone ||2v; bound - 1|| <= bound + 1.
void add_sum_squares_le(ProgramBuilder& pb, const AffineReal& bound, const std::vector<AffineReal>& rows,
                        const std::string& label = {});

// ---------------------------------------------------------------------------
// Sampling audit.

struct RobustInequality {
  enum class Kind { SignalAtLeast, InterferenceAtMost, SignalAtMost, InterferenceAtLeast };
  Kind kind = Kind::SignalAtLeast;
  std::string label;
  CVec h_hat;
  CMat G_hat;
  double xi = 0.0;
  double zeta = 0.0;
  CVec u;
  CMat W;  // one column for the signal kinds
  double noise = 0.0;  // added to the interference kinds
  double bound = 0.0;  // right-hand side value
};

struct OracleReport {
  int samples = 0;
  int violations = 0;
  double worst = 0.0;  // largest relative violation seen (<= 0 when none)
};

// Evaluates the semi-infinite inequality on uniform samples of both balls
// (plus the ball centre) and counts relative violations beyond tol.
OracleReport implication_oracle(const RobustInequality& q, int samples, std::uint64_t seed, double tol = 1e-6);

}  // namespace starsee::robust
