#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <string>
#include <vector>

namespace starsee::conic {

using Cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

enum class ConeKind { Zero, NonNeg, SecondOrder, Psd };

// One constraint block: value(x) = offset + coeff * x must lie in the cone.
// Vector cones store plain vectors. Psd blocks store svec form (lower triangle,
// column major, off-diagonals scaled by sqrt(2)); `order` is the matrix size.
struct ConeBlock {
  ConeKind kind = ConeKind::NonNeg;
  int order = 0;
  Eigen::VectorXd offset;
  Eigen::SparseMatrix<double> coeff;
  std::string label;

  int rows() const { return static_cast<int>(offset.size()); }
};

struct ConicProgram {
  int num_vars = 0;
  Eigen::VectorXd objective;
  bool maximize = false;
  std::vector<ConeBlock> blocks;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(SolveStatus s);

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd primal;
  double objective_value = 0.0;
  double max_constraint_residual = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  double feasibility_tol = 1e-7;
  double gap_tol = 1e-8;
  double abs_gap_tol = 1e-9;
  int max_iterations = 200;
  // Status "optimal" is also accepted at this looser level when the iteration
  // stalls; the residual recheck still applies.
  double stall_tol = 1e-6;
  // Diagonal rescaling of variables and cone blocks before the solve.
  bool equilibrate = true;
  int equilibrate_passes = 10;
};

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {});

// Cone-violation of every block at x, scaled by max(1, |offset|_inf).
double constraint_residual(const ConicProgram& prog, const Eigen::VectorXd& x);

// Plain-text dump: variable count, objective, one line per block.
void write_debug_dump(const ConicProgram& prog, const std::string& path);

// Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix.
Eigen::MatrixXd embed_hermitian(const CMatrix& h, double tol = 1e-10);

int svec_size(int order);
Eigen::VectorXd svec(const Eigen::MatrixXd& m);
Eigen::MatrixXd smat(const Eigen::VectorXd& v, int order);

// Hermitian matrix that is affine in real variables: H0 + sum_i x_i H_i.
// Coefficients are kept as sparse entries; only the upper triangle (r <= c)
// is stored and the lower one is implied.
class HermitianAffine {
 public:
  explicit HermitianAffine(int order = 0);

  int order() const { return order_; }

  void add_constant(int r, int c, Cplx v);
  void add_term(int var, int r, int c, Cplx v);
  // Adds M (Hermitian, top-left corner at (r0, r0)) times x_var, or as a
  // constant when var < 0.
  void add_block(int var, int r0, const CMatrix& m);
  // Adds the off-diagonal block B at (r0, c0) and its adjoint at (c0, r0).
  void add_offdiag(int var, int r0, int c0, const CMatrix& b);

  CMatrix evaluate(const Eigen::VectorXd& x) const;

  // Real PSD block of order 2n that is equivalent to H(x) >= 0.
  ConeBlock to_block(int num_vars, std::string label = {}) const;

 private:
  struct Entry {
    int var;
    int r;
    int c;
    Cplx v;
  };
  int order_;
  std::vector<Entry> entries_;
};

// Convenience builder that keeps variable names and block bookkeeping.
class ProgramBuilder {
 public:
  int add_var(const std::string& name);
  int add_vars(const std::string& name, int count);
  int num_vars() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_[i]; }

  void set_objective(int var, double coef);
  void set_maximize(bool m) { maximize_ = m; }

  // sum coef_i x_i + constant (>= 0 or == 0).
  using Linear = std::vector<std::pair<int, double>>;
  void add_nonneg(const Linear& terms, double constant, std::string label = {});
  void add_equality(const Linear& terms, double constant, std::string label = {});
  // ||(rows 1..)|| <= row 0, each row an affine expression.
  void add_soc(const std::vector<std::pair<Linear, double>>& rows, std::string label = {});
  void add_hermitian(const HermitianAffine& h, std::string label = {});

  ConicProgram build() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::pair<int, double>> objective_;
  bool maximize_ = false;
  std::vector<ConeBlock> pending_;
  std::vector<HermitianAffine> lmis_;
  std::vector<std::string> lmi_labels_;
  std::vector<int> lmi_slot_;
  ConeBlock vector_block(ConeKind kind, const std::vector<std::pair<Linear, double>>& rows,
                         std::string label) const;
};

}  // namespace starsee::conic
