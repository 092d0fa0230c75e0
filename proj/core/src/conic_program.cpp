#include "starsee/conic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace starsee::conic {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;

int svec_index(int n, int i, int j) {
  // lower triangle, column major; requires i >= j
  return j * n - j * (j - 1) / 2 + (i - j);
}
}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

int svec_size(int order) { return order * (order + 1) / 2; }

Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(svec_size(n));
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) v(svec_index(n, i, j)) = (i == j) ? m(i, j) : kSqrt2 * m(i, j);
  return v;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v, int order) {
  Eigen::MatrixXd m(order, order);
  for (int j = 0; j < order; ++j)
    for (int i = j; i < order; ++i) {
      const double x = v(svec_index(order, i, j));
      if (i == j) {
        m(i, i) = x;
      } else {
        m(i, j) = x / kSqrt2;
        m(j, i) = x / kSqrt2;
      }
    }
  return m;
}

Eigen::MatrixXd embed_hermitian(const CMatrix& h, double tol) {
  if (h.rows() != h.cols()) throw std::invalid_argument("embed_hermitian: matrix is not square");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
    throw std::invalid_argument("embed_hermitian: matrix is not Hermitian");
  const int n = static_cast<int>(h.rows());
  Eigen::MatrixXd out(2 * n, 2 * n);
  const Eigen::MatrixXd re = 0.5 * (h.real() + h.real().transpose());
  const Eigen::MatrixXd im = 0.5 * (h.imag() - h.imag().transpose());
  out.topLeftCorner(n, n) = re;
  out.bottomRightCorner(n, n) = re;
  out.topRightCorner(n, n) = -im;
  out.bottomLeftCorner(n, n) = im;
  return out;
}

double constraint_residual(const ConicProgram& prog, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (const auto& b : prog.blocks) {
    const Eigen::VectorXd v = b.offset + b.coeff * x;
    const double scale = std::max(1.0, b.offset.size() ? b.offset.cwiseAbs().maxCoeff() : 0.0);
    double viol = 0.0;
    switch (b.kind) {
      case ConeKind::Zero:
        viol = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
        break;
      case ConeKind::NonNeg:
        viol = v.size() ? std::max(0.0, -v.minCoeff()) : 0.0;
        break;
      case ConeKind::SecondOrder:
        viol = std::max(0.0, v.tail(v.size() - 1).norm() - v(0));
        break;
      case ConeKind::Psd: {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(smat(v, b.order), Eigen::EigenvaluesOnly);
        viol = std::max(0.0, -es.eigenvalues()(0));
        break;
      }
    }
    worst = std::max(worst, viol / scale);
  }
  return worst;
}

void write_debug_dump(const ConicProgram& prog, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open dump file " + path);
  out << "variables " << prog.num_vars << "\n";
  out << "sense " << (prog.maximize ? "max" : "min") << "\n";
  out << "objective";
  for (int i = 0; i < prog.objective.size(); ++i) out << ' ' << prog.objective(i);
  out << "\n";
  for (std::size_t k = 0; k < prog.blocks.size(); ++k) {
    const auto& b = prog.blocks[k];
    const char* kind = b.kind == ConeKind::Zero       ? "zero"
                       : b.kind == ConeKind::NonNeg   ? "nonneg"
                       : b.kind == ConeKind::SecondOrder ? "soc"
                                                         : "psd";
    out << "block " << k << ' ' << kind << " rows=" << b.rows();
    if (b.kind == ConeKind::Psd) out << " order=" << b.order;
    out << " nnz=" << b.coeff.nonZeros();
    if (!b.label.empty()) out << " label=" << b.label;
    out << "\n";
  }
}

// ---------------------------------------------------------------------------

HermitianAffine::HermitianAffine(int order) : order_(order) {}

void HermitianAffine::add_constant(int r, int c, Cplx v) { add_term(-1, r, c, v); }

void HermitianAffine::add_term(int var, int r, int c, Cplx v) {
  if (v == Cplx(0.0, 0.0)) return;
  if (r > c) {
    std::swap(r, c);
    v = std::conj(v);
  }
  if (r == c) v = Cplx(v.real(), 0.0);
  entries_.push_back({var, r, c, v});
}

void HermitianAffine::add_block(int var, int r0, const CMatrix& m) {
  for (int c = 0; c < m.cols(); ++c)
    for (int r = 0; r <= c; ++r) add_term(var, r0 + r, r0 + c, m(r, c));
}

void HermitianAffine::add_offdiag(int var, int r0, int c0, const CMatrix& b) {
  for (int c = 0; c < b.cols(); ++c)
    for (int r = 0; r < b.rows(); ++r) add_term(var, r0 + r, c0 + c, b(r, c));
}

CMatrix HermitianAffine::evaluate(const Eigen::VectorXd& x) const {
  CMatrix h = CMatrix::Zero(order_, order_);
  for (const auto& e : entries_) {
    const double w = e.var < 0 ? 1.0 : x(e.var);
    h(e.r, e.c) += w * e.v;
    if (e.r != e.c) h(e.c, e.r) += w * std::conj(e.v);
  }
  return h;
}

ConeBlock HermitianAffine::to_block(int num_vars, std::string label) const {
  // Real embedding [[Re, -Im], [Im, Re]] in svec coordinates.
  const int n = order_;
  const int m = 2 * n;
  ConeBlock b;
  b.kind = ConeKind::Psd;
  b.order = m;
  b.label = std::move(label);
  b.offset = Eigen::VectorXd::Zero(svec_size(m));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(entries_.size() * 4);
  auto put = [&](int var, int i, int j, double val) {
    if (val == 0.0) return;
    if (i < j) std::swap(i, j);
    const double s = (i == j) ? 1.0 : kSqrt2;
    const int idx = svec_index(m, i, j);
    if (var < 0)
      b.offset(idx) += s * val;
    else
      trip.emplace_back(idx, var, s * val);
  };
  for (const auto& e : entries_) {
    const double re = e.v.real();
    const double im = e.v.imag();
    // entry (r, c) with r <= c; lower-triangle images only
    if (e.r == e.c) {
      put(e.var, e.r, e.r, re);
      put(e.var, e.r + n, e.r + n, re);
    } else {
      put(e.var, e.c, e.r, re);          // Re block, (c, r) = Re
      put(e.var, e.c + n, e.r + n, re);  // lower Re block
      // Im block at (n + i, j) holds Im(h_ij).
      put(e.var, n + e.r, e.c, im);    // (r, c) entry
      put(e.var, n + e.c, e.r, -im);   // (c, r) entry, Im(h_cr) = -Im(h_rc)
    }
  }
  b.coeff.resize(svec_size(m), num_vars);
  b.coeff.setFromTriplets(trip.begin(), trip.end());
  return b;
}

// ---------------------------------------------------------------------------

int ProgramBuilder::add_var(const std::string& name) {
  names_.push_back(name);
  return static_cast<int>(names_.size()) - 1;
}

int ProgramBuilder::add_vars(const std::string& name, int count) {
  const int first = num_vars();
  for (int i = 0; i < count; ++i) names_.push_back(name + "[" + std::to_string(i) + "]");
  return first;
}

void ProgramBuilder::set_objective(int var, double coef) { objective_.emplace_back(var, coef); }

ConeBlock ProgramBuilder::vector_block(ConeKind kind,
                                       const std::vector<std::pair<Linear, double>>& rows,
                                       std::string label) const {
  ConeBlock b;
  b.kind = kind;
  b.label = std::move(label);
  b.offset.resize(static_cast<int>(rows.size()));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    b.offset(static_cast<int>(r)) = rows[r].second;
    for (const auto& [v, c] : rows[r].first)
      if (c != 0.0) trip.emplace_back(static_cast<int>(r), v, c);
  }
  // columns sized at build()
  b.coeff.resize(static_cast<int>(rows.size()), 1 + (trip.empty() ? 0 : std::max_element(trip.begin(), trip.end(), [](auto& a, auto& c) { return a.col() < c.col(); })->col()));
  b.coeff.setFromTriplets(trip.begin(), trip.end());
  return b;
}

void ProgramBuilder::add_nonneg(const Linear& terms, double constant, std::string label) {
  pending_.push_back(vector_block(ConeKind::NonNeg, {{terms, constant}}, std::move(label)));
}

void ProgramBuilder::add_equality(const Linear& terms, double constant, std::string label) {
  pending_.push_back(vector_block(ConeKind::Zero, {{terms, constant}}, std::move(label)));
}

void ProgramBuilder::add_soc(const std::vector<std::pair<Linear, double>>& rows, std::string label) {
  if (rows.empty()) throw std::invalid_argument("add_soc: empty cone");
  pending_.push_back(vector_block(ConeKind::SecondOrder, rows, std::move(label)));
}

void ProgramBuilder::add_hermitian(const HermitianAffine& h, std::string label) {
  lmi_slot_.push_back(static_cast<int>(pending_.size()));
  pending_.emplace_back();  // placeholder, filled at build()
  lmis_.push_back(h);
  lmi_labels_.push_back(std::move(label));
}

ConicProgram ProgramBuilder::build() const {
  ConicProgram p;
  p.num_vars = num_vars();
  p.maximize = maximize_;
  p.objective = Eigen::VectorXd::Zero(p.num_vars);
  for (const auto& [v, c] : objective_) p.objective(v) += c;
  p.blocks = pending_;
  for (std::size_t k = 0; k < lmis_.size(); ++k)
    p.blocks[lmi_slot_[k]] = lmis_[k].to_block(p.num_vars, lmi_labels_[k]);
  for (auto& b : p.blocks) {
    if (b.coeff.cols() != p.num_vars) {
      Eigen::SparseMatrix<double> c(b.coeff.rows(), p.num_vars);
      std::vector<Eigen::Triplet<double>> trip;
      for (int k = 0; k < b.coeff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(b.coeff, k); it; ++it)
          trip.emplace_back(it.row(), it.col(), it.value());
      c.setFromTriplets(trip.begin(), trip.end());
      b.coeff = std::move(c);
    }
  }
  return p;
}

}  // namespace starsee::conic
