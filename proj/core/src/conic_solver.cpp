// Primal-dual interior-point method on the homogeneous self-dual embedding
// with Nesterov-Todd scaling and a Mehrotra predictor-corrector.
//
//   minimize c'x  s.t.  G x + s = h,  A x = b,  s in K
//
// K is a product of nonnegative orthants, second-order cones and PSD cones
// (svec form). Zero-cone blocks become rows of A.

#include "starsee/conic.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace starsee::conic {

namespace {

// Set STARSEE_IPM_TRACE to print per-iteration residuals on stderr.
bool ipm_trace() {
  static const bool on = std::getenv("STARSEE_IPM_TRACE") != nullptr;
  return on;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Cone {
  ConeKind kind;
  int start;  // row offset in the stacked s/z vector
  int rows;
  int order;  // psd only
  std::vector<int> vars;  // columns of G with a nonzero in this block
  // psd only: coefficient of vars[j] written as B + B' with B nonzero on the
  // columns cols[j] only; bcols[j] holds those columns.
  std::vector<std::vector<int>> cols;
  std::vector<Eigen::MatrixXd> bcols;
};

// Split a symmetric sparse matrix into B + B' with few nonzero columns in B.
void split_columns(const std::vector<Eigen::Triplet<double>>& entries, int n, std::vector<int>& cols,
                   Eigen::MatrixXd& b) {
  std::vector<int> degree(n, 0);
  for (const auto& t : entries)
    if (t.row() != t.col()) {
      ++degree[t.row()];
      ++degree[t.col()];
    }
  std::vector<int> slot(n, -1);
  std::vector<std::pair<int, int>> where;  // (row, chosen column)
  where.reserve(entries.size());
  for (const auto& t : entries) {
    int r = t.row();
    int c = t.col();
    if (r != c && (degree[r] > degree[c] || (degree[r] == degree[c] && r > c))) std::swap(r, c);
    if (slot[c] < 0) {
      slot[c] = static_cast<int>(cols.size());
      cols.push_back(c);
    }
    where.emplace_back(r, c);
  }
  b = Eigen::MatrixXd::Zero(n, static_cast<int>(cols.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& t = entries[k];
    const double v = t.row() == t.col() ? 0.5 * t.value() : t.value();
    b(where[k].first, slot[where[k].second]) += v;
  }
}

// Scaling data of one cone at the current iterate.
struct Scaling {
  Eigen::VectorXd d;    // nonneg: W = diag(d)
  double beta = 1.0;    // soc: W = beta * Wbar(w)
  Eigen::VectorXd w;    // soc hyperbolic point, w'Jw = 1
  Eigen::MatrixXd r;    // psd: W(Z) = R' Z R
  Eigen::MatrixXd rinv;
  Eigen::MatrixXd p;    // psd: r r', so W' W(Z) = P Z P
  Eigen::VectorXd lam;  // psd: diagonal of the scaled point
};

class Solver {
 public:
  Solver(const ConicProgram& prog, const SolverOptions& opts) : prog_(prog), opts_(opts) { setup(); }
  ConicSolution run();

 private:
  const ConicProgram& prog_;
  SolverOptions opts_;

  int n_ = 0;
  int p_ = 0;
  int m_ = 0;
  int degree_ = 0;
  Eigen::SparseMatrix<double> g_;
  Eigen::SparseMatrix<double> a_;
  Eigen::VectorXd h_;
  Eigen::VectorXd b_;
  Eigen::VectorXd c_;
  std::vector<Cone> cones_;
  std::vector<Scaling> sc_;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;

  void setup();

  // Cone algebra on stacked vectors.
  Eigen::VectorXd identity() const;
  Eigen::VectorXd jordan(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  Eigen::VectorXd lam_div(const Eigen::VectorXd& lam, const Eigen::VectorXd& d) const;
  double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const;
  double min_eig(const Eigen::VectorXd& x) const;
  double dot(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const { return u.dot(v); }

  void compute_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z, Eigen::VectorXd& lam);
  void identity_scaling();
  Eigen::VectorXd apply_w(const Eigen::VectorXd& x) const;       // W x
  Eigen::VectorXd apply_winv(const Eigen::VectorXd& x) const;    // W^{-1} x
  Eigen::VectorXd apply_wt(const Eigen::VectorXd& x) const;      // W' x
  Eigen::VectorXd apply_wit(const Eigen::VectorXd& x) const;     // W^{-T} x
  Eigen::VectorXd apply_wtw(const Eigen::VectorXd& x) const;     // W' W x

  bool factor();
  void kkt_solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const Eigen::VectorXd& r3,
                 Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::VectorXd& z) const;
  void kkt_solve_once(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const Eigen::VectorXd& r3,
                      Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::VectorXd& z) const;

  ConicSolution finish(SolveStatus st, const Eigen::VectorXd& x, int iters, bool stalled = false) const;
};

void Solver::setup() {
  n_ = prog_.num_vars;
  c_ = prog_.objective.size() ? prog_.objective : Eigen::VectorXd::Zero(n_);
  if (prog_.maximize) c_ = -c_;

  std::vector<Eigen::Triplet<double>> gt;
  std::vector<Eigen::Triplet<double>> at;
  std::vector<double> hv;
  std::vector<double> bv;
  for (const auto& blk : prog_.blocks) {
    if (blk.kind == ConeKind::Zero) {
      for (int k = 0; k < blk.coeff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(blk.coeff, k); it; ++it)
          at.emplace_back(p_ + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      for (int i = 0; i < blk.rows(); ++i) bv.push_back(-blk.offset(i));
      p_ += blk.rows();
      continue;
    }
    Cone cone{blk.kind, m_, blk.rows(), blk.order, {}, {}, {}};
    std::vector<char> seen(n_, 0);
    for (int k = 0; k < blk.coeff.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(blk.coeff, k); it; ++it) {
        gt.emplace_back(m_ + static_cast<int>(it.row()), static_cast<int>(it.col()), -it.value());
        seen[it.col()] = 1;
      }
    for (int v = 0; v < n_; ++v)
      if (seen[v]) cone.vars.push_back(v);
    if (blk.kind == ConeKind::Psd) {
      // lower-triangle entries of each coefficient matrix (G = -coeff)
      std::vector<std::vector<Eigen::Triplet<double>>> ent(n_);
      std::vector<std::pair<int, int>> pos(blk.rows());
      for (int j = 0, idx = 0; j < blk.order; ++j)
        for (int i = j; i < blk.order; ++i) pos[idx++] = {i, j};
      for (int k = 0; k < blk.coeff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(blk.coeff, k); it; ++it) {
          const auto [i, j] = pos[it.row()];
          const double v = (i == j ? 1.0 : 1.0 / std::sqrt(2.0)) * -it.value();
          ent[it.col()].emplace_back(i, j, v);
        }
      for (int v : cone.vars) {
        cone.cols.emplace_back();
        cone.bcols.emplace_back();
        split_columns(ent[v], blk.order, cone.cols.back(), cone.bcols.back());
      }
    }
    for (int i = 0; i < blk.rows(); ++i) hv.push_back(blk.offset(i));
    m_ += blk.rows();
    degree_ += blk.kind == ConeKind::NonNeg ? blk.rows() : blk.kind == ConeKind::SecondOrder ? 1 : blk.order;
    cones_.push_back(std::move(cone));
  }
  g_.resize(m_, n_);
  g_.setFromTriplets(gt.begin(), gt.end());
  a_.resize(p_, n_);
  a_.setFromTriplets(at.begin(), at.end());
  h_ = Eigen::Map<Eigen::VectorXd>(hv.data(), static_cast<int>(hv.size()));
  b_ = Eigen::Map<Eigen::VectorXd>(bv.data(), static_cast<int>(bv.size()));
  sc_.resize(cones_.size());
}

Eigen::VectorXd Solver::identity() const {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
  for (const auto& k : cones_) {
    if (k.kind == ConeKind::NonNeg) {
      e.segment(k.start, k.rows).setOnes();
    } else if (k.kind == ConeKind::SecondOrder) {
      e(k.start) = 1.0;
    } else {
      e.segment(k.start, k.rows) = svec(Eigen::MatrixXd::Identity(k.order, k.order));
    }
  }
  return e;
}

Eigen::VectorXd Solver::jordan(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(m_);
  for (const auto& k : cones_) {
    auto us = u.segment(k.start, k.rows);
    auto vs = v.segment(k.start, k.rows);
    auto os = out.segment(k.start, k.rows);
    if (k.kind == ConeKind::NonNeg) {
      os = us.cwiseProduct(vs);
    } else if (k.kind == ConeKind::SecondOrder) {
      os(0) = us.dot(vs);
      os.tail(k.rows - 1) = us(0) * vs.tail(k.rows - 1) + vs(0) * us.tail(k.rows - 1);
    } else {
      const Eigen::MatrixXd um = smat(us, k.order);
      const Eigen::MatrixXd vm = smat(vs, k.order);
      os = svec(0.5 * (um * vm + vm * um));
    }
  }
  return out;
}

// Solve lam o x = d where lam is the scaled point (diagonal for psd cones).
Eigen::VectorXd Solver::lam_div(const Eigen::VectorXd& lam, const Eigen::VectorXd& d) const {
  Eigen::VectorXd out(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    auto ls = lam.segment(k.start, k.rows);
    auto ds = d.segment(k.start, k.rows);
    auto os = out.segment(k.start, k.rows);
    if (k.kind == ConeKind::NonNeg) {
      os = ds.cwiseQuotient(ls);
    } else if (k.kind == ConeKind::SecondOrder) {
      const double l0 = ls(0);
      const auto l1 = ls.tail(k.rows - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * ds(0) - l1.dot(ds.tail(k.rows - 1))) / det;
      os(0) = x0;
      os.tail(k.rows - 1) = (ds.tail(k.rows - 1) - x0 * l1) / l0;
    } else {
      const Eigen::VectorXd& lm = sc_[i].lam;
      Eigen::MatrixXd dm = smat(ds, k.order);
      for (int c = 0; c < k.order; ++c)
        for (int r = 0; r < k.order; ++r) dm(r, c) *= 2.0 / (lm(r) + lm(c));
      os = svec(dm);
    }
  }
  return out;
}

double Solver::min_eig(const Eigen::VectorXd& x) const {
  double worst = kInf;
  for (const auto& k : cones_) {
    auto xs = x.segment(k.start, k.rows);
    double e;
    if (k.kind == ConeKind::NonNeg) {
      e = xs.minCoeff();
    } else if (k.kind == ConeKind::SecondOrder) {
      e = xs(0) - xs.tail(k.rows - 1).norm();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(smat(xs, k.order), Eigen::EigenvaluesOnly);
      e = es.eigenvalues()(0);
    }
    worst = std::min(worst, e);
  }
  return worst;
}

// Largest step t with x + t dx in the cone (x interior). x is the scaled point.
double Solver::max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
  double t = kInf;
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    auto xs = x.segment(k.start, k.rows);
    auto ds = dx.segment(k.start, k.rows);
    if (k.kind == ConeKind::NonNeg) {
      for (int j = 0; j < k.rows; ++j)
        if (ds(j) < 0.0) t = std::min(t, -xs(j) / ds(j));
    } else if (k.kind == ConeKind::SecondOrder) {
      // scale by the J-norm of x so the quadratic is well conditioned
      const double xn = std::sqrt(std::max(xs(0) * xs(0) - xs.tail(k.rows - 1).squaredNorm(), 1e-300));
      const Eigen::VectorXd u = xs / xn;
      const Eigen::VectorXd v = ds / xn;
      const double qa = v(0) * v(0) - v.tail(k.rows - 1).squaredNorm();
      const double qb = 2.0 * (u(0) * v(0) - u.tail(k.rows - 1).dot(v.tail(k.rows - 1)));
      const double qc = 1.0;
      double root = kInf;
      if (std::abs(qa) < 1e-14) {
        if (qb < 0.0) root = -qc / qb;
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          const double q = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
          const double r1 = q / qa;
          const double r2 = qc / q;
          if (r1 > 0.0) root = std::min(root, r1);
          if (r2 > 0.0) root = std::min(root, r2);
        }
      }
      // the ray may also leave through the lower nappe only if x0 + t dx0 < 0,
      // which can only happen after crossing the boundary found above
      t = std::min(t, root);
    } else {
      const Eigen::VectorXd& lm = sc_[i].lam;
      Eigen::MatrixXd dm = smat(ds, k.order);
      Eigen::VectorXd is = lm.cwiseSqrt().cwiseInverse();
      dm = is.asDiagonal() * dm * is.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dm, Eigen::EigenvaluesOnly);
      const double e = es.eigenvalues()(0);
      if (e < 0.0) t = std::min(t, -1.0 / e);
    }
  }
  return t;
}

void Solver::identity_scaling() {
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    Scaling& s = sc_[i];
    if (k.kind == ConeKind::NonNeg) {
      s.d = Eigen::VectorXd::Ones(k.rows);
    } else if (k.kind == ConeKind::SecondOrder) {
      s.beta = 1.0;
      s.w = Eigen::VectorXd::Zero(k.rows);
      s.w(0) = 1.0;
    } else {
      s.r = Eigen::MatrixXd::Identity(k.order, k.order);
      s.rinv = s.r;
      s.p = s.r;
      s.lam = Eigen::VectorXd::Ones(k.order);
    }
  }
}

void Solver::compute_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z, Eigen::VectorXd& lam) {
  lam.resize(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    Scaling& sc = sc_[i];
    auto ss = s.segment(k.start, k.rows);
    auto zs = z.segment(k.start, k.rows);
    if (k.kind == ConeKind::NonNeg) {
      sc.d = (ss.array() / zs.array()).sqrt();
      lam.segment(k.start, k.rows) = (ss.array() * zs.array()).sqrt();
    } else if (k.kind == ConeKind::SecondOrder) {
      const int r = k.rows;
      const double sn = std::sqrt(ss(0) * ss(0) - ss.tail(r - 1).squaredNorm());
      const double zn = std::sqrt(zs(0) * zs(0) - zs.tail(r - 1).squaredNorm());
      const Eigen::VectorXd sb = ss / sn;
      const Eigen::VectorXd zb = zs / zn;
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      Eigen::VectorXd w(r);
      w(0) = (sb(0) + zb(0)) / (2.0 * gamma);
      w.tail(r - 1) = (sb.tail(r - 1) - zb.tail(r - 1)) / (2.0 * gamma);
      sc.w = w;
      sc.beta = std::sqrt(sn / zn);
    } else {
      const Eigen::MatrixXd sm = smat(ss, k.order);
      const Eigen::MatrixXd zm = smat(zs, k.order);
      const Eigen::MatrixXd ls = Eigen::LLT<Eigen::MatrixXd>(sm).matrixL();
      const Eigen::MatrixXd lz = Eigen::LLT<Eigen::MatrixXd>(zm).matrixL();
      Eigen::BDCSVD<Eigen::MatrixXd> svd(lz.transpose() * ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const Eigen::VectorXd sv = svd.singularValues();
      const Eigen::VectorXd isq = sv.cwiseSqrt().cwiseInverse();
      sc.r = ls * svd.matrixV() * isq.asDiagonal();
      sc.rinv = isq.asDiagonal() * svd.matrixU().transpose() * lz.transpose();
      sc.lam = sv;
      sc.p = sc.r * sc.r.transpose();
    }
  }
  // SOC lambda from W z
  const Eigen::VectorXd wz = apply_w(z);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    if (k.kind == ConeKind::SecondOrder) lam.segment(k.start, k.rows) = wz.segment(k.start, k.rows);
    if (k.kind == ConeKind::Psd)
      lam.segment(k.start, k.rows) = svec(Eigen::MatrixXd(sc_[i].lam.asDiagonal()));
  }
}

namespace {
// Wbar x and Wbar^{-1} x for the hyperbolic Householder matrix of w.
void soc_apply(const Eigen::VectorXd& w, double beta, bool inverse, Eigen::Ref<const Eigen::VectorXd> x,
               Eigen::Ref<Eigen::VectorXd> y) {
  const int r = static_cast<int>(x.size());
  const double w0 = w(0);
  const auto w1 = w.tail(r - 1);
  const double t = w1.dot(x.tail(r - 1));
  const double sgn = inverse ? -1.0 : 1.0;
  const double y0 = w0 * x(0) + sgn * t;
  const double coef = sgn * x(0) + t / (1.0 + w0);
  Eigen::VectorXd y1 = x.tail(r - 1) + coef * w1;
  const double scale = inverse ? 1.0 / beta : beta;
  y(0) = scale * y0;
  y.tail(r - 1) = scale * y1;
}
}  // namespace

Eigen::VectorXd Solver::apply_w(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    const Scaling& sc = sc_[i];
    if (k.kind == ConeKind::NonNeg) {
      y.segment(k.start, k.rows) = x.segment(k.start, k.rows).cwiseProduct(sc.d);
    } else if (k.kind == ConeKind::SecondOrder) {
      soc_apply(sc.w, sc.beta, false, x.segment(k.start, k.rows), y.segment(k.start, k.rows));
    } else {
      const Eigen::MatrixXd xm = smat(x.segment(k.start, k.rows), k.order);
      y.segment(k.start, k.rows) = svec(sc.r.transpose() * xm * sc.r);
    }
  }
  return y;
}

Eigen::VectorXd Solver::apply_winv(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    const Scaling& sc = sc_[i];
    if (k.kind == ConeKind::NonNeg) {
      y.segment(k.start, k.rows) = x.segment(k.start, k.rows).cwiseQuotient(sc.d);
    } else if (k.kind == ConeKind::SecondOrder) {
      soc_apply(sc.w, sc.beta, true, x.segment(k.start, k.rows), y.segment(k.start, k.rows));
    } else {
      const Eigen::MatrixXd xm = smat(x.segment(k.start, k.rows), k.order);
      y.segment(k.start, k.rows) = svec(sc.rinv.transpose() * xm * sc.rinv);
    }
  }
  return y;
}

Eigen::VectorXd Solver::apply_wt(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    const Scaling& sc = sc_[i];
    if (k.kind == ConeKind::NonNeg) {
      y.segment(k.start, k.rows) = x.segment(k.start, k.rows).cwiseProduct(sc.d);
    } else if (k.kind == ConeKind::SecondOrder) {
      soc_apply(sc.w, sc.beta, false, x.segment(k.start, k.rows), y.segment(k.start, k.rows));
    } else {
      const Eigen::MatrixXd xm = smat(x.segment(k.start, k.rows), k.order);
      y.segment(k.start, k.rows) = svec(sc.r * xm * sc.r.transpose());
    }
  }
  return y;
}

Eigen::VectorXd Solver::apply_wit(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    const Scaling& sc = sc_[i];
    if (k.kind == ConeKind::NonNeg) {
      y.segment(k.start, k.rows) = x.segment(k.start, k.rows).cwiseQuotient(sc.d);
    } else if (k.kind == ConeKind::SecondOrder) {
      soc_apply(sc.w, sc.beta, true, x.segment(k.start, k.rows), y.segment(k.start, k.rows));
    } else {
      const Eigen::MatrixXd xm = smat(x.segment(k.start, k.rows), k.order);
      y.segment(k.start, k.rows) = svec(sc.rinv * xm * sc.rinv.transpose());
    }
  }
  return y;
}

Eigen::VectorXd Solver::apply_wtw(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(m_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    const Scaling& sc = sc_[i];
    auto xs = x.segment(k.start, k.rows);
    auto ys = y.segment(k.start, k.rows);
    if (k.kind == ConeKind::NonNeg) {
      ys = xs.cwiseProduct(sc.d.cwiseAbs2());
    } else if (k.kind == ConeKind::SecondOrder) {
      Eigen::VectorXd t(k.rows);
      soc_apply(sc.w, sc.beta, false, xs, t);
      soc_apply(sc.w, sc.beta, false, t, ys);
    } else {
      const Eigen::MatrixXd xm = smat(xs, k.order);
      ys = svec(sc.p * xm * sc.p);
    }
  }
  return y;
}

bool Solver::factor() {
  Eigen::MatrixXd hmat = Eigen::MatrixXd::Zero(n_, n_);
  for (std::size_t i = 0; i < cones_.size(); ++i) {
    const auto& k = cones_[i];
    const Scaling& sc = sc_[i];
    const int nv = static_cast<int>(k.vars.size());
    if (nv == 0) continue;
    Eigen::MatrixXd gs(k.rows, nv);
    for (int j = 0; j < nv; ++j) {
      if (k.kind == ConeKind::NonNeg) {
        const Eigen::VectorXd col = g_.block(k.start, k.vars[j], k.rows, 1);
        gs.col(j) = col.cwiseQuotient(sc.d);
      } else if (k.kind == ConeKind::SecondOrder) {
        const Eigen::VectorXd col = g_.block(k.start, k.vars[j], k.rows, 1);
        Eigen::VectorXd out(k.rows);
        soc_apply(sc.w, sc.beta, true, col, out);
        gs.col(j) = out;
      } else {
        const auto& cl = k.cols[j];
        const Eigen::MatrixXd left = sc.rinv * k.bcols[j];
        Eigen::MatrixXd right(k.order, static_cast<int>(cl.size()));
        for (std::size_t q = 0; q < cl.size(); ++q) right.col(static_cast<int>(q)) = sc.rinv.col(cl[q]);
        const Eigen::MatrixXd y = left * right.transpose();
        gs.col(j) = svec(y + y.transpose());
      }
    }
    Eigen::MatrixXd hb(nv, nv);
    hb.setZero();
    hb.selfadjointView<Eigen::Lower>().rankUpdate(gs.transpose());
    hb = hb.selfadjointView<Eigen::Lower>();
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nv; ++b) hmat(k.vars[a], k.vars[b]) += hb(a, b);
  }
  const double scale = std::max(1.0, hmat.diagonal().cwiseAbs().maxCoeff());
  const double reg = 1e-13 * scale;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n_ + p_, n_ + p_);
  kkt.topLeftCorner(n_, n_) = hmat + reg * Eigen::MatrixXd::Identity(n_, n_);
  if (p_ > 0) {
    const Eigen::MatrixXd ad = a_;
    kkt.topRightCorner(n_, p_) = ad.transpose();
    kkt.bottomLeftCorner(p_, n_) = ad;
    kkt.bottomRightCorner(p_, p_) = -reg * Eigen::MatrixXd::Identity(p_, p_);
  }
  lu_.compute(kkt);
  return std::isfinite(kkt.sum());
}

void Solver::kkt_solve_once(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const Eigen::VectorXd& r3,
                            Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::VectorXd& z) const {
  // [0 A' G'; A 0 0; G 0 -W'W] [x; y; z] = [r1; r2; r3]
  const Eigen::VectorXd t3 = apply_wit(r3);
  Eigen::VectorXd rhs(n_ + p_);
  rhs.head(n_) = r1 + g_.transpose() * apply_winv(t3);
  rhs.tail(p_) = r2;
  const Eigen::VectorXd sol = lu_.solve(rhs);
  x = sol.head(n_);
  y = sol.tail(p_);
  z = apply_winv(apply_wit(g_ * x) - t3);
}

void Solver::kkt_solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const Eigen::VectorXd& r3,
                       Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::VectorXd& z) const {
  kkt_solve_once(r1, r2, r3, x, y, z);
  for (int it = 0; it < 1; ++it) {
    const Eigen::VectorXd e1 = r1 - (a_.transpose() * y + g_.transpose() * z);
    const Eigen::VectorXd e2 = r2 - a_ * x;
    const Eigen::VectorXd e3 = r3 - (g_ * x - apply_wtw(z));
    Eigen::VectorXd dx, dy, dz;
    kkt_solve_once(e1, e2, e3, dx, dy, dz);
    x += dx;
    y += dy;
    z += dz;
  }
}

ConicSolution Solver::finish(SolveStatus st, const Eigen::VectorXd& x, int iters, bool stalled) const {
  ConicSolution sol;
  sol.status = st;
  sol.iterations = iters;
  sol.primal = x;
  if (x.size() == n_) {
    sol.objective_value = prog_.objective.size() ? prog_.objective.dot(x) : 0.0;
    sol.max_constraint_residual = constraint_residual(prog_, x);
    const double tol = 10.0 * (stalled ? std::max(opts_.feasibility_tol, opts_.stall_tol) : opts_.feasibility_tol);
    if (st == SolveStatus::Optimal && sol.max_constraint_residual > tol)
      sol.status = SolveStatus::NumericalFailure;
  }
  return sol;
}

ConicSolution Solver::run() {
  if (m_ == 0 && p_ == 0) {
    // no constraints: bounded only if the objective is zero
    if (c_.norm() == 0.0) return finish(SolveStatus::Optimal, Eigen::VectorXd::Zero(n_), 0);
    return finish(SolveStatus::Unbounded, Eigen::VectorXd(), 0);
  }
  const Eigen::VectorXd e = identity();

  // Starting point from two least-norm problems with W = I.
  identity_scaling();
  if (!factor()) return finish(SolveStatus::NumericalFailure, Eigen::VectorXd(), 0);
  Eigen::VectorXd x, y, z, s;
  {
    Eigen::VectorXd xx, yy, zz;
    kkt_solve(Eigen::VectorXd::Zero(n_), b_, h_, xx, yy, zz);
    x = xx;
    s = -zz;
    kkt_solve(-c_, Eigen::VectorXd::Zero(p_), Eigen::VectorXd::Zero(m_), xx, yy, zz);
    y = yy;
    z = zz;
  }
  {
    const double ap = -min_eig(s);
    if (ap >= -1e-8 * std::max(1.0, s.norm())) s += (1.0 + std::max(ap, 0.0)) * e;
    const double ad = -min_eig(z);
    if (ad >= -1e-8 * std::max(1.0, z.norm())) z += (1.0 + std::max(ad, 0.0)) * e;
  }
  double tau = 1.0;
  double kappa = 1.0;

  const double resx0 = std::max(1.0, c_.norm());
  const double resy0 = std::max(1.0, b_.norm());
  const double resz0 = std::max(1.0, h_.norm());
  const double nu = static_cast<double>(degree_);

  Eigen::VectorXd lam;
  SolveStatus last_status = SolveStatus::NumericalFailure;
  Eigen::VectorXd best_x;
  double best_score = kInf;
  int stalled = 0;

  for (int iter = 0; iter <= opts_.max_iterations; ++iter) {
    const Eigen::VectorXd rx = a_.transpose() * y + g_.transpose() * z + tau * c_;
    const Eigen::VectorXd ry = -(a_ * x) + tau * b_;
    const Eigen::VectorXd rz = s + g_ * x - tau * h_;
    const double cx = c_.dot(x);
    const double by = b_.dot(y);
    const double hz = h_.dot(z);
    const double rt = kappa + cx + by + hz;
    const double gap = dot(s, z);
    const double mu = (gap + tau * kappa) / (nu + 1.0);

    const double pcost = cx / tau;
    const double dcost = -(by + hz) / tau;
    double relgap = kInf;
    if (pcost < 0.0) relgap = gap / tau / tau / -pcost;
    else if (dcost > 0.0) relgap = gap / tau / tau / dcost;
    const double pres = std::max(ry.norm() / tau / resy0, rz.norm() / tau / resz0);
    const double dres = rx.norm() / tau / resx0;
    const double abs_gap = gap / tau / tau;

    if (ipm_trace())
      std::fprintf(stderr, "%3d pc %.9g dc %.9g gap %.3g pres %.3g dres %.3g tau %.3g kap %.3g\n", iter, pcost,
                   dcost, abs_gap, pres, dres, tau, kappa);
    const bool feasible = pres <= opts_.feasibility_tol && dres <= opts_.feasibility_tol;
    if (feasible && (abs_gap <= opts_.abs_gap_tol || relgap <= opts_.gap_tol))
      return finish(SolveStatus::Optimal, x / tau, iter);

    // Keep the best primal point seen for the stall fallback.
    {
      const double score = std::max({pres, dres, std::min(relgap, abs_gap)});
      if (score < 0.9 * best_score) stalled = 0;
      else if (++stalled >= 8) break;
      if (score < best_score) {
        best_score = score;
        best_x = x / tau;
      }
    }

    if (hz + by < 0.0) {
      const double pinf = (a_.transpose() * y + g_.transpose() * z).norm() / resx0 / -(hz + by);
      if (pinf <= opts_.feasibility_tol) return finish(SolveStatus::Infeasible, Eigen::VectorXd(), iter);
    }
    if (cx < 0.0) {
      const double dinf = std::max((a_ * x).norm() / resy0, (g_ * x + s).norm() / resz0) / -cx;
      if (dinf <= opts_.feasibility_tol) return finish(SolveStatus::Unbounded, Eigen::VectorXd(), iter);
    }
    if (iter == opts_.max_iterations) break;

    compute_scaling(s, z, lam);
    if (!factor()) break;

    Eigen::VectorXd x1, y1, z1;
    kkt_solve(-c_, b_, h_, x1, y1, z1);
    const double denom = c_.dot(x1) + b_.dot(y1) + h_.dot(z1) - kappa / tau;

    const Eigen::VectorXd lamsq = jordan(lam, lam);
    Eigen::VectorXd dsa_s, dza_s;
    double dtau_a = 0.0, dkap_a = 0.0;
    double sigma = 0.0;
    double step = 0.0;
    Eigen::VectorXd dx, dy, dz, ds;
    double dtau = 0.0, dkap = 0.0;

    for (int pass = 0; pass < 2; ++pass) {
      const double f = pass == 0 ? 1.0 : 1.0 - sigma;
      Eigen::VectorXd d_s = -lamsq;
      double d_k = -tau * kappa;
      if (pass == 1) {
        d_s -= jordan(dsa_s, dza_s);
        d_s += sigma * mu * e;
        d_k += -dtau_a * dkap_a + sigma * mu;
      }
      const Eigen::VectorXd ld = lam_div(lam, d_s);
      const Eigen::VectorXd r3 = -f * rz - apply_wt(ld);
      Eigen::VectorXd x2, y2, z2;
      kkt_solve(-f * rx, f * ry, r3, x2, y2, z2);
      const double num = -f * rt - d_k / tau - (c_.dot(x2) + b_.dot(y2) + h_.dot(z2));
      dtau = num / denom;
      dx = x2 + dtau * x1;
      dy = y2 + dtau * y1;
      dz = z2 + dtau * z1;
      dkap = (d_k - kappa * dtau) / tau;
      // ds = W'(lam \ d_s - W dz)
      const Eigen::VectorXd wdz = apply_w(dz);
      const Eigen::VectorXd dss = ld - wdz;  // scaled ds
      ds = apply_wt(dss);

      double tmax = std::min(max_step(lam, dss), max_step(lam, wdz));
      if (dtau < 0.0) tmax = std::min(tmax, -tau / dtau);
      if (dkap < 0.0) tmax = std::min(tmax, -kappa / dkap);
      if (pass == 0) {
        const double ta = std::min(1.0, tmax);
        sigma = std::pow(std::clamp(1.0 - ta, 0.0, 1.0), 3);
        dsa_s = dss;
        dza_s = wdz;
        dtau_a = dtau;
        dkap_a = dkap;
      } else {
        step = std::min(1.0, 0.99 * tmax);
      }
    }
    if (!(step > 0.0) || !std::isfinite(step) || !dx.allFinite()) {
      if (ipm_trace()) std::fprintf(stderr, "stop: step %g\n", step);
      break;
    }

    x += step * dx;
    y += step * dy;
    z += step * dz;
    s += step * ds;
    tau += step * dtau;
    kappa += step * dkap;
    last_status = SolveStatus::NumericalFailure;

    // Guard against drift out of the cone from round-off.
    if (min_eig(s) <= 0.0 || min_eig(z) <= 0.0 || tau <= 0.0 || kappa <= 0.0) {
      if (ipm_trace()) std::fprintf(stderr, "stop: left cone %g %g\n", min_eig(s), min_eig(z));
      break;
    }
  }

  if (best_x.size() == n_ && best_score <= opts_.stall_tol) return finish(SolveStatus::Optimal, best_x, opts_.max_iterations, true);
  return finish(last_status, best_x, opts_.max_iterations);
}

}  // namespace

namespace {

// Column scaling x = d .* x_scaled so every variable's largest coefficient is
// near one. Cone blocks are left as they are.
ConicProgram equilibrated(const ConicProgram& prog, int passes, Eigen::VectorXd& d) {
  const int n = prog.num_vars;
  d = Eigen::VectorXd::Ones(n);
  for (int pass = 0; pass < passes; ++pass) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    for (const auto& b : prog.blocks)
      for (int k = 0; k < b.coeff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(b.coeff, k); it; ++it)
          col(it.col()) = std::max(col(it.col()), std::abs(it.value() * d(it.col())));
    for (int j = 0; j < n; ++j)
      if (col(j) > 0.0) d(j) /= std::sqrt(col(j));
  }
  ConicProgram out = prog;
  for (auto& b : out.blocks) b.coeff = b.coeff * d.asDiagonal();
  if (out.objective.size()) {
    out.objective = out.objective.cwiseProduct(d);
    const double m = out.objective.cwiseAbs().maxCoeff();
    if (m > 0.0) out.objective /= m;
  }
  return out;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts) {
  if (prog.objective.size() != 0 && prog.objective.size() != prog.num_vars)
    throw std::invalid_argument("solve: objective size does not match num_vars");
  for (const auto& b : prog.blocks) {
    if (b.coeff.rows() != b.rows() || b.coeff.cols() != prog.num_vars)
      throw std::invalid_argument("solve: block '" + b.label + "' has inconsistent dimensions");
    if (b.kind == ConeKind::Psd && svec_size(b.order) != b.rows())
      throw std::invalid_argument("solve: psd block '" + b.label + "' has wrong svec length");
    if (b.kind == ConeKind::SecondOrder && b.rows() < 1)
      throw std::invalid_argument("solve: empty second-order cone");
  }
  if (!opts.equilibrate) {
    Solver s(prog, opts);
    return s.run();
  }
  Eigen::VectorXd d;
  const ConicProgram scaled = equilibrated(prog, opts.equilibrate_passes, d);
  Solver s(scaled, opts);
  ConicSolution sol = s.run();
  if (sol.primal.size() == prog.num_vars) {
    sol.primal = sol.primal.cwiseProduct(d);
    sol.objective_value = prog.objective.size() ? prog.objective.dot(sol.primal) : 0.0;
    sol.max_constraint_residual = constraint_residual(prog, sol.primal);
  }
  return sol;
}

}  // namespace starsee::conic
