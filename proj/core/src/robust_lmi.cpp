#include "starsee/robust_lmi.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace starsee::robust {

namespace {
constexpr double kLn2 = 0.69314718055994530942;
constexpr double kLn4 = 2.0 * kLn2;

CVec kron(const CVec& a, const CVec& b) {
  CVec out(a.size() * b.size());
  for (int n = 0; n < a.size(); ++n) out.segment(n * b.size(), b.size()) = a(n) * b;
  return out;
}

void check_nonneg(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (x < 0.0) throw std::invalid_argument(std::string(what) + ": negative multiplier");
}
}  // namespace

// ---------------------------------------------------------------------------

double AffineReal::eval(const Eigen::VectorXd& x) const {
  double v = c;
  for (const auto& [i, a] : terms) v += a * x(i);
  return v;
}

AffineReal& AffineReal::add(int var, double coef) {
  terms.emplace_back(var, coef);
  return *this;
}

AffineReal& AffineReal::add(const AffineReal& o, double scale) {
  c += scale * o.c;
  for (const auto& [i, a] : o.terms) terms.emplace_back(i, scale * a);
  return *this;
}

Cplx AffineScalar::eval(const Eigen::VectorXd& x) const {
  Cplx v = c;
  for (const auto& [i, a] : t) v += x(i) * a;
  return v;
}

AffineVector AffineVector::variables(int n, int first_var) {
  AffineVector v;
  v.c = CVec::Zero(n);
  for (int i = 0; i < n; ++i) {
    CVec e = CVec::Zero(n);
    e(i) = 1.0;
    v.t.emplace_back(first_var + 2 * i, e);
    e(i) = Cplx(0.0, 1.0);
    v.t.emplace_back(first_var + 2 * i + 1, e);
  }
  return v;
}

CVec AffineVector::eval(const Eigen::VectorXd& x) const {
  CVec v = c;
  for (const auto& [i, a] : t) v += x(i) * a;
  return v;
}

AffineVector AffineVector::scaled(Cplx s) const {
  AffineVector v{s * c, {}};
  for (const auto& [i, a] : t) v.t.emplace_back(i, s * a);
  return v;
}

AffineVector AffineVector::with_var_scale(int var, const CVec& v) const {
  AffineVector out = *this;
  out.t.emplace_back(var, v);
  return out;
}

CMat AffineHermitian::eval(const Eigen::VectorXd& x) const {
  CMat m = c;
  for (const auto& [i, a] : t) m += x(i) * a;
  return m;
}

AffineVector scale_by_variable(const CVec& v, int var) {
  AffineVector out;
  out.c = CVec::Zero(v.size());
  out.t.emplace_back(var, v);
  return out;
}

AffineScalar row_times(const CRow& row, const AffineVector& w) {
  AffineScalar s;
  s.c = (row * w.c).value();
  for (const auto& [i, a] : w.t) s.t.emplace_back(i, (row * a).value());
  return s;
}

AffineScalar observe(const CVec& h, const CMat& G, const AffineVector& u, const AffineVector& w) {
  if (!u.is_constant() && !w.is_constant())
    throw std::invalid_argument("observe: beam and surface cannot both vary");
  if (u.is_constant()) return row_times(h.adjoint() + u.c.adjoint() * G, w);
  const CVec Gw = G * w.c;
  AffineScalar s;
  s.c = h.dot(w.c) + u.c.dot(Gw);
  for (const auto& [i, a] : u.t) s.t.emplace_back(i, a.dot(Gw));
  return s;
}

// ---------------------------------------------------------------------------

ErrorLayout ErrorLayout::for_radii(int N, int M, double xi, double zeta) {
  return {N, M, xi > 0.0, zeta > 0.0};
}

CVec stack_error(const ErrorLayout& lay, const CVec& dh, const CMat& dG) {
  CVec x(lay.size());
  if (lay.with_h) x.head(lay.N) = dh;
  if (lay.with_g) {
    const CMat conj = dG.conjugate();
    x.segment(lay.g_offset(), lay.M * lay.N) = Eigen::Map<const CVec>(conj.data(), lay.M * lay.N);
  }
  return x;
}

CVec surface_stack(const ErrorLayout& lay, const CVec& w, const CVec& u) {
  CVec v(lay.size());
  if (lay.with_h) v.head(lay.N) = w;
  if (lay.with_g) v.segment(lay.g_offset(), lay.M * lay.N) = kron(w, u.conjugate());
  return v;
}

AffineVector surface_stack(const ErrorLayout& lay, const AffineVector& w, const AffineVector& u) {
  if (!u.is_constant() && !w.is_constant())
    throw std::invalid_argument("surface_stack: beam and surface cannot both vary");
  AffineVector v;
  v.c = surface_stack(lay, w.c, u.c);
  const int n = lay.size();
  for (const auto& [i, a] : w.t) {
    CVec e = CVec::Zero(n);
    if (lay.with_h) e.head(lay.N) = a;
    if (lay.with_g) e.segment(lay.g_offset(), lay.M * lay.N) = kron(a, u.c.conjugate());
    v.t.emplace_back(i, e);
  }
  for (const auto& [i, a] : u.t) {
    CVec e = CVec::Zero(n);
    if (lay.with_g) e.segment(lay.g_offset(), lay.M * lay.N) = kron(w.c, a.conjugate());
    v.t.emplace_back(i, e);
  }
  return v;
}

double QuadraticForm::eval(const CVec& x) const {
  if (x.size() == 0) return a0;
  return (x.adjoint() * A * x).value().real() + 2.0 * a.dot(x).real() + a0;
}

QuadraticForm AffineQuadratic::eval(const Eigen::VectorXd& x) const {
  return {A.eval(x), a.eval(x), a0.eval(x)};
}

void AffineQuadratic::accumulate(const AffineQuadratic& o) {
  A.c += o.A.c;
  A.t.insert(A.t.end(), o.A.t.begin(), o.A.t.end());
  a.c += o.a.c;
  a.t.insert(a.t.end(), o.a.t.begin(), o.a.t.end());
  a0.add(o.a0);
}

AffineQuadratic linearize_gain(const ErrorLayout& lay, const CVec& h_hat, const CMat& G_hat,
                               const AffineVector& w, const AffineVector& u, const CVec& w0,
                               const CVec& u0) {
  const AffineVector v = surface_stack(lay, w, u);
  const CVec v0 = surface_stack(lay, w0, u0);
  const AffineScalar xh = observe(h_hat, G_hat, u, w);
  const Cplx xh0 = h_hat.dot(w0) + u0.dot(G_hat * w0);

  AffineQuadratic q;
  q.A.c = v.c * v0.adjoint() + v0 * v.c.adjoint() - v0 * v0.adjoint();
  for (const auto& [i, vi] : v.t) q.A.t.emplace_back(i, vi * v0.adjoint() + v0 * vi.adjoint());

  q.a.c = std::conj(xh0) * v.c + std::conj(xh.c) * v0 - std::conj(xh0) * v0;
  for (const auto& [i, vi] : v.t) q.a.t.emplace_back(i, std::conj(xh0) * vi);
  for (const auto& [i, ti] : xh.t) q.a.t.emplace_back(i, std::conj(ti) * v0);

  q.a0.c = 2.0 * (std::conj(xh0) * xh.c).real() - std::norm(xh0);
  for (const auto& [i, ti] : xh.t) q.a0.add(i, 2.0 * (std::conj(xh0) * ti).real());
  return q;
}

QuadraticForm gain_lower_bound(const ErrorLayout& lay, const CVec& h_hat, const CMat& G_hat, const CVec& w,
                               const CVec& u, const CVec& w0, const CVec& u0) {
  const AffineQuadratic q =
      linearize_gain(lay, h_hat, G_hat, AffineVector::constant(w), AffineVector::constant(u), w0, u0);
  return q.eval(Eigen::VectorXd());
}

// ---------------------------------------------------------------------------

CMat s_procedure_matrix(const QuadraticForm& f0, const std::vector<QuadraticForm>& fi,
                        const std::vector<double>& mult) {
  if (fi.size() != mult.size()) throw std::invalid_argument("s_procedure_matrix: multiplier count");
  check_nonneg(mult, "s_procedure_matrix");
  const int n = static_cast<int>(f0.A.rows());
  auto bordered = [n](const QuadraticForm& f) {
    CMat m(n + 1, n + 1);
    m.topLeftCorner(n, n) = f.A;
    m.topRightCorner(n, 1) = f.a;
    m.bottomLeftCorner(1, n) = f.a.adjoint();
    m(n, n) = f.a0;
    return m;
  };
  CMat out = bordered(f0);
  for (std::size_t i = 0; i < fi.size(); ++i) out -= mult[i] * bordered(fi[i]);
  return out;
}

QuadraticForm ball_constraint(const ErrorLayout& lay, bool direct_part, double radius) {
  const int n = lay.size();
  QuadraticForm f{CMat::Zero(n, n), CVec::Zero(n), radius * radius};
  if (direct_part && lay.with_h)
    f.A.topLeftCorner(lay.N, lay.N) = -CMat::Identity(lay.N, lay.N);
  if (!direct_part && lay.with_g)
    f.A.block(lay.g_offset(), lay.g_offset(), lay.M * lay.N, lay.M * lay.N) =
        -CMat::Identity(lay.M * lay.N, lay.M * lay.N);
  return f;
}

CMat sign_definiteness_matrix(const CMat& A, const std::vector<SignDefiniteTerm>& terms,
                              const std::vector<double>& mult) {
  if (terms.size() != mult.size()) throw std::invalid_argument("sign_definiteness_matrix: multiplier count");
  check_nonneg(mult, "sign_definiteness_matrix");
  int n = static_cast<int>(A.rows());
  for (const auto& t : terms) {
    if (t.radius < 0.0) throw std::invalid_argument("sign_definiteness_matrix: negative radius");
    n += static_cast<int>(t.E.rows());
  }
  CMat out = CMat::Zero(n, n);
  const int a = static_cast<int>(A.rows());
  out.topLeftCorner(a, a) = A;
  int off = a;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    const int r = static_cast<int>(t.E.rows());
    out.topLeftCorner(a, a) -= mult[i] * t.F.adjoint() * t.F;
    out.block(0, off, a, r) = -t.radius * t.E.adjoint();
    out.block(off, 0, r, a) = -t.radius * t.E;
    out.block(off, off, r, r) = mult[i] * CMat::Identity(r, r);
    off += r;
  }
  return out;
}

SchurExpansion schur_expand(const CMat& W, const CVec& u, const CVec& h_hat, const CMat& G_hat, double eta,
                            double noise) {
  const int c = static_cast<int>(W.cols());
  SchurExpansion s;
  s.W = W;
  s.u = u;
  const CRow y = (h_hat.adjoint() + u.adjoint() * G_hat) * W;
  s.core = CMat::Identity(1 + c, 1 + c);
  s.core(0, 0) = eta - noise;
  s.core.block(0, 1, 1, c) = y;
  s.core.block(1, 0, c, 1) = y.adjoint();
  return s;
}

CMat SchurExpansion::with_error(const CVec& dh, const CMat& dG) const {
  const int c = static_cast<int>(W.cols());
  const CRow d = dh.adjoint() * W + u.adjoint() * dG * W;
  CMat m = core;
  m.block(0, 1, 1, c) += d;
  m.block(1, 0, c, 1) += d.adjoint();
  return m;
}

// ---------------------------------------------------------------------------

double sca_eta_bound(double eta, double r, double eta0, double r0) {
  return ((r - r0) * eta0 * kLn2 + eta) * std::exp2(r0);
}

double bilinear_upper_bound(double psi, double rho, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("bilinear_upper_bound: t must be positive");
  return 0.5 * t * psi * psi + rho * rho / (2.0 * t);
}

namespace {
struct MajorantCoef {
  double c, q0, q1, q2;
};
MajorantCoef majorant_coef(double eta0, double r0, double step) {
  const double p4 = std::exp(kLn4 * r0);
  return {std::exp2(r0) / eta0, p4, p4 * kLn4, 0.5 * kLn4 * kLn4 * std::exp(kLn4 * step) * p4};
}
}  // namespace

double eta_pow2_majorant(double eta, double r, double eta0, double r0, double step) {
  const MajorantCoef m = majorant_coef(eta0, r0, step);
  const double d = r - r0;
  return 0.5 * m.c * eta * eta + (m.q0 + m.q1 * d + m.q2 * d * d) / (2.0 * m.c);
}

double eta_pow2_minorant(double eta, double r, double eta0, double r0) {
  return eta0 * std::exp2(r0) * (2.0 + (r - r0) * kLn2 - eta0 / eta);
}

Eigen::VectorXd soc_power_constraint(double rho, const CVec& f_t, const CVec& f_r, double amp, double p0) {
  const int nt = static_cast<int>(f_t.size());
  const int nr = static_cast<int>(f_r.size());
  Eigen::VectorXd v(2 + 2 * nt + 2 * nr);
  v(0) = (rho - p0 + amp) / (2.0 * amp);
  v(1) = (rho - p0 - amp) / (2.0 * amp);
  v.segment(2, nt) = f_t.real();
  v.segment(2 + nt, nt) = f_t.imag();
  v.segment(2 + 2 * nt, nr) = f_r.real();
  v.segment(2 + 2 * nt + nr, nr) = f_r.imag();
  return v;
}

bool soc_holds(const Eigen::VectorXd& v, double tol) {
  return v(0) + tol >= v.tail(v.size() - 1).norm();
}

// ---------------------------------------------------------------------------

namespace {

void add_affine_entry(conic::HermitianAffine& H, int r, int c, const AffineScalar& s) {
  H.add_constant(r, c, s.c);
  for (const auto& [i, a] : s.t) H.add_term(i, r, c, a);
}

void add_real_entry(conic::HermitianAffine& H, int r, int c, const AffineReal& s) {
  H.add_constant(r, c, s.c);
  for (const auto& [i, a] : s.terms) H.add_term(i, r, c, a);
}

int add_multiplier(ProgramBuilder& pb, const std::string& name) {
  const int v = pb.add_var(name);
  pb.add_nonneg({{v, 1.0}}, 0.0, name + ">=0");
  return v;
}

}  // namespace

BlockInfo add_s_procedure_lmi(ProgramBuilder& pb, const ErrorLayout& lay, const AffineQuadratic& f,
                              const AffineReal& rhs, double xi, double zeta, const std::string& label) {
  BlockInfo info;
  info.label = label;
  AffineReal corner = f.a0;
  corner.add(rhs, -1.0);
  const int n = lay.size();
  if (n == 0) {
    pb.add_nonneg(corner.terms, corner.c, label);
    return info;
  }
  conic::HermitianAffine H(n + 1);
  H.add_block(-1, 0, f.A.c);
  for (const auto& [i, a] : f.A.t) H.add_block(i, 0, a);
  H.add_offdiag(-1, 0, n, f.a.c);
  for (const auto& [i, a] : f.a.t) H.add_offdiag(i, 0, n, a);
  add_real_entry(H, n, n, corner);
  if (lay.with_h) {
    const int v = add_multiplier(pb, label + ".ups_h");
    info.multipliers.push_back(v);
    for (int i = 0; i < lay.N; ++i) H.add_term(v, i, i, 1.0);
    H.add_term(v, n, n, -xi * xi);
  }
  if (lay.with_g) {
    const int v = add_multiplier(pb, label + ".ups_g");
    info.multipliers.push_back(v);
    for (int i = 0; i < lay.M * lay.N; ++i) H.add_term(v, lay.g_offset() + i, lay.g_offset() + i, 1.0);
    H.add_term(v, n, n, -zeta * zeta);
  }
  pb.add_hermitian(H, label);
  info.order = n + 1;
  return info;
}

BlockInfo add_sign_definite_lmi(ProgramBuilder& pb, const AffineReal& bound, const std::vector<AffineVector>& W,
                                const CVec& h_hat, const CMat& G_hat, double xi, double zeta,
                                const AffineVector& u, const std::string& label) {
  BlockInfo info;
  info.label = label;
  const int c = static_cast<int>(W.size());
  if (c == 0) {
    pb.add_nonneg(bound.terms, bound.c, label);
    return info;
  }
  const int N = static_cast<int>(h_hat.size());
  const int M = static_cast<int>(G_hat.rows());
  const bool surface_varies = !u.is_constant();
  if (surface_varies)
    for (const auto& w : W)
      if (!w.is_constant()) throw std::invalid_argument("add_sign_definite_lmi: beam and surface both vary");
  const bool bh = xi > 0.0;
  const bool bg = zeta > 0.0;
  const int hb = 1 + c;
  const int gb = hb + (bh ? N : 0);
  const int order = gb + (bg ? (surface_varies ? M : N) : 0);
  conic::HermitianAffine H(order);

  add_real_entry(H, 0, 0, bound);
  for (int i = 0; i < c; ++i) {
    add_affine_entry(H, 0, 1 + i, observe(h_hat, G_hat, u, W[i]));
    H.add_constant(1 + i, 1 + i, 1.0);
  }
  // entry (1+i, border+n) = r * conj(W_i[n])
  auto add_w_border = [&](int border, double r) {
    for (int i = 0; i < c; ++i) {
      for (int n = 0; n < N; ++n) {
        H.add_constant(1 + i, border + n, r * std::conj(W[i].c(n)));
        for (const auto& [v, a] : W[i].t) H.add_term(v, 1 + i, border + n, r * std::conj(a(n)));
      }
    }
  };
  if (bh) {
    const int v = add_multiplier(pb, label + ".varpi_h");
    info.multipliers.push_back(v);
    H.add_term(v, 0, 0, -1.0);
    for (int n = 0; n < N; ++n) H.add_term(v, hb + n, hb + n, 1.0);
    add_w_border(hb, xi);
  }
  if (bg) {
    const int v = add_multiplier(pb, label + ".varpi_g");
    info.multipliers.push_back(v);
    if (!surface_varies) {
      H.add_term(v, 0, 0, -u.c.squaredNorm());
      for (int n = 0; n < N; ++n) H.add_term(v, gb + n, gb + n, 1.0);
      add_w_border(gb, zeta);
    } else {
      CMat Wc(N, c);
      for (int i = 0; i < c; ++i) Wc.col(i) = W[i].c;
      const CMat gram = Wc.adjoint() * Wc;
      for (int i = 0; i < c; ++i)
        for (int k = i; k < c; ++k) H.add_term(v, 1 + i, 1 + k, -gram(i, k));
      for (int m = 0; m < M; ++m) {
        H.add_term(v, gb + m, gb + m, 1.0);
        H.add_constant(0, gb + m, zeta * std::conj(u.c(m)));
        for (const auto& [var, a] : u.t) H.add_term(var, 0, gb + m, zeta * std::conj(a(m)));
      }
    }
  }
  pb.add_hermitian(H, label);
  info.order = order;
  return info;
}

void add_sum_squares_le(ProgramBuilder& pb, const AffineReal& bound, const std::vector<AffineReal>& rows,
                        const std::string& label) {
  std::vector<std::pair<Linear, double>> cone;
  AffineReal top = bound;
  top.c += 1.0;
  cone.emplace_back(top.terms, top.c);
  for (const auto& r : rows) {
    Linear t;
    for (const auto& [i, a] : r.terms) t.emplace_back(i, 2.0 * a);
    cone.emplace_back(t, 2.0 * r.c);
  }
  AffineReal low = bound;
  low.c -= 1.0;
  cone.emplace_back(low.terms, low.c);
  pb.add_soc(cone, label);
}

void add_majorant_epigraph(ProgramBuilder& pb, int s, int eta, int r, double eta0, double r0, double step) {
  const MajorantCoef m = majorant_coef(eta0, r0, step);
  // s - (q0 + q1 d)/(2c) >= (c/2) eta^2 + q2/(2c) d^2, d = r - r0
  AffineReal bound;
  bound.add(s, 1.0);
  bound.c = -(m.q0 - m.q1 * r0) / (2.0 * m.c);
  bound.add(r, -m.q1 / (2.0 * m.c));
  AffineReal e;
  e.add(eta, std::sqrt(0.5 * m.c));
  AffineReal d;
  const double k = std::sqrt(m.q2 / (2.0 * m.c));
  d.add(r, k);
  d.c = -k * r0;
  add_sum_squares_le(pb, bound, {e, d}, "majorant");
  pb.add_nonneg({{r, -1.0}}, r0 + step, "rate step");
}

AffineReal add_minorant(ProgramBuilder& pb, int eta, int r, double eta0, double r0) {
  const int p = pb.add_var("inv_eta");
  // ||(2, eta - p)|| <= eta + p  <=>  p * eta >= 1
  pb.add_soc({{{{eta, 1.0}, {p, 1.0}}, 0.0}, {{}, 2.0}, {{{eta, 1.0}, {p, -1.0}}, 0.0}}, "inv_eta");
  const double k = eta0 * std::exp2(r0);
  AffineReal m;
  m.c = k * (2.0 - r0 * kLn2);
  m.add(r, k * kLn2);
  m.add(p, -k * eta0);
  return m;
}

// ---------------------------------------------------------------------------

OracleReport implication_oracle(const RobustInequality& q, int samples, std::uint64_t seed, double tol) {
  using K = RobustInequality::Kind;
  std::mt19937_64 rng(seed);
  const int N = static_cast<int>(q.h_hat.size());
  const int M = static_cast<int>(q.G_hat.rows());
  OracleReport rep;
  rep.worst = -std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, std::abs(q.bound));
  for (int s = 0; s < samples; ++s) {
    CVec dh = CVec::Zero(N);
    CMat dG = CMat::Zero(M, N);
    if (s > 0) {
      dh = sample_ball(q.xi, N, rng);
      const CVec g = sample_ball(q.zeta, M * N, rng);
      dG = Eigen::Map<const CMat>(g.data(), M, N);
      // every other draw is pushed to the sphere, where violations live
      if (s % 2 == 0) {
        if (dh.norm() > 0) dh *= q.xi / dh.norm();
        if (dG.norm() > 0) dG *= q.zeta / dG.norm();
      }
    }
    const CRow hbar = (q.h_hat + dh).adjoint() + q.u.adjoint() * (q.G_hat + dG);
    const double p = (hbar * q.W).squaredNorm();
    double viol = 0.0;
    switch (q.kind) {
      case K::SignalAtLeast: viol = q.bound - p; break;
      case K::SignalAtMost: viol = p - q.bound; break;
      case K::InterferenceAtMost: viol = p + q.noise - q.bound; break;
      case K::InterferenceAtLeast: viol = q.bound - p - q.noise; break;
    }
    viol /= scale;
    rep.worst = std::max(rep.worst, viol);
    if (viol > tol) ++rep.violations;
    ++rep.samples;
  }
  return rep;
}

}  // namespace starsee::robust
