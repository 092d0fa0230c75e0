#include "starsee/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace starsee {

using robust::AffineQuadratic;
using robust::AffineReal;
using robust::AffineVector;
using robust::ErrorLayout;

namespace {

double log2_1p(double x) { return std::log1p(std::max(0.0, x)) / std::log(2.0); }

struct Column {
  AffineVector a;
  CVec v;  // value at the expansion point
};

class Assembly {
 public:
  Assembly(const Problem& pr, const BeamformingState& st, Block block) : pr_(pr), st_(st), block_(block) {
    ss_ = streams(pr);
    for (int k = 0; k < 2; ++k) idx_[k].assign(pr.users(k), -1);
    for (std::size_t i = 0; i < ss_.size(); ++i) idx_[ss_[i].k][ss_[i].j] = static_cast<int>(i);
    const int N = pr.ch.N;
    const int M = pr.ch.M;
    if (block == Block::Power) {
      for (const auto& s : ss_) alpha_.push_back(pb.add_var("alpha" + tag(s)));
    }
    for (int k = 0; k < 2; ++k) {
      if (block == Block::Active && pr.users(k) > 0) fvar_[k] = pb.add_vars("f" + std::to_string(k), 2 * N);
      if (block == Block::Passive) uvar_[k] = pb.add_vars("u" + std::to_string(k), 2 * M);
    }
  }

  static std::string tag(const Stream& s) { return "[" + std::to_string(s.k) + "," + std::to_string(s.j) + "]"; }

  const std::vector<Stream>& ss() const { return ss_; }
  int index(int k, int j) const { return idx_[k][j]; }
  int alpha_var(int i) const { return alpha_[i]; }
  int f_var(int k) const { return fvar_[k]; }
  int u_var(int k) const { return uvar_[k]; }

  AffineVector f(int k) const {
    if (fvar_[k] >= 0) return AffineVector::variables(pr_.ch.N, fvar_[k]);
    return AffineVector::constant(st_.f[k]);
  }

  Column beam(int k, int j) const {
    const CVec v = st_.beam(k, j);
    if (block_ == Block::Power) return {robust::scale_by_variable(st_.f[k], alpha_[idx_[k][j]]), v};
    if (block_ == Block::Active) return {f(k).scaled(st_.alpha[k][j]), v};
    return {AffineVector::constant(v), v};
  }

  std::vector<Column> interferers(int k, int j) const {
    std::vector<Column> cols;
    for (int i = 0; i < j; ++i) cols.push_back(beam(k, i));
    const int kb = other_space(k);
    if (pr_.protocol != Protocol::TS && pr_.users(kb) > 0) {
      if (block_ == Block::Power) {
        // sum_i alpha_i^2 ||h f||^2 equals ||h f||^2 once alpha is renormalized
        for (int i = 0; i < pr_.users(kb); ++i) cols.push_back(beam(kb, i));
      } else {
        cols.push_back({f(kb), st_.f[kb]});
      }
    }
    return cols;
  }

  AffineVector surface(int k) const {
    if (uvar_[k] >= 0) return AffineVector::variables(pr_.ch.M, uvar_[k]);
    return AffineVector::constant(st_.u[k]);
  }

  AffineVector eve_surface(int k, int e) const {
    if (pr_.protocol == Protocol::TS) {
      if (e != k) return AffineVector::constant(CVec::Zero(pr_.ch.M));
      return surface(k);
    }
    return surface(e);
  }

  conic::ProgramBuilder pb;

 private:
  const Problem& pr_;
  const BeamformingState& st_;
  Block block_;
  std::vector<Stream> ss_;
  std::array<std::vector<int>, 2> idx_;
  std::vector<int> alpha_;
  std::array<int, 2> fvar_{-1, -1};
  std::array<int, 2> uvar_{-1, -1};
};

AffineQuadratic gain_form(const ErrorLayout& lay, const Link& l, const Column& w, const AffineVector& u,
                          const CVec& u0) {
  return robust::linearize_gain(lay, l.h_hat, l.G_hat, w.a, u, w.v, u0);
}

std::vector<AffineVector> affine_columns(const std::vector<Column>& cols) {
  std::vector<AffineVector> out;
  for (const auto& c : cols) out.push_back(c.a);
  return out;
}

CVec eval_complex(const Eigen::VectorXd& x, int first, int n) {
  CVec v(n);
  for (int i = 0; i < n; ++i) v(i) = Cplx(x(first + 2 * i), x(first + 2 * i + 1));
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

Problem Problem::normalized(const ChannelRealization& raw, const SystemParams& p, Protocol proto) {
  Problem pr;
  pr.ch = raw.scaled(1.0 / std::sqrt(p.noise_power));
  pr.params = p;
  pr.protocol = proto;
  return pr;
}

CVec Problem::eve_surface(const BeamformingState& s, int k, int e) const {
  if (protocol == Protocol::TS) return e == k ? s.u[k] : CVec::Zero(ch.M);
  return s.u[e];
}

std::vector<Stream> streams(const Problem& pr) {
  std::vector<Stream> out;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < pr.users(k); ++j) out.push_back({k, j});
  return out;
}

double ms_target(double b) { return (b + b * b) / (1.0 + b * b); }

double bilinear_point(double psi, double rho) { return rho / std::max(psi, 1e-6); }

bool sf_reflects(int m, int M) { return m < M / 2; }

const char* to_string(BlockStatus s) {
  switch (s) {
    case BlockStatus::NotRun: return "none";
    case BlockStatus::Ok: return "ok";
    case BlockStatus::Infeasible: return "infeasible";
    case BlockStatus::Rejected: return "rejected";
  }
  return "?";
}

Slacks conservative_slacks(const Problem& pr, const BeamformingState& s) {
  const auto ss = streams(pr);
  Slacks sl;
  const int n = static_cast<int>(ss.size());
  sl.r.assign(n, 0.0);
  sl.r_eve.assign(n, {0.0, 0.0});
  sl.eta.assign(n, {});
  sl.eta_eve.assign(n, {1.0, 1.0});
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [k, j] = ss[i];
    const CVec w = s.beam(k, j);
    const CMat W = interference_beams(s, k, j);
    const double wn = w.norm();
    const double Wn = W.cols() ? W.norm() : 0.0;
    const double noise = pr.noise(k);
    double r = 1e300;
    for (int l = 0; l <= j; ++l) {
      const Link& b = pr.ch.bobs[k][l];
      const double spread = b.xi + b.zeta * s.u[k].norm();
      const CRow hb = combined_channel(b.h_hat, b.G_hat, s.u[k]);
      const double sig = std::pow(std::max(0.0, std::abs((hb * w).value()) - spread * wn), 2);
      const double yn = W.cols() ? (hb * W).norm() : 0.0;
      const double eta = 1.05 * (std::pow(yn + spread * Wn, 2) + noise);
      sl.eta[i].push_back(eta);
      r = std::min(r, log2_1p(0.9 * sig / eta));
    }
    sl.r[i] = r;
    for (int e = 0; e < 2; ++e) {
      const Link& ev = pr.ch.eves[e];
      const CVec ue = pr.eve_surface(s, k, e);
      const double spread = ev.xi + ev.zeta * ue.norm();
      const CRow he = combined_channel(ev.h_hat, ev.G_hat, ue);
      const double sig = std::pow(std::abs((he * w).value()) + spread * wn, 2);
      const double yn = W.cols() ? (he * W).norm() : 0.0;
      const double eta = std::pow(std::max(0.0, yn - spread * Wn), 2) + noise;
      sl.eta_eve[i][e] = 0.999 * eta;
      sl.r_eve[i][e] = log2_1p(1.1 * sig / eta) + 1e-6;
    }
    sum += pr.rate_weight(k) * (sl.r[i] - sl.r_eve[i][0] - sl.r_eve[i][1]);
  }
  sl.rho = total_power(s, pr.params);
  sl.psi = std::max(1e-6, sum / sl.rho);
  return sl;
}

// ---------------------------------------------------------------------------

BlockResult solve_block(const Problem& pr, const BeamformingState& st, const Slacks& sl, Block block, Goal goal,
                        const PenaltyState* pen, const conic::SolverOptions& opts) {
  const int N = pr.ch.N;
  const int M = pr.ch.M;
  const SystemParams& par = pr.params;
  Assembly as(pr, st, block);
  auto& pb = as.pb;
  const auto& ss = as.ss();
  const int n = static_cast<int>(ss.size());
  BlockResult res;

  int gap = -1;
  if (goal == Goal::Restore) {
    gap = pb.add_var("gap");
    pb.add_nonneg({{gap, 1.0}}, 0.05, "gap floor");
  }

  std::vector<int> r(n);
  std::array<std::vector<int>, 2> order;
  std::vector<std::array<int, 2>> re(n), eta_e(n);
  std::vector<std::vector<int>> eta(n);

  for (int i = 0; i < n; ++i) {
    const auto [k, j] = ss[i];
    const std::string tg = Assembly::tag(ss[i]);
    r[i] = pb.add_var("r" + tg);
    if (goal == Goal::Restore)
      pb.add_nonneg({{r[i], 1.0}, {gap, 1.0}}, -pr.rate_min(k), "rate floor" + tg);
    else
      pb.add_nonneg({{r[i], 1.0}}, -pr.rate_min(k), "rate floor" + tg);

    const auto w = as.beam(k, j);
    const auto cols = as.interferers(k, j);
    const AffineVector u = as.surface(k);
    for (int l = 0; l <= j; ++l) {
      const Link& b = pr.ch.bobs[k][l];
      const std::string lt = tg + "l" + std::to_string(l);
      const int e_var = pb.add_var("eta" + lt);
      const int s_var = pb.add_var("s" + lt);
      eta[i].push_back(e_var);
      const ErrorLayout lay = ErrorLayout::for_radii(N, M, b.xi, b.zeta);
      AffineReal rhs;
      rhs.add(s_var, 1.0).add(e_var, -1.0);
      res.lmis.push_back(robust::add_s_procedure_lmi(pb, lay, gain_form(lay, b, w, u, st.u[k]), rhs, b.xi, b.zeta,
                                                     "bob signal" + lt));
      robust::add_majorant_epigraph(pb, s_var, e_var, r[i], sl.eta[i][l], sl.r[i], 1.0);
      AffineReal bound;
      bound.add(e_var, 1.0);
      bound.c = -pr.noise(k);
      res.lmis.push_back(robust::add_sign_definite_lmi(pb, bound, affine_columns(cols), b.h_hat, b.G_hat, b.xi,
                                                       b.zeta, u, "bob interference" + lt));
    }

    for (int e = 0; e < 2; ++e) {
      const Link& ev = pr.ch.eves[e];
      const std::string et = tg + "e" + std::to_string(e);
      re[i][e] = pb.add_var("re" + et);
      eta_e[i][e] = pb.add_var("eta_e" + et);
      pb.add_nonneg({{re[i][e], 1.0}}, 0.0, "leak floor" + et);
      if (goal == Goal::Restore)
        pb.add_nonneg({{re[i][e], -1.0}, {gap, 1.0}}, pr.leak_max(k), "leak cap" + et);
      else
        pb.add_nonneg({{re[i][e], -1.0}}, pr.leak_max(k), "leak cap" + et);
      const AffineVector ue = as.eve_surface(k, e);
      const CVec ue0 = pr.eve_surface(st, k, e);
      AffineReal bound =
          robust::add_minorant(pb, eta_e[i][e], re[i][e], sl.eta_eve[i][e], sl.r_eve[i][e]);
      bound.add(eta_e[i][e], -1.0);
      res.lmis.push_back(robust::add_sign_definite_lmi(pb, bound, {w.a}, ev.h_hat, ev.G_hat, ev.xi, ev.zeta, ue,
                                                       "eve signal" + et));
      AffineReal rhs;
      rhs.add(eta_e[i][e], 1.0);
      rhs.c = -pr.noise(k);
      if (cols.empty()) {
        pb.add_nonneg({{eta_e[i][e], -1.0}}, pr.noise(k), "eve interference" + et);
        continue;
      }
      const ErrorLayout lay = ErrorLayout::for_radii(N, M, ev.xi, ev.zeta);
      AffineQuadratic q = gain_form(lay, ev, cols[0], ue, ue0);
      for (std::size_t c = 1; c < cols.size(); ++c) q.accumulate(gain_form(lay, ev, cols[c], ue, ue0));
      res.lmis.push_back(
          robust::add_s_procedure_lmi(pb, lay, q, rhs, ev.xi, ev.zeta, "eve interference" + et));
    }
  }

  // decoding order
  for (int k = 0; k < 2; ++k) {
    int prev = -1;
    for (int j = 0; j + 1 < pr.users(k); ++j) {
      const std::string tg = "[" + std::to_string(k) + "," + std::to_string(j) + "]";
      const int sg = pb.add_var("order" + tg);
      order[k].push_back(sg);
      const AffineVector u = as.surface(k);
      const Link& strong = pr.ch.bobs[k][j];
      const Link& weak = pr.ch.bobs[k][j + 1];
      const ErrorLayout lay = ErrorLayout::for_radii(N, M, strong.xi, strong.zeta);
      AffineReal rhs;
      rhs.add(sg, 1.0);
      res.lmis.push_back(robust::add_s_procedure_lmi(pb, lay, gain_form(lay, strong, as.beam(k, j), u, st.u[k]),
                                                     rhs, strong.xi, strong.zeta, "order strong" + tg));
      AffineReal bound;
      bound.add(sg, 1.0);
      if (goal == Goal::Restore) bound.add(gap, 1.0);
      res.lmis.push_back(robust::add_sign_definite_lmi(pb, bound, {as.beam(k, j + 1).a}, weak.h_hat, weak.G_hat,
                                                       weak.xi, weak.zeta, u, "order weak" + tg));
      if (prev >= 0) pb.add_nonneg({{prev, 1.0}, {sg, -1.0}}, 0.0, "order chain" + tg);
      prev = sg;
    }
  }

  // block-specific constraints
  if (block == Block::Power) {
    for (int k = 0; k < 2; ++k) {
      std::vector<AffineReal> rows;
      for (int i = 0; i < n; ++i) {
        if (ss[i].k != k) continue;
        pb.add_nonneg({{as.alpha_var(i), 1.0}}, 0.0, "alpha>=0");
        AffineReal a;
        a.add(as.alpha_var(i), 1.0);
        rows.push_back(a);
      }
      if (rows.empty()) continue;
      std::vector<std::pair<robust::Linear, double>> cone{{{}, 1.0}};
      for (const auto& a : rows) cone.emplace_back(a.terms, 0.0);
      pb.add_soc(cone, "alpha budget");
    }
  }

  std::vector<std::pair<robust::Linear, double>> f_rows;
  if (block == Block::Active) {
    for (int k = 0; k < 2; ++k) {
      if (as.f_var(k) < 0) continue;
      for (int v = 0; v < 2 * N; ++v) f_rows.push_back({{{as.f_var(k) + v, 1.0}}, 0.0});
    }
    std::vector<std::pair<robust::Linear, double>> cone{{{}, std::sqrt(par.p_max)}};
    cone.insert(cone.end(), f_rows.begin(), f_rows.end());
    pb.add_soc(cone, "max power");
  }

  int psi = -1, rho = -1;
  if (goal == Goal::Secrecy) {
    psi = pb.add_var("psi");
    rho = pb.add_var("rho");
    pb.add_nonneg({{psi, 1.0}}, 0.0, "psi>=0");
    const double p0 = par.static_power();
    const double g = par.amp_efficiency;
    if (block == Block::Active) {
      // (rho - P0 + g)/(2g) >= ||[(rho - P0 - g)/(2g), f]||
      std::vector<std::pair<robust::Linear, double>> cone{{{{rho, 0.5 / g}}, (g - p0) / (2 * g)},
                                                          {{{rho, 0.5 / g}}, (-g - p0) / (2 * g)}};
      cone.insert(cone.end(), f_rows.begin(), f_rows.end());
      pb.add_soc(cone, "total power");
    } else {
      pb.add_nonneg({{rho, 1.0}}, -total_power(st, par), "total power");
    }
    const double t = bilinear_point(sl.psi, sl.rho);
    AffineReal bound;
    for (int i = 0; i < n; ++i) {
      const double wgt = pr.rate_weight(ss[i].k);
      bound.add(r[i], wgt).add(re[i][0], -wgt).add(re[i][1], -wgt);
    }
    AffineReal a, b;
    a.add(psi, std::sqrt(0.5 * t));
    b.add(rho, std::sqrt(0.5 / t));
    robust::add_sum_squares_le(pb, bound, {a, b}, "secrecy coupling");
    pb.set_objective(psi, 1.0);
  } else {
    pb.set_objective(gap, -1.0);
  }

  // passive block: amplitude coupling by penalized convex-concave steps
  std::array<int, 2> bvar{-1, -1}, cvar{-1, -1}, chvar{-1, -1};
  int msq = -1;
  if (block == Block::Passive) {
    if (!pen) throw std::invalid_argument("solve_block: passive block needs penalty state");
    const bool amplitude = pr.protocol == Protocol::ES || pr.protocol == Protocol::MS;
    for (int k = 0; k < 2; ++k) {
      const int uv = as.u_var(k);
      chvar[k] = pb.add_vars("chat" + std::to_string(k), M);
      if (amplitude) {
        bvar[k] = pb.add_vars("b" + std::to_string(k), M);
        cvar[k] = pb.add_vars("c" + std::to_string(k), M);
      }
      for (int m = 0; m < M; ++m) {
        const int re_v = uv + 2 * m, im_v = uv + 2 * m + 1;
        const Cplx u0 = st.u[k](m);
        const int ch = chvar[k] + m;
        pb.add_nonneg({{ch, 1.0}}, 0.0);
        pb.set_objective(ch, -pen->lambda);
        const bool active = pr.protocol != Protocol::SF || sf_reflects(m, M) == (k == kReflect);
        if (!active) {
          pb.add_equality({{re_v, 1.0}}, 0.0);
          pb.add_equality({{im_v, 1.0}}, 0.0);
          pb.add_equality({{ch, 1.0}}, 0.0);
          continue;
        }
        // 2 Re(conj(u0) u) - |u0|^2 >= b - chat
        robust::Linear lin{{re_v, 2.0 * u0.real()}, {im_v, 2.0 * u0.imag()}, {ch, 1.0}};
        if (amplitude) {
          const int b = bvar[k] + m, c = cvar[k] + m;
          lin.emplace_back(b, -1.0);
          pb.add_nonneg(lin, -std::norm(u0), "modulus lower");
          pb.add_nonneg({{b, 1.0}}, 0.0);
          pb.add_nonneg({{c, 1.0}}, 0.0);
          pb.set_objective(c, -pen->lambda);
          AffineReal bound, x, y;
          bound.add(b, 1.0).add(c, 1.0);
          x.add(re_v, 1.0);
          y.add(im_v, 1.0);
          robust::add_sum_squares_le(pb, bound, {x, y}, "modulus upper");
        } else {
          pb.add_nonneg(lin, -std::norm(u0) - 1.0, "modulus lower");
          pb.add_soc({{{}, 1.0}, {{{re_v, 1.0}}, 0.0}, {{{im_v, 1.0}}, 0.0}}, "modulus upper");
        }
      }
    }
    if (amplitude) {
      for (int m = 0; m < M; ++m) {
        pb.add_equality({{bvar[0] + m, 1.0}, {bvar[1] + m, 1.0}}, -1.0, "energy split");
        std::vector<std::pair<robust::Linear, double>> cone{{{}, 1.0}};
        for (int k = 0; k < 2; ++k) {
          cone.push_back({{{as.u_var(k) + 2 * m, 1.0}}, 0.0});
          cone.push_back({{{as.u_var(k) + 2 * m + 1, 1.0}}, 0.0});
        }
        pb.add_soc(cone, "element energy");
      }
    }
    if (pr.protocol == Protocol::MS) {
      msq = pb.add_var("ms_penalty");
      std::vector<AffineReal> rows;
      for (int k = 0; k < 2; ++k)
        for (int m = 0; m < M; ++m) {
          const double d = pen->ms_target[k](m);
          AffineReal a, b;
          a.add(bvar[k] + m, 1.0);
          a.c = -d;
          b.add(bvar[k] + m, 1.0 - d);
          rows.push_back(a);
          rows.push_back(b);
        }
      AffineReal bound;
      bound.add(msq, 1.0);
      robust::add_sum_squares_le(pb, bound, rows, "binary penalty");
      pb.set_objective(msq, -pen->ms_lambda);
    }
  }

  pb.set_maximize(true);
  const conic::ConicProgram prog = pb.build();
  res.num_vars = prog.num_vars;
  for (int v = 0; v < pb.num_vars(); ++v)
    if (pb.name(v).rfind("f0[", 0) == 0) ++res.precoder_vars;
  const conic::ConicSolution sol = conic::solve(prog, opts);
  res.status = sol.status;
  if (sol.status != conic::SolveStatus::Optimal) return res;
  const Eigen::VectorXd& x = sol.primal;

  BeamformingState out = st;
  if (block == Block::Power) {
    for (int i = 0; i < n; ++i) out.alpha[ss[i].k][ss[i].j] = std::max(0.0, x(as.alpha_var(i)));
    for (int k = 0; k < 2; ++k) {
      double norm = 0.0;
      for (double a : out.alpha[k]) norm += a * a;
      norm = std::sqrt(norm);
      if (out.alpha[k].empty() || norm <= 0.0) continue;
      for (double& a : out.alpha[k]) a /= norm;
      out.f[k] *= norm;
    }
  } else if (block == Block::Active) {
    for (int k = 0; k < 2; ++k)
      if (as.f_var(k) >= 0) out.f[k] = eval_complex(x, as.f_var(k), N);
  } else {
    for (int k = 0; k < 2; ++k) {
      out.u[k] = eval_complex(x, as.u_var(k), M);
      if (bvar[k] >= 0)
        res.amplitude[k] = x.segment(bvar[k], M);
      else
        res.amplitude[k] = out.u[k].cwiseAbs2();
      res.penalty += x.segment(chvar[k], M).sum();
      if (cvar[k] >= 0) res.penalty += x.segment(cvar[k], M).sum();
    }
    if (msq >= 0) res.ms_penalty = x(msq);
  }
  res.state = out;

  Slacks& o = res.slacks;
  o.r.resize(n);
  o.r_eve.resize(n);
  o.eta.resize(n);
  o.eta_eve.resize(n);
  for (int i = 0; i < n; ++i) {
    o.r[i] = x(r[i]);
    for (int e = 0; e < 2; ++e) {
      o.r_eve[i][e] = x(re[i][e]);
      o.eta_eve[i][e] = x(eta_e[i][e]);
    }
    for (int v : eta[i]) o.eta.at(i).push_back(x(v));
  }
  for (int k = 0; k < 2; ++k)
    for (int v : order[k]) o.order[k].push_back(x(v));
  if (goal == Goal::Secrecy) {
    o.psi = x(psi);
    o.rho = x(rho);
    res.objective = o.psi;
  } else {
    o.rho = total_power(out, par);
    res.objective = -x(gap);
  }
  return res;
}

}  // namespace starsee
