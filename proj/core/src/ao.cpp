#include "starsee/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <numeric>
#include <random>

namespace starsee {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Clock = std::chrono::steady_clock;

// Set STARSEE_AO_TRACE to follow block decisions on stderr.
bool tracing() {
  static const bool on = std::getenv("STARSEE_AO_TRACE") != nullptr;
  return on;
}

void trace_block(const char* what, const char* status, const Slacks& sl, double obj) {
  if (!tracing()) return;
  std::fprintf(stderr, "%-8s %-10s obj %11.6f rho %9.4g r:", what, status, obj, sl.rho);
  for (double r : sl.r) std::fprintf(stderr, " %.3f", r);
  std::fprintf(stderr, " leak:");
  for (const auto& e : sl.r_eve) std::fprintf(stderr, " %.3f %.3f", e[0], e[1]);
  std::fprintf(stderr, "\n");
}

double millis_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool optimal(const BlockResult& r) { return r.status == conic::SolveStatus::Optimal; }

bool has_power_block(const Problem& pr) { return pr.users(0) > 1 || pr.users(1) > 1; }

double step_l1(const BeamformingState& a, const BeamformingState& b) {
  double s = 0.0;
  for (int k = 0; k < 2; ++k) s += (a.u[k] - b.u[k]).cwiseAbs().sum();
  return s;
}

// Largest deviation between the element energies and the amplitude variables.
double modulus_residual(const Problem& pr, const BlockResult& r) {
  const int M = pr.ch.M;
  double worst = 0.0;
  for (int k = 0; k < 2; ++k)
    for (int m = 0; m < M; ++m) {
      const double e = std::norm(r.state.u[k](m));
      double target;
      if (pr.protocol == Protocol::ES || pr.protocol == Protocol::MS)
        target = r.amplitude[k](m);
      else if (pr.protocol == Protocol::SF)
        target = sf_reflects(m, M) == (k == kReflect) ? 1.0 : 0.0;
      else
        target = 1.0;
      worst = std::max(worst, std::abs(e - target));
    }
  return worst;
}

double binary_residual(const BlockResult& r) {
  double worst = 0.0;
  for (int k = 0; k < 2; ++k)
    for (int m = 0; m < r.amplitude[k].size(); ++m) {
      const double b = r.amplitude[k](m);
      worst = std::max(worst, std::min(std::abs(b), std::abs(1.0 - b)));
    }
  return worst;
}

// Gap of the restoration problem predicted by the closed-form bounds.
double conservative_gap(const Problem& pr, const Slacks& sl) {
  const auto ss = streams(pr);
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ss.size(); ++i) {
    gap = std::max(gap, pr.rate_min(ss[i].k) - sl.r[i]);
    for (int e = 0; e < 2; ++e) gap = std::max(gap, sl.r_eve[i][e] - pr.leak_max(ss[i].k));
  }
  return gap;
}

// Scales the precoders down until the closed-form bounds look most balanced.
BeamformingState power_backoff(const Problem& pr, const BeamformingState& st) {
  BeamformingState best = st;
  double best_gap = conservative_gap(pr, conservative_slacks(pr, st));
  for (int i = 1; i <= 40; ++i) {
    BeamformingState s = st;
    const double scale = std::pow(2.0, -0.5 * i);
    for (int k = 0; k < 2; ++k) s.f[k] *= scale;
    const double g = conservative_gap(pr, conservative_slacks(pr, s));
    if (g < best_gap) {
      best_gap = g;
      best = s;
    }
  }
  return best;
}

double secrecy_sum(const Problem& pr, const Slacks& sl) {
  const auto ss = streams(pr);
  double sum = 0.0;
  for (std::size_t i = 0; i < ss.size(); ++i)
    sum += pr.rate_weight(ss[i].k) * (sl.r[i] - sl.r_eve[i][0] - sl.r_eve[i][1]);
  return sum;
}

Problem sorted_by_strength(const Problem& pr, const BeamformingState& s) {
  Problem out = pr;
  for (int k = 0; k < 2; ++k) {
    auto& bobs = out.ch.bobs[k];
    std::stable_sort(bobs.begin(), bobs.end(), [&](const Link& a, const Link& b) {
      return combined_channel(a.h_hat, a.G_hat, s.u[k]).norm() > combined_channel(b.h_hat, b.G_hat, s.u[k]).norm();
    });
  }
  return out;
}

SecrecyReport report_on_estimates(const Problem& pr, const BeamformingState& s) {
  return secrecy_energy_efficiency(s, pr.ch, pr.params, 1.0);
}

}  // namespace

// ---------------------------------------------------------------------------

BeamformingState init_state(const Problem& pr, std::uint64_t seed) {
  const int N = pr.ch.N;
  const int M = pr.ch.M;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  BeamformingState s;
  s.protocol = pr.protocol;
  s.tau = pr.tau;
  std::array<Eigen::VectorXd, 2> theta;
  for (int k = 0; k < 2; ++k) {
    theta[k].resize(M);
    for (int m = 0; m < M; ++m) theta[k](m) = phase(rng);
  }
  if (pr.protocol == Protocol::TS) theta[1] = theta[0];
  for (int k = 0; k < 2; ++k) {
    s.alpha[k].assign(pr.users(k), pr.users(k) ? 1.0 / std::sqrt(pr.users(k)) : 0.0);
    s.u[k].resize(M);
    for (int m = 0; m < M; ++m) {
      double amp = 1.0;
      if (pr.protocol == Protocol::ES) amp = std::sqrt(0.5);
      if (pr.protocol == Protocol::MS || pr.protocol == Protocol::SF)
        amp = sf_reflects(m, M) == (k == kReflect) ? 1.0 : 0.0;
      s.u[k](m) = std::polar(amp, theta[k](m));
    }
  }
  const int served = (pr.users(0) > 0) + (pr.users(1) > 0);
  for (int k = 0; k < 2; ++k) {
    s.f[k] = CVec::Zero(N);
    if (pr.users(k) == 0) continue;
    const Link& b = pr.ch.bobs[k][0];
    const CRow hb = combined_channel(b.h_hat, b.G_hat, s.u[k]);
    const double n = hb.norm();
    if (n > 0.0)
      s.f[k] = hb.adjoint() / n;
    else
      s.f[k](0) = 1.0;
    s.f[k] *= std::sqrt(pr.params.p_max / served);
  }
  return s;
}

PassiveOutcome pccp_passive(const Problem& pr, const BeamformingState& state, const Slacks& slacks, Goal goal,
                            double reference, const AOConfig& cfg) {
  const PccpConfig& pc = cfg.pccp;
  const bool ms = pr.protocol == Protocol::MS;
  PassiveOutcome out;
  bool have = false;
  double lambda0 = pc.lambda0;
  auto usable = [&](const BlockResult& r) {
    return modulus_residual(pr, r) <= 1e-3 && r.objective >= reference - cfg.accept_slack &&
           (!ms || binary_residual(r) <= 1e-3);
  };
  for (int attempt = 0; attempt <= pc.max_restarts; ++attempt) {
    PenaltyState pen;
    pen.lambda = lambda0;
    pen.ms_lambda = lambda0;
    for (int k = 0; k < 2; ++k) pen.ms_target[k] = state.beta(k).unaryExpr([](double b) { return ms_target(b); });
    BeamformingState cur = state;
    Slacks sl = slacks;
    BlockResult last;
    std::optional<BlockResult> best;  // best usable iterate; late iterates can drift
    bool any = false;
    bool converged = false;
    for (int it = 1; it <= pc.max_iterations; ++it) {
      BlockResult r = solve_block(pr, cur, sl, Block::Passive, goal, &pen, cfg.solver);
      ++out.iterations;
      if (!optimal(r)) break;
      const double step = step_l1(r.state, cur);
      cur = r.state;
      sl = r.slacks;
      last = std::move(r);
      any = true;
      if (tracing())
        std::fprintf(stderr, "    pccp it %d obj %.6f mod %.2e bin %.2e pen %.2e step %.2e\n", it, last.objective,
                     modulus_residual(pr, last), ms ? binary_residual(last) : 0.0, last.penalty, step);
      if (usable(last) && (!best || last.objective > best->objective)) best = last;
      pen.lambda = std::min(pc.growth * pen.lambda, pc.lambda_max);
      pen.ms_lambda = std::min(pc.growth * pen.ms_lambda, pc.lambda_max);
      if (ms)
        for (int k = 0; k < 2; ++k)
          pen.ms_target[k] = last.amplitude[k].unaryExpr([](double b) { return ms_target(b); });
      const bool binary_ok = !ms || binary_residual(last) <= 1e-3;
      if (step <= pc.eps_step && last.penalty <= pc.eps_penalty && binary_ok) {
        converged = true;
        break;
      }
    }
    if (best) {
      out.result = std::move(*best);
      out.converged = converged;
      out.status = BlockStatus::Ok;
      return out;
    }
    if (any) {
      if (!have) out.result = last;
      have = true;
    }
    lambda0 *= pc.growth * pc.growth;
  }
  out.status = have ? BlockStatus::Rejected : BlockStatus::Infeasible;
  return out;
}

Restoration restore_feasibility(const Problem& pr, BeamformingState state, const AOConfig& cfg) {
  Restoration rs;
  rs.state = power_backoff(pr, state);
  rs.slacks = conservative_slacks(pr, rs.state);
  double obj = -std::numeric_limits<double>::infinity();
  auto done = [&] { return obj >= 0.01; };
  auto finish = [&] {
    rs.ok = true;
    rs.slacks.rho = total_power(rs.state, pr.params);
    rs.slacks.psi = std::max(1e-6, secrecy_sum(pr, rs.slacks) / rs.slacks.rho);
    return rs;
  };
  auto accept = [&](BlockResult&& r) {
    rs.state = std::move(r.state);
    rs.slacks = std::move(r.slacks);
    obj = r.objective;
  };
  for (rs.rounds = 1; rs.rounds <= cfg.restoration_rounds; ++rs.rounds) {
    const double obj_start = obj;
    for (Block b : {Block::Power, Block::Active}) {
      if (b == Block::Power && !has_power_block(pr)) continue;
      BlockResult r = solve_block(pr, rs.state, rs.slacks, b, Goal::Restore, nullptr, cfg.solver);
      const char* name = b == Block::Power ? "power" : "active";
      if (!optimal(r)) {
        trace_block(name, conic::to_string(r.status), rs.slacks, obj);
      } else if (r.objective >= obj - cfg.accept_slack) {
        trace_block(name, "ok", r.slacks, r.objective);
        accept(std::move(r));
      } else {
        trace_block(name, "rejected", r.slacks, r.objective);
      }
      if (done()) return finish();
    }
    PassiveOutcome p = pccp_passive(pr, rs.state, rs.slacks, Goal::Restore, obj, cfg);
    trace_block("passive", to_string(p.status), p.result.slacks, p.result.objective);
    if (p.status == BlockStatus::Ok) accept(std::move(p.result));
    if (done()) return finish();
    if (rs.rounds > 1 && obj - obj_start < cfg.restoration_stall) break;
  }
  return rs;
}

AOResult ao_run(const Problem& input, const AOConfig& cfg) {
  const auto t_start = Clock::now();
  AOResult res;
  Restoration rs;
  Problem pr = input;
  for (int attempt = 0; attempt <= cfg.restoration_restarts; ++attempt) {
    const std::uint64_t seed = cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt);
    pr = sorted_by_strength(input, init_state(input, seed));
    rs = restore_feasibility(pr, init_state(pr, seed), cfg);
    if (tracing()) std::fprintf(stderr, "restoration attempt %d: %s\n", attempt, rs.ok ? "ok" : "failed");
    if (rs.ok) break;
  }
  res.problem = pr;
  res.state = rs.state;
  res.slacks = rs.slacks;
  if (!rs.ok) {
    res.note = "no feasible starting point found";
    res.report = report_on_estimates(pr, res.state);
    return res;
  }
  res.feasible = true;

  BeamformingState& st = res.state;
  Slacks& sl = res.slacks;
  TraceRecord rec0;
  rec0.psi = sl.psi;
  rec0.see = report_on_estimates(pr, st).see;
  rec0.millis = millis_since(t_start);
  res.trace.push_back(rec0);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const auto t0 = Clock::now();
    const double psi_prev = sl.psi;
    TraceRecord rec;
    rec.iteration = it;
    for (int bi = 0; bi < 2; ++bi) {
      const Block b = bi == 0 ? Block::Power : Block::Active;
      if (b == Block::Power && !has_power_block(pr)) continue;
      BlockResult r = solve_block(pr, st, sl, b, Goal::Secrecy, nullptr, cfg.solver);
      if (!optimal(r)) {
        rec.status[bi] = BlockStatus::Infeasible;
      } else if (r.objective < sl.psi - cfg.accept_slack) {
        rec.status[bi] = BlockStatus::Rejected;
      } else {
        rec.status[bi] = BlockStatus::Ok;
      }
      trace_block(bi == 0 ? "power" : "active", to_string(rec.status[bi]), optimal(r) ? r.slacks : sl, r.objective);
      if (rec.status[bi] == BlockStatus::Ok) {
        st = std::move(r.state);
        sl = std::move(r.slacks);
      }
    }
    PassiveOutcome p = pccp_passive(pr, st, sl, Goal::Secrecy, sl.psi, cfg);
    rec.status[2] = p.status;
    trace_block("passive", to_string(p.status), p.result.slacks, p.result.objective);
    if (p.status == BlockStatus::Ok) {
      st = std::move(p.result.state);
      sl = std::move(p.result.slacks);
      rec.penalty = p.result.penalty;
      rec.ms_penalty = p.result.ms_penalty;
    }
    rec.psi = sl.psi;
    rec.see = report_on_estimates(pr, st).see;
    rec.millis = millis_since(t0);
    res.trace.push_back(rec);
    res.iterations = it;
    if (std::abs(sl.psi - psi_prev) <= cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.report = report_on_estimates(pr, st);
  if (!res.converged) res.note = "iteration limit reached";
  return res;
}

// ---------------------------------------------------------------------------

TsResult ts_two_layer(const Problem& pr, const AOConfig& cfg) {
  const TsSearchConfig& tc = cfg.ts;
  TsResult out;
  std::map<long long, std::pair<double, AOResult>> cache;
  double best_score = -std::numeric_limits<double>::infinity();
  auto eval = [&](double tau) {
    const long long key = std::llround(tau * 1e9);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second.first;
    Problem p = pr;
    p.protocol = Protocol::TS;
    p.tau = {tau, 1.0 - tau};
    AOResult r = ao_run(p, cfg);
    const double score = r.feasible ? r.report.see : -1.0;
    out.evaluated.emplace_back(tau, score);
    if (score > best_score) {
      best_score = score;
      out.best = r;
      out.tau_r = tau;
    }
    cache.emplace(key, std::make_pair(score, std::move(r)));
    return score;
  };

  const double lo = tc.floor;
  const double hi = 1.0 - tc.floor;
  const int G = std::max(3, tc.grid_points);
  std::vector<double> grid(G), val(G);
  for (int i = 0; i < G; ++i) {
    grid[i] = lo + (hi - lo) * i / (G - 1);
    val[i] = eval(grid[i]);
  }
  const int ib = static_cast<int>(std::max_element(val.begin(), val.end()) - val.begin());
  double a = grid[std::max(0, ib - 1)];
  double b = grid[std::min(G - 1, ib + 1)];
  const double grid_best = val[ib];

  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = eval(c), fd = eval(d);
  bool unimodal = true;
  const double slack = 1e-6 * std::max(1.0, std::abs(grid_best));
  while (b - a > tc.resolution) {
    if (std::max(fc, fd) < grid_best - slack) {
      unimodal = false;
      break;
    }
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = eval(d);
    }
  }
  if (!unimodal) {
    out.used_grid_fallback = true;
    const double ga = grid[std::max(0, ib - 1)];
    const double gb = grid[std::min(G - 1, ib + 1)];
    for (double t = ga; t <= gb + 1e-12; t += tc.resolution) eval(std::min(t, hi));
  }
  std::sort(out.evaluated.begin(), out.evaluated.end());
  return out;
}

OmaResult oma_baseline(const Problem& pr, const AOConfig& cfg) {
  OmaResult out;
  const auto ss = streams(pr);
  const int J = static_cast<int>(ss.size());
  if (J == 0) return out;
  out.feasible = true;
  double transmit = 0.0;
  for (const auto& s : ss) {
    Problem slot = pr;
    const int kb = other_space(s.k);
    slot.ch.bobs[s.k] = {pr.ch.bobs[s.k][s.j]};
    slot.ch.bobs[kb].clear();
    slot.params.J_r = s.k == kReflect ? 1 : 0;
    slot.params.J_t = s.k == kReflect ? 0 : 1;
    slot.tau = {1.0, 1.0};
    AOResult r = ao_run(slot, cfg);
    const bool ok = r.feasible;
    out.slot_feasible.push_back(ok);
    out.feasible = out.feasible && ok;
    if (ok) {
      out.ssr += r.report.ssr / J;
      transmit += pr.params.amp_efficiency * r.state.f[s.k].squaredNorm() / J;
    }
    out.slots.push_back(std::move(r));
  }
  out.power = transmit + pr.params.static_power();
  out.see = out.ssr / out.power;
  return out;
}

// ---------------------------------------------------------------------------

ComplexityEstimate complexity_estimate(int N, int M, int J_r, int J_t) {
  ComplexityEstimate c;
  const int J = J_r + J_t;
  c.n1 = J;
  c.n2 = 2 * N;
  c.n3 = 2 * M;
  c.a1 = M * N + N + 1;
  c.a3 = 2 * N + 2;
  const int jmax = std::max(J_r, J_t);
  c.a2.assign(jmax + 1, 0);
  for (int j = 1; j <= jmax; ++j) c.a2[j] = 2 * N + j + 1;
  c.sigma = J_r * (J_r + 1) / 2 + J_t * (J_t + 1) / 2;

  c.rows.push_back({"bob signal", c.a1, c.sigma});
  for (int j = 1; j <= jmax; ++j) {
    // stream j is decoded by j receivers in every space holding at least j Bobs
    const int count = j * ((J_r >= j) + (J_t >= j));
    c.rows.push_back({"bob interference j=" + std::to_string(j), c.a2[j], count});
  }
  c.rows.push_back({"eve signal", c.a3, 2 * J});
  c.rows.push_back({"eve interference", c.a1, 2 * J});
  c.rows.push_back({"order weak", c.a3, std::max(0, J - 2)});
  c.rows.push_back({"order strong", c.a1, std::max(0, J - 2)});

  for (const auto& r : c.rows) {
    const double s = r.size;
    c.f1 += r.count * s;
    c.f2 += r.count * s * s;
    c.f3 += r.count * s * s * s;
  }
  const double n1 = c.n1, n2 = c.n2, n3 = c.n3;
  c.o_alpha = std::sqrt(c.f1) * n1 * (n1 * n1 + n1 * c.f2 + c.f3);
  c.o_f = std::sqrt(c.f1 + 2.0) * n2 * (n2 * n2 + n2 * c.f2 + c.f3 + std::pow(2.0 * N + 1.0, 2) * n2);
  c.o_phi = std::sqrt(c.f1 + 4.0 * M) * n3 * (n3 * n3 + n3 * c.f2 + c.f3 + 2.0 * M * n3);
  return c;
}

std::vector<int> predicted_active_blocks(int N, int M, int J_r, int J_t) {
  const std::array<int, 2> J{J_r, J_t};
  const int a1 = M * N + N + 1;
  const int a3 = 2 * N + 2;
  std::vector<int> out;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < J[k]; ++j) {
      const int cols = j + (J[other_space(k)] > 0 ? 1 : 0);
      for (int l = 0; l <= j; ++l) {
        out.push_back(a1);
        out.push_back(cols ? 2 * N + cols + 1 : 0);
      }
      for (int e = 0; e < 2; ++e) {
        out.push_back(a3);
        if (cols) out.push_back(a1);
      }
    }
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j + 1 < J[k]; ++j) {
      out.push_back(a1);
      out.push_back(a3);
    }
  return out;
}

std::vector<robust::RobustInequality> certified_inequalities(const Problem& pr, const BeamformingState& s,
                                                             const Slacks& sl) {
  using K = robust::RobustInequality::Kind;
  std::vector<robust::RobustInequality> out;
  auto make = [](K kind, const std::string& label, const Link& l, const CVec& u, const CMat& W, double noise,
                 double bound) {
    robust::RobustInequality q;
    q.kind = kind;
    q.label = label;
    q.h_hat = l.h_hat;
    q.G_hat = l.G_hat;
    q.xi = l.xi;
    q.zeta = l.zeta;
    q.u = u;
    q.W = W;
    q.noise = noise;
    q.bound = bound;
    return q;
  };
  const auto ss = streams(pr);
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const auto [k, j] = ss[i];
    const std::string tg = "[" + std::to_string(k) + "," + std::to_string(j) + "]";
    const CMat w = s.beam(k, j);
    const CMat W = interference_beams(s, k, j);
    for (int l = 0; l <= j; ++l) {
      const Link& b = pr.ch.bobs[k][l];
      const double eta = sl.eta[i][l];
      const std::string lt = tg + "l" + std::to_string(l);
      out.push_back(make(K::SignalAtLeast, "bob signal" + lt, b, s.u[k], w, 0.0, eta * (std::exp2(sl.r[i]) - 1.0)));
      out.push_back(make(K::InterferenceAtMost, "bob interference" + lt, b, s.u[k], W, pr.noise(k), eta));
    }
    for (int e = 0; e < 2; ++e) {
      const Link& ev = pr.ch.eves[e];
      const CVec ue = pr.eve_surface(s, k, e);
      const double eta = sl.eta_eve[i][e];
      const std::string et = tg + "e" + std::to_string(e);
      out.push_back(
          make(K::SignalAtMost, "eve signal" + et, ev, ue, w, 0.0, eta * (std::exp2(sl.r_eve[i][e]) - 1.0)));
      out.push_back(make(K::InterferenceAtLeast, "eve interference" + et, ev, ue, W, pr.noise(k), eta));
    }
  }
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j + 1 < pr.users(k); ++j) {
      const std::string tg = "[" + std::to_string(k) + "," + std::to_string(j) + "]";
      const double bound = sl.order[k].at(j);
      out.push_back(make(K::SignalAtLeast, "order strong" + tg, pr.ch.bobs[k][j], s.u[k], s.beam(k, j), 0.0, bound));
      out.push_back(
          make(K::SignalAtMost, "order weak" + tg, pr.ch.bobs[k][j + 1], s.u[k], s.beam(k, j + 1), 0.0, bound));
    }
  return out;
}

}  // namespace starsee
