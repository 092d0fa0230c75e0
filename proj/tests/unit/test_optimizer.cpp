#include "starsee/optimizer.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>

using namespace starsee;

namespace {

Problem desk_problem(std::uint64_t seed, double kappa_sq, Protocol proto = Protocol::ES, int jr = 1, int jt = 1) {
  SystemParams p;
  p.N = 3;
  p.M = 8;
  p.J_r = jr;
  p.J_t = jt;
  const auto ch = generate_realization(p, Geometry{}, UncertaintyConfig::uniform_sq(kappa_sq), seed);
  return Problem::normalized(ch, p, proto);
}

double power_of(const BeamformingState& s) { return s.f[0].squaredNorm() + s.f[1].squaredNorm(); }

}  // namespace

TEST_CASE("binary amplitude target") {
  CHECK(ms_target(0.0) == 0.0);
  CHECK(ms_target(1.0) == 1.0);
  CHECK(ms_target(0.5) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("bilinear expansion point") {
  CHECK(bilinear_point(0.5, 11.0) == doctest::Approx(22.0));
  // psi is clamped before dividing
  CHECK(std::isfinite(bilinear_point(0.0, 11.0)));
  CHECK(bilinear_point(0.0, 11.0) == doctest::Approx(11.0 / 1e-6));
}

TEST_CASE("default configuration") {
  AOConfig cfg;
  CHECK(cfg.pccp.growth > 1.0);
  CHECK(cfg.pccp.lambda_max > cfg.pccp.lambda0);
  CHECK(std::min(cfg.pccp.growth * cfg.pccp.lambda0, cfg.pccp.lambda_max) == doctest::Approx(0.01));
  CHECK(cfg.tolerance == 1e-4);
  CHECK(cfg.ts.floor == 0.05);
}

TEST_CASE("fixed split pattern") {
  int reflect = 0;
  for (int m = 0; m < 8; ++m) reflect += sf_reflects(m, 8);
  CHECK(reflect == 4);
  CHECK(sf_reflects(0, 8));
  CHECK_FALSE(sf_reflects(7, 8));
}

TEST_CASE("initial state") {
  for (int jr : {1, 2}) {
    const Problem pr = desk_problem(3, 0.0, Protocol::ES, jr, 2);
    const BeamformingState s = init_state(pr, 7);
    for (int k = 0; k < 2; ++k) {
      double sum = 0.0;
      for (double a : s.alpha[k]) sum += a * a;
      CHECK(sum == doctest::Approx(1.0));
    }
    CHECK((s.beta(0) + s.beta(1) - Eigen::VectorXd::Ones(pr.ch.M)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(power_of(s) == doctest::Approx(pr.params.p_max));
  }
  const BeamformingState ts = init_state(desk_problem(3, 0.0, Protocol::TS), 7);
  for (int k = 0; k < 2; ++k) CHECK((ts.beta(k) - Eigen::VectorXd::Ones(8)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("complexity bookkeeping") {
  const ComplexityEstimate c = complexity_estimate(5, 20, 2, 2);
  CHECK(c.sigma == 6);
  CHECK(c.a1 == 106);
  CHECK(c.a3 == 12);
  CHECK(c.n2 == 10);
  CHECK(c.a2[1] == 12);
  CHECK(c.a2[2] == 13);
  for (int N = 1; N <= 6; ++N) CHECK(complexity_estimate(N, 4, 1, 1).n2 == 2 * N);
}

TEST_CASE("predicted blocks match the assembled active subproblem") {
  for (auto [jr, jt] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 2}, std::pair{3, 0}}) {
    Problem pr = desk_problem(5, 0.1, Protocol::ES, jr, jt);
    const BeamformingState s = init_state(pr, 1);
    const Slacks sl = conservative_slacks(pr, s);
    const BlockResult r = solve_block(pr, s, sl, Block::Active, Goal::Secrecy, nullptr, AOConfig::default_solver());
    std::vector<int> got;
    for (const auto& b : r.lmis) got.push_back(b.order);
    CHECK(got == predicted_active_blocks(3, 8, jr, jt));
  }
}

TEST_CASE("one Bob per space leaves nothing to split") {
  const Problem pr = desk_problem(2, 0.0);
  const BeamformingState s = init_state(pr, 1);
  CHECK(s.alpha[0][0] == 1.0);
  CHECK(s.alpha[1][0] == 1.0);
}

TEST_CASE("perfect-CSI run is monotone and respects the budget") {
  const Problem pr = desk_problem(1, 0.0);
  AOConfig cfg;
  const AOResult r = ao_run(pr, cfg);
  REQUIRE(r.feasible);
  CHECK(r.converged);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].psi >= r.trace[i - 1].psi - 1e-6);
  CHECK(power_of(r.state) <= pr.params.p_max * (1 + 1e-6));
  CHECK((r.state.beta(0) + r.state.beta(1) - Eigen::VectorXd::Ones(8)).cwiseAbs().maxCoeff() < 1e-3);
  for (int k = 0; k < 2; ++k) {
    CHECK(r.report.rate[k][0] >= pr.params.rate_min - 1e-3);
    for (int e = 0; e < 2; ++e) CHECK(r.report.eve[k][0][e] <= pr.params.leak_max + 1e-3);
  }
  // every certified inequality holds at the estimates
  for (const auto& q : certified_inequalities(r.problem, r.state, r.slacks))
    CHECK(robust::implication_oracle(q, 1, 1).violations == 0);
}

TEST_CASE("OMA with one Bob reduces to a single-user run") {
  SystemParams p;
  p.N = 3;
  p.M = 8;
  p.J_r = 1;
  p.J_t = 0;
  const auto ch = generate_realization(p, Geometry{}, UncertaintyConfig{}, 4);
  const Problem pr = Problem::normalized(ch, p, Protocol::ES);
  AOConfig cfg;
  const AOResult single = ao_run(pr, cfg);
  const OmaResult oma = oma_baseline(pr, cfg);
  REQUIRE(single.feasible);
  REQUIRE(oma.feasible);
  CHECK(oma.ssr == doctest::Approx(single.report.ssr).epsilon(1e-9));
  CHECK(oma.see == doctest::Approx(single.report.see).epsilon(1e-9));
}
