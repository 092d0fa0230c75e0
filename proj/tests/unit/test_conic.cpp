#include "starsee/conic.hpp"

#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace starsee::conic;

namespace {

Eigen::MatrixXd random_sym(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = nd(rng);
  return 0.5 * (m + m.transpose());
}

CMatrix random_herm(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Cplx(nd(rng), nd(rng));
  return 0.5 * (m + m.adjoint());
}

double lambda_max(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

}  // namespace

TEST_CASE("svec round trip keeps the trace inner product") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd a = random_sym(rng, 5);
  const Eigen::MatrixXd b = random_sym(rng, 5);
  CHECK((smat(svec(a), 5) - a).norm() < 1e-14);
  CHECK(svec(a).dot(svec(b)) == doctest::Approx((a * b).trace()).epsilon(1e-12));
}

TEST_CASE("embed_hermitian of a real scalar doubles it") {
  CMatrix h(1, 1);
  h(0, 0) = 2.0;
  const Eigen::MatrixXd e = embed_hermitian(h);
  CHECK((e - 2.0 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("embed_hermitian duplicates the spectrum") {
  CMatrix h(2, 2);
  h << 0.0, Cplx(0, 1), Cplx(0, -1), 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(embed_hermitian(h));
  const Eigen::VectorXd ev = es.eigenvalues();
  CHECK(ev(0) == doctest::Approx(-1.0));
  CHECK(ev(1) == doctest::Approx(-1.0));
  CHECK(ev(2) == doctest::Approx(1.0));
  CHECK(ev(3) == doctest::Approx(1.0));
}

TEST_CASE("embed_hermitian rejects non-Hermitian input") {
  CMatrix h(2, 2);
  h << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(embed_hermitian(h), std::invalid_argument);
  CHECK_THROWS_AS(embed_hermitian(CMatrix(2, 3)), std::invalid_argument);
}

TEST_CASE("embed_hermitian keeps PSD-ness on random draws") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    CMatrix h = random_herm(rng, 5);
    if (t % 2 == 0) h = h * h.adjoint();  // PSD half the time
    Eigen::SelfAdjointEigenSolver<CMatrix> ec(h, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(embed_hermitian(h), Eigen::EigenvaluesOnly);
    CHECK(ec.eigenvalues()(0) == doctest::Approx(er.eigenvalues()(0)).epsilon(1e-9));
    CHECK((ec.eigenvalues()(0) >= -1e-9) == (er.eigenvalues()(0) >= -1e-9));
  }
}

TEST_CASE("HermitianAffine lowers to the embedded matrix") {
  std::mt19937_64 rng(5);
  HermitianAffine h(3);
  const CMatrix c0 = random_herm(rng, 3);
  const CMatrix c1 = random_herm(rng, 3);
  CMatrix off(1, 2);
  off << Cplx(1, 2), Cplx(-0.5, 0.25);
  h.add_block(-1, 0, c0);
  h.add_block(0, 0, c1);
  h.add_offdiag(1, 0, 1, off);
  const ConeBlock b = h.to_block(2);
  Eigen::VectorXd x(2);
  x << 0.7, -1.3;
  const Eigen::MatrixXd got = smat(b.offset + b.coeff * x, 6);
  CHECK((got - embed_hermitian(h.evaluate(x))).norm() < 1e-12);
  CMatrix expect = c0 + 0.7 * c1;
  expect(0, 1) += -1.3 * off(0, 0);
  expect(0, 2) += -1.3 * off(0, 1);
  expect(1, 0) += -1.3 * std::conj(off(0, 0));
  expect(2, 0) += -1.3 * std::conj(off(0, 1));
  CHECK((h.evaluate(x) - expect).norm() < 1e-12);
}

TEST_CASE("solve: maximize -x subject to x >= 1") {
  ProgramBuilder pb;
  const int x = pb.add_var("x");
  pb.set_objective(x, -1.0);
  pb.set_maximize(true);
  pb.add_nonneg({{x, 1.0}}, -1.0);
  const auto sol = solve(pb.build());
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.primal(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective_value == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("solve: minimize t with [[t,1],[1,t]] PSD") {
  ProgramBuilder pb;
  const int t = pb.add_var("t");
  pb.set_objective(t, 1.0);
  HermitianAffine h(2);
  h.add_term(t, 0, 0, 1.0);
  h.add_term(t, 1, 1, 1.0);
  h.add_constant(0, 1, 1.0);
  pb.add_hermitian(h);
  const auto sol = solve(pb.build());
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.primal(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solve: contradictory bounds are infeasible") {
  ProgramBuilder pb;
  const int x = pb.add_var("x");
  pb.set_objective(x, 1.0);
  pb.add_nonneg({{x, 1.0}}, -1.0);
  pb.add_nonneg({{x, -1.0}}, 0.0);
  CHECK(solve(pb.build()).status == SolveStatus::Infeasible);
}

TEST_CASE("solve: unbounded objective") {
  ProgramBuilder pb;
  const int x = pb.add_var("x");
  pb.set_objective(x, 1.0);
  pb.add_nonneg({{x, -1.0}}, 0.0);
  CHECK(solve(pb.build()).status == SolveStatus::Unbounded);
}

TEST_CASE("solve: largest eigenvalue of random symmetric matrices") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 6;
    const Eigen::MatrixXd a = random_sym(rng, n);
    ProgramBuilder pb;
    const int t = pb.add_var("t");
    pb.set_objective(t, 1.0);
    HermitianAffine h(n);
    h.add_block(-1, 0, -a.cast<Cplx>());
    for (int i = 0; i < n; ++i) h.add_term(t, i, i, 1.0);
    pb.add_hermitian(h);
    const auto prog = pb.build();
    const auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.primal(0) == doctest::Approx(lambda_max(a)).epsilon(1e-6));
    CHECK(constraint_residual(prog, sol.primal) <= 1e-7);
  }
}

TEST_CASE("solve: largest eigenvalue of Hermitian matrices through the embedding") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3 + trial;
    const CMatrix a = random_herm(rng, n);
    ProgramBuilder pb;
    const int t = pb.add_var("t");
    pb.set_objective(t, 1.0);
    HermitianAffine h(n);
    h.add_block(-1, 0, -a);
    for (int i = 0; i < n; ++i) h.add_term(t, i, i, 1.0);
    pb.add_hermitian(h);
    const auto sol = solve(pb.build());
    REQUIRE(sol.status == SolveStatus::Optimal);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a, Eigen::EigenvaluesOnly);
    CHECK(sol.primal(0) == doctest::Approx(es.eigenvalues()(n - 1)).epsilon(1e-6));
  }
}

TEST_CASE("solve: linear objective over a ball") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial;
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c(i) = nd(rng);
    ProgramBuilder pb;
    const int x0 = pb.add_vars("x", n);
    for (int i = 0; i < n; ++i) pb.set_objective(x0 + i, c(i));
    std::vector<std::pair<ProgramBuilder::Linear, double>> rows;
    rows.push_back({{}, 2.0});
    for (int i = 0; i < n; ++i) rows.push_back({{{x0 + i, 1.0}}, 0.5});
    pb.add_soc(rows);
    const auto sol = solve(pb.build());
    REQUIRE(sol.status == SolveStatus::Optimal);
    // optimum: x = -0.5 - 2 c/|c|
    CHECK(sol.objective_value == doctest::Approx(-0.5 * c.sum() - 2.0 * c.norm()).epsilon(1e-6));
  }
}

TEST_CASE("solve: equality constraints and mixed cones") {
  // minimize x + y s.t. x + 2y = 3, x >= 0, y >= 0, (x, y) in a ball of radius 5
  ProgramBuilder pb;
  const int x = pb.add_var("x");
  const int y = pb.add_var("y");
  pb.set_objective(x, 1.0);
  pb.set_objective(y, 1.0);
  pb.add_equality({{x, 1.0}, {y, 2.0}}, -3.0);
  pb.add_nonneg({{x, 1.0}}, 0.0);
  pb.add_nonneg({{y, 1.0}}, 0.0);
  pb.add_soc({{{}, 5.0}, {{{x, 1.0}}, 0.0}, {{{y, 1.0}}, 0.0}});
  const auto sol = solve(pb.build());
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.primal(0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(sol.primal(1) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("solve: repeated solves agree and residual recheck passes") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    // min c'x  s.t.  I + sum x_i A_i >= 0,  |x| <= 3
    const int n = 4;
    const int k = 3;
    ProgramBuilder pb;
    const int x0 = pb.add_vars("x", k);
    HermitianAffine h(n);
    for (int i = 0; i < n; ++i) h.add_constant(i, i, 1.0);
    std::vector<std::pair<ProgramBuilder::Linear, double>> rows{{{}, 3.0}};
    for (int i = 0; i < k; ++i) {
      h.add_block(x0 + i, 0, random_sym(rng, n).cast<Cplx>());
      pb.set_objective(x0 + i, nd(rng));
      rows.push_back({{{x0 + i, 1.0}}, 0.0});
    }
    pb.add_hermitian(h);
    pb.add_soc(rows);
    const auto prog = pb.build();
    const auto s1 = solve(prog);
    const auto s2 = solve(prog);
    REQUIRE(s1.status == SolveStatus::Optimal);
    CHECK(std::abs(s1.objective_value - s2.objective_value) <= 1e-6);
    CHECK(constraint_residual(prog, s1.primal) <= 1e-7);
  }
}

TEST_CASE("debug dump lists every block") {
  ProgramBuilder pb;
  const int x = pb.add_var("x");
  pb.set_objective(x, 1.0);
  pb.add_nonneg({{x, 1.0}}, -1.0, "lower");
  HermitianAffine h(2);
  h.add_term(x, 0, 0, 1.0);
  h.add_term(x, 1, 1, 1.0);
  pb.add_hermitian(h, "lmi");
  const std::string path = "conic_dump_test.txt";
  write_debug_dump(pb.build(), path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CHECK(text.find("variables 1") != std::string::npos);
  CHECK(text.find("label=lower") != std::string::npos);
  CHECK(text.find("psd rows=10 order=4") != std::string::npos);
  std::remove(path.c_str());
}
