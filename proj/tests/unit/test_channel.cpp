#include "starsee/channel.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace starsee;

namespace {
CMat random_cmat(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> nd;
  CMat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = Cplx(nd(rng), nd(rng));
  return m;
}
}  // namespace

TEST_CASE("path loss values") {
  CHECK(path_loss(1.0, 2.2) == doctest::Approx(1e-3));
  CHECK(path_loss(1.0, 0.0) == doctest::Approx(1e-3));
  CHECK(path_loss(10.0, 2.2) == doctest::Approx(6.30957e-6).epsilon(1e-5));
  CHECK_THROWS(path_loss(0.0, 2.0));
  CHECK_THROWS(path_loss(-1.0, 2.0));
}

TEST_CASE("path loss monotone in distance and exponent") {
  for (double d = 1.5; d < 100.0; d *= 1.7) {
    CHECK(path_loss(d * 1.1, 2.6) < path_loss(d, 2.6));
    CHECK(path_loss(d, 3.2) < path_loss(d, 2.6));
  }
}

TEST_CASE("rician factor of 3 dB") {
  SystemParams p;
  CHECK(p.rician_direct == doctest::Approx(std::pow(10.0, 0.3)));
  const double nu = p.rician_direct;
  CHECK(std::sqrt(nu / (nu + 1.0)) * std::sqrt(nu / (nu + 1.0)) + 1.0 / (nu + 1.0) == doctest::Approx(1.0));
}

TEST_CASE("cascaded channel") {
  CHECK(cascaded_channel(CVec::Ones(3), CMat::Identity(3, 3)).isApprox(CMat::Identity(3, 3)));
  CVec g(2);
  g << 1.0, Cplx(0.0, 1.0);
  const CMat c = cascaded_channel(g, CMat::Identity(2, 2));
  CHECK(std::abs(c(0, 0) - Cplx(1.0, 0.0)) < 1e-15);
  CHECK(std::abs(c(1, 1) - Cplx(0.0, -1.0)) < 1e-15);
  CHECK(std::abs(c(0, 1)) == 0.0);
  CHECK_THROWS(cascaded_channel(CVec::Ones(3), CMat::Identity(2, 2)));
}

TEST_CASE("cascaded channel against the diagonal phase form") {
  std::mt19937_64 rng(11);
  const CMat H = random_cmat(rng, 4, 4);
  const CVec g = random_cmat(rng, 4, 1).col(0);
  const CVec u = random_cmat(rng, 4, 1).col(0);
  // u^H diag(g^H) H equals g^H diag(conj(u)) H
  const CMat theta = u.conjugate().asDiagonal();
  const Eigen::RowVectorXcd direct = g.adjoint() * theta * H;
  const Eigen::RowVectorXcd ours = u.adjoint() * cascaded_channel(g, H);
  CHECK((direct - ours).norm() < 1e-12);
}

TEST_CASE("ball sampling") {
  CHECK(sample_ball_vector(0.0, 4, 1).norm() == 0.0);
  CHECK(sample_ball_matrix(0.0, 2, 3, 1).norm() == 0.0);
  std::mt19937_64 rng(3);
  int bad = 0;
  for (int i = 0; i < 10000; ++i)
    if (sample_ball(1.0, 3, rng).norm() > 1.0) ++bad;
  CHECK(bad == 0);
  for (int i = 0; i < 1000; ++i) CHECK(sample_ball_matrix(2.0, 3, 4, i).norm() <= 2.0 + 1e-12);
}

TEST_CASE("ball sampling radial moment") {
  // uniform in a ball of real dimension 2n: E||x|| = r * 2n / (2n + 1)
  std::mt19937_64 rng(5);
  for (int n : {1, 3, 10}) {
    double sum = 0.0;
    const int S = 100000;
    for (int i = 0; i < S; ++i) sum += sample_ball(2.5, n, rng).norm();
    const double expect = 2.5 * 2.0 * n / (2.0 * n + 1.0);
    CHECK(std::abs(sum / S - expect) / expect < 0.02);
  }
}

TEST_CASE("realization shapes and containment") {
  SystemParams p;
  p.N = 4;
  p.M = 6;
  Geometry geo;
  const auto unc = UncertaintyConfig::uniform_sq(0.1);
  const auto ch = generate_realization(p, geo, unc, 42);
  CHECK(ch.H_b.rows() == 6);
  CHECK(ch.H_b.cols() == 4);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(static_cast<int>(ch.bobs[k].size()) == p.users(k));
    for (const auto& l : ch.bobs[k]) {
      CHECK(l.g_hat.size() == 6);
      CHECK(l.h_hat.size() == 4);
      CHECK((l.h - l.h_hat).norm() <= l.xi * (1 + 1e-12));
      CHECK((l.G - l.G_hat).norm() <= l.zeta * (1 + 1e-12));
      CHECK(l.xi == doctest::Approx(std::sqrt(0.1) * l.h_hat.norm()));
      CHECK(l.zeta == doctest::Approx(std::sqrt(0.1) * l.G_hat.norm()));
      CHECK(l.G_hat.isApprox(cascaded_channel(l.g_hat, ch.H_b)));
    }
  }
  for (const auto& e : ch.eves) {
    CHECK(e.h_hat.size() == 4);
    CHECK((e.h - e.h_hat).norm() <= e.xi * (1 + 1e-12));
    CHECK((e.G - e.G_hat).norm() <= e.zeta * (1 + 1e-12));
  }
}

TEST_CASE("realization is seed deterministic") {
  SystemParams p;
  Geometry geo;
  const auto unc = UncertaintyConfig::uniform_sq(0.05);
  const auto a = generate_realization(p, geo, unc, 9);
  const auto b = generate_realization(p, geo, unc, 9);
  const auto c = generate_realization(p, geo, unc, 10);
  CHECK(a.H_b == b.H_b);
  for (int k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < a.bobs[k].size(); ++j) {
      CHECK(a.bobs[k][j].h == b.bobs[k][j].h);
      CHECK(a.bobs[k][j].G == b.bobs[k][j].G);
    }
  CHECK(a.eves[1].G == b.eves[1].G);
  CHECK(a.H_b != c.H_b);
}

TEST_CASE("zero kappa gives exact estimates") {
  SystemParams p;
  const auto ch = generate_realization(p, Geometry{}, UncertaintyConfig{}, 1);
  for (int k = 0; k < 2; ++k)
    for (const auto& l : ch.bobs[k]) {
      CHECK(l.h == l.h_hat);
      CHECK(l.G == l.G_hat);
    }
  CHECK(ch.eves[0].h == ch.eves[0].h_hat);
}

TEST_CASE("users sit in their half spaces") {
  SystemParams p;
  Geometry geo;
  const auto ch = generate_realization(p, geo, UncertaintyConfig{}, 2);
  for (const auto& l : ch.bobs[kReflect]) CHECK(l.position.y < geo.ris.y);
  for (const auto& l : ch.bobs[kTransmit]) CHECK(l.position.y > geo.ris.y);
  CHECK(ch.eves[kReflect].position.y < geo.ris.y);
  CHECK(ch.eves[kTransmit].position.y > geo.ris.y);
}

TEST_CASE("validation") {
  SystemParams p;
  p.noise_power = 0.0;
  CHECK_THROWS(p.validate());
  p = SystemParams{};
  p.rate_min = 1.0;
  CHECK_THROWS(p.validate());
  Geometry g;
  g.bob_center[kTransmit].y = 20.0;
  CHECK_THROWS(g.validate());
  UncertaintyConfig u;
  u.kappa_h_bob = 1.0;
  CHECK_THROWS(u.validate());
}

TEST_CASE("scaling multiplies channels and radii") {
  SystemParams p;
  const auto ch = generate_realization(p, Geometry{}, UncertaintyConfig::uniform_sq(0.1), 4);
  const auto s = ch.scaled(10.0);
  CHECK(s.bobs[0][0].h.isApprox(10.0 * ch.bobs[0][0].h));
  CHECK(s.eves[1].zeta == doctest::Approx(10.0 * ch.eves[1].zeta));
}
