#include "starsee/metrics.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace starsee;

namespace {
CVec e1(int n) {
  CVec v = CVec::Zero(n);
  v(0) = 1.0;
  return v;
}
CMat random_cmat(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> nd;
  CMat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = Cplx(nd(rng), nd(rng));
  return m;
}
}  // namespace

TEST_CASE("combined channel") {
  std::mt19937_64 rng(1);
  const CVec h = random_cmat(rng, 3, 1).col(0);
  const CMat G = random_cmat(rng, 4, 3);
  CHECK((combined_channel(h, G, CVec::Zero(4)) - h.adjoint()).norm() == 0.0);
  const CRow r = combined_channel(CVec::Zero(3), CMat::Identity(3, 3), e1(3));
  CHECK((r - e1(3).transpose()).norm() == 0.0);
  CHECK_THROWS(combined_channel(h, G, CVec::Zero(3)));

  const CVec g = random_cmat(rng, 4, 1).col(0);
  const CMat Hb = random_cmat(rng, 4, 3);
  const CVec u = random_cmat(rng, 4, 1).col(0);
  const CMat theta = u.conjugate().asDiagonal();
  const CRow direct = g.adjoint() * theta * Hb + h.adjoint();
  CHECK((combined_channel(h, cascaded_channel(g, Hb), u) - direct).norm() < 1e-12);
}

TEST_CASE("decode rate examples") {
  const double s2 = 1e-11;
  CRow hb = CRow::Zero(2);
  hb(0) = std::sqrt(3 * s2);
  CHECK(decode_rate(hb, e1(2), CMat(2, 0), s2) == doctest::Approx(2.0));
  hb(0) = std::sqrt(s2);
  CMat W = CMat::Zero(2, 1);
  W(0, 0) = 1.0;
  CHECK(decode_rate(hb, e1(2), W, s2) == doctest::Approx(0.5849625007));
  CHECK(decode_rate(hb, CVec::Zero(2), W, s2) == 0.0);
  CHECK(eve_rate(hb, e1(2), W, s2) == doctest::Approx(0.5849625007));
}

TEST_CASE("decode rate monotone in interference and noise") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const CRow hb = random_cmat(rng, 1, 3).row(0);
    const CVec w = random_cmat(rng, 3, 1).col(0);
    const CMat W = random_cmat(rng, 3, 2);
    const double base = decode_rate(hb, w, W, 1.0);
    CHECK(base >= 0.0);
    CHECK(decode_rate(hb, w, 1.5 * W, 1.0) <= base);
    CHECK(decode_rate(hb, w, W, 2.0) <= base);
  }
}

TEST_CASE("time-switching rate") {
  const double s2 = 1.0;
  CRow hb = CRow::Zero(2);
  hb(0) = 1.0;
  CHECK(ts_decode_rate(hb, e1(2), CMat(2, 0), s2, 0.5) == doctest::Approx(0.7924812504));
  CHECK(ts_decode_rate(hb, e1(2), CMat(2, 0), s2, 1.0) == doctest::Approx(decode_rate(hb, e1(2), CMat(2, 0), s2)));
  CHECK(ts_decode_rate(hb, CVec::Zero(2), CMat(2, 0), s2, 0.3) == 0.0);
  CHECK_THROWS(ts_decode_rate(hb, e1(2), CMat(2, 0), s2, 0.0));
}

TEST_CASE("achievable rate") {
  CHECK(achievable_rate({2.0, 1.5}) == 1.5);
  CHECK(achievable_rate({1.0}) == 1.0);
  CHECK(achievable_rate({2.0, 1.5, 1.7}) <= achievable_rate({2.0, 1.5}));
  CHECK_THROWS(achievable_rate({}));
}

TEST_CASE("secrecy rate and SEE arithmetic") {
  CHECK(secrecy_rate(2.0, 0.5) == 1.5);
  CHECK(secrecy_rate(2.0, 2.5) == 0.0);
  SecrecyReport r;
  r.ssr = 2.0;
  r.power = 10.0;
  CHECK(r.ssr / r.power == doctest::Approx(0.2));
}

TEST_CASE("total power") {
  SystemParams p;
  p.J_r = p.J_t = 2;
  p.M = 20;
  BeamformingState s;
  s.f[0] = CVec::Zero(5);
  s.f[1] = CVec::Zero(5);
  CHECK(total_power(s, p) == doctest::Approx(10.24));
  s.f[0](0) = std::sqrt(0.5);
  s.f[1](2) = Cplx(0.0, std::sqrt(0.5));
  CHECK(total_power(s, p) == doctest::Approx(11.24));
  p.amp_efficiency = 2.0;
  CHECK(total_power(s, p) == doctest::Approx(12.24));
  // scaling static powers by c changes only the static part
  SystemParams q = p;
  q.p_bs *= 3;
  q.p_user *= 3;
  q.p_element *= 3;
  CHECK(total_power(s, q) - 2.0 == doctest::Approx(3.0 * (total_power(s, p) - 2.0)));
}

TEST_CASE("decoding order") {
  ChannelRealization ch;
  ch.N = 1;
  ch.M = 1;
  BeamformingState s;
  s.alpha[0] = {1.0, 1.0};
  s.f[0] = CVec::Ones(1);
  s.u[0] = CVec::Zero(1);
  Link a, b;
  a.h_hat = CVec::Constant(1, 2.0);
  b.h_hat = CVec::Constant(1, 1.0);
  a.G_hat = b.G_hat = CMat::Zero(1, 1);
  ch.bobs[0] = {a, b};
  auto oc = decoding_order_ok(s, ch);
  CHECK(oc.ok);
  CHECK(oc.margin[0][0] == doctest::Approx(3.0));
  ch.bobs[0] = {b, a};
  CHECK_FALSE(decoding_order_ok(s, ch).ok);
  s.alpha[0] = {1.0};
  ch.bobs[0] = {b};
  CHECK(decoding_order_ok(s, ch).ok);
}

TEST_CASE("interference sets") {
  BeamformingState s;
  s.alpha[0] = {0.8, 0.6};
  s.alpha[1] = {1.0};
  s.f[0] = CVec::Ones(3);
  s.f[1] = 2.0 * CVec::Ones(3);
  CHECK(interference_beams(s, 0, 0).cols() == 1);
  CHECK(interference_beams(s, 0, 1).cols() == 2);
  CHECK(interference_beams(s, 0, 1).col(0).isApprox(0.8 * CVec::Ones(3)));
  CHECK(interference_beams(s, 0, 1).col(1).isApprox(s.f[1]));
  s.protocol = Protocol::TS;
  CHECK(interference_beams(s, 0, 1).cols() == 1);
  CHECK(interference_beams(s, 1, 0).cols() == 0);
}

TEST_CASE("secrecy report on a drawn channel") {
  SystemParams p;
  p.N = 3;
  p.M = 4;
  const auto ch = generate_realization(p, Geometry{}, UncertaintyConfig{}, 7).scaled(1.0 / std::sqrt(p.noise_power));
  BeamformingState s;
  std::mt19937_64 rng(4);
  for (int k = 0; k < 2; ++k) {
    s.alpha[k] = {std::sqrt(0.8), std::sqrt(0.2)};
    s.f[k] = 0.01 * random_cmat(rng, 3, 1).col(0);
    s.u[k] = CVec::Constant(4, std::sqrt(0.5));
  }
  const auto rep = secrecy_energy_efficiency(s, ch, p, 1.0);
  double ssr = 0.0;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j) {
      CHECK(rep.rate[k][j] >= 0.0);
      CHECK(rep.secrecy[k][j] == doctest::Approx(secrecy_rate(rep.rate[k][j], rep.eve[k][j][0] + rep.eve[k][j][1])));
      ssr += rep.secrecy[k][j];
    }
  CHECK(rep.ssr == doctest::Approx(ssr));
  CHECK(rep.see == doctest::Approx(ssr / total_power(s, p)));
  // first decoded user: only one decoder, rate is the plain formula
  const CRow hb = combined_channel(ch.bobs[0][0].h_hat, ch.bobs[0][0].G_hat, s.u[0]);
  CHECK(rep.rate[0][0] == doctest::Approx(decode_rate(hb, s.beam(0, 0), interference_beams(s, 0, 0), 1.0)));
}
