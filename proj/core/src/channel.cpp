#include "starsee/channel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <stdexcept>

namespace starsee {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 unit_direction(const Vec3& from, const Vec3& to) {
  const double d = distance(from, to);
  return {(to.x - from.x) / d, (to.y - from.y) / d, (to.z - from.z) / d};
}

CMat rayleigh(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  CMat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = Cplx(nd(rng), nd(rng));
  return m;
}

CMat rician(const CMat& los, double nu, double gain, std::mt19937_64& rng) {
  const CMat nlos = rayleigh(static_cast<int>(los.rows()), static_cast<int>(los.cols()), rng);
  return std::sqrt(gain) * (std::sqrt(nu / (nu + 1.0)) * los + std::sqrt(1.0 / (nu + 1.0)) * nlos);
}

Vec3 point_in_disc(const Vec3& center, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double r = radius * std::sqrt(ud(rng));
  const double phi = 2.0 * kPi * ud(rng);
  return {center.x + r * std::cos(phi), center.y + r * std::sin(phi), center.z};
}

Link make_link(const SystemParams& p, const Geometry& geo, const CMat& H_b, const Vec3& pos,
               double kappa_h, double kappa_g, std::mt19937_64& rng) {
  Link l;
  l.position = pos;
  const double d_direct = distance(geo.bs, pos);
  const double d_ris = distance(geo.ris, pos);
  const CVec h_los = ula_response(p.N, unit_direction(geo.bs, pos));
  const CVec g_los = upa_response(p.M, unit_direction(geo.ris, pos));
  l.h_hat = rician(h_los, p.rician_direct, path_loss(d_direct, p.ple_direct, p.eps0), rng).col(0);
  l.g_hat = rician(g_los, p.rician_ris_user, path_loss(d_ris, p.ple_ris_user, p.eps0), rng).col(0);
  l.G_hat = cascaded_channel(l.g_hat, H_b);
  l.xi = kappa_h * l.h_hat.norm();
  l.zeta = kappa_g * l.G_hat.norm();
  l.h = l.h_hat + sample_ball(l.xi, p.N, rng);
  const CVec dg = sample_ball(l.zeta, p.M * p.N, rng);
  l.G = l.G_hat + Eigen::Map<const CMat>(dg.data(), p.M, p.N);
  return l;
}

void scale_link(Link& l, double s) {
  l.h_hat *= s;
  l.h *= s;
  l.G_hat *= s;
  l.G *= s;
  l.xi *= s;
  l.zeta *= s;
}

}  // namespace

void SystemParams::validate() const {
  if (N < 1 || M < 1) throw std::invalid_argument("N and M must be positive");
  if (J_r < 0 || J_t < 0 || J_r + J_t < 1) throw std::invalid_argument("need at least one Bob");
  if (!(noise_power > 0) || !(p_max > 0) || !(amp_efficiency > 0) || !(p_bs > 0) ||
      !(p_user > 0) || !(p_element > 0))
    throw std::invalid_argument("all powers must be positive");
  if (!(eps0 > 0)) throw std::invalid_argument("eps0 must be positive");
  if (rate_min < 2.0 * leak_max)
    throw std::invalid_argument("rate_min must be at least the summed leakage bound of both Eves");
}

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

void Geometry::validate() const {
  if (!(radius >= 0)) throw std::invalid_argument("cluster radius must be nonnegative");
  const double side = bs.y - ris.y;
  for (int k = 0; k < 2; ++k) {
    const double sb = bob_center[k].y - ris.y;
    const double se = eve_center[k].y - ris.y;
    const bool want_bs_side = (k == kReflect);
    auto ok = [&](double s) {
      return want_bs_side ? (s * side > 0 && std::abs(s) > radius) : (s * side < 0 && std::abs(s) > radius);
    };
    if (!ok(sb) || !ok(se))
      throw std::invalid_argument(k == kReflect ? "reflection-side cluster not on the BS side of the surface"
                                                : "transmission-side cluster not behind the surface");
  }
}

UncertaintyConfig UncertaintyConfig::uniform_sq(double kappa_sq) {
  const double k = std::sqrt(kappa_sq);
  return {k, k, k, k};
}

void UncertaintyConfig::validate() const {
  for (double k : {kappa_h_bob, kappa_g_bob, kappa_h_eve, kappa_g_eve})
    if (!(k >= 0.0 && k < 1.0)) throw std::invalid_argument("kappa must lie in [0, 1)");
}

double path_loss(double d, double exponent, double eps0) {
  if (!(d > 0)) throw std::invalid_argument("path_loss: distance must be positive");
  return eps0 * std::pow(d, -exponent);
}

CMat cascaded_channel(const CVec& g, const CMat& H_b) {
  if (g.size() != H_b.rows()) throw std::invalid_argument("cascaded_channel: shape mismatch");
  return g.conjugate().asDiagonal() * H_b;
}

CVec sample_ball_vector(double radius, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_ball(radius, n, rng);
}

CMat sample_ball_matrix(double radius, int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const CVec v = sample_ball(radius, rows * cols, rng);
  return Eigen::Map<const CMat>(v.data(), rows, cols);
}

CVec ula_response(int n, const Vec3& d) {
  CVec a(n);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, kPi * i * d.x);
  return a;
}

CVec upa_response(int m, const Vec3& d) {
  int mz = 1;
  for (int c = 1; c * c <= m; ++c)
    if (m % c == 0) mz = c;
  const int mx = m / mz;
  CVec a(m);
  for (int iz = 0; iz < mz; ++iz)
    for (int ix = 0; ix < mx; ++ix) a(iz * mx + ix) = std::polar(1.0, kPi * (ix * d.x + iz * d.z));
  return a;
}

ChannelRealization generate_realization(const SystemParams& p, const Geometry& geo,
                                        const UncertaintyConfig& unc, std::uint64_t seed) {
  p.validate();
  geo.validate();
  unc.validate();
  std::mt19937_64 rng(seed);
  ChannelRealization ch;
  ch.N = p.N;
  ch.M = p.M;
  const CMat hb_los = upa_response(p.M, unit_direction(geo.ris, geo.bs)) *
                      ula_response(p.N, unit_direction(geo.bs, geo.ris)).adjoint();
  ch.H_b = rician(hb_los, p.rician_bs_ris, path_loss(distance(geo.bs, geo.ris), p.ple_bs_ris, p.eps0), rng);
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < p.users(k); ++j) {
      const Vec3 pos = point_in_disc(geo.bob_center[k], geo.radius, rng);
      ch.bobs[k].push_back(make_link(p, geo, ch.H_b, pos, unc.kappa_h_bob, unc.kappa_g_bob, rng));
    }
  }
  for (int e = 0; e < 2; ++e) {
    const Vec3 pos = point_in_disc(geo.eve_center[e], geo.radius, rng);
    ch.eves[e] = make_link(p, geo, ch.H_b, pos, unc.kappa_h_eve, unc.kappa_g_eve, rng);
  }
  return ch;
}

ChannelRealization ChannelRealization::scaled(double s) const {
  ChannelRealization c = *this;
  c.H_b *= s;
  for (auto& space : c.bobs)
    for (auto& l : space) scale_link(l, s);
  for (auto& l : c.eves) scale_link(l, s);
  return c;
}

ChannelRealization ChannelRealization::perfect() const {
  ChannelRealization c = *this;
  auto fix = [](Link& l) {
    l.h = l.h_hat;
    l.G = l.G_hat;
    l.xi = 0.0;
    l.zeta = 0.0;
  };
  for (auto& space : c.bobs)
    for (auto& l : space) fix(l);
  for (auto& l : c.eves) fix(l);
  return c;
}

void write_channel_dump(const ChannelRealization& ch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open channel dump " + path);
  out << std::setprecision(17);
  auto mat = [&](const std::string& name, const CMat& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) out << m(i, j).real() << ' ' << m(i, j).imag() << '\n';
  };
  auto link = [&](const std::string& tag, const Link& l) {
    out << "link " << tag << " xi " << l.xi << " zeta " << l.zeta << '\n';
    mat(tag + ".h_hat", l.h_hat);
    mat(tag + ".G_hat", l.G_hat);
    mat(tag + ".h", l.h);
    mat(tag + ".G", l.G);
  };
  mat("H_b", ch.H_b);
  for (int k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < ch.bobs[k].size(); ++j)
      link("bob" + std::to_string(k) + "_" + std::to_string(j), ch.bobs[k][j]);
  for (int e = 0; e < 2; ++e) link("eve" + std::to_string(e), ch.eves[e]);
}

}  // namespace starsee
