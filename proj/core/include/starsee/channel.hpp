#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace starsee {

using Cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using CRow = Eigen::RowVectorXcd;

// Space index: 0 = reflection side, 1 = transmission side.
constexpr int kReflect = 0;
constexpr int kTransmit = 1;
inline int other_space(int k) { return 1 - k; }

// All quantities in linear units (Watts, bits/s/Hz).
struct SystemParams {
  int N = 5;   // BS antennas
  int M = 20;  // surface elements
  int J_r = 2;
  int J_t = 2;
  double noise_power = 1e-11;
  double p_max = 10.0;
  double amp_efficiency = 1.0;
  double p_bs = 10.0;
  double p_user = 0.01;
  double p_element = 0.01;
  double rate_min = 1.5;
  double leak_max = 0.6;
  double eps0 = 1e-3;
  double ple_bs_ris = 2.2;
  double ple_direct = 3.2;
  double ple_ris_user = 2.6;
  double rician_bs_ris = 1.9952623149688795;
  double rician_direct = 1.9952623149688795;
  double rician_ris_user = 1.9952623149688795;

  int users(int k) const { return k == kReflect ? J_r : J_t; }
  int total_users() const { return J_r + J_t; }
  double static_power() const { return p_bs + total_users() * p_user + M * p_element; }
  void validate() const;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

struct Geometry {
  Vec3 bs{0.0, 0.0, 10.0};
  Vec3 ris{0.0, 30.0, 20.0};
  std::array<Vec3, 2> bob_center{{{0.0, 25.0, 0.0}, {0.0, 35.0, 0.0}}};
  std::array<Vec3, 2> eve_center{{{25.0, 25.0, 0.0}, {25.0, 35.0, 0.0}}};
  double radius = 4.0;

  // Surface plane is y = ris.y; reflection-side clusters must lie on the BS side.
  void validate() const;
};

// Maximum normalized estimation errors (kappa, not kappa squared).
struct UncertaintyConfig {
  double kappa_h_bob = 0.0;
  double kappa_g_bob = 0.0;
  double kappa_h_eve = 0.0;
  double kappa_g_eve = 0.0;

  static UncertaintyConfig uniform_sq(double kappa_sq);
  void validate() const;
};

// One receiver: direct link, surface link and cascaded link, estimated and true.
struct Link {
  Vec3 position;
  CVec h_hat;  // N
  CVec g_hat;  // M
  CMat G_hat;  // M x N cascaded diag(g^H) H_b
  CVec h;      // true direct link
  CMat G;      // true cascaded link
  double xi = 0.0;    // radius of the direct-link error ball
  double zeta = 0.0;  // radius of the cascaded-link error ball
};

struct ChannelRealization {
  int N = 0;
  int M = 0;
  CMat H_b;                               // M x N
  std::array<std::vector<Link>, 2> bobs;  // per space
  std::array<Link, 2> eves;               // Eve e sits in space e

  // Every channel (and radius) multiplied by s; noise power scales by s^2.
  ChannelRealization scaled(double s) const;
  // Copy with true channels replaced by the estimates and zero radii.
  ChannelRealization perfect() const;
};

double path_loss(double d, double exponent, double eps0 = 1e-3);

CMat cascaded_channel(const CVec& g, const CMat& H_b);

// Uniform sample from the complex ball {x in C^n : ||x|| <= radius}; for a
// matrix shape the Frobenius ball is used.
CVec sample_ball_vector(double radius, int n, std::uint64_t seed);
CMat sample_ball_matrix(double radius, int rows, int cols, std::uint64_t seed);

// Same, drawing from a caller-owned engine (for long audit loops).
template <class Rng>
CVec sample_ball(double radius, int n, Rng& rng);

ChannelRealization generate_realization(const SystemParams& params, const Geometry& geo,
                                        const UncertaintyConfig& unc, std::uint64_t seed);

// Text dump: one line per complex entry, row major, with a header per link.
void write_channel_dump(const ChannelRealization& ch, const std::string& path);

// Steering vectors with half-wavelength spacing. The BS array runs along x;
// the surface is a planar array in the x-z plane.
CVec ula_response(int n, const Vec3& direction);
CVec upa_response(int m, const Vec3& direction);

}  // namespace starsee

#include "starsee/detail/ball_sampling.hpp"
