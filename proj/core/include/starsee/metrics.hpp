#pragma once

#include "starsee/channel.hpp"

#include <array>
#include <string>
#include <vector>

namespace starsee {

enum class Protocol { ES, MS, TS, SF };

const char* to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

// Precoders are f_k per space, split among the space's Bobs by alpha_{k,j};
// u_k carries sqrt(beta) * exp(i theta) per element.
struct BeamformingState {
  Protocol protocol = Protocol::ES;
  std::array<std::vector<double>, 2> alpha;
  std::array<CVec, 2> f;
  std::array<CVec, 2> u;
  std::array<double, 2> tau{0.5, 0.5};  // TS only

  CVec beam(int k, int j) const { return alpha[k][j] * f[k]; }
  Eigen::VectorXd beta(int k) const { return u[k].cwiseAbs2(); }
};

// h^H + u^H G
CRow combined_channel(const CVec& h, const CMat& G, const CVec& u);

// log2(1 + |hbar w|^2 / (||hbar W||^2 + noise)); W columns are interferers.
double decode_rate(const CRow& hbar, const CVec& w, const CMat& interferers, double noise);
double eve_rate(const CRow& hbar_e, const CVec& w, const CMat& interferers, double noise);
// tau * log2(1 + |hbar w|^2 / (||hbar W||^2 + tau * noise)).
double ts_decode_rate(const CRow& hbar, const CVec& w, const CMat& interferers, double noise, double tau);

double achievable_rate(const std::vector<double>& per_decoder);

// [rate - leakage]^+
double secrecy_rate(double rate, double leakage);

// Columns of w_{k,-j}: earlier-index beams of the cluster, then (unless TS)
// the other space's precoder.
CMat interference_beams(const BeamformingState& s, int k, int j);

double total_power(const BeamformingState& s, const SystemParams& p);

struct SecrecyReport {
  std::array<std::vector<double>, 2> rate;                     // R_{k,j}
  std::array<std::vector<std::array<double, 2>>, 2> eve;       // R^e_{k,j}, e = 0, 1
  std::array<std::vector<double>, 2> secrecy;                  // [R - sum_e R^e]^+
  double ssr = 0.0;
  double power = 0.0;
  double see = 0.0;
};

// Evaluates on the estimated (use_true = false) or true channels. `noise`
// must match the channel scaling.
SecrecyReport secrecy_energy_efficiency(const BeamformingState& s, const ChannelRealization& ch,
                                        const SystemParams& p, double noise, bool use_true = false);

struct OrderCheck {
  bool ok = true;
  std::array<std::vector<double>, 2> margin;  // gain_j - gain_{j+1}
};
OrderCheck decoding_order_ok(const BeamformingState& s, const ChannelRealization& ch, bool use_true = false);

}  // namespace starsee
