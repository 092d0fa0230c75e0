#include "starsee/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace starsee {

namespace {
constexpr double kLn2 = 0.69314718055994530942;

double log2_1p(double x) { return std::log1p(std::max(0.0, x)) / kLn2; }

const CVec& pick_h(const Link& l, bool use_true) { return use_true ? l.h : l.h_hat; }
const CMat& pick_G(const Link& l, bool use_true) { return use_true ? l.G : l.G_hat; }

double signal_power(const CRow& hbar, const CVec& w) { return std::norm((hbar * w).value()); }

double interference_power(const CRow& hbar, const CMat& W) {
  return W.cols() == 0 ? 0.0 : (hbar * W).squaredNorm();
}
}  // namespace

const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::ES: return "ES";
    case Protocol::MS: return "MS";
    case Protocol::TS: return "TS";
    case Protocol::SF: return "SF";
  }
  return "?";
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "ES") return Protocol::ES;
  if (s == "MS") return Protocol::MS;
  if (s == "TS") return Protocol::TS;
  if (s == "SF") return Protocol::SF;
  throw std::invalid_argument("unknown protocol '" + s + "'");
}

CRow combined_channel(const CVec& h, const CMat& G, const CVec& u) {
  if (G.cols() != h.size() || G.rows() != u.size())
    throw std::invalid_argument("combined_channel: shape mismatch");
  return h.adjoint() + u.adjoint() * G;
}

double decode_rate(const CRow& hbar, const CVec& w, const CMat& W, double noise) {
  return log2_1p(signal_power(hbar, w) / (interference_power(hbar, W) + noise));
}

double eve_rate(const CRow& hbar_e, const CVec& w, const CMat& W, double noise) {
  return decode_rate(hbar_e, w, W, noise);
}

double ts_decode_rate(const CRow& hbar, const CVec& w, const CMat& W, double noise, double tau) {
  if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("ts_decode_rate: tau must lie in (0, 1]");
  return tau * log2_1p(signal_power(hbar, w) / (interference_power(hbar, W) + tau * noise));
}

double achievable_rate(const std::vector<double>& r) {
  if (r.empty()) throw std::invalid_argument("achievable_rate: empty decoder list");
  return *std::min_element(r.begin(), r.end());
}

double secrecy_rate(double rate, double leakage) { return std::max(0.0, rate - leakage); }

CMat interference_beams(const BeamformingState& s, int k, int j) {
  const bool ts = s.protocol == Protocol::TS;
  const int n = static_cast<int>(s.f[k].size());
  const int kb = other_space(k);
  const bool other = !ts && s.f[kb].size() > 0 && !s.alpha[kb].empty();
  CMat W(n, j + (other ? 1 : 0));
  for (int i = 0; i < j; ++i) W.col(i) = s.beam(k, i);
  if (other) W.col(j) = s.f[kb];
  return W;
}

double total_power(const BeamformingState& s, const SystemParams& p) {
  double tx = 0.0;
  for (int k = 0; k < 2; ++k) tx += s.f[k].squaredNorm();
  return p.amp_efficiency * tx + p.static_power();
}

SecrecyReport secrecy_energy_efficiency(const BeamformingState& s, const ChannelRealization& ch,
                                        const SystemParams& p, double noise, bool use_true) {
  SecrecyReport rep;
  const bool ts = s.protocol == Protocol::TS;
  const CVec zero_u = CVec::Zero(ch.M);
  for (int k = 0; k < 2; ++k) {
    const int J = static_cast<int>(s.alpha[k].size());
    rep.rate[k].assign(J, 0.0);
    rep.eve[k].assign(J, {0.0, 0.0});
    rep.secrecy[k].assign(J, 0.0);
    for (int j = 0; j < J; ++j) {
      const CVec w = s.beam(k, j);
      const CMat W = interference_beams(s, k, j);
      std::vector<double> per_l;
      for (int l = 0; l <= j; ++l) {
        const Link& bob = ch.bobs[k][l];
        const CRow hb = combined_channel(pick_h(bob, use_true), pick_G(bob, use_true), s.u[k]);
        per_l.push_back(ts ? ts_decode_rate(hb, w, W, noise, s.tau[k]) : decode_rate(hb, w, W, noise));
      }
      rep.rate[k][j] = achievable_rate(per_l);
      double leak = 0.0;
      for (int e = 0; e < 2; ++e) {
        const Link& eve = ch.eves[e];
        // Under TS the surface only serves space k during its slot.
        const CVec& ue = ts ? (e == k ? s.u[k] : zero_u) : s.u[e];
        const CRow he = combined_channel(pick_h(eve, use_true), pick_G(eve, use_true), ue);
        rep.eve[k][j][e] = ts ? ts_decode_rate(he, w, W, noise, s.tau[k]) : eve_rate(he, w, W, noise);
        leak += rep.eve[k][j][e];
      }
      rep.secrecy[k][j] = secrecy_rate(rep.rate[k][j], leak);
      rep.ssr += rep.secrecy[k][j];
    }
  }
  rep.power = total_power(s, p);
  rep.see = rep.ssr / rep.power;
  return rep;
}

OrderCheck decoding_order_ok(const BeamformingState& s, const ChannelRealization& ch, bool use_true) {
  OrderCheck out;
  for (int k = 0; k < 2; ++k) {
    const int J = static_cast<int>(s.alpha[k].size());
    for (int j = 0; j + 1 < J; ++j) {
      auto gain = [&](int i) {
        const Link& b = ch.bobs[k][i];
        return signal_power(combined_channel(pick_h(b, use_true), pick_G(b, use_true), s.u[k]), s.beam(k, i));
      };
      const double m = gain(j) - gain(j + 1);
      out.margin[k].push_back(m);
      if (m < 0.0) out.ok = false;
    }
  }
  return out;
}

}  // namespace starsee
