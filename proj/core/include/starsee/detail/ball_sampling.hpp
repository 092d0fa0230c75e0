#pragma once

#include <cmath>
#include <random>

namespace starsee {

template <class Rng>
CVec sample_ball(double radius, int n, Rng& rng) {
  CVec x = CVec::Zero(n);
  if (radius <= 0.0 || n == 0) return x;
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int i = 0; i < n; ++i) x(i) = Cplx(nd(rng), nd(rng));
  double norm = x.norm();
  while (norm == 0.0) {
    for (int i = 0; i < n; ++i) x(i) = Cplx(nd(rng), nd(rng));
    norm = x.norm();
  }
  // 2n real dimensions: radial CDF is (s / r)^(2n)
  const double s = radius * std::pow(ud(rng), 1.0 / (2.0 * n));
  return x * (s / norm);
}

}  // namespace starsee
