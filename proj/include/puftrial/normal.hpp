#pragma once

namespace puftrial::stats {

// Standard normal CDF. Accurate to ~1 ulp over the useful range (erfc based).
double normal_cdf(double x);

// Standard normal quantile. Rational approximation refined by one Halley step;
// |normal_cdf(normal_quantile(p)) - p| <= 1e-9 for p in [1e-12, 1 - 1e-12].
// p <= 0 returns -infinity, p >= 1 returns +infinity (documented sentinels).
double normal_quantile(double p);

}  // namespace puftrial::stats
