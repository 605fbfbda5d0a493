#pragma once

// Central finite differences for tests. Deliberately separate from the
// library's gradcheck so the two cannot share a bug.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace bier::testing {

inline std::vector<double> central_diff(std::span<double> params, const std::function<double()>& f,
                                        double h = 1e-6) {
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = params[k];
    params[k] = keep + h;
    const double up = f();
    params[k] = keep - h;
    const double down = f();
    params[k] = keep;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

}  // namespace bier::testing
