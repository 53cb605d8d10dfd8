#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace axygate {

// Compact Nelder-Mead for smooth low-dimensional objectives. Standard
// reflection/expansion/contraction coefficients, termination on simplex
// size or evaluation budget.
struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                                 std::vector<double> x0, double scale, double ftol,
                                 int maxEvals) {
  const std::size_t n = x0.size();
  struct Vertex {
    std::vector<double> x;
    double f;
  };
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return fn(x);
  };

  std::vector<Vertex> s;
  s.push_back({x0, eval(x0)});
  for (std::size_t i = 0; i < n; ++i) {
    auto x = x0;
    x[i] += scale;
    s.push_back({x, eval(x)});
  }
  auto order = [&] {
    std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
  };
  order();

  while (evals < maxEvals) {
    if (std::abs(s.back().f - s.front().f) <= ftol * (1.0 + std::abs(s.front().f)) ||
        s.front().f <= ftol) {
      break;
    }
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) c[k] += s[i].x[k];
    }
    for (auto& v : c) v /= double(n);

    auto blend = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = c[k] + t * (s.back().x[k] - c[k]);
      return x;
    };

    auto xr = blend(-1.0);
    double fr = eval(xr);
    if (fr < s.front().f) {
      auto xe = blend(-2.0);
      double fe = eval(xe);
      if (fe < fr) s.back() = {xe, fe};
      else s.back() = {xr, fr};
    } else if (fr < s[n - 1].f) {
      s.back() = {xr, fr};
    } else {
      const bool outside = fr < s.back().f;
      auto xc = blend(outside ? -0.5 : 0.5);
      double fc = eval(xc);
      if (fc < std::min(fr, s.back().f)) {
        s.back() = {xc, fc};
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t k = 0; k < n; ++k)
            s[i].x[k] = s.front().x[k] + 0.5 * (s[i].x[k] - s.front().x[k]);
          s[i].f = eval(s[i].x);
        }
      }
    }
    order();
  }
  order();
  SimplexResult out;
  out.x = s.front().x;
  out.value = s.front().f;
  out.evaluations = evals;
  out.converged = s.front().f <= ftol;
  return out;
}

} // namespace axygate
