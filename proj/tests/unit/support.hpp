#pragma once

#include "cbfguard/barrier.hpp"
#include "cbfguard/guard.hpp"

namespace cbfguard::testing {

// ẋ = f0 + g·u in one dimension.
inline AffineModel scalar_model(double f0, std::vector<double> g, int secure_inputs)
{
  AffineModel m;
  m.state_dim = 1;
  m.secure_inputs = secure_inputs;
  m.vulnerable_inputs = static_cast<int>(g.size()) - secure_inputs;
  m.drift = [f0](const Vec &) { return Vec::Constant(1, f0); };
  m.input_matrix = [g](const Vec &) {
    Mat out(1, static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) out(0, static_cast<Eigen::Index>(j)) = g[j];
    return out;
  };
  for (int j = 1; j <= static_cast<int>(g.size()); ++j) m.input_labels.push_back(j);
  return m;
}

// ṗ = v, v̇ = u.
inline AffineModel double_integrator()
{
  AffineModel m;
  m.state_dim = 2;
  m.secure_inputs = 1;
  m.drift = [](const Vec & x) { return Vec((Vec(2) << x(1), 0.0).finished()); };
  m.input_matrix = [](const Vec &) { return Mat((Mat(2, 1) << 0.0, 1.0).finished()); };
  m.input_labels = {1};
  return m;
}

// B = x - offset on the first coordinate.
inline BarrierSpec linear_barrier(int dim, double offset, int relative_degree = 1, double alpha = 1.0)
{
  BarrierSpec b;
  b.name = "linear";
  b.value = [offset](const Vec & x) { return x(0) - offset; };
  b.gradient = [dim](const Vec &) {
    Vec g = Vec::Zero(dim);
    g(0) = 1.0;
    return g;
  };
  b.hessian = [dim](const Vec &) { return Mat::Zero(dim, dim); };
  b.relative_degree = relative_degree;
  b.alpha = alpha;
  b.eta = 1.0;
  b.lipschitz = 1.0;
  b.c_M = 1.0;
  b.c_bar = 0.0225;
  return b;
}

inline InputBounds box_bounds(std::vector<double> lo, std::vector<double> hi)
{
  Box b{Eigen::Map<Vec>(lo.data(), static_cast<Eigen::Index>(lo.size())),
        Eigen::Map<Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
  return InputBounds::from_box(b);
}

}  // namespace cbfguard::testing
