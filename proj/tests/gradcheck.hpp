// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_TESTS_GRADCHECK_HPP
#define ADVSIG_TESTS_GRADCHECK_HPP

#include <functional>
#include <vector>

#include "advsig/tensor.hpp"

namespace advsig::testutil {

// Central finite differences on a scalar-valued graph builder. Returns the
// worst relative error over all coordinates of the input.
inline Scalar max_grad_error(const std::function<Tensor(const Tensor&)>& build,
                             const std::vector<Scalar>& x0, const std::vector<int>& shape,
                             Scalar h = 1e-6) {
  Tensor in = Tensor::from(x0, shape, /*requires_grad=*/true);
  Tensor loss = build(in);
  loss.backward();
  std::vector<Scalar> analytic = in.grad();

  Scalar worst = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    std::vector<Scalar> xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    Scalar fp = build(Tensor::from(xp, shape)).item();
    Scalar fm = build(Tensor::from(xm, shape)).item();
    Scalar numeric = (fp - fm) / (2 * h);
    Scalar err = std::abs(analytic[i] - numeric) / (std::abs(numeric) + std::abs(analytic[i]) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

inline std::vector<Scalar> random_vec(std::size_t n, Rng& rng, Scalar lo = -1.0, Scalar hi = 1.0) {
  std::vector<Scalar> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace advsig::testutil

#endif  // ADVSIG_TESTS_GRADCHECK_HPP
