#pragma once

#include <random>

#include <qweb/statevec.hpp>

#include "oracles.hpp"

namespace testing_util {

inline oracle::Vec to_vec(const qweb::PureState& s) { return {s.amplitudes().begin(), s.amplitudes().end()}; }

inline qweb::PureState from_vec(const oracle::Vec& v) {
  std::size_t n = 0;
  while ((std::size_t{1} << n) < v.size()) ++n;
  return qweb::PureState::normalized(n, qweb::Amplitudes(v.begin(), v.end()));
}

inline oracle::Mat to_mat(const qweb::DensityMatrix& rho) {
  oracle::Mat m = oracle::zeros(rho.dim());
  for (std::size_t i = 0; i < rho.dim(); ++i)
    for (std::size_t j = 0; j < rho.dim(); ++j) m[i][j] = rho(i, j);
  return m;
}

}  // namespace testing_util
