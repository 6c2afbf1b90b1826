#pragma once

// Reference computations that share no code with the library: Householder
// least squares for criteria and plain enumeration for subset optima.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::MatrixXd columns(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline double rss(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
  if (a.cols() == 0) return y.squaredNorm();
  const Eigen::VectorXd theta = a.householderQr().solve(y);
  return (y - a * theta).squaredNorm();
}

// Fraction of the output energy explained by the least-squares fit.
inline double explained(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx,
                        const Eigen::VectorXd& y) {
  return 1.0 - rss(columns(x, idx), y) / y.squaredNorm();
}

inline void for_each_combination(std::size_t n, std::size_t k,
                                 const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = i;
  if (k > n) return;
  while (true) {
    f(c);
    std::size_t i = k;
    while (i > 0 && c[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++c[i - 1];
    for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
  }
}

struct Problem {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// Gaussian columns; y is a sparse combination of a few columns plus noise.
inline Problem random_problem(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                              double noise = 0.1) {
  std::normal_distribution<double> g;
  Problem p{Eigen::MatrixXd(rows, cols), Eigen::VectorXd::Zero(rows)};
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) p.x(i, j) = g(rng);
  std::uniform_int_distribution<Eigen::Index> pick(0, cols - 1);
  const int active = 1 + static_cast<int>(rng() % 4);
  for (int a = 0; a < active; ++a) p.y += (0.5 + std::abs(g(rng))) * p.x.col(pick(rng));
  for (Eigen::Index i = 0; i < rows; ++i) p.y(i) += noise * g(rng);
  return p;
}

}  // namespace oracle
