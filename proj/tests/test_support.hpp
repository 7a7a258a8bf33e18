#pragma once

// Generators shared by the unit and acceptance suites.

#include <algorithm>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "graph_ceps/graph_topology.hpp"

namespace test_support {

// Random partition of N channels into 1..N groups.
inline graph_ceps::ChannelGroups random_partition(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> n_groups_dist(1, n);
  const int n_groups = n_groups_dist(rng);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  graph_ceps::ChannelGroups groups(static_cast<std::size_t>(n_groups));
  // First n_groups channels seed the groups so none is empty.
  std::uniform_int_distribution<int> pick(0, n_groups - 1);
  for (int i = 0; i < n; ++i) {
    const auto g = i < n_groups ? i : pick(rng);
    groups[static_cast<std::size_t>(g)].push_back(perm[static_cast<std::size_t>(i)]);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

inline graph_ceps::TopologySpec random_topology(std::mt19937_64& rng, int min_n, int max_n) {
  static constexpr double kAlphas[] = {0.0, 0.01, 0.5};
  std::uniform_int_distribution<int> n_dist(min_n, max_n);
  std::uniform_int_distribution<int> a_dist(0, 2);
  graph_ceps::TopologySpec t;
  t.n_channels = n_dist(rng);
  t.alpha = kAlphas[a_dist(rng)];
  t.groups = random_partition(rng, t.n_channels);
  return t;
}

inline Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  return 0.5 * (m + m.transpose());
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> g(mean, sd);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

}  // namespace test_support
