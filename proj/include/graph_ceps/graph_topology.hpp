#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "graph_ceps/error.hpp"

namespace graph_ceps {

// Channel indices are 0-based everywhere in the library; the JSON topology
// format uses 1-based indices and is converted at the boundary.
using ChannelGroups = std::vector<std::vector<int>>;

struct WeightedEdge {
  int a = 0;
  int b = 0;
  double weight = 1.0;
};

// Declarative description of a microphone network, as read from JSON.
struct TopologySpec {
  int n_channels = 0;
  double alpha = 0.0;
  ChannelGroups groups;
  // When present, replaces the group-wise adjacency entirely.
  std::optional<std::vector<WeightedEdge>> edges;
};

namespace detail {

inline void validate_partition(int n_channels, const ChannelGroups& groups) {
  std::vector<int> seen(static_cast<std::size_t>(n_channels), 0);
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorKind::invalid_topology, "empty channel group");
    for (int ch : g) {
      if (ch < 0 || ch >= n_channels)
        throw Error(ErrorKind::invalid_topology, "channel index " + std::to_string(ch + 1) + " out of range");
      if (seen[static_cast<std::size_t>(ch)]++)
        throw Error(ErrorKind::invalid_topology, "channel " + std::to_string(ch + 1) + " appears in two groups");
    }
  }
  for (int ch = 0; ch < n_channels; ++ch)
    if (!seen[static_cast<std::size_t>(ch)])
      throw Error(ErrorKind::invalid_topology, "channel " + std::to_string(ch + 1) + " is in no group");
}

}  // namespace detail

class MicArrayGraph {
 public:
  int n_channels() const { return static_cast<int>(adjacency_.rows()); }
  const ChannelGroups& groups() const { return groups_; }
  double alpha() const { return alpha_; }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }

  // Group index of every channel.
  std::vector<int> group_of() const {
    std::vector<int> out(static_cast<std::size_t>(n_channels()), -1);
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (int ch : groups_[g]) out[static_cast<std::size_t>(ch)] = static_cast<int>(g);
    return out;
  }

 private:
  MicArrayGraph(ChannelGroups groups, double alpha, Eigen::MatrixXd adjacency)
      : groups_(std::move(groups)), alpha_(alpha), adjacency_(std::move(adjacency)) {}

  friend MicArrayGraph build_graph(int, const ChannelGroups&, double);
  friend MicArrayGraph build_graph_from_edges(int, const ChannelGroups&, const std::vector<WeightedEdge>&);

  ChannelGroups groups_;
  double alpha_ = 0.0;
  Eigen::MatrixXd adjacency_;
};

// Complete subgraph (weight 1) inside every group, weight alpha across groups.
inline MicArrayGraph build_graph(int n_channels, const ChannelGroups& groups, double alpha) {
  if (n_channels < 2) throw Error(ErrorKind::invalid_topology, "need at least two channels");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error(ErrorKind::invalid_parameter, "alpha must lie in [0, 1]");
  detail::validate_partition(n_channels, groups);

  MicArrayGraph g(groups, alpha, Eigen::MatrixXd::Constant(n_channels, n_channels, alpha));
  for (const auto& grp : groups)
    for (int m : grp)
      for (int n : grp) g.adjacency_(m, n) = 1.0;
  g.adjacency_.diagonal().setZero();
  return g;
}

// Irregular topology given edge-wise. Groups are still required: they define
// which channels share a clock.
inline MicArrayGraph build_graph_from_edges(int n_channels, const ChannelGroups& groups,
                                            const std::vector<WeightedEdge>& edges) {
  if (n_channels < 2) throw Error(ErrorKind::invalid_topology, "need at least two channels");
  detail::validate_partition(n_channels, groups);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_channels, n_channels);
  for (const auto& e : edges) {
    if (e.a < 0 || e.a >= n_channels || e.b < 0 || e.b >= n_channels)
      throw Error(ErrorKind::invalid_topology, "edge endpoint out of range");
    if (e.a == e.b) throw Error(ErrorKind::invalid_topology, "self loops are not allowed");
    if (!(e.weight >= 0.0 && e.weight <= 1.0))
      throw Error(ErrorKind::invalid_parameter, "edge weight must lie in [0, 1]");
    a(e.a, e.b) = e.weight;
    a(e.b, e.a) = e.weight;
  }
  return MicArrayGraph(groups, 0.0, std::move(a));
}

inline MicArrayGraph build_graph(const TopologySpec& spec) {
  if (spec.edges) return build_graph_from_edges(spec.n_channels, spec.groups, *spec.edges);
  return build_graph(spec.n_channels, spec.groups, spec.alpha);
}

inline Eigen::MatrixXd degree_matrix(const MicArrayGraph& g) {
  return g.adjacency().rowwise().sum().asDiagonal();
}

class GraphLaplacian {
 public:
  explicit GraphLaplacian(const MicArrayGraph& source)
      : source_(source), matrix_(degree_matrix(source) - source.adjacency()) {}

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const MicArrayGraph& source() const { return source_; }
  int size() const { return static_cast<int>(matrix_.rows()); }

 private:
  MicArrayGraph source_;
  Eigen::MatrixXd matrix_;
};

inline GraphLaplacian laplacian(const MicArrayGraph& g) { return GraphLaplacian(g); }

// Cycle 0-1-...-(N-1)-0 with unit weights; every channel is its own clock group.
inline MicArrayGraph ring_graph(int n_channels) {
  if (n_channels < 3) throw Error(ErrorKind::invalid_topology, "ring graph needs at least three channels");
  ChannelGroups singletons;
  std::vector<WeightedEdge> edges;
  for (int i = 0; i < n_channels; ++i) {
    singletons.push_back({i});
    edges.push_back({i, (i + 1) % n_channels, 1.0});
  }
  return build_graph_from_edges(n_channels, singletons, edges);
}

// 13 channels in five clock groups of sizes 4, 3, 2, 2, 2 with alpha = 0.01.
// A stand-in for a living-room deployment; the group sizes are chosen so that
// the largest group is unique.
inline TopologySpec default_topology() {
  TopologySpec t;
  t.n_channels = 13;
  t.alpha = 0.01;
  t.groups = {{0, 1, 2, 3}, {4, 5, 6}, {7, 8}, {9, 10}, {11, 12}};
  return t;
}

inline TopologySpec topology_from_json(const nlohmann::json& j) {
  TopologySpec t;
  try {
    t.n_channels = j.at("n_channels").get<int>();
    t.alpha = j.value("alpha", 0.0);
    for (const auto& grp : j.at("groups")) {
      std::vector<int> g;
      for (const auto& ch : grp) g.push_back(ch.get<int>() - 1);
      t.groups.push_back(std::move(g));
    }
    if (j.contains("edges")) {
      std::vector<WeightedEdge> edges;
      for (const auto& e : j.at("edges")) {
        WeightedEdge we;
        we.a = e.at(0).get<int>() - 1;
        we.b = e.at(1).get<int>() - 1;
        we.weight = e.size() > 2 ? e.at(2).get<double>() : 1.0;
        edges.push_back(we);
      }
      t.edges = std::move(edges);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_topology, std::string("malformed topology: ") + e.what());
  }
  return t;
}

inline nlohmann::json topology_to_json(const TopologySpec& t) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : t.groups) {
    nlohmann::json row = nlohmann::json::array();
    for (int ch : g) row.push_back(ch + 1);
    groups.push_back(row);
  }
  nlohmann::json j = {{"n_channels", t.n_channels}, {"alpha", t.alpha}, {"groups", groups}};
  if (t.edges) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : *t.edges) edges.push_back({e.a + 1, e.b + 1, e.weight});
    j["edges"] = edges;
  }
  return j;
}

inline TopologySpec load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open topology " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_topology, std::string("cannot parse ") + path + ": " + e.what());
  }
  return topology_from_json(j);
}

}  // namespace graph_ceps
