#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hgot/common.hpp"

// Heterogeneous-graph data model, meta-path view construction, aggregated
// adjacency, dataset ingestion and the synthetic planted-partition generator.
// All construction here is pure: results are immutable value types.

namespace hgot::hetgraph {

struct EdgeType {
  std::string name;
  std::string src_type;
  std::string dst_type;
};

struct HeteroGraph {
  std::vector<std::string> node_types;
  std::vector<int> nodes_per_type;
  std::vector<EdgeType> edge_types;
  // edges[e] lists (src_index, dst_index) pairs for edge type e,
  // indices 0-based within the respective node type.
  std::vector<std::vector<std::pair<int, int>>> edges;
  std::vector<Mat> features;  // one matrix per node type, rows = nodes
  std::string target_type;
  std::vector<int> labels;  // per target node; empty when unlabeled
  bool homogeneous_ok = false;  // lifts the heterogeneity requirement (tests)

  int type_id(const std::string& name) const;  // -1 when absent
  int edge_type_id(const std::string& name) const;
  int target_type_id() const { return type_id(target_type); }
  int target_count() const { return nodes_per_type[target_type_id()]; }
  const Mat& target_features() const { return features[target_type_id()]; }

  // Enforces every structural invariant; throws DataError / ConfigError
  // with a message naming the offending piece.
  void validate() const;
};

struct MetaPath {
  std::string name;
  std::vector<std::string> edge_types;  // chain of edge-type names
};

struct MetaPathView {
  MetaPath metapath;
  Mat adjacency;  // n x n with entries exactly 0.0 or 1.0
  int n = 0;
};

struct AggregatedStructure {
  Mat adjacency;
};

struct SyntheticConfig {
  int n_target = 100;
  int n_bridge_per_relation = 30;
  int n_communities = 3;
  double intra_edge_prob = 0.3;
  double inter_edge_prob = 0.05;
  int feature_dim = 16;
  double feature_noise = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// A_p[i][j] = 1 iff some instance of `p` connects target i to target j,
// plus an always-on diagonal unless self_loops is disabled.
MetaPathView build_metapath_view(const HeteroGraph& g, const MetaPath& p,
                                 bool self_loops = true);

AggregatedStructure aggregate_adjacency(const std::vector<MetaPathView>& views);

struct Dataset {
  HeteroGraph graph;
  std::vector<MetaPath> metapaths;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);
HeteroGraph load_heterograph(const std::filesystem::path& manifest_path);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Planted-partition heterograph with one target type and two bridge types,
// giving two meta-paths over the target nodes. Labels are community ids.
HeteroGraph generate_synthetic(const SyntheticConfig& cfg);
std::vector<MetaPath> synthetic_metapaths();

}  // namespace hgot::hetgraph
