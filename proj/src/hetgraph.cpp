#include "hgot/hetgraph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hgot::hetgraph {

using nlohmann::json;

int HeteroGraph::type_id(const std::string& name) const {
  for (std::size_t i = 0; i < node_types.size(); ++i)
    if (node_types[i] == name) return static_cast<int>(i);
  return -1;
}

int HeteroGraph::edge_type_id(const std::string& name) const {
  for (std::size_t i = 0; i < edge_types.size(); ++i)
    if (edge_types[i].name == name) return static_cast<int>(i);
  return -1;
}

void HeteroGraph::validate() const {
  if (node_types.empty()) throw DataError("graph has no node types");
  if (node_types.size() != nodes_per_type.size() ||
      node_types.size() != features.size())
    throw DataError("node type/count/feature list lengths disagree");
  for (std::size_t i = 0; i < node_types.size(); ++i) {
    if (nodes_per_type[i] < 0)
      throw DataError("negative node count for type '" + node_types[i] + "'");
    if (features[i].rows() != nodes_per_type[i])
      throw DataError("feature row count for type '" + node_types[i] +
                      "' is " + std::to_string(features[i].rows()) +
                      ", expected " + std::to_string(nodes_per_type[i]));
  }
  std::set<std::string> names;
  for (const auto& et : edge_types) {
    if (!names.insert(et.name).second)
      throw DataError("duplicate edge type name '" + et.name + "'");
    if (type_id(et.src_type) < 0 || type_id(et.dst_type) < 0)
      throw DataError("edge type '" + et.name + "' references unknown node type");
  }
  if (edges.size() != edge_types.size())
    throw DataError("edge list count does not match edge type count");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& et = edge_types[e];
    int ns = nodes_per_type[type_id(et.src_type)];
    int nd = nodes_per_type[type_id(et.dst_type)];
    for (const auto& [s, d] : edges[e]) {
      if (s < 0 || s >= ns || d < 0 || d >= nd)
        throw DataError("edge of type '" + et.name + "' references node (" +
                        std::to_string(s) + ", " + std::to_string(d) +
                        ") outside declared counts");
    }
  }
  if (!homogeneous_ok && node_types.size() + edge_types.size() <= 2)
    throw DataError("graph is not heterogeneous (|node types| + |edge types| <= 2)");
  if (target_type_id() < 0)
    throw DataError("target type '" + target_type + "' is not a node type");
  if (!labels.empty() && static_cast<int>(labels.size()) != target_count())
    throw DataError("label count does not match target node count");
}

void SyntheticConfig::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(intra_edge_prob) || !prob_ok(inter_edge_prob))
    throw ConfigError("synthetic edge probabilities must lie in [0, 1]");
  if (n_target < 1 || n_bridge_per_relation < 1 || n_communities < 1 ||
      feature_dim < 1)
    throw ConfigError("synthetic counts must be >= 1");
  if (n_communities > n_target)
    throw ConfigError("n_communities exceeds n_target");
  if (feature_noise < 0.0) throw ConfigError("feature_noise must be >= 0");
}

namespace {

// Boolean biadjacency of one edge type, rows = src nodes, cols = dst nodes.
Mat biadjacency(const HeteroGraph& g, int edge_type) {
  const auto& et = g.edge_types[edge_type];
  Mat B = Mat::Zero(g.nodes_per_type[g.type_id(et.src_type)],
                    g.nodes_per_type[g.type_id(et.dst_type)]);
  for (const auto& [s, d] : g.edges[edge_type]) B(s, d) = 1.0;
  return B;
}

Mat bool_product(const Mat& a, const Mat& b) {
  Mat p = a * b;
  return (p.array() > 0.0).cast<double>().matrix();
}

}  // namespace

MetaPathView build_metapath_view(const HeteroGraph& g, const MetaPath& p,
                                 bool self_loops) {
  if (p.edge_types.empty())
    throw ConfigError("meta-path '" + p.name + "' has an empty edge-type chain");
  const std::string& target = g.target_type;
  int n = g.target_count();
  if (n < 1) throw DataError("target type '" + target + "' has no nodes");

  std::string cur = target;
  Mat reach;  // n x |nodes of cur type|, boolean
  bool first = true;
  for (const auto& ename : p.edge_types) {
    int e = g.edge_type_id(ename);
    if (e < 0)
      throw ConfigError("meta-path '" + p.name + "': unknown edge type '" +
                        ename + "'");
    const auto& et = g.edge_types[e];
    if (et.src_type != cur)
      throw ConfigError("meta-path '" + p.name + "': edge type '" + ename +
                        "' starts at '" + et.src_type + "' but the chain is at '" +
                        cur + "'");
    Mat B = biadjacency(g, e);
    reach = first ? B : bool_product(reach, B);
    first = false;
    cur = et.dst_type;
  }
  if (cur != target)
    throw ConfigError("meta-path '" + p.name + "' ends at '" + cur +
                      "', expected target type '" + target + "'");

  if (self_loops) reach.diagonal().setOnes();
  MetaPathView v;
  v.metapath = p;
  v.adjacency = std::move(reach);
  v.n = n;
  return v;
}

AggregatedStructure aggregate_adjacency(const std::vector<MetaPathView>& views) {
  if (views.empty()) throw DataError("aggregate_adjacency: no views");
  int n = views.front().n;
  Mat agg = Mat::Zero(n, n);
  for (const auto& v : views) {
    if (v.n != n || v.adjacency.rows() != n || v.adjacency.cols() != n)
      throw DataError("aggregate_adjacency: view '" + v.metapath.name +
                      "' has mismatched size");
    agg = (agg.array().max(v.adjacency.array())).matrix();
  }
  return AggregatedStructure{std::move(agg)};
}

// --- synthetic generator ---------------------------------------------------

std::vector<MetaPath> synthetic_metapaths() {
  return {MetaPath{"TAT", {"TA", "AT"}}, MetaPath{"TBT", {"TB", "BT"}}};
}

HeteroGraph generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, "synthetic"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  HeteroGraph g;
  g.node_types = {"target", "bridgeA", "bridgeB"};
  g.nodes_per_type = {cfg.n_target, cfg.n_bridge_per_relation,
                      cfg.n_bridge_per_relation};
  g.edge_types = {{"TA", "target", "bridgeA"},
                  {"AT", "bridgeA", "target"},
                  {"TB", "target", "bridgeB"},
                  {"BT", "bridgeB", "target"}};
  g.edges.resize(4);
  g.target_type = "target";

  auto community_of = [&](int i, int n) {
    return static_cast<int>((static_cast<long long>(i) * cfg.n_communities) / n);
  };

  // Edges: a target and a bridge connect with the intra probability when
  // their communities match, otherwise with the inter probability. Both
  // directions are materialized so meta-path chains can return to targets.
  for (int rel = 0; rel < 2; ++rel) {
    auto& fwd = g.edges[2 * rel];
    auto& bwd = g.edges[2 * rel + 1];
    for (int i = 0; i < cfg.n_target; ++i) {
      int ci = community_of(i, cfg.n_target);
      for (int b = 0; b < cfg.n_bridge_per_relation; ++b) {
        int cb = community_of(b, cfg.n_bridge_per_relation);
        double p = (ci == cb) ? cfg.intra_edge_prob : cfg.inter_edge_prob;
        if (unif(rng) < p) {
          fwd.emplace_back(i, b);
          bwd.emplace_back(b, i);
        }
      }
    }
  }

  // Target features: community centroid plus Gaussian noise.
  Mat centroids(cfg.n_communities, cfg.feature_dim);
  for (int c = 0; c < cfg.n_communities; ++c)
    for (int f = 0; f < cfg.feature_dim; ++f) centroids(c, f) = gauss(rng);
  Mat tf(cfg.n_target, cfg.feature_dim);
  g.labels.resize(cfg.n_target);
  for (int i = 0; i < cfg.n_target; ++i) {
    int c = community_of(i, cfg.n_target);
    g.labels[i] = c;
    for (int f = 0; f < cfg.feature_dim; ++f)
      tf(i, f) = centroids(c, f) + cfg.feature_noise * gauss(rng);
  }
  g.features.push_back(std::move(tf));
  for (int t = 0; t < 2; ++t) {
    Mat bf(cfg.n_bridge_per_relation, cfg.feature_dim);
    for (int i = 0; i < bf.rows(); ++i)
      for (int f = 0; f < bf.cols(); ++f) bf(i, f) = gauss(rng);
    g.features.push_back(std::move(bf));
  }

  g.validate();
  return g;
}

// --- dataset directory format ----------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void file_error(const std::filesystem::path& p, int line,
                             const std::string& what) {
  throw DataError(p.string() + ":" + std::to_string(line) + ": " + what);
}

long parse_int(const std::string& s, const std::filesystem::path& p, int line) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    file_error(p, line, "expected an integer, got '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::filesystem::path& p,
                    int line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    file_error(p, line, "expected a number, got '" + s + "'");
  }
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  return in;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  const HeteroGraph& g = ds.graph;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "'");

  json manifest;
  manifest["version"] = 1;
  for (std::size_t i = 0; i < g.node_types.size(); ++i)
    manifest["node_types"].push_back(
        {{"name", g.node_types[i]}, {"count", g.nodes_per_type[i]}});
  for (const auto& et : g.edge_types)
    manifest["edge_types"].push_back(
        {{"name", et.name}, {"src", et.src_type}, {"dst", et.dst_type}});
  manifest["target_type"] = g.target_type;
  for (const auto& mp : ds.metapaths)
    manifest["metapaths"].push_back(
        {{"name", mp.name}, {"edge_types", mp.edge_types}});
  for (const auto& t : g.node_types)
    manifest["features"][t] = "features_" + t + ".csv";
  if (!g.labels.empty()) manifest["labels"] = "labels.tsv";

  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest in '" + dir.string() + "'");
    out << manifest.dump(2) << "\n";
  }
  for (std::size_t e = 0; e < g.edge_types.size(); ++e) {
    std::ofstream out(dir / ("edges_" + g.edge_types[e].name + ".tsv"));
    for (const auto& [s, d] : g.edges[e]) out << s << "\t" << d << "\n";
  }
  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    std::ofstream out(dir / ("features_" + g.node_types[t] + ".csv"));
    const Mat& F = g.features[t];
    for (int i = 0; i < F.rows(); ++i) {
      for (int j = 0; j < F.cols(); ++j) {
        if (j) out << ",";
        out << fmt_double(F(i, j));
      }
      out << "\n";
    }
  }
  if (!g.labels.empty()) {
    std::ofstream out(dir / "labels.tsv");
    for (std::size_t i = 0; i < g.labels.size(); ++i)
      out << i << "\t" << g.labels[i] << "\n";
  }
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::filesystem::path mpath = manifest_path;
  if (std::filesystem::is_directory(mpath)) mpath /= "manifest.json";
  std::filesystem::path dir = mpath.parent_path();

  json manifest;
  {
    std::ifstream in = open_or_throw(mpath);
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw DataError(mpath.string() + ": malformed JSON: " + e.what());
    }
  }

  Dataset ds;
  HeteroGraph& g = ds.graph;
  try {
    for (const auto& nt : manifest.at("node_types")) {
      g.node_types.push_back(nt.at("name").get<std::string>());
      g.nodes_per_type.push_back(nt.at("count").get<int>());
    }
    for (const auto& et : manifest.at("edge_types"))
      g.edge_types.push_back({et.at("name").get<std::string>(),
                              et.at("src").get<std::string>(),
                              et.at("dst").get<std::string>()});
    g.target_type = manifest.at("target_type").get<std::string>();
    if (manifest.contains("metapaths"))
      for (const auto& mp : manifest.at("metapaths"))
        ds.metapaths.push_back(
            {mp.at("name").get<std::string>(),
             mp.at("edge_types").get<std::vector<std::string>>()});
  } catch (const json::exception& e) {
    throw DataError(mpath.string() + ": " + e.what());
  }

  g.edges.resize(g.edge_types.size());
  for (std::size_t e = 0; e < g.edge_types.size(); ++e) {
    auto p = dir / ("edges_" + g.edge_types[e].name + ".tsv");
    std::ifstream in = open_or_throw(p);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) file_error(p, ln, "expected two tab-separated columns");
      g.edges[e].emplace_back(parse_int(cols[0], p, ln), parse_int(cols[1], p, ln));
    }
  }

  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    std::string fname;
    try {
      fname = manifest.at("features").at(g.node_types[t]).get<std::string>();
    } catch (const json::exception&) {
      throw DataError(mpath.string() + ": no feature file for node type '" +
                      g.node_types[t] + "'");
    }
    auto p = dir / fname;
    std::ifstream in = open_or_throw(p);
    std::vector<std::vector<double>> rows;
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (line.empty()) continue;
      auto cols = split(line, ',');
      std::vector<double> row;
      row.reserve(cols.size());
      for (const auto& c : cols) row.push_back(parse_double(c, p, ln));
      if (!rows.empty() && rows.front().size() != row.size())
        file_error(p, ln, "inconsistent column count");
      rows.push_back(std::move(row));
    }
    Mat F(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < rows[i].size(); ++j) F(i, j) = rows[i][j];
    if (F.rows() != g.nodes_per_type[t])
      throw DataError(p.string() + ": feature row count " +
                      std::to_string(F.rows()) + " does not match declared count " +
                      std::to_string(g.nodes_per_type[t]) + " for node type '" +
                      g.node_types[t] + "'");
    g.features.push_back(std::move(F));
  }

  if (manifest.contains("labels")) {
    auto p = dir / manifest.at("labels").get<std::string>();
    std::ifstream in = open_or_throw(p);
    g.labels.assign(g.target_count(), 0);
    std::vector<bool> seen(g.target_count(), false);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2) file_error(p, ln, "expected two tab-separated columns");
      long idx = parse_int(cols[0], p, ln);
      if (idx < 0 || idx >= g.target_count())
        file_error(p, ln, "target index out of range");
      g.labels[idx] = static_cast<int>(parse_int(cols[1], p, ln));
      seen[idx] = true;
    }
    for (int i = 0; i < g.target_count(); ++i)
      if (!seen[i])
        throw DataError(p.string() + ": no label for target node " +
                        std::to_string(i));
  }

  g.validate();
  return ds;
}

HeteroGraph load_heterograph(const std::filesystem::path& manifest_path) {
  return load_dataset(manifest_path).graph;
}

}  // namespace hgot::hetgraph
