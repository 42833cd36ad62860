#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "hgot/encoder.hpp"

using namespace hgot;
using namespace hgot::encoder;
using hetgraph::HeteroGraph;
using hetgraph::MetaPath;
using hetgraph::MetaPathView;
using hetgraph::SyntheticConfig;

namespace {

Mat randm(int r, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Single-type graph whose target features we control entry by entry.
HeteroGraph plain_graph(Mat features) {
  HeteroGraph g;
  g.node_types = {"t"};
  g.nodes_per_type = {static_cast<int>(features.rows())};
  g.features = {std::move(features)};
  g.target_type = "t";
  g.homogeneous_ok = true;
  return g;
}

MetaPathView view_of(Mat adjacency, const std::string& name = "P") {
  MetaPathView v;
  v.metapath = MetaPath{name, {}};
  v.n = static_cast<int>(adjacency.rows());
  v.adjacency = std::move(adjacency);
  return v;
}

struct SynthSetup {
  HeteroGraph graph;
  std::vector<MetaPath> paths;
  std::vector<MetaPathView> views;
};

SynthSetup synth_setup(int n_target, int n_bridge, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_target = n_target;
  cfg.n_bridge_per_relation = n_bridge;
  cfg.feature_dim = 3;
  cfg.seed = seed;
  SynthSetup s;
  s.graph = hetgraph::generate_synthetic(cfg);
  s.paths = hetgraph::synthetic_metapaths();
  for (const auto& p : s.paths)
    s.views.push_back(hetgraph::build_metapath_view(s.graph, p));
  return s;
}

double loss_value(const EncoderConfig& cfg, const EncoderParams& params,
                  const HeteroGraph& g, const std::vector<MetaPathView>& views,
                  const Mat& probe) {
  PlainForward out = forward_values(cfg, params, g, views);
  return (out.Z_agg.array() * probe.array()).sum();
}

}  // namespace

TEST_CASE("encoder: config validation") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  CHECK_NOTHROW(cfg.validate());

  EncoderConfig bad = cfg;
  bad.d = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.heads = 3;  // does not divide 8
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.depth = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.d_m = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encoder: parameter store bookkeeping") {
  EncoderParams p;
  p.insert("b/x", Mat::Ones(2, 2));
  p.insert("a/y", Mat::Zero(1, 3));
  p.insert("c", Mat::Ones(1, 1));

  CHECK(p.size() == 3);
  CHECK(p.entries()[0].first == "a/y");
  CHECK(p.entries()[1].first == "b/x");
  CHECK(p.entries()[2].first == "c");
  CHECK(p.has("b/x"));
  CHECK_FALSE(p.has("b"));
  CHECK(p.at("a/y").cols() == 3);

  CHECK_THROWS_AS(p.insert("c", Mat::Zero(1, 1)), ConfigError);
  bool caught = false;
  try {
    p.at("nope");
  } catch (const ConfigError& e) {
    caught = true;
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
  CHECK(caught);
}

TEST_CASE("encoder: initialization layout and determinism") {
  auto s = synth_setup(10, 4, 3);
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.d_m = 5;
  cfg.depth = 2;

  EncoderParams p = EncoderParams::init(cfg, s.graph, s.paths, 42);

  for (const auto& type : s.graph.node_types) {
    int raw = static_cast<int>(
        s.graph.features[s.graph.type_id(type)].cols());
    REQUIRE(p.has("proj/" + type + "/W"));
    CHECK(p.at("proj/" + type + "/W").rows() == cfg.d);
    CHECK(p.at("proj/" + type + "/W").cols() == raw);
    CHECK(p.at("proj/" + type + "/b").isZero(0.0));
  }
  int m = cfg.head_dim();
  for (const auto& path : s.paths)
    for (int l = 0; l < cfg.depth; ++l)
      for (int k = 0; k < cfg.heads; ++k) {
        std::string prefix = "att/" + path.name + "/L" + std::to_string(l) +
                             "/H" + std::to_string(k) + "/";
        REQUIRE(p.has(prefix + "W"));
        CHECK(p.at(prefix + "W").rows() == m);
        CHECK(p.at(prefix + "W").cols() == cfg.d);
        CHECK(p.at(prefix + "a").rows() == 2 * m);
        CHECK(p.at(prefix + "a").cols() == 1);
      }
  CHECK(p.at("sem/M").rows() == cfg.d_m);
  CHECK(p.at("sem/M").cols() == cfg.d);
  CHECK(p.at("sem/q").rows() == cfg.d_m);
  CHECK(p.at("sem/b").isZero(0.0));
  // 3 node types, 2 paths x 2 layers x 2 heads x 2 tensors, 3 semantic
  CHECK(p.size() == 3 * 2 + 2 * 2 * 2 * 2 + 3);

  for (std::size_t i = 1; i < p.entries().size(); ++i)
    CHECK(p.entries()[i - 1].first < p.entries()[i].first);

  // Glorot bound for a known fan pair, and the draw is not degenerate.
  double limit = std::sqrt(6.0 / (cfg.d + m));
  const Mat& w = p.at("att/TAT/L0/H0/W");
  CHECK(w.cwiseAbs().maxCoeff() <= limit);
  CHECK(w.cwiseAbs().maxCoeff() > 0.0);

  EncoderParams q = EncoderParams::init(cfg, s.graph, s.paths, 42);
  EncoderParams r = EncoderParams::init(cfg, s.graph, s.paths, 43);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    same = same && p.entries()[i].second == q.entries()[i].second;
    differs = differs || p.entries()[i].second != r.entries()[i].second;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("encoder: projection matches the affine map") {
  Mat x(1, 2);
  x << 1, 1;
  HeteroGraph g = plain_graph(x);

  EncoderParams params;
  Mat w(2, 2), b(2, 1);
  w << 1, 2, 0, 1;
  b << 0, 1;
  params.insert("proj/t/W", w);
  params.insert("proj/t/b", b);

  ad::Tape t;
  TapeParams tp = mount(t, params, false);
  ad::Var h = project_features(tp, g);
  Mat expect(1, 2);
  expect << 3, 2;  // W x + b per node, rows are nodes
  CHECK(t.value(h) == expect);

  EncoderParams badp;
  badp.insert("proj/t/W", Mat::Ones(2, 3));
  badp.insert("proj/t/b", Mat::Zero(2, 1));
  ad::Tape t2;
  TapeParams tp2 = mount(t2, badp, false);
  CHECK_THROWS_AS(project_features(tp2, g), ConfigError);
}

TEST_CASE("encoder: attention on a path graph, hand softmax") {
  // Nodes 0-1-2 in a path, self loops on; scalar features 0,1,2 pass
  // through an identity projection so h_i = i.
  Mat x(3, 1);
  x << 0, 1, 2;
  HeteroGraph g = plain_graph(x);
  Mat adj(3, 3);
  adj << 1, 1, 0, 1, 1, 1, 0, 1, 1;
  MetaPathView view = view_of(adj);

  EncoderConfig cfg;
  cfg.d = 1;
  cfg.heads = 1;
  cfg.depth = 1;
  cfg.logit_act = ad::Act::identity;
  cfg.output_act = ad::Act::identity;

  EncoderParams params;
  params.insert("proj/t/W", Mat::Ones(1, 1));
  params.insert("proj/t/b", Mat::Zero(1, 1));
  params.insert("att/P/L0/H0/W", Mat::Ones(1, 1));
  Mat a(2, 1);

  SUBCASE("source-only scores collapse to neighborhood means") {
    a << 1, 0;
    params.insert("att/P/L0/H0/a", a);
    ad::Tape t;
    TapeParams tp = mount(t, params, false);
    ViewRepresentation rep =
        node_attention_layer(tp, project_features(tp, g), view, cfg, 0);

    Mat alpha = t.value(rep.alpha[0]);
    Mat uniform(3, 3);
    uniform << 0.5, 0.5, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 0.5, 0.5;
    CHECK((alpha - uniform).cwiseAbs().maxCoeff() < 1e-15);

    Mat z = t.value(rep.Z);
    CHECK(z(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(z(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(z(2, 0) == doctest::Approx(1.5).epsilon(1e-14));
  }

  SUBCASE("destination scores weight neighbors by exp(h_j)") {
    a << 0, 1;
    params.insert("att/P/L0/H0/a", a);
    ad::Tape t;
    TapeParams tp = mount(t, params, false);
    ViewRepresentation rep =
        node_attention_layer(tp, project_features(tp, g), view, cfg, 0);

    const double e1 = std::exp(1.0), e2 = std::exp(2.0);
    Mat z = t.value(rep.Z);
    CHECK(z(0, 0) == doctest::Approx(e1 / (1 + e1)).epsilon(1e-12));
    CHECK(z(1, 0) ==
          doctest::Approx((e1 + 2 * e2) / (1 + e1 + e2)).epsilon(1e-12));
    CHECK(z(2, 0) == doctest::Approx((e1 + 2 * e2) / (e1 + e2)).epsilon(1e-12));

    // With identity logits a source-side term is constant per row, so it
    // cannot move the softmax.
    EncoderParams shifted = params;
    Mat a2(2, 1);
    a2 << 5, 1;
    shifted.at("att/P/L0/H0/a") = a2;
    ad::Tape t2;
    TapeParams tp2 = mount(t2, shifted, false);
    ViewRepresentation rep2 =
        node_attention_layer(tp2, project_features(tp2, g), view, cfg, 0);
    CHECK((t.value(rep.alpha[0]) - t2.value(rep2.alpha[0]))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("encoder: attention weights are a distribution on the mask") {
  auto s = synth_setup(12, 5, 7);
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.d_m = 6;
  cfg.depth = 1;
  EncoderParams params = EncoderParams::init(cfg, s.graph, s.paths, 1);

  EncoderRun run;
  const ForwardResult& r = run.forward(cfg, params, s.graph, s.views);
  REQUIRE(r.views.size() == s.views.size());
  for (std::size_t p = 0; p < r.views.size(); ++p) {
    REQUIRE(r.views[p].alpha.size() == static_cast<std::size_t>(cfg.heads));
    for (const auto& av : r.views[p].alpha) {
      const Mat& alpha = run.tape().value(av);
      for (int i = 0; i < alpha.rows(); ++i) {
        CHECK(std::abs(alpha.row(i).sum() - 1.0) <= 1e-12);
        for (int j = 0; j < alpha.cols(); ++j) {
          CHECK(alpha(i, j) >= 0.0);
          if (s.views[p].adjacency(i, j) == 0.0) CHECK(alpha(i, j) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("encoder: isolated node degenerates to its own features") {
  Mat x(2, 1);
  x << 4, -3;
  HeteroGraph g = plain_graph(x);
  Mat adj = Mat::Identity(2, 2);  // self loops only

  EncoderConfig cfg;
  cfg.d = 1;
  cfg.heads = 1;
  cfg.depth = 1;
  cfg.output_act = ad::Act::identity;
  EncoderParams params;
  params.insert("proj/t/W", Mat::Ones(1, 1));
  params.insert("proj/t/b", Mat::Zero(1, 1));
  params.insert("att/P/L0/H0/W", Mat::Ones(1, 1));
  params.insert("att/P/L0/H0/a", randm(2, 1, 9));

  ad::Tape t;
  TapeParams tp = mount(t, params, false);
  ViewRepresentation rep =
      node_attention_layer(tp, project_features(tp, g), view_of(adj), cfg, 0);
  CHECK(t.value(rep.alpha[0]) == Mat::Identity(2, 2));
  CHECK(t.value(rep.Z) == x);
}

TEST_CASE("encoder: empty neighborhood is rejected") {
  Mat x(2, 1);
  x << 1, 2;
  HeteroGraph g = plain_graph(x);
  Mat adj(2, 2);
  adj << 1, 1, 0, 0;  // node 1 has no neighbors

  EncoderConfig cfg;
  cfg.d = 1;
  cfg.heads = 1;
  cfg.depth = 1;
  EncoderParams params;
  params.insert("proj/t/W", Mat::Ones(1, 1));
  params.insert("proj/t/b", Mat::Zero(1, 1));
  params.insert("att/P/L0/H0/W", Mat::Ones(1, 1));
  params.insert("att/P/L0/H0/a", Mat::Ones(2, 1));

  ad::Tape t;
  TapeParams tp = mount(t, params, false);
  ad::Var h = project_features(tp, g);
  bool caught = false;
  try {
    node_attention_layer(tp, h, view_of(adj), cfg, 0);
  } catch (const DataError& e) {
    caught = true;
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK(caught);
}

TEST_CASE("encoder: semantic fusion hand values") {
  EncoderConfig cfg;
  cfg.d = 1;
  cfg.heads = 1;
  cfg.d_m = 1;

  EncoderParams params;
  params.insert("sem/M", Mat::Ones(1, 1));
  params.insert("sem/b", Mat::Zero(1, 1));
  params.insert("sem/q", Mat::Ones(1, 1));

  ad::Tape t;
  TapeParams tp = mount(t, params, false);

  SUBCASE("two views split by tanh of their means") {
    ad::Var z1 = t.constant(Mat::Zero(1, 1));
    ad::Var z2 = t.constant(Mat::Ones(1, 1));
    FusedRepresentation f = semantic_fuse(tp, {z1, z2}, cfg);

    // omega = (tanh 0, tanh 1); beta from the two-way softmax.
    double b2 = 1.0 / (1.0 + std::exp(-std::tanh(1.0)));
    Mat omega = t.value(f.omega);
    CHECK(omega(0, 0) == 0.0);
    CHECK(omega(0, 1) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
    Mat beta = t.value(f.beta);
    CHECK(beta(0, 1) == doctest::Approx(b2).epsilon(1e-14));
    CHECK(beta.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.value(f.Z_agg)(0, 0) == doctest::Approx(b2).epsilon(1e-14));
  }

  SUBCASE("scores average over nodes") {
    Mat z(2, 1);
    z << 0, 1;
    FusedRepresentation f = semantic_fuse(tp, {t.constant(z)}, cfg);
    CHECK(t.value(f.omega)(0, 0) ==
          doctest::Approx(std::tanh(1.0) / 2).epsilon(1e-15));
    CHECK(t.value(f.beta)(0, 0) == 1.0);  // lone view takes all the mass
  }

  SUBCASE("identical views share the mass evenly") {
    Mat z = randm(3, 1, 4);
    FusedRepresentation f =
        semantic_fuse(tp, {t.constant(z), t.constant(z), t.constant(z)}, cfg);
    Mat beta = t.value(f.beta);
    for (int p = 0; p < 3; ++p) CHECK(beta(0, p) == doctest::Approx(1.0 / 3));
    CHECK((t.value(f.Z_agg) - z).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("encoder: fused output composes the views with beta") {
  auto s = synth_setup(9, 4, 5);
  EncoderConfig cfg;
  cfg.d = 4;
  cfg.heads = 2;
  cfg.d_m = 3;
  cfg.depth = 1;
  EncoderParams params = EncoderParams::init(cfg, s.graph, s.paths, 8);

  EncoderRun run;
  const ForwardResult& r = run.forward(cfg, params, s.graph, s.views);
  Mat beta = run.tape().value(r.fused.beta);
  CHECK(std::abs(beta.sum() - 1.0) <= 1e-12);
  Mat manual = Mat::Zero(9, 4);
  for (std::size_t p = 0; p < r.views.size(); ++p)
    manual += beta(0, static_cast<int>(p)) * run.tape().value(r.views[p].Z);
  CHECK((run.tape().value(r.fused.Z_agg) - manual).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("encoder: forward over synthetic views") {
  auto s = synth_setup(20, 8, 3);
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.d_m = 6;
  cfg.depth = 1;
  EncoderParams params = EncoderParams::init(cfg, s.graph, s.paths, 21);

  PlainForward out = forward_values(cfg, params, s.graph, s.views);
  CHECK(out.H.rows() == 20);
  CHECK(out.H.cols() == 8);
  REQUIRE(out.Z.size() == 2);
  CHECK(out.Z[0].rows() == 20);
  CHECK(out.Z_agg.rows() == 20);
  CHECK(out.Z_agg.cols() == 8);
  CHECK(out.beta.size() == 2);
  CHECK(std::abs(out.beta.sum() - 1.0) <= 1e-12);
  CHECK(all_finite(out.H));
  CHECK(all_finite(out.Z_agg));

  PlainForward again = forward_values(cfg, params, s.graph, s.views);
  CHECK(out.H == again.H);
  CHECK(out.Z_agg == again.Z_agg);
  CHECK(out.beta == again.beta);

  SUBCASE("depth 0 bypasses attention") {
    EncoderConfig flat = cfg;
    flat.depth = 0;
    EncoderParams fp = EncoderParams::init(flat, s.graph, s.paths, 21);
    PlainForward shallow = forward_values(flat, fp, s.graph, s.views);
    CHECK(shallow.Z[0] == shallow.H);
    CHECK(shallow.Z[1] == shallow.H);
  }

  SUBCASE("depth 2 stacks a second layer") {
    EncoderConfig deep = cfg;
    deep.depth = 2;
    EncoderParams dp = EncoderParams::init(deep, s.graph, s.paths, 21);
    PlainForward stacked = forward_values(deep, dp, s.graph, s.views);
    CHECK(all_finite(stacked.Z_agg));
    CHECK(stacked.Z_agg != out.Z_agg);
  }
}

TEST_CASE("encoder: gradcheck against central differences") {
  auto s = synth_setup(6, 3, 11);
  EncoderConfig cfg;
  cfg.d = 4;
  cfg.heads = 2;
  cfg.d_m = 3;
  cfg.depth = 1;
  EncoderParams params = EncoderParams::init(cfg, s.graph, s.paths, 17);
  Mat probe = randm(6, 4, 99);

  EncoderRun run;
  const ForwardResult& r = run.forward(cfg, params, s.graph, s.views);
  ad::Var loss = ad::inner(r.fused.Z_agg, run.tape().constant(probe));
  auto grads = run.backward(loss);
  REQUIRE(grads.size() == params.size());

  const double h = 1e-5;
  for (std::size_t e = 0; e < grads.size(); ++e) {
    CHECK(grads[e].first == params.entries()[e].first);
    const Mat& g = grads[e].second;
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) {
        EncoderParams bumped = params;
        Mat& slot = bumped.at(grads[e].first);
        double keep = slot(i, j);
        slot(i, j) = keep + h;
        double up = loss_value(cfg, bumped, s.graph, s.views, probe);
        slot(i, j) = keep - h;
        double dn = loss_value(cfg, bumped, s.graph, s.views, probe);
        double fd = (up - dn) / (2 * h);
        double tol = 2e-5 * std::max({1.0, std::abs(fd), std::abs(g(i, j))});
        INFO("param ", grads[e].first, " entry (", i, ",", j, ")");
        CHECK(std::abs(g(i, j) - fd) <= tol);
      }
  }
}

TEST_CASE("encoder: run state contract") {
  auto s = synth_setup(5, 3, 2);
  EncoderConfig cfg;
  cfg.d = 4;
  cfg.heads = 1;
  cfg.d_m = 2;
  cfg.depth = 1;
  EncoderParams params = EncoderParams::init(cfg, s.graph, s.paths, 4);

  EncoderRun run;
  CHECK_THROWS_AS(run.result(), StateError);
  CHECK_THROWS_AS(run.mounted(), StateError);
  {
    ad::Tape other;
    ad::Var foreign = other.constant(Mat::Ones(1, 1));
    CHECK_THROWS_AS(run.backward(foreign), StateError);
  }

  const ForwardResult& r = run.forward(cfg, params, s.graph, s.views);
  {
    ad::Tape other;
    ad::Var foreign = other.constant(Mat::Ones(1, 1));
    CHECK_THROWS_AS(run.backward(foreign), StateError);
  }
  auto grads =
      run.backward(ad::frobenius_norm(r.fused.Z_agg));
  bool any_nonzero = false;
  for (const auto& [name, g] : grads) any_nonzero = any_nonzero || !g.isZero();
  CHECK(any_nonzero);

  // Without grad tracking the sweep is legal and every gradient stays zero.
  const ForwardResult& r2 = run.forward(cfg, params, s.graph, s.views, false);
  auto flat = run.backward(ad::frobenius_norm(r2.fused.Z_agg));
  for (const auto& [name, g] : flat) {
    CHECK(g.isZero(0.0));
    CHECK(g.rows() == params.at(name).rows());
    CHECK(g.cols() == params.at(name).cols());
  }
}

TEST_CASE("encoder: checkpoint round trip is exact") {
  auto s = synth_setup(7, 3, 6);
  EncoderConfig cfg;
  cfg.d = 6;
  cfg.heads = 3;
  cfg.d_m = 4;
  cfg.depth = 1;
  cfg.logit_act = ad::Act::leaky_relu;
  cfg.output_act = ad::Act::tanh_fn;
  cfg.leaky_slope = 0.11;
  EncoderParams params = EncoderParams::init(cfg, s.graph, s.paths, 13);
  params.at("sem/M") *= std::acos(-1.0) / 3.0;  // force non-terminating digits

  auto dir = scratch_dir("hgot_ckpt");
  save_checkpoint(cfg, params, dir / "model.json");
  auto [cfg2, params2] = load_checkpoint(dir / "model.json");

  CHECK(cfg2.d == cfg.d);
  CHECK(cfg2.heads == cfg.heads);
  CHECK(cfg2.d_m == cfg.d_m);
  CHECK(cfg2.depth == cfg.depth);
  CHECK(cfg2.logit_act == cfg.logit_act);
  CHECK(cfg2.output_act == cfg.output_act);
  CHECK(cfg2.leaky_slope == cfg.leaky_slope);
  REQUIRE(params2.size() == params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK(params2.entries()[i].first == params.entries()[i].first);
    // bitwise: shortest-round-trip doubles survive the JSON detour
    CHECK(params2.entries()[i].second == params.entries()[i].second);
  }

  // Loaded parameters drive the encoder to the exact same outputs.
  PlainForward a = forward_values(cfg, params, s.graph, s.views);
  PlainForward b = forward_values(cfg2, params2, s.graph, s.views);
  CHECK(a.Z_agg == b.Z_agg);
  CHECK(a.beta == b.beta);
  std::filesystem::remove_all(dir);
}

TEST_CASE("encoder: checkpoint rejects bad files") {
  auto dir = scratch_dir("hgot_ckpt_bad");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), DataError);

  {
    std::ofstream out(dir / "garbled.json");
    out << "{\"version\": 1,";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "garbled.json"), DataError);

  {
    std::ofstream out(dir / "future.json");
    out << R"({"version": 9, "encoder_config": {}, "params": {}})";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "future.json"), DataError);

  {
    std::ofstream out(dir / "shape.json");
    out << R"({"version": 1,
      "encoder_config": {"d": 2, "heads": 1, "d_m": 2, "depth": 1,
        "logit_act": "leaky_relu", "output_act": "elu", "leaky_slope": 0.2},
      "params": {"sem/q": {"shape": [2, 1], "data": [1.0]}}})";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "shape.json"), DataError);

  EncoderConfig cfg;
  cfg.d = 2;
  cfg.heads = 1;
  cfg.d_m = 2;
  EncoderParams params;
  params.insert("sem/q", Mat::Constant(2, 1, std::nan("")));
  CHECK_THROWS_AS(save_checkpoint(cfg, params, dir / "nan.json"), DataError);
  std::filesystem::remove_all(dir);
}
