#include "hgot/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

namespace hgot::encoder {

using nlohmann::json;
using namespace hgot::ad;

void EncoderConfig::validate() const {
  if (d < 1 || heads < 1 || d_m < 1) throw ConfigError("encoder sizes must be >= 1");
  if (d % heads != 0) throw ConfigError("head count must divide the latent width");
  if (depth < 0) throw ConfigError("depth must be >= 0");
}

bool EncoderParams::has(const std::string& name) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), name,
      [](const Entry& e, const std::string& n) { return e.first < n; });
  return it != entries_.end() && it->first == name;
}

const Mat& EncoderParams::at(const std::string& name) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), name,
      [](const Entry& e, const std::string& n) { return e.first < n; });
  if (it == entries_.end() || it->first != name)
    throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

Mat& EncoderParams::at(const std::string& name) {
  return const_cast<Mat&>(std::as_const(*this).at(name));
}

void EncoderParams::insert(std::string name, Mat value) {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), name,
      [](const Entry& e, const std::string& n) { return e.first < n; });
  if (it != entries_.end() && it->first == name)
    throw ConfigError("duplicate parameter '" + name + "'");
  entries_.insert(it, {std::move(name), std::move(value)});
}

namespace {

Mat glorot(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg,
                                  const HeteroGraph& g,
                                  const std::vector<MetaPath>& paths,
                                  std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(seed, "encoder_init"));
  EncoderParams p;
  const int m = cfg.head_dim();
  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    int raw = static_cast<int>(g.features[t].cols());
    p.insert("proj/" + g.node_types[t] + "/W", glorot(cfg.d, raw, raw, cfg.d, rng));
    p.insert("proj/" + g.node_types[t] + "/b", Mat::Zero(cfg.d, 1));
  }
  for (const auto& path : paths) {
    for (int l = 0; l < cfg.depth; ++l) {
      for (int k = 0; k < cfg.heads; ++k) {
        std::string prefix = "att/" + path.name + "/L" + std::to_string(l) +
                             "/H" + std::to_string(k) + "/";
        p.insert(prefix + "W", glorot(m, cfg.d, cfg.d, m, rng));
        p.insert(prefix + "a", glorot(2 * m, 1, 2 * m, 1, rng));
      }
    }
  }
  p.insert("sem/M", glorot(cfg.d_m, cfg.d, cfg.d, cfg.d_m, rng));
  p.insert("sem/q", glorot(cfg.d_m, 1, cfg.d_m, 1, rng));
  p.insert("sem/b", Mat::Zero(cfg.d_m, 1));
  return p;
}

// --- checkpoint ------------------------------------------------------------

std::string act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::leaky_relu: return "leaky_relu";
    case Act::elu: return "elu";
    case Act::tanh_fn: return "tanh";
  }
  throw ConfigError("unknown activation");
}

Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "relu") return Act::relu;
  if (s == "leaky_relu") return Act::leaky_relu;
  if (s == "elu") return Act::elu;
  if (s == "tanh") return Act::tanh_fn;
  throw DataError("unknown activation '" + s + "'");
}

void save_checkpoint(const EncoderConfig& cfg, const EncoderParams& params,
                     const std::filesystem::path& file) {
  json j;
  j["version"] = 1;
  j["encoder_config"] = {{"d", cfg.d},
                         {"heads", cfg.heads},
                         {"d_m", cfg.d_m},
                         {"depth", cfg.depth},
                         {"logit_act", act_name(cfg.logit_act)},
                         {"output_act", act_name(cfg.output_act)},
                         {"leaky_slope", cfg.leaky_slope}};
  json jp = json::object();
  for (const auto& [name, value] : params.entries()) {
    if (!all_finite(value))
      throw DataError("parameter '" + name + "' has non-finite entries");
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(value.size()));
    for (int i = 0; i < value.rows(); ++i)
      for (int j2 = 0; j2 < value.cols(); ++j2) data.push_back(value(i, j2));
    jp[name] = {{"shape", {value.rows(), value.cols()}}, {"data", data}};
  }
  j["params"] = std::move(jp);
  std::ofstream out(file);
  if (!out) throw DataError("cannot write checkpoint '" + file.string() + "'");
  out << j.dump() << "\n";
}

std::pair<EncoderConfig, EncoderParams> load_checkpoint(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open checkpoint '" + file.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": malformed JSON: " + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1)
      throw DataError(file.string() + ": unsupported checkpoint version");
    const auto& jc = j.at("encoder_config");
    EncoderConfig cfg;
    cfg.d = jc.at("d").get<int>();
    cfg.heads = jc.at("heads").get<int>();
    cfg.d_m = jc.at("d_m").get<int>();
    cfg.depth = jc.at("depth").get<int>();
    cfg.logit_act = act_from_name(jc.at("logit_act").get<std::string>());
    cfg.output_act = act_from_name(jc.at("output_act").get<std::string>());
    cfg.leaky_slope = jc.at("leaky_slope").get<double>();
    cfg.validate();
    EncoderParams params;
    for (const auto& [name, jv] : j.at("params").items()) {
      auto shape = jv.at("shape").get<std::vector<long>>();
      auto data = jv.at("data").get<std::vector<double>>();
      if (shape.size() != 2 ||
          static_cast<long>(data.size()) != shape[0] * shape[1])
        throw DataError(file.string() + ": bad payload for parameter '" + name +
                        "'");
      Mat v(shape[0], shape[1]);
      std::size_t idx = 0;
      for (int i = 0; i < v.rows(); ++i)
        for (int c = 0; c < v.cols(); ++c) v(i, c) = data[idx++];
      params.insert(name, std::move(v));
    }
    return {cfg, std::move(params)};
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

// --- tape-side forward -----------------------------------------------------

ad::Var TapeParams::at(const std::string& name) const {
  for (const auto& [n, v] : vars)
    if (n == name) return v;
  throw ConfigError("unknown parameter '" + name + "'");
}

TapeParams mount(ad::Tape& tape, const EncoderParams& params, bool with_grad) {
  TapeParams tp;
  tp.tape = &tape;
  tp.vars.reserve(params.size());
  for (const auto& [name, value] : params.entries())
    tp.vars.emplace_back(name, tape.leaf(value, with_grad));
  return tp;
}

ad::Var project_features(const TapeParams& tp, const HeteroGraph& g) {
  Tape& t = *tp.tape;
  const Mat& x = g.target_features();
  Var w = tp.at("proj/" + g.target_type + "/W");
  Var b = tp.at("proj/" + g.target_type + "/b");
  if (t.value(w).cols() != x.cols())
    throw ConfigError("projection width " + std::to_string(t.value(w).cols()) +
                      " does not match raw feature dimension " +
                      std::to_string(x.cols()) + " for type '" + g.target_type +
                      "'");
  return add_rowvec(matmul(t.constant(x), transpose(w)), transpose(b));
}

ViewRepresentation node_attention_layer(const TapeParams& tp, ad::Var h_in,
                                        const MetaPathView& view,
                                        const EncoderConfig& cfg, int layer) {
  Tape& t = *tp.tape;
  const int n = view.n;
  if (t.value(h_in).rows() != n)
    throw DataError("attention input rows do not match view size");
  if (t.value(h_in).cols() != cfg.d)
    throw ConfigError("attention input width does not match configured d");
  for (int i = 0; i < n; ++i)
    if (view.adjacency.row(i).sum() == 0.0)
      throw DataError("node " + std::to_string(i) +
                      " has an empty neighborhood in view '" +
                      view.metapath.name + "'");

  const int m = cfg.head_dim();
  ViewRepresentation rep;
  std::vector<Var> heads;
  for (int k = 0; k < cfg.heads; ++k) {
    std::string prefix = "att/" + view.metapath.name + "/L" +
                         std::to_string(layer) + "/H" + std::to_string(k) + "/";
    Var wk = tp.at(prefix + "W");
    Var a = tp.at(prefix + "a");
    if (t.value(a).rows() != 2 * m || t.value(wk).rows() != m)
      throw ConfigError("attention parameter shapes disagree with config at '" +
                        prefix + "'");
    Var hw = matmul(h_in, transpose(wk));                  // n x m
    Var s_src = matmul(hw, slice_rows(a, 0, m));           // n x 1
    Var s_dst = matmul(hw, slice_rows(a, m, m));
    Var logits = activation(outer_sum(s_src, s_dst), cfg.logit_act,
                            cfg.leaky_slope);
    Var alpha = masked_row_softmax(logits, view.adjacency);
    rep.alpha.push_back(alpha);
    heads.push_back(activation(matmul(alpha, hw), cfg.output_act,
                               cfg.leaky_slope));
  }
  rep.Z = concat_cols(heads);
  return rep;
}

FusedRepresentation semantic_fuse(const TapeParams& tp,
                                  const std::vector<ad::Var>& zs,
                                  const EncoderConfig& cfg) {
  (void)cfg;
  if (zs.empty()) throw DataError("semantic_fuse: no views");
  Tape& t = *tp.tape;
  Var q = tp.at("sem/q");
  Var m = tp.at("sem/M");
  Var b = tp.at("sem/b");
  const int n = static_cast<int>(t.value(zs.front()).rows());
  std::vector<Var> scores;
  for (const Var& z : zs) {
    if (t.value(z).rows() != n)
      throw DataError("semantic_fuse: views disagree on node count");
    Var u = add_rowvec(matmul(z, transpose(m)), transpose(b));  // n x d_m
    Var s = matmul(activation(u, Act::tanh_fn), q);             // n x 1
    scores.push_back(scale(sum_all(s), 1.0 / n));
  }
  FusedRepresentation fused;
  fused.omega = concat_cols(scores);  // 1 x P
  fused.beta = row_softmax(fused.omega);
  Var acc = scale_by_entry(zs[0], fused.beta, 0, 0);
  for (std::size_t p = 1; p < zs.size(); ++p)
    acc = add(acc, scale_by_entry(zs[p], fused.beta, 0, static_cast<int>(p)));
  fused.Z_agg = acc;
  return fused;
}

ForwardResult forward(const TapeParams& tp, const HeteroGraph& g,
                      const std::vector<MetaPathView>& views,
                      const EncoderConfig& cfg) {
  cfg.validate();
  if (views.empty()) throw DataError("forward: no meta-path views");
  ForwardResult out;
  out.H = project_features(tp, g);
  std::vector<Var> zs;
  for (const auto& view : views) {
    ViewRepresentation rep;
    rep.Z = out.H;
    for (int l = 0; l < cfg.depth; ++l)
      rep = node_attention_layer(tp, rep.Z, view, cfg, l);
    zs.push_back(rep.Z);
    out.views.push_back(std::move(rep));
  }
  out.fused = semantic_fuse(tp, zs, cfg);
  return out;
}

const ForwardResult& EncoderRun::result() const {
  if (!has_forward_) throw StateError("no forward recorded");
  return result_;
}

const TapeParams& EncoderRun::mounted() const {
  if (!has_forward_) throw StateError("no forward recorded");
  return mounted_;
}

const ForwardResult& EncoderRun::forward(const EncoderConfig& cfg,
                                         const EncoderParams& params,
                                         const HeteroGraph& g,
                                         const std::vector<MetaPathView>& views,
                                         bool with_grad) {
  tape_.clear();
  has_forward_ = false;
  mounted_ = mount(tape_, params, with_grad);
  result_ = encoder::forward(mounted_, g, views, cfg);
  has_forward_ = true;
  return result_;
}

std::vector<std::pair<std::string, Mat>> EncoderRun::backward(
    ad::Var scalar_loss) {
  if (!has_forward_) throw StateError("backward without a recorded forward");
  if (scalar_loss.tape != &tape_)
    throw StateError("loss was recorded on a different tape");
  tape_.backward(scalar_loss);
  std::vector<std::pair<std::string, Mat>> grads;
  grads.reserve(mounted_.vars.size());
  for (const auto& [name, var] : mounted_.vars)
    grads.emplace_back(name, tape_.grad(var));
  return grads;
}

PlainForward forward_values(const EncoderConfig& cfg,
                            const EncoderParams& params, const HeteroGraph& g,
                            const std::vector<MetaPathView>& views) {
  EncoderRun run;
  const ForwardResult& r = run.forward(cfg, params, g, views, false);
  PlainForward out;
  out.H = run.tape().value(r.H);
  for (const auto& rep : r.views) out.Z.push_back(run.tape().value(rep.Z));
  out.Z_agg = run.tape().value(r.fused.Z_agg);
  out.beta = run.tape().value(r.fused.beta).row(0).transpose();
  return out;
}

}  // namespace hgot::encoder
