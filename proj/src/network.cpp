#include "srn/network.hpp"

#include <cmath>

#include "srn/error.hpp"
#include "srn/ops.hpp"

namespace srn {
namespace {

struct ParamSpec {
  Shape shape;
  enum class Init { fan_in, zero } init = Init::fan_in;
};

using SpecMap = std::map<std::string, ParamSpec>;

std::size_t fan_in(const Shape& s) {
  if (s.size() == 4) return s[1] * s[2] * s[3];
  if (s.size() == 2) return s[0];
  return 1;
}

void backbone_specs(SpecMap& m, const std::string& prefix, const SrnConfig& c) {
  m[prefix + ".conv1.weight"] = {{c.conv1_channels, c.channels, 7, 7}};
  m[prefix + ".conv1.bias"] = {{c.conv1_channels}, ParamSpec::Init::zero};
  m[prefix + ".conv2.weight"] = {{c.conv2_channels, c.conv1_channels, 3, 3}};
  m[prefix + ".conv2.bias"] = {{c.conv2_channels}, ParamSpec::Init::zero};
  m[prefix + ".conv3.weight"] = {{c.feature_channels, c.conv2_channels, 3, 3}};
  m[prefix + ".conv3.bias"] = {{c.feature_channels}, ParamSpec::Init::zero};
}

// Width of z for a neighborhood: [g_own, g_paired, h].
std::size_t z_width(const SrnConfig& c, const GroupSchema& s, Neighborhood n) {
  const std::size_t D = c.descriptor_size();
  const std::size_t own = c.ablation.use_g ? c.g_dim : s.neighborhood(n).size() * D;
  const std::size_t pair = c.ablation.use_g ? c.g_dim : s.neighborhood(paired_of(n)).size() * D;
  return own + pair + c.rnn_hidden;
}

std::size_t f_width(const SrnConfig& c, const GroupSchema& s, Group g) {
  return c.ablation.use_f ? c.f_dim : z_width(c, s, parent_of(g));
}

SpecMap srn_specs(const SrnConfig& c, RnnMode mode) {
  c.validate();
  const GroupSchema schema = c.resolved_schema();
  const std::size_t N = c.num_landmarks, D = c.descriptor_size();
  SpecMap m;
  backbone_specs(m, "backbone", c);
  if (c.ablation.use_nonlocal) {
    m["nonlocal.pi.weight"] = {{c.embed_channels, c.feature_channels, 1, 1}};
    m["nonlocal.pi.bias"] = {{c.embed_channels}, ParamSpec::Init::zero};
    m["nonlocal.out.weight"] = {{c.feature_channels, c.embed_channels, 1, 1},
                                ParamSpec::Init::zero};
    m["nonlocal.out.bias"] = {{c.feature_channels}, ParamSpec::Init::zero};
  }
  m[rnn_weight_name(mode)] = {{N * D + c.rnn_hidden, c.rnn_hidden}};
  m[rnn_bias_name(mode)] = {{c.rnn_hidden}, ParamSpec::Init::zero};
  const std::string pre = "hsrm.";
  if (c.ablation.use_g) {
    for (auto n : kNeighborhoods) {
      const std::string nm = pre + "g." + std::string(neighborhood_name(n));
      m[nm + ".weight"] = {{schema.neighborhood(n).size() * D, c.g_dim}};
      m[nm + ".bias"] = {{c.g_dim}, ParamSpec::Init::zero};
    }
  }
  if (c.ablation.use_f) {
    for (auto g : kGroups) {
      const std::string nm = pre + "f." + std::string(group_name(g));
      m[nm + ".weight"] = {{z_width(c, schema, parent_of(g)), c.f_dim}};
      m[nm + ".bias"] = {{c.f_dim}, ParamSpec::Init::zero};
    }
  }
  for (auto g : kGroups) {
    const std::size_t out = 2 * schema.group(g).size();
    if (out == 0) continue;
    const auto kids = children_of(parent_of(g));
    const std::size_t in = c.ablation.use_d ? f_width(c, schema, kids[0]) + f_width(c, schema, kids[1])
                                            : f_width(c, schema, g);
    const std::string nm = pre + "d." + std::string(group_name(g));
    m[nm + ".weight"] = {{in, out}};
    m[nm + ".bias"] = {{out}, ParamSpec::Init::zero};
  }
  if (c.ablation.use_mu) {
    m[pre + "mu.weight"] = {{2 * N, 2 * N}};
    m[pre + "mu.bias"] = {{2 * N}, ParamSpec::Init::zero};
  }
  return m;
}

void materialise(ParamStore& store, const SpecMap& specs, std::mt19937_64& rng) {
  // std::map order: initialisation draws are consumed in name order.
  for (const auto& [name, spec] : specs) {
    Tensor t(spec.shape, 0.0);
    if (spec.init == ParamSpec::Init::fan_in) {
      const double a = std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(1, fan_in(spec.shape))));
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& v : t.vec()) v = u(rng);
    }
    store.set(name, std::move(t));
  }
}

}  // namespace

void SrnConfig::validate() const {
  if (num_landmarks < 2) throw InvalidInput("num_landmarks must be >= 2");
  if (patch_size < 8) throw InvalidInput("patch_size must be >= 8 to survive three 2x2 pools");
  if (channels != 1 && channels != 3) throw InvalidInput("channels must be 1 or 3");
  if (!conv1_channels || !conv2_channels || !feature_channels || !embed_channels || !rnn_hidden ||
      !g_dim || !f_dim)
    throw InvalidInput("layer widths must be positive");
  (void)resolved_schema();
}

nlohmann::json SrnConfig::to_json() const {
  nlohmann::json j{{"num_landmarks", num_landmarks},
                   {"channels", channels},
                   {"patch_size", patch_size},
                   {"conv1_channels", conv1_channels},
                   {"conv2_channels", conv2_channels},
                   {"feature_channels", feature_channels},
                   {"embed_channels", embed_channels},
                   {"rnn_hidden", rnn_hidden},
                   {"g_dim", g_dim},
                   {"f_dim", f_dim},
                   {"ablation",
                    {{"use_g", ablation.use_g},
                     {"use_f", ablation.use_f},
                     {"use_d", ablation.use_d},
                     {"use_mu", ablation.use_mu},
                     {"use_nonlocal", ablation.use_nonlocal}}}};
  if (schema) {
    nlohmann::json groups;
    for (auto g : kGroups) groups[std::string(group_name(g))] = schema->group(g);
    j["schema"] = groups;
  }
  return j;
}

SrnConfig SrnConfig::from_json(const nlohmann::json& j) {
  SrnConfig c;
  c.num_landmarks = j.value("num_landmarks", c.num_landmarks);
  c.channels = j.value("channels", c.channels);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.conv1_channels = j.value("conv1_channels", c.conv1_channels);
  c.conv2_channels = j.value("conv2_channels", c.conv2_channels);
  c.feature_channels = j.value("feature_channels", c.feature_channels);
  c.embed_channels = j.value("embed_channels", c.feature_channels);
  c.rnn_hidden = j.value("rnn_hidden", c.rnn_hidden);
  c.g_dim = j.value("g_dim", c.g_dim);
  c.f_dim = j.value("f_dim", c.f_dim);
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    c.ablation.use_g = a.value("use_g", true);
    c.ablation.use_f = a.value("use_f", true);
    c.ablation.use_d = a.value("use_d", true);
    c.ablation.use_mu = a.value("use_mu", true);
    c.ablation.use_nonlocal = a.value("use_nonlocal", true);
  }
  if (j.contains("schema")) {
    GroupSchema::Sets sets;
    for (auto g : kGroups)
      sets[static_cast<std::size_t>(g)] =
          j.at("schema").at(std::string(group_name(g))).get<std::vector<std::size_t>>();
    c.schema = GroupSchema(c.num_landmarks, sets);
  }
  c.validate();
  return c;
}

std::string rnn_weight_name(RnnMode mode) {
  return mode == RnnMode::spatial ? "rnn.w1" : "rnn.w2";
}
std::string rnn_bias_name(RnnMode mode) { return mode == RnnMode::spatial ? "rnn.b1" : "rnn.b2"; }

ParamStore init_srn_params(const SrnConfig& cfg, std::mt19937_64& rng, RnnMode mode) {
  ParamStore store;
  materialise(store, srn_specs(cfg, mode), rng);
  return store;
}

void init_backbone_params(ParamStore& store, const std::string& prefix, const SrnConfig& cfg,
                          std::mt19937_64& rng) {
  SpecMap m;
  backbone_specs(m, prefix, cfg);
  materialise(store, m, rng);
}

void check_srn_params(const ParamStore& params, const SrnConfig& cfg, RnnMode mode) {
  for (const auto& [name, spec] : srn_specs(cfg, mode)) {
    if (!params.contains(name)) throw InvalidInput("missing parameter " + name);
    if (params.at(name).shape() != spec.shape)
      throw InvalidInput("parameter " + name + " has shape " + shape_str(params.at(name).shape()) +
                         ", expected " + shape_str(spec.shape));
  }
}

Var ParamBinder::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = graph_.param(store_.at(name), trainable_);
  bound_.emplace(name, v);
  return v;
}

void ParamBinder::accumulate_grads(ParamStore& grads) {
  for (const auto& [name, v] : bound_) {
    if (!graph_.requires_grad(v.id)) continue;
    const Tensor& g = graph_.grad(v.id);
    if (!grads.contains(name)) grads.set(name, Tensor(g.shape(), 0.0));
    Tensor& dst = grads.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

namespace net {

Var backbone(ParamBinder& p, Var patches, const std::string& prefix) {
  Var x = patches;
  for (const char* layer : {".conv1", ".conv2", ".conv3"}) {
    const std::string base = prefix + layer;
    Var w = p(base + ".weight");
    const std::size_t pad = w.shape()[2] / 2;
    x = ops::conv2d(x, w, p(base + ".bias"), 1, pad);
    x = ops::relu(x);
    x = ops::max_pool2(x);
  }
  return x;
}

Var non_local(ParamBinder& p, Var x) {
  const Shape s = x.shape();
  const std::size_t N = s[0];
  Var e = ops::conv2d(x, p("nonlocal.pi.weight"), p("nonlocal.pi.bias"));
  const Shape es = e.shape();
  Var flat = ops::reshape(e, {N, es[1] * es[2] * es[3]});
  Var sim = ops::dot_similarity(flat, flat);
  Var y = ops::scale(ops::matmul(sim, flat), 1.0 / static_cast<double>(N));
  y = ops::reshape(y, es);
  Var fy = ops::conv2d(y, p("nonlocal.out.weight"), p("nonlocal.out.bias"));
  return ops::add(fy, x);
}

Var rnn_step(ParamBinder& p, Var x, Var h_prev, RnnMode mode) {
  Var w = p(rnn_weight_name(mode));
  if (h_prev.size() + x.size() != w.shape()[0])
    throw InvalidInput("rnn_step: input width " + std::to_string(x.size() + h_prev.size()) +
                       " does not match weight " + shape_str(w.shape()));
  Var in = ops::concat({ops::flatten(x), ops::flatten(h_prev)});
  return ops::tanh(ops::linear(in, w, p(rnn_bias_name(mode))));
}

std::array<Var, 6> hsrm(ParamBinder& p, const SrnConfig& cfg, const GroupSchema& schema, Var R,
                        Var h) {
  if (R.shape()[0] != schema.num_landmarks())
    throw InvalidInput("hsrm: feature count does not match schema");
  if (h.size() != cfg.rnn_hidden) throw InvalidInput("hsrm: hidden state width mismatch");
  const std::string pre = "hsrm.";

  std::array<Var, 3> gfeat;
  for (auto n : kNeighborhoods) {
    const auto idx = schema.neighborhood(n);
    Var part = ops::flatten(ops::gather_rows(R, idx));
    if (cfg.ablation.use_g) {
      const std::string nm = pre + "g." + std::string(neighborhood_name(n));
      part = ops::relu(ops::linear(part, p(nm + ".weight"), p(nm + ".bias")));
    }
    gfeat[static_cast<std::size_t>(n)] = part;
  }

  std::array<Var, 6> fout;
  for (auto n : kNeighborhoods) {
    Var z = ops::concat({gfeat[static_cast<std::size_t>(n)],
                         gfeat[static_cast<std::size_t>(paired_of(n))], ops::flatten(h)});
    for (auto g : children_of(n)) {
      Var f = z;
      if (cfg.ablation.use_f) {
        const std::string nm = pre + "f." + std::string(group_name(g));
        f = ops::relu(ops::linear(z, p(nm + ".weight"), p(nm + ".bias")));
      }
      fout[static_cast<std::size_t>(g)] = f;
    }
  }

  std::array<Var, 6> out;
  for (auto g : kGroups) {
    if (schema.group(g).empty()) continue;
    Var in;
    if (cfg.ablation.use_d) {
      const auto kids = children_of(parent_of(g));
      in = ops::concat(
          {fout[static_cast<std::size_t>(kids[0])], fout[static_cast<std::size_t>(kids[1])]});
    } else {
      in = fout[static_cast<std::size_t>(g)];
    }
    const std::string nm = pre + "d." + std::string(group_name(g));
    out[static_cast<std::size_t>(g)] = ops::linear(in, p(nm + ".weight"), p(nm + ".bias"));
  }
  return out;
}

Var global_integration(ParamBinder& p, const SrnConfig& cfg, const GroupSchema& schema,
                       const std::array<Var, 6>& residuals) {
  const std::size_t N = schema.num_landmarks();
  std::vector<Var> parts;
  std::vector<std::size_t> order;  // landmark index at each concatenated row
  for (auto g : kGroups) {
    const auto& idx = schema.group(g);
    if (idx.empty()) continue;
    const Var& r = residuals[static_cast<std::size_t>(g)];
    if (!r.valid()) throw InvalidInput("global_integration: missing residual for group " +
                                       std::string(group_name(g)));
    if (r.size() != 2 * idx.size())
      throw InvalidInput("global_integration: residual size mismatch for group " +
                         std::string(group_name(g)));
    parts.push_back(ops::reshape(r, {idx.size(), 2}));
    order.insert(order.end(), idx.begin(), idx.end());
  }
  std::vector<std::size_t> pos(N);
  for (std::size_t row = 0; row < order.size(); ++row) pos[order[row]] = row;
  Var merged = ops::reshape(ops::gather_rows(ops::concat(parts, 0), pos), {2 * N});
  if (!cfg.ablation.use_mu) return merged;
  return ops::linear(merged, p("hsrm.mu.weight"), p("hsrm.mu.bias"));
}

StepOutput srn_step(ParamBinder& p, const SrnConfig& cfg, const GroupSchema& schema, Var patches,
                    Var h_prev, RnnMode mode) {
  Var x = backbone(p, patches);
  Var R = cfg.ablation.use_nonlocal ? non_local(p, x) : x;
  Var h = rnn_step(p, x, h_prev, mode);
  auto residuals = hsrm(p, cfg, schema, R, h);
  return {global_integration(p, cfg, schema, residuals), h, x};
}

}  // namespace net

FeatureMapSet backbone_forward(const PatchSet& patches, const ParamStore& params,
                               const SrnConfig& cfg) {
  if (patches.patches.rank() != 4 || patches.patches.dim(1) != cfg.channels ||
      patches.patch_size != cfg.patch_size)
    throw InvalidInput("backbone_forward: patch set " + shape_str(patches.patches.shape()) +
                       " does not match config");
  Graph g;
  ParamBinder p(g, params, false);
  return {net::backbone(p, g.constant(patches.patches)).value()};
}

FeatureMapSet non_local(const FeatureMapSet& x, const ParamStore& params) {
  Graph g;
  ParamBinder p(g, params, false);
  return {net::non_local(p, g.constant(x.maps)).value()};
}

SpatialRnnState rnn_step(const FeatureMapSet& x, const SpatialRnnState& h_prev,
                         const ParamStore& params, RnnMode mode) {
  Graph g;
  ParamBinder p(g, params, false);
  return {net::rnn_step(p, g.constant(x.maps), g.constant(h_prev.h), mode).value()};
}

std::map<Group, std::vector<double>> hsrm_forward(const FeatureMapSet& relation,
                                                  const SpatialRnnState& h,
                                                  const GroupSchema& schema,
                                                  const ParamStore& params, const SrnConfig& cfg) {
  if (!relation.maps.all_finite() || !h.h.all_finite())
    throw InvalidInput("hsrm_forward: non-finite input");
  Graph g;
  ParamBinder p(g, params, false);
  auto res = net::hsrm(p, cfg, schema, g.constant(relation.maps), g.constant(h.h));
  std::map<Group, std::vector<double>> out;
  for (auto grp : kGroups)
    out[grp] = res[static_cast<std::size_t>(grp)].valid() ? res[static_cast<std::size_t>(grp)].value().vec()
                                                          : std::vector<double>{};
  return out;
}

std::vector<double> global_integration(const std::map<Group, std::vector<double>>& residuals,
                                       const GroupSchema& schema, const ParamStore& params,
                                       const SrnConfig& cfg) {
  Graph g;
  ParamBinder p(g, params, false);
  std::array<Var, 6> vars;
  for (auto grp : kGroups) {
    auto it = residuals.find(grp);
    if (it == residuals.end()) {
      if (schema.group(grp).empty()) continue;
      throw InvalidInput("global_integration: missing group " + std::string(group_name(grp)));
    }
    if (!it->second.empty())
      vars[static_cast<std::size_t>(grp)] = g.constant(Tensor({it->second.size()}, it->second));
  }
  return net::global_integration(p, cfg, schema, vars).value().vec();
}

}  // namespace srn
