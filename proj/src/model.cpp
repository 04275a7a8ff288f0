#include "mml/model.hpp"

#include <cmath>

#include "mml/init.hpp"

namespace mml {
namespace {

Branch build_branch(const ArchConfig& cfg, std::size_t in_channels, Rng& rng,
                    const std::string& prefix) {
  Branch br;
  std::size_t c = in_channels;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const ConvLayerSpec& spec = cfg.layers[li];
    ConvLayer layer;
    const std::size_t fan_in = c * spec.kernel * spec.kernel;
    const std::string lp = prefix + ".conv" + std::to_string(li + 1);
    layer.kernel = init_param({spec.out_channels, c, spec.kernel, spec.kernel},
                              fan_in, rng, lp + ".kernel");
    layer.bias = init_param({spec.out_channels}, fan_in, rng, lp + ".bias");
    if (cfg.batchnorm) {
      layer.bn_gamma = const_param({spec.out_channels}, 1.0, lp + ".bn_gamma");
      layer.bn_beta = const_param({spec.out_channels}, 0.0, lp + ".bn_beta");
      layer.bn.init(spec.out_channels);
    }
    layer.stride = spec.stride;
    layer.pad = spec.pad;
    br.layers.push_back(std::move(layer));
    c = spec.out_channels;
  }
  br.head_w = init_param({c, cfg.classes}, c, rng, prefix + ".head.weight");
  br.head_b = init_param({cfg.classes}, c, rng, prefix + ".head.bias");
  return br;
}

Var run_layer(ConvLayer& layer, const Var& x, bool training) {
  Var y = conv2d(x, layer.kernel, layer.stride, layer.pad);
  if (layer.bn_gamma) {
    y = batch_norm(y, layer.bn_gamma, layer.bn_beta, layer.bn, training);
  } else {
    // Bias folds into BN's shift when normalization is on.
    const std::size_t B = y->value.shape[0], C = y->value.shape[1];
    const std::size_t HW = y->value.shape[2] * y->value.shape[3];
    Tensor out = y->value;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        double* row = &out.data[(b * C + c) * HW];
        for (std::size_t i = 0; i < HW; ++i) row[i] += layer.bias->value[c];
      }
    y = make_node(std::move(out), {y, layer.bias}, [B, C, HW](Node& node) {
      Node& px = *node.parents[0];
      Node& pb = *node.parents[1];
      if (px.requires_grad) {
        Tensor& g = px.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
      }
      if (pb.requires_grad) {
        Tensor& g = pb.ensure_grad();
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < C; ++c) {
            const double* row = &node.grad.data[(b * C + c) * HW];
            for (std::size_t i = 0; i < HW; ++i) g[c] += row[i];
          }
      }
    });
  }
  return relu(y);
}

Var clone_var(const Var& v) {
  if (!v) return nullptr;
  return make_leaf(v->value, v->trainable, v->name);
}

ConvLayer clone_layer(const ConvLayer& src) {
  ConvLayer out;
  out.kernel = clone_var(src.kernel);
  out.bias = clone_var(src.bias);
  out.bn_gamma = clone_var(src.bn_gamma);
  out.bn_beta = clone_var(src.bn_beta);
  out.bn = src.bn;
  out.stride = src.stride;
  out.pad = src.pad;
  return out;
}

Branch clone_branch(const Branch& src) {
  Branch out;
  for (const auto& l : src.layers) out.layers.push_back(clone_layer(l));
  out.head_w = clone_var(src.head_w);
  out.head_b = clone_var(src.head_b);
  return out;
}

FusionModule clone_fusion(const FusionModule& src) {
  FusionModule out;
  out.c0 = src.c0;
  out.c1 = src.c1;
  out.hidden = src.hidden;
  out.joint_w = clone_var(src.joint_w);
  out.joint_b = clone_var(src.joint_b);
  out.gate0_w = clone_var(src.gate0_w);
  out.gate0_b = clone_var(src.gate0_b);
  out.gate1_w = clone_var(src.gate1_w);
  out.gate1_b = clone_var(src.gate1_b);
  out.stats = src.stats;
  return out;
}

}  // namespace

std::vector<Var> ParamPartition::fusion0() const {
  std::vector<Var> v = joint;
  v.insert(v.end(), gate0.begin(), gate0.end());
  return v;
}

std::vector<Var> ParamPartition::fusion1() const {
  std::vector<Var> v = joint;
  v.insert(v.end(), gate1.begin(), gate1.end());
  return v;
}

std::size_t ParamPartition::total_count() const {
  return theta0.size() + theta1.size() + joint.size() + gate0.size() + gate1.size();
}

MultiModalNet MultiModalNet::create(const ArchConfig& cfg, std::size_t in_c0,
                                    std::size_t in_c1, std::size_t img,
                                    std::uint64_t seed) {
  if (cfg.layers.empty()) throw Error("MultiModalNet: no layers configured");
  for (std::size_t d : cfg.fusion_after)
    if (d == 0 || d > cfg.layers.size())
      throw Error("MultiModalNet: fusion depth " + std::to_string(d) +
                  " out of range");
  MultiModalNet net;
  net.cfg = cfg;
  net.in_c0 = in_c0;
  net.in_c1 = in_c1;
  net.img = img;
  Rng rng(derive_seed(seed, "init"));
  net.branch0 = build_branch(cfg, in_c0, rng, "branch0");
  net.branch1 = build_branch(cfg, in_c1, rng, "branch1");
  for (std::size_t fi = 0; fi < cfg.fusion_after.size(); ++fi) {
    std::size_t c = cfg.layers[cfg.fusion_after[fi] - 1].out_channels;
    net.fusions.push_back(FusionModule::create(c, c, cfg.fusion_reduction, rng,
                                               "fusion" + std::to_string(fi + 1)));
  }
  return net;
}

ForwardResult MultiModalNet::forward(const Tensor* x0, const Tensor* x1,
                                     FusionMode mode,
                                     const std::vector<FusionStats>* stats_override,
                                     bool capture) {
  const bool eval0 = mode != FusionMode::MarginalM1;
  const bool eval1 = mode != FusionMode::MarginalM0;
  if (eval0 && !x0)
    throw Error(std::string("forward: mode ") + fusion_mode_name(mode) +
                " requires the m0 input");
  if (eval1 && !x1)
    throw Error(std::string("forward: mode ") + fusion_mode_name(mode) +
                " requires the m1 input");
  if (stats_override && stats_override->size() != fusions.size())
    throw Error("forward: stats override count does not match fusion modules");

  ForwardResult res;
  Var a0 = eval0 ? make_leaf(*x0) : nullptr;
  Var a1 = eval1 ? make_leaf(*x1) : nullptr;
  std::size_t fi = 0;
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    if (a0) a0 = run_layer(branch0.layers[li], a0, training);
    if (a1) a1 = run_layer(branch1.layers[li], a1, training);
    if (fi < fusions.size() && cfg.fusion_after[fi] == li + 1) {
      FusionModule& fm = fusions[fi];
      const FusionStats* ov = stats_override ? &(*stats_override)[fi] : nullptr;
      auto [h0, h1] = fm.squeeze(a0, a1);
      auto [w0, w1] = fm.excite(h0, h1, mode, ov);
      auto [t0, t1] = fm.apply_gates(a0, a1, w0, w1, mode);
      if (capture && mode == FusionMode::Regular)
        res.captures.push_back({h0->value, h1->value, w0->value, w1->value});
      if (t0) a0 = t0;
      if (t1) a1 = t1;
      ++fi;
    }
  }

  if (a0) {
    Var feat0 = global_avg_pool(a0);
    res.logits0 = add_bias(matmul(feat0, branch0.head_w), branch0.head_b);
    res.probs0 = softmax_probs(res.logits0->value);
  }
  if (a1) {
    Var feat1 = global_avg_pool(a1);
    res.logits1 = add_bias(matmul(feat1, branch1.head_w), branch1.head_b);
    res.probs1 = softmax_probs(res.logits1->value);
  }
  if (a0 && a1) {
    if (cfg.average_probs) {
      res.probs_avg = Tensor(res.probs0.shape);
      for (std::size_t i = 0; i < res.probs_avg.size(); ++i)
        res.probs_avg[i] = 0.5 * (res.probs0[i] + res.probs1[i]);
    } else {
      Tensor avg(res.logits0->value.shape);
      for (std::size_t i = 0; i < avg.size(); ++i)
        avg[i] = 0.5 * (res.logits0->value[i] + res.logits1->value[i]);
      res.probs_avg = softmax_probs(avg);
    }
  }
  return res;
}

ParamPartition MultiModalNet::partition() const {
  ParamPartition p;
  auto branch_params = [](const Branch& br, std::vector<Var>& out) {
    for (const auto& l : br.layers) {
      out.push_back(l.kernel);
      out.push_back(l.bias);
      if (l.bn_gamma) {
        out.push_back(l.bn_gamma);
        out.push_back(l.bn_beta);
      }
    }
    out.push_back(br.head_w);
    out.push_back(br.head_b);
  };
  branch_params(branch0, p.theta0);
  branch_params(branch1, p.theta1);
  for (const auto& f : fusions) {
    p.joint.push_back(f.joint_w);
    p.joint.push_back(f.joint_b);
    p.gate0.push_back(f.gate0_w);
    p.gate0.push_back(f.gate0_b);
    p.gate1.push_back(f.gate1_w);
    p.gate1.push_back(f.gate1_b);
  }
  return p;
}

std::vector<Var> MultiModalNet::all_params() const {
  ParamPartition p = partition();
  std::vector<Var> all = p.theta0;
  all.insert(all.end(), p.theta1.begin(), p.theta1.end());
  all.insert(all.end(), p.joint.begin(), p.joint.end());
  all.insert(all.end(), p.gate0.begin(), p.gate0.end());
  all.insert(all.end(), p.gate1.begin(), p.gate1.end());
  return all;
}

std::vector<NamedTensor> MultiModalNet::named_tensors() {
  std::vector<NamedTensor> out;
  auto label_of = [](const std::string& name) -> std::string {
    if (name.rfind("branch0", 0) == 0) return "theta0";
    if (name.rfind("branch1", 0) == 0) return "theta1";
    if (name.find(".joint.") != std::string::npos) return "joint";
    if (name.find(".gate0.") != std::string::npos) return "gate0";
    return "gate1";
  };
  for (const auto& v : all_params())
    out.push_back({v->name, &v->value, label_of(v->name)});
  auto branch_state = [&out](Branch& br, const std::string& prefix) {
    for (std::size_t li = 0; li < br.layers.size(); ++li) {
      if (!br.layers[li].bn_gamma) continue;
      std::string lp = prefix + ".conv" + std::to_string(li + 1);
      out.push_back({lp + ".bn_running_mean", &br.layers[li].bn.running_mean, "state"});
      out.push_back({lp + ".bn_running_var", &br.layers[li].bn.running_var, "state"});
    }
  };
  branch_state(branch0, "branch0");
  branch_state(branch1, "branch1");
  for (std::size_t fi = 0; fi < fusions.size(); ++fi) {
    std::string fp = "fusion" + std::to_string(fi + 1) + ".stats";
    out.push_back({fp + ".h0_sum", &fusions[fi].stats.h0_sum, "state"});
    out.push_back({fp + ".h1_sum", &fusions[fi].stats.h1_sum, "state"});
    out.push_back({fp + ".w0_sum", &fusions[fi].stats.w0_sum, "state"});
    out.push_back({fp + ".w1_sum", &fusions[fi].stats.w1_sum, "state"});
  }
  return out;
}

MultiModalNet MultiModalNet::mirrored() const {
  MultiModalNet m;
  m.cfg = cfg;
  m.in_c0 = in_c1;
  m.in_c1 = in_c0;
  m.img = img;
  m.training = training;
  m.branch0 = clone_branch(branch1);
  m.branch1 = clone_branch(branch0);
  for (const auto& f : fusions) {
    FusionModule g;
    g.c0 = f.c1;
    g.c1 = f.c0;
    g.hidden = f.hidden;
    // Joint input order is [h0, h1]; mirroring permutes the rows.
    Tensor jw({f.c0 + f.c1, f.hidden});
    for (std::size_t r = 0; r < f.c1; ++r)
      for (std::size_t c = 0; c < f.hidden; ++c)
        jw[r * f.hidden + c] = f.joint_w->value[(f.c0 + r) * f.hidden + c];
    for (std::size_t r = 0; r < f.c0; ++r)
      for (std::size_t c = 0; c < f.hidden; ++c)
        jw[(f.c1 + r) * f.hidden + c] = f.joint_w->value[r * f.hidden + c];
    g.joint_w = make_leaf(std::move(jw), true, f.joint_w->name);
    g.joint_b = clone_var(f.joint_b);
    g.gate0_w = clone_var(f.gate1_w);
    g.gate0_b = clone_var(f.gate1_b);
    g.gate1_w = clone_var(f.gate0_w);
    g.gate1_b = clone_var(f.gate0_b);
    g.stats.h0_sum = f.stats.h1_sum;
    g.stats.h1_sum = f.stats.h0_sum;
    g.stats.w0_sum = f.stats.w1_sum;
    g.stats.w1_sum = f.stats.w0_sum;
    g.stats.h_count = f.stats.h_count;
    g.stats.w_count = f.stats.w_count;
    m.fusions.push_back(std::move(g));
  }
  return m;
}

MultiModalNet MultiModalNet::clone() const {
  MultiModalNet m;
  m.cfg = cfg;
  m.in_c0 = in_c0;
  m.in_c1 = in_c1;
  m.img = img;
  m.training = training;
  m.branch0 = clone_branch(branch0);
  m.branch1 = clone_branch(branch1);
  for (const auto& f : fusions) m.fusions.push_back(clone_fusion(f));
  return m;
}

Var multimodal_loss(const Var& logits0, const Var& logits1,
                    const std::vector<int>& labels) {
  if (!logits0 || !logits1)
    throw Error("multimodal_loss: both branch logits required");
  return add(softmax_cross_entropy(logits0, labels),
             softmax_cross_entropy(logits1, labels));
}

std::vector<int> argmax_rows(const Tensor& rows) {
  if (rows.rank() != 2) throw Error("argmax_rows: expected rank-2 tensor");
  const std::size_t B = rows.shape[0], K = rows.shape[1];
  std::vector<int> out(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (rows[b * K + k] > rows[b * K + best]) best = k;
    out[b] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const Tensor& probs) {
  if (probs.rank() != 2) throw Error("predict: expected [BxK] probabilities");
  const std::size_t B = probs.shape[0], K = probs.shape[1];
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += probs[b * K + k];
    if (std::abs(s - 1.0) > 1e-6)
      throw Error("predict: row " + std::to_string(b) +
                  " does not sum to 1 (got " + std::to_string(s) + ")");
  }
  return argmax_rows(probs);
}

}  // namespace mml
