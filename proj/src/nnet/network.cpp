#include "gjam/nnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <omp.h>

#include "gjam/error.hpp"
#include "gjam/rng.hpp"

namespace gjam::nnet {

namespace {

void relu_inplace(Tensor& t) {
  for (double& v : t.v) v = v > 0.0 ? v : 0.0;
}

// dz = da where the activation was positive.
Tensor relu_backward(const Tensor& act, const Tensor& da) {
  Tensor dz = da;
  for (std::size_t i = 0; i < dz.v.size(); ++i)
    if (!(act.v[i] > 0.0)) dz.v[i] = 0.0;
  return dz;
}

void standardize(Tensor& t, const InputNorm& norm) {
  for (int n = 0; n < t.n; ++n)
    for (int c = 0; c < t.c; ++c) {
      const double m = norm.mean[static_cast<std::size_t>(c)];
      const double s = norm.scale[static_cast<std::size_t>(c)];
      double* p = t.sample(n) + static_cast<std::size_t>(c) * t.plane();
      for (std::size_t i = 0; i < t.plane(); ++i) p[i] = (p[i] - m) * s;
    }
}

void he_init(Conv2d& conv, Rng& rng) {
  const double sd = std::sqrt(2.0 / conv.shape().patch());
  for (double& w : conv.weight) w = sd * rng.normal();
}

}  // namespace

struct Network::Cache {
  Tensor pooled;
  Tensor stem_act;
  struct Block {
    Tensor in;
    Tensor h1;
    Tensor out;
  };
  std::vector<Block> blocks;
  std::vector<double> embedding;
};

Network::Network(Architecture arch, std::vector<TaskHead> heads, std::uint64_t init_seed) : arch_(std::move(arch)) {
  if (arch_.in_channels < 1 || arch_.freq_pool < 1 || kFreqBins % arch_.freq_pool != 0 || arch_.stem_width < 1)
    throw Error(ErrorCode::InvalidSpec, "invalid architecture");
  for (int w : arch_.widths)
    if (w < 1) throw Error(ErrorCode::InvalidSpec, "invalid block width");
  if (heads.empty()) throw Error(ErrorCode::InvalidSpec, "network needs at least one head");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const TaskHead& h = heads[i];
    if (h.kind == HeadKind::Classification && h.n_c < 2)
      throw Error(ErrorCode::InvalidSpec, "classification head '" + h.id + "' needs n_c >= 2");
    if (h.kind == HeadKind::Regression && h.n_c != 1)
      throw Error(ErrorCode::InvalidSpec, "regression head '" + h.id + "' needs n_c = 1");
    if (!(h.weight >= 0.0) || !std::isfinite(h.weight))
      throw Error(ErrorCode::InvalidSpec, "head weight must be finite and >= 0");
    for (std::size_t j = 0; j < i; ++j)
      if (heads[j].id == h.id) throw Error(ErrorCode::InvalidSpec, "duplicate head id '" + h.id + "'");
  }

  input_norm_.mean.assign(static_cast<std::size_t>(2 * arch_.in_channels), 0.0);
  input_norm_.scale.assign(static_cast<std::size_t>(2 * arch_.in_channels), 1.0);
  Rng rng(init_seed);
  stem_ = Conv2d({2 * arch_.in_channels, arch_.stem_width, 3, 3, 2, 1});
  he_init(stem_, rng);
  int cin = arch_.stem_width;
  for (int w : arch_.widths) {
    ResidualBlock b{Conv2d({cin, w, 3, 3, 2, 2}), Conv2d({w, w, 3, 3, 1, 1}), Conv2d({cin, w, 1, 1, 2, 2})};
    he_init(b.conv1, rng);
    he_init(b.conv2, rng);
    he_init(b.proj, rng);
    blocks_.push_back(std::move(b));
    cin = w;
  }
  const int e = arch_.embedding_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(e));
  for (TaskHead& h : heads) {
    HeadLayer l;
    l.desc = std::move(h);
    const std::size_t wn = static_cast<std::size_t>(l.desc.n_c) * e;
    l.weight.resize(wn);
    for (double& w : l.weight) w = rng.uniform(-bound, bound);
    l.bias.assign(static_cast<std::size_t>(l.desc.n_c), 0.0);
    l.grad_weight.assign(wn, 0.0);
    l.grad_bias.assign(static_cast<std::size_t>(l.desc.n_c), 0.0);
    heads_.push_back(std::move(l));
  }
}

void Network::check_input(const Tensor& x) const {
  if (x.n < 1 || x.c != arch_.in_channels || x.h != kFreqBins || x.w < 1)
    throw Error(ErrorCode::ShapeMismatch, "network input must be N x " + std::to_string(arch_.in_channels) + " x " +
                                              std::to_string(kFreqBins) + " x n_t");
}

Tensor Network::encode(const Tensor& x, Cache* cache) const {
  check_input(x);
  Tensor pooled = freq_pool(x, arch_.freq_pool);
  standardize(pooled, input_norm_);
  Tensor a = stem_.forward(pooled);
  relu_inplace(a);
  if (cache != nullptr) {
    cache->pooled = std::move(pooled);
    cache->stem_act = a;
    cache->blocks.clear();
  }
  for (const ResidualBlock& b : blocks_) {
    Tensor h1 = b.conv1.forward(a);
    relu_inplace(h1);
    Tensor z = b.conv2.forward(h1);
    const Tensor p = b.proj.forward(a);
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] += p.v[i];
    relu_inplace(z);
    if (cache != nullptr) cache->blocks.push_back({std::move(a), std::move(h1), z});
    a = std::move(z);
  }
  return a;
}

namespace {

std::vector<double> global_average(const Tensor& a) {
  std::vector<double> emb(static_cast<std::size_t>(a.n) * a.c);
  const double inv = 1.0 / static_cast<double>(a.plane());
  for (int n = 0; n < a.n; ++n)
    for (int c = 0; c < a.c; ++c) {
      const double* src = a.sample(n) + static_cast<std::size_t>(c) * a.plane();
      double s = 0.0;
      for (std::size_t i = 0; i < a.plane(); ++i) s += src[i];
      emb[static_cast<std::size_t>(n) * a.c + c] = s * inv;
    }
  return emb;
}

std::vector<double> head_forward(const HeadLayer& h, const std::vector<double>& emb, int n, int e) {
  std::vector<double> out(static_cast<std::size_t>(n) * h.desc.n_c);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < h.desc.n_c; ++k) {
      double s = h.bias[static_cast<std::size_t>(k)];
      const double* w = h.weight.data() + static_cast<std::size_t>(k) * e;
      const double* x = emb.data() + static_cast<std::size_t>(i) * e;
      for (int j = 0; j < e; ++j) s += w[j] * x[j];
      out[static_cast<std::size_t>(i) * h.desc.n_c + k] = s;
    }
  return out;
}

}  // namespace

std::vector<double> Network::embed(const Tensor& x) const { return global_average(encode(x, nullptr)); }

Outputs Network::forward(const Tensor& x) const {
  const std::vector<double> emb = embed(x);
  Outputs out;
  out.n = x.n;
  for (const HeadLayer& h : heads_) out.heads.push_back(head_forward(h, emb, x.n, arch_.embedding_dim()));
  return out;
}

std::vector<double> softmax_rows(std::span<const double> logits, int c) {
  std::vector<double> p(logits.size());
  const std::size_t rows = logits.size() / static_cast<std::size_t>(c);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * c;
    double* q = p.data() + r * c;
    const double m = *std::max_element(z, z + c);
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += (q[k] = std::exp(z[k] - m));
    for (int k = 0; k < c; ++k) q[k] /= s;
  }
  return p;
}

namespace {

// Per-head loss and, when `grad` is non-null, d(loss)/d(output) (unweighted).
double head_loss(const HeadLayer& h, const std::vector<double>& out, const std::vector<double>& t, int n,
                 std::vector<double>* grad) {
  const int c = h.desc.n_c;
  if (grad != nullptr) grad->assign(out.size(), 0.0);
  if (h.desc.kind == HeadKind::Classification) {
    const std::vector<double> p = softmax_rows(out, c);
    double ce = 0.0;
    for (int i = 0; i < n; ++i) {
      const int k = static_cast<int>(t[static_cast<std::size_t>(i)]);
      if (k < 0 || k >= c) throw Error(ErrorCode::MissingLabel, "class label out of range for head '" + h.desc.id + "'");
      const double* row = out.data() + static_cast<std::size_t>(i) * c;
      const double m = *std::max_element(row, row + c);
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += std::exp(row[j] - m);
      ce += std::log(s) - (row[k] - m);
      if (grad != nullptr) {
        for (int j = 0; j < c; ++j)
          (*grad)[static_cast<std::size_t>(i) * c + j] = (p[static_cast<std::size_t>(i) * c + j] - (j == k)) / n;
      }
    }
    return ce / n;
  }
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = (t[static_cast<std::size_t>(i)] - h.stats.mean) / h.stats.std;
    const double r = out[static_cast<std::size_t>(i)] - z;
    ss += r * r;
  }
  const double rmse = std::sqrt(ss / n);
  if (grad != nullptr && rmse > 0.0) {
    for (int i = 0; i < n; ++i) {
      const double z = (t[static_cast<std::size_t>(i)] - h.stats.mean) / h.stats.std;
      (*grad)[static_cast<std::size_t>(i)] = (out[static_cast<std::size_t>(i)] - z) / (n * rmse);
    }
  }
  return rmse;
}

void check_targets(const std::vector<HeadLayer>& heads, const Targets& t, int n) {
  if (t.size() != heads.size()) throw Error(ErrorCode::MissingLabel, "one target vector per head required");
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (t[h].size() != static_cast<std::size_t>(n))
      throw Error(ErrorCode::MissingLabel, "target count mismatch for head '" + heads[h].desc.id + "'");
    if (heads[h].desc.weight > 0.0)
      for (double v : t[h])
        if (std::isnan(v)) throw Error(ErrorCode::MissingLabel, "missing label for head '" + heads[h].desc.id + "'");
  }
}

}  // namespace

LossResult Network::loss(const Outputs& out, const Targets& targets) const {
  check_targets(heads_, targets, out.n);
  LossResult r;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const bool active = heads_[h].desc.weight > 0.0;
    const double l = active ? head_loss(heads_[h], out.heads[h], targets[h], out.n, nullptr)
                            : std::numeric_limits<double>::quiet_NaN();
    r.per_head.push_back(l);
    if (active) r.total += heads_[h].desc.weight * l;
  }
  return r;
}

LossResult Network::forward_backward(const Tensor& x, const Targets& targets, Outputs* out_copy) {
  check_targets(heads_, targets, x.n);
  Cache cache;
  const Tensor last = encode(x, &cache);
  const std::vector<double> emb = global_average(last);
  const int e = arch_.embedding_dim();
  const int n = x.n;

  Outputs out;
  out.n = n;
  LossResult r;
  std::vector<double> demb(emb.size(), 0.0);
  for (std::size_t hi = 0; hi < heads_.size(); ++hi) {
    HeadLayer& h = heads_[hi];
    out.heads.push_back(head_forward(h, emb, n, e));
    if (!(h.desc.weight > 0.0)) {
      r.per_head.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::vector<double> g;
    const double l = head_loss(h, out.heads.back(), targets[hi], n, &g);
    r.per_head.push_back(l);
    r.total += h.desc.weight * l;
    const int c = h.desc.n_c;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < c; ++k) {
        const double d = h.desc.weight * g[static_cast<std::size_t>(i) * c + k];
        h.grad_bias[static_cast<std::size_t>(k)] += d;
        double* gw = h.grad_weight.data() + static_cast<std::size_t>(k) * e;
        const double* w = h.weight.data() + static_cast<std::size_t>(k) * e;
        const double* xe = emb.data() + static_cast<std::size_t>(i) * e;
        double* de = demb.data() + static_cast<std::size_t>(i) * e;
        for (int j = 0; j < e; ++j) {
          gw[j] += d * xe[j];
          de[j] += d * w[j];
        }
      }
  }
  if (out_copy != nullptr) *out_copy = out;

  Tensor da(last.n, last.c, last.h, last.w);
  const double inv = 1.0 / static_cast<double>(last.plane());
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < last.c; ++c) {
      double* dst = da.sample(i) + static_cast<std::size_t>(c) * last.plane();
      std::fill_n(dst, last.plane(), demb[static_cast<std::size_t>(i) * last.c + c] * inv);
    }
  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    ResidualBlock& b = blocks_[bi];
    const Cache::Block& cb = cache.blocks[bi];
    const Tensor dz = relu_backward(cb.out, da);
    Tensor dh1;
    b.conv2.backward(cb.h1, dz, &dh1);
    Tensor dskip;
    b.proj.backward(cb.in, dz, &dskip);
    const Tensor dz1 = relu_backward(cb.h1, dh1);
    Tensor din;
    b.conv1.backward(cb.in, dz1, &din);
    for (std::size_t i = 0; i < din.v.size(); ++i) din.v[i] += dskip.v[i];
    da = std::move(din);
  }
  stem_.backward(cache.pooled, relu_backward(cache.stem_act, da), nullptr);
  return r;
}

std::vector<bool> Network::relu_pattern(const Tensor& x) const {
  Cache cache;
  encode(x, &cache);
  std::vector<bool> bits;
  auto add = [&bits](const Tensor& t) {
    for (double v : t.v) bits.push_back(v > 0.0);
  };
  add(cache.stem_act);
  for (const Cache::Block& b : cache.blocks) {
    add(b.h1);
    add(b.out);
  }
  return bits;
}

void Network::zero_grad() {
  stem_.zero_grad();
  for (ResidualBlock& b : blocks_) {
    b.conv1.zero_grad();
    b.conv2.zero_grad();
    b.proj.zero_grad();
  }
  for (HeadLayer& h : heads_) {
    std::fill(h.grad_weight.begin(), h.grad_weight.end(), 0.0);
    std::fill(h.grad_bias.begin(), h.grad_bias.end(), 0.0);
  }
}

void Network::calibrate(const Tensor& x) {
  check_input(x);
  Tensor pooled = freq_pool(x, arch_.freq_pool);
  const double count = static_cast<double>(pooled.n) * static_cast<double>(pooled.plane());
  for (int c = 0; c < pooled.c; ++c) {
    double sum = 0.0;
    double sq = 0.0;
    for (int n = 0; n < pooled.n; ++n) {
      const double* p = pooled.sample(n) + static_cast<std::size_t>(c) * pooled.plane();
      for (std::size_t i = 0; i < pooled.plane(); ++i) {
        sum += p[i];
        sq += p[i] * p[i];
      }
    }
    const double mean = sum / count;
    const double sd = std::sqrt(std::max(sq / count - mean * mean, 0.0));
    input_norm_.mean[static_cast<std::size_t>(c)] = mean;
    input_norm_.scale[static_cast<std::size_t>(c)] = sd > 1e-8 ? 1.0 / sd : 1.0;
  }
  standardize(pooled, input_norm_);
  stem_.calibrate(pooled);
  Tensor a = stem_.forward(pooled);
  relu_inplace(a);
  for (ResidualBlock& b : blocks_) {
    b.conv1.calibrate(a);
    Tensor h1 = b.conv1.forward(a);
    relu_inplace(h1);
    b.conv2.calibrate(h1);
    b.proj.calibrate(a);
    Tensor z = b.conv2.forward(h1);
    const Tensor p = b.proj.forward(a);
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] += p.v[i];
    relu_inplace(z);
    a = std::move(z);
  }
}

std::vector<ParamView> Network::parameters() {
  std::vector<ParamView> v;
  auto conv = [&v](const std::string& name, Conv2d& c) {
    v.push_back({name + ".weight", c.weight, c.grad_weight});
    v.push_back({name + ".bias", c.bias, c.grad_bias});
  };
  conv("stem", stem_);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i);
    conv(p + ".conv1", blocks_[i].conv1);
    conv(p + ".conv2", blocks_[i].conv2);
    conv(p + ".proj", blocks_[i].proj);
  }
  for (HeadLayer& h : heads_) {
    v.push_back({"head." + h.desc.id + ".weight", h.weight, h.grad_weight});
    v.push_back({"head." + h.desc.id + ".bias", h.bias, h.grad_bias});
  }
  return v;
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (const ParamView& p : parameters()) n += p.values.size();
  return n;
}

Tensor to_tensor(std::span<const Spectrogram* const> grids, int channels) {
  if (grids.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const int n_t = grids.front()->n_t;
  Tensor t(static_cast<int>(grids.size()), channels, kFreqBins, n_t);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const Spectrogram& g = *grids[i];
    if (g.n_t != n_t || g.cells.size() != static_cast<std::size_t>(kFreqBins) * n_t)
      throw Error(ErrorCode::ShapeMismatch, "all grids in a batch must share n_t");
    for (int c = 0; c < channels; ++c) {
      double* dst = t.sample(static_cast<int>(i)) + static_cast<std::size_t>(c) * t.plane();
      std::copy(g.cells.begin(), g.cells.end(), dst);
    }
  }
  return t;
}

namespace {

void decode_chunk(const Network& net, std::span<const Spectrogram* const> grids, std::size_t offset,
                  Prediction& pred) {
  const Outputs out = net.forward(to_tensor(grids, net.arch().in_channels));
  for (std::size_t h = 0; h < net.heads().size(); ++h) {
    const HeadLayer& hl = net.heads()[h];
    const int c = hl.desc.n_c;
    std::vector<double> v = out.heads[h];
    if (hl.desc.kind == HeadKind::Classification)
      v = softmax_rows(v, c);
    else
      for (double& y : v) y = y * hl.stats.std + hl.stats.mean;
    std::copy(v.begin(), v.end(), pred.heads[h].begin() + static_cast<std::ptrdiff_t>(offset * c));
  }
}

Prediction empty_prediction(const Network& net, std::size_t n) {
  Prediction p;
  p.n = static_cast<int>(n);
  for (const HeadLayer& h : net.heads()) p.heads.emplace_back(n * static_cast<std::size_t>(h.desc.n_c), 0.0);
  return p;
}

}  // namespace

Prediction predict(const Network& net, std::span<const Spectrogram* const> grids, int threads, int batch) {
  if (batch < 1) throw Error(ErrorCode::InvalidSpec, "batch must be >= 1");
  Prediction pred = empty_prediction(net, grids.size());
  const long chunks = static_cast<long>((grids.size() + batch - 1) / batch);
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (long ch = 0; ch < chunks; ++ch) {
    const std::size_t lo = static_cast<std::size_t>(ch) * batch;
    const std::size_t hi = std::min(grids.size(), lo + batch);
    try {
      decode_chunk(net, grids.subspan(lo, hi - lo), lo, pred);
    } catch (...) {
      errors[static_cast<std::size_t>(ch)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
  return pred;
}

Prediction predict_serial(const Network& net, std::span<const Spectrogram* const> grids, int batch) {
  if (batch < 1) throw Error(ErrorCode::InvalidSpec, "batch must be >= 1");
  Prediction pred = empty_prediction(net, grids.size());
  for (std::size_t lo = 0; lo < grids.size(); lo += batch) {
    const std::size_t hi = std::min(grids.size(), lo + batch);
    decode_chunk(net, grids.subspan(lo, hi - lo), lo, pred);
  }
  return pred;
}

}  // namespace gjam::nnet
