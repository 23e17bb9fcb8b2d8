#include "vqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vqa/util.hpp"

namespace vqa {

const char* variant_name(Variant v) { return v == Variant::tuple_model ? "tuple" : "q"; }

Variant variant_from_name(const std::string& name) {
  if (name == "tuple") return Variant::tuple_model;
  if (name == "q") return Variant::q_model;
  throw std::runtime_error("unknown variant: " + name);
}

const char* feature_mode_name(FeatureMode m) {
  switch (m) {
    case FeatureMode::attended: return "attended";
    case FeatureMode::holistic: return "holistic";
    case FeatureMode::none: return "none";
  }
  return "?";
}

FeatureMode feature_mode_from_name(const std::string& name) {
  if (name == "attended") return FeatureMode::attended;
  if (name == "holistic") return FeatureMode::holistic;
  if (name == "none") return FeatureMode::none;
  throw std::runtime_error("unknown feature mode: " + name);
}

namespace {

void affine(const std::vector<double>& w, const std::vector<double>& b, int out, int in,
            const double* x, double* y) {
  for (int r = 0; r < out; ++r) {
    const double* row = w.data() + static_cast<size_t>(r) * static_cast<size_t>(in);
    double acc = b[static_cast<size_t>(r)];
    for (int c = 0; c < in; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// gw += dy x^T ; gb += dy ; dx += W^T dy (dx may be null)
void affine_backward(const std::vector<double>& w, std::vector<double>& gw,
                     std::vector<double>& gb, int out, int in, const double* x, const double* dy,
                     double* dx) {
  for (int r = 0; r < out; ++r) {
    double d = dy[r];
    gb[static_cast<size_t>(r)] += d;
    double* grow = gw.data() + static_cast<size_t>(r) * static_cast<size_t>(in);
    const double* wrow = w.data() + static_cast<size_t>(r) * static_cast<size_t>(in);
    if (dx) {
      for (int c = 0; c < in; ++c) {
        grow[c] += d * x[c];
        dx[c] += wrow[c] * d;
      }
    } else {
      for (int c = 0; c < in; ++c) grow[c] += d * x[c];
    }
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void init_dense(Dense& d, int out, int in, std::mt19937_64& rng) {
  d.in = in;
  d.out = out;
  d.w.assign(static_cast<size_t>(out) * static_cast<size_t>(in), 0.0);
  d.b.assign(static_cast<size_t>(out), 0.0);
  d.gw.assign(d.w.size(), 0.0);
  d.gb.assign(d.b.size(), 0.0);
  double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : d.w) v = u(rng);
}

void init_lstm(Lstm& l, int hidden, int in, std::mt19937_64& rng) {
  l.in = in;
  l.hidden = hidden;
  l.wx.assign(static_cast<size_t>(4 * hidden) * static_cast<size_t>(in), 0.0);
  l.wh.assign(static_cast<size_t>(4 * hidden) * static_cast<size_t>(hidden), 0.0);
  l.b.assign(static_cast<size_t>(4 * hidden), 0.0);
  l.gwx.assign(l.wx.size(), 0.0);
  l.gwh.assign(l.wh.size(), 0.0);
  l.gb.assign(l.b.size(), 0.0);
  double ax = std::sqrt(6.0 / static_cast<double>(in + 4 * hidden));
  double ah = std::sqrt(6.0 / static_cast<double>(hidden + 4 * hidden));
  std::uniform_real_distribution<double> ux(-ax, ax), uh(-ah, ah);
  for (auto& v : l.wx) v = ux(rng);
  for (auto& v : l.wh) v = uh(rng);
}

}  // namespace

std::vector<ParamRef> VerifierModel::params() {
  std::vector<ParamRef> out;
  if (cfg.variant == Variant::tuple_model) {
    out.push_back({"tuple_proj.w", &tuple_proj.w, &tuple_proj.gw});
    out.push_back({"tuple_proj.b", &tuple_proj.b, &tuple_proj.gb});
  } else {
    out.push_back({"lstm.wx", &lstm.wx, &lstm.gwx});
    out.push_back({"lstm.wh", &lstm.wh, &lstm.gwh});
    out.push_back({"lstm.b", &lstm.b, &lstm.gb});
  }
  if (!blind()) {
    out.push_back({"image_proj.w", &image_proj.w, &image_proj.gw});
    out.push_back({"image_proj.b", &image_proj.b, &image_proj.gb});
  }
  out.push_back({"head1.w", &head1.w, &head1.gw});
  out.push_back({"head1.b", &head1.b, &head1.gb});
  out.push_back({"head2.w", &head2.w, &head2.gw});
  out.push_back({"head2.b", &head2.b, &head2.gb});
  return out;
}

void VerifierModel::init(uint64_t seed) {
  auto rng = make_rng(derive_seed(seed, "model-init"));
  int h = cfg.hidden;
  if (cfg.variant == Variant::tuple_model)
    init_dense(tuple_proj, h, 3 * cfg.embed_dim, rng);
  else
    init_lstm(lstm, h, cfg.embed_dim, rng);
  if (!blind()) init_dense(image_proj, h, cfg.image_dim, rng);
  init_dense(head1, h, h, rng);
  init_dense(head2, 2, h, rng);
}

void VerifierModel::zero_grads() {
  for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

VerifierModel make_model(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.feature_mode != FeatureMode::none && cfg.image_dim <= 0)
    throw std::runtime_error("make_model: image_dim required unless the model is blind");
  VerifierModel m;
  m.cfg = cfg;
  m.init(seed);
  return m;
}

namespace {

struct LstmCache {
  std::vector<std::vector<double>> gates;  // per step: 4H activations (i,f,g,o)
  std::vector<std::vector<double>> c, h, tanh_c;
};

struct ForwardCache {
  std::vector<double> lang;        // language embedding L (H)
  std::vector<double> img;         // image embedding V (H)
  std::vector<double> fused;       // F before dropout
  std::vector<double> mask1;       // dropout mask over F
  std::vector<double> fused_d;     // F after dropout
  std::vector<double> h1;          // tanh output of head1
  std::vector<double> mask2;
  std::vector<double> h1_d;
  std::array<double, 2> probs{0.0, 0.0};
  LstmCache lstm;
};

void run_lstm(const Lstm& l, const std::vector<std::vector<double>>& xs, LstmCache& cache,
              std::vector<double>& h_out) {
  int h = l.hidden;
  std::vector<double> hprev(static_cast<size_t>(h), 0.0);
  std::vector<double> cprev(static_cast<size_t>(h), 0.0);
  cache.gates.clear();
  cache.c.clear();
  cache.h.clear();
  cache.tanh_c.clear();
  std::vector<double> z(static_cast<size_t>(4 * h));
  for (const auto& x : xs) {
    affine(l.wx, l.b, 4 * h, l.in, x.data(), z.data());
    // add Wh * hprev
    for (int r = 0; r < 4 * h; ++r) {
      const double* row = l.wh.data() + static_cast<size_t>(r) * static_cast<size_t>(h);
      double acc = z[static_cast<size_t>(r)];
      for (int c = 0; c < h; ++c) acc += row[c] * hprev[static_cast<size_t>(c)];
      z[static_cast<size_t>(r)] = acc;
    }
    std::vector<double> gates(static_cast<size_t>(4 * h));
    std::vector<double> ct(static_cast<size_t>(h)), ht(static_cast<size_t>(h)),
        tct(static_cast<size_t>(h));
    for (int j = 0; j < h; ++j) {
      double ig = sigmoid(z[static_cast<size_t>(j)]);
      double fg = sigmoid(z[static_cast<size_t>(h + j)]);
      double gg = std::tanh(z[static_cast<size_t>(2 * h + j)]);
      double og = sigmoid(z[static_cast<size_t>(3 * h + j)]);
      gates[static_cast<size_t>(j)] = ig;
      gates[static_cast<size_t>(h + j)] = fg;
      gates[static_cast<size_t>(2 * h + j)] = gg;
      gates[static_cast<size_t>(3 * h + j)] = og;
      double c = fg * cprev[static_cast<size_t>(j)] + ig * gg;
      ct[static_cast<size_t>(j)] = c;
      double tc = std::tanh(c);
      tct[static_cast<size_t>(j)] = tc;
      ht[static_cast<size_t>(j)] = og * tc;
    }
    cache.gates.push_back(std::move(gates));
    cache.c.push_back(ct);
    cache.tanh_c.push_back(std::move(tct));
    cache.h.push_back(ht);
    hprev = std::move(ht);
    cprev = std::move(ct);
  }
  h_out = hprev;
}

// dh_last flows back through every step; returns nothing, accumulates grads.
void lstm_backward(Lstm& l, const std::vector<std::vector<double>>& xs, const LstmCache& cache,
                   std::vector<double> dh) {
  int h = l.hidden;
  int steps = static_cast<int>(xs.size());
  std::vector<double> dc(static_cast<size_t>(h), 0.0);
  std::vector<double> dz(static_cast<size_t>(4 * h));
  for (int t = steps - 1; t >= 0; --t) {
    const auto& gates = cache.gates[static_cast<size_t>(t)];
    const auto& tct = cache.tanh_c[static_cast<size_t>(t)];
    const std::vector<double>* cprev = t > 0 ? &cache.c[static_cast<size_t>(t - 1)] : nullptr;
    const std::vector<double>* hprev = t > 0 ? &cache.h[static_cast<size_t>(t - 1)] : nullptr;
    for (int j = 0; j < h; ++j) {
      double ig = gates[static_cast<size_t>(j)];
      double fg = gates[static_cast<size_t>(h + j)];
      double gg = gates[static_cast<size_t>(2 * h + j)];
      double og = gates[static_cast<size_t>(3 * h + j)];
      double tc = tct[static_cast<size_t>(j)];
      double dcj = dc[static_cast<size_t>(j)] + dh[static_cast<size_t>(j)] * og * (1.0 - tc * tc);
      double cp = cprev ? (*cprev)[static_cast<size_t>(j)] : 0.0;
      dz[static_cast<size_t>(j)] = dcj * gg * ig * (1.0 - ig);
      dz[static_cast<size_t>(h + j)] = dcj * cp * fg * (1.0 - fg);
      dz[static_cast<size_t>(2 * h + j)] = dcj * ig * (1.0 - gg * gg);
      dz[static_cast<size_t>(3 * h + j)] =
          dh[static_cast<size_t>(j)] * tc * og * (1.0 - og);
      dc[static_cast<size_t>(j)] = dcj * fg;
    }
    // parameter grads
    const auto& x = xs[static_cast<size_t>(t)];
    for (int r = 0; r < 4 * h; ++r) {
      double d = dz[static_cast<size_t>(r)];
      l.gb[static_cast<size_t>(r)] += d;
      double* gxrow = l.gwx.data() + static_cast<size_t>(r) * static_cast<size_t>(l.in);
      for (int c = 0; c < l.in; ++c) gxrow[c] += d * x[static_cast<size_t>(c)];
      if (hprev) {
        double* ghrow = l.gwh.data() + static_cast<size_t>(r) * static_cast<size_t>(h);
        for (int c = 0; c < h; ++c) ghrow[c] += d * (*hprev)[static_cast<size_t>(c)];
      }
    }
    // dh for the previous step
    std::fill(dh.begin(), dh.end(), 0.0);
    if (t > 0) {
      for (int r = 0; r < 4 * h; ++r) {
        double d = dz[static_cast<size_t>(r)];
        const double* row = l.wh.data() + static_cast<size_t>(r) * static_cast<size_t>(h);
        for (int c = 0; c < h; ++c) dh[static_cast<size_t>(c)] += row[c] * d;
      }
    }
  }
}

void dropout_mask(std::vector<double>& mask, size_t n, double rate, std::mt19937_64& rng) {
  mask.assign(n, 1.0);
  if (rate <= 0.0) return;
  double keep = 1.0 - rate;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& m : mask) m = u(rng) < keep ? 1.0 / keep : 0.0;
}

std::array<double, 2> forward_impl(const VerifierModel& m, const Example& ex, bool train_mode,
                                   std::mt19937_64& mask_rng, ForwardCache* cache) {
  int h = m.cfg.hidden;
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  if (m.cfg.variant == Variant::tuple_model) {
    if (static_cast<int>(ex.tuple_vec.size()) != m.tuple_proj.in)
      throw std::runtime_error("forward: tuple vector has dimension " +
                               std::to_string(ex.tuple_vec.size()) + ", model expects " +
                               std::to_string(m.tuple_proj.in));
    c.lang.resize(static_cast<size_t>(h));
    affine(m.tuple_proj.w, m.tuple_proj.b, h, m.tuple_proj.in, ex.tuple_vec.data(),
           c.lang.data());
    for (auto& v : c.lang) v = std::tanh(v);
  } else {
    for (const auto& x : ex.q_tokens)
      if (static_cast<int>(x.size()) != m.lstm.in)
        throw std::runtime_error("forward: token embedding dimension mismatch");
    run_lstm(m.lstm, ex.q_tokens, c.lstm, c.lang);
    if (c.lang.empty()) c.lang.assign(static_cast<size_t>(h), 0.0);  // empty question
  }

  if (!m.blind()) {
    if (static_cast<int>(ex.image.size()) != m.image_proj.in)
      throw std::runtime_error("forward: image feature dimension " +
                               std::to_string(ex.image.size()) + ", model expects " +
                               std::to_string(m.image_proj.in));
    c.img.resize(static_cast<size_t>(h));
    affine(m.image_proj.w, m.image_proj.b, h, m.image_proj.in, ex.image.data(), c.img.data());
    for (auto& v : c.img) v = std::tanh(v);
    c.fused.resize(static_cast<size_t>(h));
    for (int j = 0; j < h; ++j)
      c.fused[static_cast<size_t>(j)] = c.lang[static_cast<size_t>(j)] * c.img[static_cast<size_t>(j)];
  } else {
    c.fused = c.lang;
  }

  double rate = train_mode ? m.cfg.dropout : 0.0;
  dropout_mask(c.mask1, static_cast<size_t>(h), rate, mask_rng);
  c.fused_d.resize(static_cast<size_t>(h));
  for (int j = 0; j < h; ++j)
    c.fused_d[static_cast<size_t>(j)] = c.fused[static_cast<size_t>(j)] * c.mask1[static_cast<size_t>(j)];

  c.h1.resize(static_cast<size_t>(h));
  affine(m.head1.w, m.head1.b, h, h, c.fused_d.data(), c.h1.data());
  for (auto& v : c.h1) v = std::tanh(v);
  dropout_mask(c.mask2, static_cast<size_t>(h), rate, mask_rng);
  c.h1_d.resize(static_cast<size_t>(h));
  for (int j = 0; j < h; ++j)
    c.h1_d[static_cast<size_t>(j)] = c.h1[static_cast<size_t>(j)] * c.mask2[static_cast<size_t>(j)];

  double logits[2];
  affine(m.head2.w, m.head2.b, 2, h, c.h1_d.data(), logits);
  double mx = std::max(logits[0], logits[1]);
  double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
  c.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return c.probs;
}

void backward_impl(VerifierModel& m, const Example& ex, const ForwardCache& c, double scale) {
  int h = m.cfg.hidden;
  // softmax + cross-entropy
  double dlogits[2] = {c.probs[0] * scale, c.probs[1] * scale};
  dlogits[ex.label] -= scale;

  std::vector<double> dh1_d(static_cast<size_t>(h), 0.0);
  affine_backward(m.head2.w, m.head2.gw, m.head2.gb, 2, h, c.h1_d.data(), dlogits, dh1_d.data());

  std::vector<double> dpre1(static_cast<size_t>(h));
  for (int j = 0; j < h; ++j) {
    double dh1 = dh1_d[static_cast<size_t>(j)] * c.mask2[static_cast<size_t>(j)];
    dpre1[static_cast<size_t>(j)] =
        dh1 * (1.0 - c.h1[static_cast<size_t>(j)] * c.h1[static_cast<size_t>(j)]);
  }
  std::vector<double> dfused_d(static_cast<size_t>(h), 0.0);
  affine_backward(m.head1.w, m.head1.gw, m.head1.gb, h, h, c.fused_d.data(), dpre1.data(),
                  dfused_d.data());

  std::vector<double> dfused(static_cast<size_t>(h));
  for (int j = 0; j < h; ++j)
    dfused[static_cast<size_t>(j)] = dfused_d[static_cast<size_t>(j)] * c.mask1[static_cast<size_t>(j)];

  std::vector<double> dlang(static_cast<size_t>(h));
  if (!m.blind()) {
    std::vector<double> dimg(static_cast<size_t>(h));
    for (int j = 0; j < h; ++j) {
      dlang[static_cast<size_t>(j)] = dfused[static_cast<size_t>(j)] * c.img[static_cast<size_t>(j)];
      dimg[static_cast<size_t>(j)] = dfused[static_cast<size_t>(j)] * c.lang[static_cast<size_t>(j)];
    }
    std::vector<double> dpre_img(static_cast<size_t>(h));
    for (int j = 0; j < h; ++j)
      dpre_img[static_cast<size_t>(j)] =
          dimg[static_cast<size_t>(j)] *
          (1.0 - c.img[static_cast<size_t>(j)] * c.img[static_cast<size_t>(j)]);
    affine_backward(m.image_proj.w, m.image_proj.gw, m.image_proj.gb, h, m.image_proj.in,
                    ex.image.data(), dpre_img.data(), nullptr);
  } else {
    dlang = dfused;
  }

  if (m.cfg.variant == Variant::tuple_model) {
    std::vector<double> dpre_lang(static_cast<size_t>(h));
    for (int j = 0; j < h; ++j)
      dpre_lang[static_cast<size_t>(j)] =
          dlang[static_cast<size_t>(j)] *
          (1.0 - c.lang[static_cast<size_t>(j)] * c.lang[static_cast<size_t>(j)]);
    affine_backward(m.tuple_proj.w, m.tuple_proj.gw, m.tuple_proj.gb, h, m.tuple_proj.in,
                    ex.tuple_vec.data(), dpre_lang.data(), nullptr);
  } else if (!ex.q_tokens.empty()) {
    lstm_backward(m.lstm, ex.q_tokens, c.lstm, dlang);
  }
}

}  // namespace

std::array<double, 2> forward(const VerifierModel& m, const Example& ex, bool train_mode,
                              uint64_t dropout_seed) {
  auto rng = make_rng(derive_seed(dropout_seed, "dropout"));
  return forward_impl(m, ex, train_mode, rng, nullptr);
}

double batch_loss(VerifierModel& m, const std::vector<const Example*>& batch, bool train_mode,
                  uint64_t seed, bool compute_grads) {
  if (batch.empty()) throw std::runtime_error("batch_loss: empty batch");
  double loss = 0.0;
  double scale = 1.0 / static_cast<double>(batch.size());
  ForwardCache cache;
  for (size_t i = 0; i < batch.size(); ++i) {
    auto rng = make_rng(derive_seed(seed, "dropout:" + std::to_string(i)));
    auto probs = forward_impl(m, *batch[i], train_mode, rng, &cache);
    double p = std::max(probs[static_cast<size_t>(batch[i]->label)], 1e-300);
    loss -= std::log(p) * scale;
    if (compute_grads) backward_impl(m, *batch[i], cache, scale);
  }
  return loss;
}

double dataset_loss(const VerifierModel& m, const std::vector<Example>& data) {
  double loss = 0.0;
  for (const auto& ex : data) {
    auto probs = forward(m, ex, false, 0);
    loss -= std::log(std::max(probs[static_cast<size_t>(ex.label)], 1e-300));
  }
  return data.empty() ? 0.0 : loss / static_cast<double>(data.size());
}

double dataset_accuracy(const VerifierModel& m, const std::vector<Example>& data) {
  if (data.empty()) return 0.0;
  int correct = 0;
  for (const auto& ex : data) {
    auto probs = forward(m, ex, false, 0);
    int pred = probs[0] >= probs[1] ? 0 : 1;
    if (pred == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(VerifierModel model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& cfg) {
  if (train_set.empty() || val_set.empty())
    throw std::runtime_error("train: train and validation sets must be non-empty");
  model.cfg.dropout = cfg.dropout;

  TrainResult result;
  result.best_val_loss = dataset_loss(model, val_set);
  result.best_epoch = 0;
  result.model = model;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double lr = cfg.lr * std::pow(cfg.decay, (epoch - 1) / cfg.decay_every);
    auto rng = make_rng(derive_seed(cfg.seed, "shuffle:" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double train_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<const Example*> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      model.zero_grads();
      uint64_t bseed =
          derive_seed(cfg.seed, "batch:" + std::to_string(epoch) + ":" + std::to_string(start));
      double loss = batch_loss(model, batch, true, bseed, true);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                 std::to_string(epoch));
      train_loss += loss;
      ++batches;
      for (auto& p : model.params())
        for (size_t i = 0; i < p.value->size(); ++i) (*p.value)[i] -= lr * (*p.grad)[i];
    }
    train_loss /= static_cast<double>(batches);

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = train_loss;
    log.train_acc = dataset_accuracy(model, train_set);
    log.val_loss = dataset_loss(model, val_set);
    log.val_acc = dataset_accuracy(model, val_set);
    result.log.push_back(log);
    if (!std::isfinite(log.val_loss))
      throw std::runtime_error("train: validation loss diverged at epoch " +
                               std::to_string(epoch));

    if (log.val_loss < result.best_val_loss - 1e-12) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = epoch;
      result.model = model;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best > cfg.patience) break;
    }
  }
  return result;
}

std::array<double, 2> ensemble_predict(const std::array<double, 2>& a,
                                       const std::array<double, 2>& b) {
  std::array<double, 2> out{std::max(a[0] * b[0], 1e-12), std::max(a[1] * b[1], 1e-12)};
  double s = out[0] + out[1];
  out[0] /= s;
  out[1] /= s;
  return out;
}

std::string predict_answer(const std::array<double, 2>& probs) {
  return probs[0] >= probs[1] ? "yes" : "no";
}

void save_model(const VerifierModel& m, const std::string& path,
                const std::string& provenance_header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << "absvqa-model v1\n" << provenance_header;
  out << "variant " << variant_name(m.cfg.variant) << '\n';
  out << "feature_mode " << feature_mode_name(m.cfg.feature_mode) << '\n';
  out << "embed_dim " << m.cfg.embed_dim << '\n';
  out << "hidden " << m.cfg.hidden << '\n';
  out << "image_dim " << m.cfg.image_dim << '\n';
  out << "dropout " << fmt_double(m.cfg.dropout) << '\n';
  auto& mut = const_cast<VerifierModel&>(m);
  for (const auto& p : mut.params()) out << "tensor " << p.name << ' ' << p.value->size() << '\n';
  out << "end_header\n";
  for (const auto& p : mut.params())
    out.write(reinterpret_cast<const char*>(p.value->data()),
              static_cast<std::streamsize>(p.value->size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

VerifierModel load_model(const std::string& path) {
  std::string all = read_text_file(path);
  const std::string sentinel = "end_header\n";
  auto pos = all.find(sentinel);
  if (pos == std::string::npos) throw std::runtime_error(path + ": missing model header");
  std::istringstream header(all.substr(0, pos));
  ModelConfig cfg;
  std::vector<std::pair<std::string, size_t>> tensors;
  std::string line;
  while (std::getline(header, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string key;
    iss >> key;
    if (key == "variant") {
      std::string v;
      iss >> v;
      cfg.variant = variant_from_name(v);
    } else if (key == "feature_mode") {
      std::string v;
      iss >> v;
      cfg.feature_mode = feature_mode_from_name(v);
    } else if (key == "embed_dim") {
      iss >> cfg.embed_dim;
    } else if (key == "hidden") {
      iss >> cfg.hidden;
    } else if (key == "image_dim") {
      iss >> cfg.image_dim;
    } else if (key == "dropout") {
      iss >> cfg.dropout;
    } else if (key == "tensor") {
      std::string name;
      size_t n;
      iss >> name >> n;
      tensors.emplace_back(name, n);
    }
  }
  VerifierModel m;
  m.cfg = cfg;
  m.init(0);
  size_t at = pos + sentinel.size();
  auto refs = m.params();
  if (refs.size() != tensors.size())
    throw std::runtime_error(path + ": tensor list does not match model configuration");
  for (size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].name != tensors[i].first || refs[i].value->size() != tensors[i].second)
      throw std::runtime_error(path + ": tensor " + tensors[i].first +
                               " does not match expected " + refs[i].name);
    size_t bytes = tensors[i].second * sizeof(double);
    if (at + bytes > all.size()) throw std::runtime_error(path + ": truncated parameter data");
    std::memcpy(refs[i].value->data(), all.data() + at, bytes);
    at += bytes;
  }
  if (at != all.size()) throw std::runtime_error(path + ": trailing bytes after parameters");
  return m;
}

std::string format_train_log(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch\tlr\ttrain_loss\ttrain_acc\tval_loss\tval_acc\n";
  for (const auto& e : log)
    out << e.epoch << '\t' << fmt_double(e.lr) << '\t' << fmt_double(e.train_loss) << '\t'
        << fmt_double(e.train_acc) << '\t' << fmt_double(e.val_loss) << '\t'
        << fmt_double(e.val_acc) << '\n';
  return out.str();
}

}  // namespace vqa
