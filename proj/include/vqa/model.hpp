#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace vqa {

enum class Variant { tuple_model, q_model };
enum class FeatureMode { attended, holistic, none };  // none = blind

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const char* feature_mode_name(FeatureMode m);
FeatureMode feature_mode_from_name(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::tuple_model;
  FeatureMode feature_mode = FeatureMode::attended;
  int embed_dim = 300;
  int hidden = 256;     // language/image/fusion width
  int image_dim = 0;    // 0 when blind
  double dropout = 0.5;
};

struct Dense {
  int in = 0, out = 0;
  std::vector<double> w, b;    // w is row-major (out x in)
  std::vector<double> gw, gb;
};

// LSTM cell; gate order i, f, g, o stacked along the first axis.
struct Lstm {
  int in = 0, hidden = 0;
  std::vector<double> wx, wh, b;    // (4H x in), (4H x H), (4H)
  std::vector<double> gwx, gwh, gb;
};

struct ParamRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
};

// Two-branch verifier: a language embedding (tuple projection or LSTM final
// state) fused with a projected image embedding by pointwise product, then a
// two-layer head ending in a 2-way softmax (index 0 = "yes").
struct VerifierModel {
  ModelConfig cfg;
  Dense tuple_proj;  // 3E -> H
  Lstm lstm;         // E -> H
  Dense image_proj;  // D -> H
  Dense head1;       // H -> H
  Dense head2;       // H -> 2

  bool blind() const { return cfg.feature_mode == FeatureMode::none; }
  std::vector<ParamRef> params();
  void init(uint64_t seed);
  void zero_grads();
};

VerifierModel make_model(const ModelConfig& cfg, uint64_t seed);

struct Example {
  std::vector<double> tuple_vec;              // 3E, tuple variant
  std::vector<std::vector<double>> q_tokens;  // T x E, q variant
  std::vector<double> image;                  // D, unless blind
  int label = 0;                              // 0 = yes, 1 = no
  std::string question_id;
};

std::array<double, 2> forward(const VerifierModel& m, const Example& ex, bool train_mode,
                              uint64_t dropout_seed);

// Mean cross-entropy over the batch. Fills gradients when compute_grads is
// set; dropout masks depend only on (seed, position in batch) so the same call
// with compute_grads off evaluates the identical stochastic loss.
double batch_loss(VerifierModel& m, const std::vector<const Example*>& batch, bool train_mode,
                  uint64_t seed, bool compute_grads);

struct TrainConfig {
  int batch_size = 32;
  double lr = 0.01;
  double decay = 0.5;
  int decay_every = 10;
  int max_epochs = 100;
  int patience = 5;
  double dropout = 0.5;
  uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;
};

struct TrainResult {
  VerifierModel model;  // best-validation snapshot
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Plain SGD with per-epoch shuffling, step decay, and early stopping on
// validation loss. Aborts with a diagnostic if the loss goes non-finite.
TrainResult train(VerifierModel model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const TrainConfig& cfg);

double dataset_loss(const VerifierModel& m, const std::vector<Example>& data);
double dataset_accuracy(const VerifierModel& m, const std::vector<Example>& data);

std::array<double, 2> ensemble_predict(const std::array<double, 2>& a,
                                       const std::array<double, 2>& b);
std::string predict_answer(const std::array<double, 2>& probs);

void save_model(const VerifierModel& m, const std::string& path,
                const std::string& provenance_header = "");
VerifierModel load_model(const std::string& path);

std::string format_train_log(const std::vector<EpochLog>& log);

}  // namespace vqa
