#pragma once

// Small post-LN transformer encoder over EncodedInput, with a 3-way sigmoid
// head on the [CLS] state. Parameters and math are templated so the same
// code runs in float (training) and double (gradient checks).

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ompadvisor/augment.hpp"
#include "ompadvisor/encode.hpp"

namespace ompadvisor {

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int d_ff = 256;
    int max_len = 290;  // 1 + max_code + 1 + max_dfg at the default encode sizes
    float dropout_rate = 0.1f;
    int vocab_size = 0;
    std::uint64_t seed = 1;
    bool scale_by_d = false;  // divide scores by d_head instead of sqrt(d_head)

    int d_head() const { return d_model / n_heads; }
    void validate() const;  // throws std::invalid_argument
};

nlohmann::ordered_json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class T>
struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::vector<T> data;

    std::size_t size() const { return data.size(); }
};

// Tensor slots, in declaration (and serialization) order.
namespace slot {
inline constexpr int tok_emb = 0;
inline constexpr int pos_emb = 1;
inline constexpr int emb_ln_g = 2;
inline constexpr int emb_ln_b = 3;
inline constexpr int layer_base = 4;
inline constexpr int per_layer = 16;
enum Layer { Wq, bq, Wk, bk, Wv, bv, Wo, bo, ln1_g, ln1_b, W1, b1, W2, b2, ln2_g, ln2_b };
inline constexpr int layer(int l, Layer t) { return layer_base + l * per_layer + t; }
inline constexpr int head_w(int n_layers) { return layer_base + n_layers * per_layer; }
inline constexpr int head_b(int n_layers) { return head_w(n_layers) + 1; }
}  // namespace slot

template <class T>
struct ModelParams {
    std::vector<Tensor<T>> tensors;

    Tensor<T>& operator[](int i) { return tensors[static_cast<std::size_t>(i)]; }
    const Tensor<T>& operator[](int i) const { return tensors[static_cast<std::size_t>(i)]; }
    std::size_t count() const;
    bool all_finite() const;
    void zero();
};

// Random N(0, weight_std) weights and embeddings, zero biases, unit LN scales.
template <class T>
ModelParams<T> init_params(const ModelConfig& config, double weight_std = 0.02);

// Weight scale for gradient checks, about 0.3 at d_model 8. At the training
// init the attention-score gradients are near 1e-8 and central differences
// lose most of their digits.
inline double grad_check_weight_std(const ModelConfig& config) {
    return 0.85 / std::sqrt(static_cast<double>(config.d_model));
}

// Same shapes as the model, all zeros.
template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

template <class T, class U>
ModelParams<T> cast_params(const ModelParams<U>& params);

struct Prediction {
    std::array<double, 3> probs{};
    std::array<int, 3> labels{};
    bool gated = false;  // clause labels were zeroed because pragma was 0
};

Prediction make_prediction(const std::array<double, 3>& probs, bool gate, double threshold = 0.5);

// Per-step dropout control. Off when rate is 0 or `training` is false.
struct DropoutSpec {
    bool training = false;
    std::uint64_t seed = 0;
};

template <class T>
struct ForwardResult {
    std::array<T, 3> logits{};
    std::array<T, 3> probs{};
    // attention[layer][head] is an L×L row-stochastic matrix.
    std::vector<std::vector<std::vector<T>>> attention;
    std::vector<T> hidden;  // final L×d_model states
};

template <class T>
ForwardResult<T> forward(const ModelParams<T>& params, const ModelConfig& config, const EncodedInput& input,
                         const DropoutSpec& dropout = {});

// Mean binary cross-entropy over the 3 labels, probabilities clamped to
// [1e-7, 1 - 1e-7].
double compute_loss(const std::array<double, 3>& probs, const std::array<int, 3>& labels);

// Loss for one sample; adds d(loss)/d(params) into `grads`.
template <class T>
T forward_backward(const ModelParams<T>& params, const ModelConfig& config, const EncodedInput& input,
                   const DropoutSpec& dropout, ModelParams<T>& grads);

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
class Adam {
public:
    Adam(const ModelParams<T>& params, AdamOptions options);
    void step(ModelParams<T>& params, const ModelParams<T>& grads);
    long steps() const { return t_; }

private:
    AdamOptions options_;
    ModelParams<T> m_;
    ModelParams<T> v_;
    long t_ = 0;
};

struct GradCheckGroup {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::vector<GradCheckGroup> groups;
};

double relative_error(double analytic, double numeric);

// Random input of length <= config.max_len over config.vocab_size ids with a
// random DFG block; `all_open` replaces the mask with zeros.
EncodedInput random_input(const ModelConfig& config, std::uint64_t seed, bool all_open);

// Central differences (h = 1e-5) on up to `per_group` random coordinates of
// every tensor; dropout off.
GradCheckReport check_gradients(const ModelParams<double>& params, const ModelConfig& config,
                                const EncodedInput& input, std::uint64_t seed, std::size_t per_group = 20);

// Training -------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double aug_fraction = 0.0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double valid_accuracy = 0.0;            // mean of the three label accuracies
    std::array<double, 3> valid_label_accuracy{};
    double seconds = 0.0;  // wall time, kept out of history.json
};

nlohmann::ordered_json to_json(const EpochRecord& record);

struct TrainOptions {
    int epochs = 10;
    AugMode aug = AugMode::curriculum;
    std::uint64_t seed = 1;
    int batch_size = 32;
    AdamOptions adam;
    EncodeOptions encode;
    int min_freq = 2;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainedModel {
    ModelConfig config;
    EncodeOptions encode;
    Vocabulary vocab;
    ModelParams<float> params;
};

struct TrainResult {
    TrainedModel model;
    std::vector<EpochRecord> history;
    EncodeStats encode_stats;
};

// Uses samples with split train and valid. `config.vocab_size` and
// `config.max_len` are filled in from the vocabulary and encode options.
TrainResult train(const std::vector<Sample>& corpus, ModelConfig config, const TrainOptions& options);

std::array<double, 3> predict_probs(const TrainedModel& model, const Sample& sample);

struct LoopPrediction {
    int line = 0;
    std::string loop_code;
    Prediction prediction;
};

// Extracts every loop from `source`, then encodes and scores it. Throws
// DataError naming `path` when the file does not parse.
std::vector<LoopPrediction> predict_source(const TrainedModel& model, const std::string& source,
                                           const std::string& path, bool gate, bool with_scope);

// model.bin ------------------------------------------------------------------

void save_params(const std::filesystem::path& file, const ModelConfig& config, const ModelParams<float>& params);
ModelParams<float> load_params(const std::filesystem::path& file, ModelConfig& config);

// Model directory: model.bin, vocab.json, encoder.json.
void save_model(const std::filesystem::path& dir, const TrainedModel& model, bool with_scope);
TrainedModel load_model(const std::filesystem::path& dir, bool* with_scope = nullptr);

}  // namespace ompadvisor
