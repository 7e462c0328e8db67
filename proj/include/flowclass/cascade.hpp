#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowclass/features.hpp"
#include "flowclass/nn_core.hpp"
#include "flowclass/rng.hpp"

namespace flowclass {

// The full LSTM-CNN cascade plus the two ablations used as neural baselines:
// LstmOnly drops the conv/pool stage (last hidden state feeds the dense
// layer), CnnOnly feeds the raw feature window straight into the conv stage.
enum class Architecture { LstmCnnCascade, LstmOnly, CnnOnly };

std::string_view to_string(Architecture arch);
Architecture architecture_from_string(std::string_view name);

struct CascadeConfig {
    Architecture arch = Architecture::LstmCnnCascade;
    std::size_t num_features = 6;
    std::size_t window = 6;        // t
    std::size_t lstm_hidden = 32;  // first layer width
    std::size_t lstm_hidden2 = 0;  // 0 -> same as lstm_hidden
    std::size_t conv_filters = 32;
    std::size_t kernel = 2;  // square kernels, stride fixed at 1
    std::size_t pool = 2;    // pool size == pool stride
    double keep_prob = 0.8;
    std::size_t num_classes = 0;  // 0 -> inferred from training labels
    double learning_rate = 0.05;
    double l2_lambda = 0.01;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    double early_stop_min_delta = 1e-5;
    std::size_t early_stop_patience = 10;  // 0 disables early stopping
    std::uint64_t seed = 1;

    std::size_t hidden2() const { return lstm_hidden2 ? lstm_hidden2 : lstm_hidden; }
    void validate() const;  // throws ParamError

    bool operator==(const CascadeConfig&) const = default;
};

struct EpochStats {
    double loss = 0;      // mean batch loss (cross-entropy + L2 term)
    double accuracy = 0;  // running training accuracy
};

struct CascadeModel {
    CascadeConfig config;
    nn::LstmCellParams lstm1, lstm2;
    nn::Tensor conv_kernels;  // filters x k x k
    nn::Tensor conv_bias;     // filters
    nn::Tensor dense_w;       // classes x flat
    nn::Tensor dense_b;       // classes
    ScaleParams scaler;       // fitted on the training windows
    std::vector<EpochStats> trace;
    std::size_t epochs_run = 0;
    double final_loss = 0;

    static CascadeModel init(const CascadeConfig& config, Rng& rng);

    // all matrices the L2 term covers (biases excluded)
    std::vector<const nn::Tensor*> l2_weights() const;

    bool operator==(const CascadeModel&) const;
};

// Parameter-shaped gradient accumulator.
struct CascadeGrads {
    nn::LstmCellParams lstm1, lstm2;
    nn::Tensor conv_kernels, conv_bias, dense_w, dense_b;

    static CascadeGrads zeros_like(const CascadeModel& model);
    void add_scaled(const CascadeGrads& other, double factor);
    void scale(double factor);
};

// Converts one (already scaled) sample into the per-step input tensors;
// throws ShapeError when the sample does not match the config.
std::vector<nn::Tensor> sample_inputs(const CascadeConfig& config, const WindowedSample& sample);

// Class probabilities for scaled inputs. `rng` is only consulted for dropout
// in training mode; inference is a pure function of (parameters, inputs).
nn::Tensor forward_scaled(const CascadeModel& model, const std::vector<nn::Tensor>& inputs,
                          bool training, Rng* rng);

// Probabilities for a raw sample (the model's scaler is applied first).
nn::Tensor forward_probs(const CascadeModel& model, const WindowedSample& sample, bool training,
                         Rng* rng);

// Cross-entropy of one scaled sample plus parameter gradients (L2 excluded;
// see add_l2_gradients). label_index is 0-based.
double sample_loss_and_gradients(const CascadeModel& model, const std::vector<nn::Tensor>& inputs,
                                 std::size_t label_index, bool training, Rng* rng,
                                 CascadeGrads& grads);

// Adds the 2*lambda*W terms the L2 penalty contributes.
void add_l2_gradients(const CascadeModel& model, CascadeGrads& grads);

// lambda * sum of squared weight-matrix entries for the current parameters.
double model_l2(const CascadeModel& model);

// Mini-batch SGD over the dataset (which is the training set; the scaler is
// fitted on it). Deterministic given (dataset order, config.seed). Throws
// DataError for labels outside [1, num_classes] and TrainingError if the
// loss stops being finite.
CascadeModel train_cascade(const std::vector<WindowedSample>& dataset,
                           const CascadeConfig& config);

// Argmax of inference-mode forward; ties break toward the lowest class id.
// Returned labels are 1-based category ids.
int predict_one(const CascadeModel& model, const WindowedSample& sample);
std::vector<int> predict(const CascadeModel& model, const std::vector<WindowedSample>& samples);

// Scaler block of the shared model-file format family (also used by the
// kNN/tree model files).
void write_scaler(std::ostream& out, const ScaleParams& scaler);
ScaleParams read_scaler(std::istream& in, bool keyword_consumed = false);

// Versioned flat text serialization; round-trips bit-exactly.
void save_model(const CascadeModel& model, std::ostream& out);
void save_model(const CascadeModel& model, const std::filesystem::path& path);
CascadeModel load_cascade_model(std::istream& in);
CascadeModel load_cascade_model(const std::filesystem::path& path);
std::string model_to_string(const CascadeModel& model);

} // namespace flowclass
