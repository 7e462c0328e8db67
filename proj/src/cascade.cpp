#include "flowclass/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "flowclass/errors.hpp"

namespace flowclass {

namespace {

// Per-sample forward intermediates plus backward scratch; reusing one cache
// across samples keeps the training loop free of repeated allocation.
struct ForwardCache {
    nn::LstmSequenceCache lstm1, lstm2;
    std::vector<nn::Tensor> h1;  // layer-1 hidden states (layer 2's inputs)
    nn::Tensor conv_input;
    nn::Conv2dCache conv;
    nn::MaxPoolCache pool;
    std::vector<std::size_t> pool_shape;
    nn::Tensor dropout_mask;
    nn::Tensor dense_in;
    nn::Tensor probs;
    // backward scratch
    nn::Tensor dx_dense;
    std::vector<nn::Tensor> dh2, dh1, dx0;
    nn::Tensor dconv_input;
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// rows x cols matrix whose column k is columns[k]; written into `m` in place
template <class Columns>
void columns_to_matrix(const Columns& columns, std::size_t rows, std::size_t cols,
                       nn::Tensor& m) {
    if (m.rank() != 2 || m.dim(0) != rows || m.dim(1) != cols)
        m = nn::Tensor::matrix(rows, cols);
    for (std::size_t k = 0; k < cols; ++k) {
        const nn::Tensor& column = columns[k];
        for (std::size_t u = 0; u < rows; ++u) m.at(u, k) = column[u];
    }
}

void matrix_to_columns(const nn::Tensor& m, std::vector<nn::Tensor>& columns) {
    columns.resize(m.dim(1));
    for (std::size_t k = 0; k < m.dim(1); ++k) {
        if (columns[k].size() != m.dim(0)) columns[k] = nn::Tensor::vector(m.dim(0));
        for (std::size_t u = 0; u < m.dim(0); ++u) columns[k][u] = m.at(u, k);
    }
}

struct StepHiddenView {
    const nn::LstmSequenceCache& cache;
    const nn::Tensor& operator[](std::size_t k) const { return cache.steps[k].h; }
};

std::size_t pooled_dim(std::size_t in, std::size_t kernel, std::size_t pool) {
    return (in - kernel + 1) / pool;
}

nn::Tensor forward_impl(const CascadeModel& model, const std::vector<nn::Tensor>& inputs,
                        bool training, Rng* rng, ForwardCache* cache) {
    const CascadeConfig& cfg = model.config;
    if (inputs.size() != cfg.window)
        throw ShapeError("forward: expected window of " + std::to_string(cfg.window) +
                         " inputs, got " + std::to_string(inputs.size()));
    if (training && cfg.keep_prob < 1.0 && !rng)
        throw ParamError("forward: training mode with dropout requires an RNG");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;

    nn::Tensor flat;
    switch (cfg.arch) {
        case Architecture::LstmCnnCascade: {
            nn::lstm_layer_forward(model.lstm1, inputs, c.lstm1);
            c.h1.resize(inputs.size());
            for (std::size_t k = 0; k < inputs.size(); ++k) c.h1[k] = c.lstm1.steps[k].h;
            nn::lstm_layer_forward(model.lstm2, c.h1, c.lstm2);
            columns_to_matrix(StepHiddenView{c.lstm2}, cfg.hidden2(), inputs.size(),
                              c.conv_input);
            const nn::Tensor maps =
                nn::conv2d_forward(c.conv_input, model.conv_kernels, model.conv_bias, &c.conv);
            const nn::Tensor pooled = nn::maxpool_forward(maps, cfg.pool, &c.pool);
            c.pool_shape = pooled.shape();
            flat = nn::flattened(pooled);
            break;
        }
        case Architecture::LstmOnly: {
            nn::lstm_layer_forward(model.lstm1, inputs, c.lstm1);
            c.h1.resize(inputs.size());
            for (std::size_t k = 0; k < inputs.size(); ++k) c.h1[k] = c.lstm1.steps[k].h;
            nn::lstm_layer_forward(model.lstm2, c.h1, c.lstm2);
            flat = c.lstm2.steps.back().h;
            break;
        }
        case Architecture::CnnOnly: {
            columns_to_matrix(inputs, cfg.num_features, inputs.size(), c.conv_input);
            const nn::Tensor maps =
                nn::conv2d_forward(c.conv_input, model.conv_kernels, model.conv_bias, &c.conv);
            const nn::Tensor pooled = nn::maxpool_forward(maps, cfg.pool, &c.pool);
            c.pool_shape = pooled.shape();
            flat = nn::flattened(pooled);
            break;
        }
    }

    Rng unused(0);
    c.dense_in = nn::dropout_forward(flat, cfg.keep_prob, rng ? *rng : unused, training,
                                     &c.dropout_mask);
    const nn::Tensor logits = nn::dense_forward(model.dense_w, model.dense_b, c.dense_in);
    c.probs = nn::softmax(logits);
    return c.probs;
}

void backward_impl(const CascadeModel& model, const std::vector<nn::Tensor>& inputs,
                   ForwardCache& c, std::size_t label_index, CascadeGrads& grads) {
    const CascadeConfig& cfg = model.config;
    const nn::Tensor dlogits = nn::softmax_cross_entropy_backward(c.probs, label_index);
    nn::accumulate_outer(dlogits, c.dense_in, grads.dense_w);
    grads.dense_b.add_scaled(dlogits, 1.0);
    if (c.dx_dense.size() != c.dense_in.size())
        c.dx_dense = nn::Tensor::vector(c.dense_in.size());
    else
        c.dx_dense.fill(0.0);
    nn::accumulate_matvec_transposed(model.dense_w, dlogits, c.dx_dense);
    const nn::Tensor dflat = nn::dropout_backward(c.dropout_mask, c.dx_dense);

    switch (cfg.arch) {
        case Architecture::LstmCnnCascade: {
            nn::Tensor dpool(c.pool_shape);
            std::copy(dflat.data(), dflat.data() + dflat.size(), dpool.data());
            const nn::Tensor dmaps = nn::maxpool_backward(c.pool, dpool);
            nn::conv2d_backward_into(model.conv_kernels, c.conv, dmaps, grads.conv_kernels,
                                     grads.conv_bias, c.dconv_input);
            matrix_to_columns(c.dconv_input, c.dh2);
            nn::lstm_layer_backward_into(model.lstm2, c.h1, c.lstm2, c.dh2, grads.lstm2, c.dh1);
            nn::lstm_layer_backward_into(model.lstm1, inputs, c.lstm1, c.dh1, grads.lstm1,
                                         c.dx0);
            break;
        }
        case Architecture::LstmOnly: {
            c.dh2.resize(cfg.window);
            for (auto& d : c.dh2) {
                if (d.size() != cfg.hidden2()) d = nn::Tensor::vector(cfg.hidden2());
                else d.fill(0.0);
            }
            c.dh2.back() = dflat;
            nn::lstm_layer_backward_into(model.lstm2, c.h1, c.lstm2, c.dh2, grads.lstm2, c.dh1);
            nn::lstm_layer_backward_into(model.lstm1, inputs, c.lstm1, c.dh1, grads.lstm1,
                                         c.dx0);
            break;
        }
        case Architecture::CnnOnly: {
            nn::Tensor dpool(c.pool_shape);
            std::copy(dflat.data(), dflat.data() + dflat.size(), dpool.data());
            const nn::Tensor dmaps = nn::maxpool_backward(c.pool, dpool);
            nn::conv2d_backward_into(model.conv_kernels, c.conv, dmaps, grads.conv_kernels,
                                     grads.conv_bias, c.dconv_input);
            break;
        }
    }
}

} // namespace

std::string_view to_string(Architecture arch) {
    switch (arch) {
        case Architecture::LstmCnnCascade: return "cascade";
        case Architecture::LstmOnly: return "lstm";
        case Architecture::CnnOnly: return "cnn";
    }
    return "cascade";
}

Architecture architecture_from_string(std::string_view name) {
    if (name == "cascade") return Architecture::LstmCnnCascade;
    if (name == "lstm") return Architecture::LstmOnly;
    if (name == "cnn") return Architecture::CnnOnly;
    throw ParamError("unknown architecture '" + std::string(name) + "'");
}

void CascadeConfig::validate() const {
    if (num_features == 0) throw ParamError("config: num_features must be positive");
    if (window < 2) throw ParamError("config: window must be at least 2");
    if (kernel == 0 || pool == 0) throw ParamError("config: kernel and pool must be positive");
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw ParamError("config: keep_prob must lie in (0,1]");
    if (num_classes == 1) throw ParamError("config: num_classes must be at least 2");
    if (!(learning_rate > 0)) throw ParamError("config: learning_rate must be positive");
    if (l2_lambda < 0) throw ParamError("config: l2_lambda must be non-negative");
    if (batch_size == 0) throw ParamError("config: batch_size must be positive");
    switch (arch) {
        case Architecture::LstmCnnCascade:
            if (lstm_hidden < 2 || hidden2() < 2)
                throw ParamError("config: LSTM hidden sizes must be at least 2");
            if (hidden2() < kernel || window < kernel)
                throw ParamError("config: conv input smaller than kernel");
            if (pooled_dim(hidden2(), kernel, pool) == 0 ||
                pooled_dim(window, kernel, pool) == 0)
                throw ParamError("config: pooled feature map would be empty");
            break;
        case Architecture::LstmOnly:
            if (lstm_hidden < 2 || hidden2() < 2)
                throw ParamError("config: LSTM hidden sizes must be at least 2");
            break;
        case Architecture::CnnOnly:
            if (num_features < kernel || window < kernel)
                throw ParamError("config: conv input smaller than kernel");
            if (pooled_dim(num_features, kernel, pool) == 0 ||
                pooled_dim(window, kernel, pool) == 0)
                throw ParamError("config: pooled feature map would be empty");
            break;
    }
}

CascadeModel CascadeModel::init(const CascadeConfig& config, Rng& rng) {
    config.validate();
    if (config.num_classes < 2)
        throw ParamError("CascadeModel::init: num_classes must be set before initialization");
    CascadeModel model;
    model.config = config;

    std::size_t flat = 0;
    const bool has_lstm = config.arch != Architecture::CnnOnly;
    const bool has_conv = config.arch != Architecture::LstmOnly;
    if (has_lstm) {
        model.lstm1 = nn::lstm_init(config.num_features, config.lstm_hidden, rng);
        model.lstm2 = nn::lstm_init(config.lstm_hidden, config.hidden2(), rng);
    } else {
        model.lstm1 = nn::LstmCellParams::zeros(0, 0);
        model.lstm2 = nn::LstmCellParams::zeros(0, 0);
    }
    if (has_conv) {
        const std::size_t rows =
            config.arch == Architecture::CnnOnly ? config.num_features : config.hidden2();
        model.conv_kernels = nn::Tensor({config.conv_filters, config.kernel, config.kernel});
        const double fan_in = static_cast<double>(config.kernel * config.kernel);
        const double fan_out =
            static_cast<double>(config.conv_filters * config.kernel * config.kernel);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < model.conv_kernels.size(); ++i)
            model.conv_kernels[i] = rng.uniform(-limit, limit);
        model.conv_bias = nn::Tensor::vector(config.conv_filters);
        flat = config.conv_filters * pooled_dim(rows, config.kernel, config.pool) *
               pooled_dim(config.window, config.kernel, config.pool);
    } else {
        model.conv_kernels = nn::Tensor();
        model.conv_bias = nn::Tensor();
        flat = config.hidden2();
    }
    model.dense_w = nn::Tensor::matrix(config.num_classes, flat);
    nn::xavier_uniform(model.dense_w, rng);
    model.dense_b = nn::Tensor::vector(config.num_classes);
    return model;
}

std::vector<const nn::Tensor*> CascadeModel::l2_weights() const {
    std::vector<const nn::Tensor*> weights;
    if (config.arch != Architecture::CnnOnly) {
        for (const nn::Tensor* w : lstm1.weight_matrices()) weights.push_back(w);
        for (const nn::Tensor* w : lstm2.weight_matrices()) weights.push_back(w);
    }
    if (config.arch != Architecture::LstmOnly && conv_kernels.size() > 0)
        weights.push_back(&conv_kernels);
    weights.push_back(&dense_w);
    return weights;
}

bool CascadeModel::operator==(const CascadeModel& other) const {
    return config == other.config && lstm1 == other.lstm1 && lstm2 == other.lstm2 &&
           conv_kernels == other.conv_kernels && conv_bias == other.conv_bias &&
           dense_w == other.dense_w && dense_b == other.dense_b && scaler == other.scaler &&
           epochs_run == other.epochs_run;
}

CascadeGrads CascadeGrads::zeros_like(const CascadeModel& model) {
    CascadeGrads g;
    g.lstm1 = nn::LstmCellParams::zeros(model.lstm1.input_size(), model.lstm1.hidden_size());
    g.lstm2 = nn::LstmCellParams::zeros(model.lstm2.input_size(), model.lstm2.hidden_size());
    g.conv_kernels = nn::Tensor(model.conv_kernels.shape());
    g.conv_bias = nn::Tensor(model.conv_bias.shape());
    g.dense_w = nn::Tensor(model.dense_w.shape());
    g.dense_b = nn::Tensor(model.dense_b.shape());
    return g;
}

void CascadeGrads::add_scaled(const CascadeGrads& other, double factor) {
    lstm1.add_scaled(other.lstm1, factor);
    lstm2.add_scaled(other.lstm2, factor);
    conv_kernels.add_scaled(other.conv_kernels, factor);
    conv_bias.add_scaled(other.conv_bias, factor);
    dense_w.add_scaled(other.dense_w, factor);
    dense_b.add_scaled(other.dense_b, factor);
}

void CascadeGrads::scale(double factor) {
    lstm1.scale(factor);
    lstm2.scale(factor);
    conv_kernels.scale(factor);
    conv_bias.scale(factor);
    dense_w.scale(factor);
    dense_b.scale(factor);
}

std::vector<nn::Tensor> sample_inputs(const CascadeConfig& config, const WindowedSample& sample) {
    if (sample.features.size() != config.window)
        throw ShapeError("sample window length " + std::to_string(sample.features.size()) +
                         " != configured window " + std::to_string(config.window));
    std::vector<nn::Tensor> inputs;
    inputs.reserve(sample.features.size());
    for (const FeatureVector& v : sample.features) {
        if (v.values.size() != config.num_features)
            throw ShapeError("sample schema width " + std::to_string(v.values.size()) +
                             " != configured num_features " +
                             std::to_string(config.num_features));
        nn::Tensor x = nn::Tensor::vector(v.values.size());
        std::copy(v.values.begin(), v.values.end(), x.data());
        inputs.push_back(std::move(x));
    }
    return inputs;
}

nn::Tensor forward_scaled(const CascadeModel& model, const std::vector<nn::Tensor>& inputs,
                          bool training, Rng* rng) {
    return forward_impl(model, inputs, training, rng, nullptr);
}

nn::Tensor forward_probs(const CascadeModel& model, const WindowedSample& sample, bool training,
                         Rng* rng) {
    const WindowedSample scaled = apply_scale(model.scaler, sample);
    return forward_impl(model, sample_inputs(model.config, scaled), training, rng, nullptr);
}

double sample_loss_and_gradients(const CascadeModel& model, const std::vector<nn::Tensor>& inputs,
                                 std::size_t label_index, bool training, Rng* rng,
                                 CascadeGrads& grads) {
    ForwardCache cache;
    forward_impl(model, inputs, training, rng, &cache);
    backward_impl(model, inputs, cache, label_index, grads);
    return nn::cross_entropy(cache.probs, label_index);
}

void add_l2_gradients(const CascadeModel& model, CascadeGrads& grads) {
    const double two_lambda = 2.0 * model.config.l2_lambda;
    if (two_lambda == 0.0) return;
    const bool has_lstm = model.config.arch != Architecture::CnnOnly;
    if (has_lstm) {
        auto targets1 = grads.lstm1.weight_matrices();
        auto sources1 = model.lstm1.weight_matrices();
        for (std::size_t i = 0; i < targets1.size(); ++i)
            targets1[i]->add_scaled(*sources1[i], two_lambda);
        auto targets2 = grads.lstm2.weight_matrices();
        auto sources2 = model.lstm2.weight_matrices();
        for (std::size_t i = 0; i < targets2.size(); ++i)
            targets2[i]->add_scaled(*sources2[i], two_lambda);
    }
    if (model.config.arch != Architecture::LstmOnly && model.conv_kernels.size() > 0)
        grads.conv_kernels.add_scaled(model.conv_kernels, two_lambda);
    grads.dense_w.add_scaled(model.dense_w, two_lambda);
}

double model_l2(const CascadeModel& model) {
    return nn::l2_penalty(model.l2_weights(), model.config.l2_lambda);
}

CascadeModel train_cascade(const std::vector<WindowedSample>& dataset,
                           const CascadeConfig& base_config) {
    if (dataset.empty()) throw DataError("train: empty dataset");

    CascadeConfig config = base_config;
    int max_label = 0;
    for (const auto& sample : dataset) max_label = std::max(max_label, sample.label);
    if (config.num_classes == 0) config.num_classes = static_cast<std::size_t>(max_label);
    config.validate();
    for (const auto& sample : dataset) {
        if (sample.label < 1 || static_cast<std::size_t>(sample.label) > config.num_classes)
            throw DataError("train: label " + std::to_string(sample.label) +
                            " outside [1, " + std::to_string(config.num_classes) + "]");
        if (sample.features.size() != config.window)
            throw ShapeError("train: sample window length mismatch");
    }

    // min-max statistics come from this (training) set only
    std::vector<FeatureVector> all_vectors;
    all_vectors.reserve(dataset.size() * config.window);
    for (const auto& sample : dataset)
        for (const auto& v : sample.features) all_vectors.push_back(v);
    const ScaleParams scaler = fit_minmax(all_vectors);

    std::vector<std::vector<nn::Tensor>> inputs;
    std::vector<std::size_t> labels;
    inputs.reserve(dataset.size());
    labels.reserve(dataset.size());
    for (const auto& sample : dataset) {
        inputs.push_back(sample_inputs(config, apply_scale(scaler, sample)));
        labels.push_back(static_cast<std::size_t>(sample.label - 1));
    }

    Rng rng(config.seed);
    CascadeModel model = CascadeModel::init(config, rng);
    model.scaler = scaler;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;
    ForwardCache cache;  // reused across samples

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double ce_sum = 0, l2_weighted = 0;
        std::size_t correct = 0;

        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            CascadeGrads grads = CascadeGrads::zeros_like(model);
            for (std::size_t idx = begin; idx < end; ++idx) {
                const std::size_t i = order[idx];
                forward_impl(model, inputs[i], true, &rng, &cache);
                backward_impl(model, inputs[i], cache, labels[i], grads);
                ce_sum += nn::cross_entropy(cache.probs, labels[i]);
                std::size_t arg = 0;
                for (std::size_t c = 1; c < cache.probs.size(); ++c)
                    if (cache.probs[c] > cache.probs[arg]) arg = c;
                if (arg == labels[i]) ++correct;
            }
            const double batch_n = static_cast<double>(end - begin);
            grads.scale(1.0 / batch_n);
            add_l2_gradients(model, grads);
            l2_weighted += model_l2(model) * batch_n;

            const double lr = config.learning_rate;
            model.lstm1.add_scaled(grads.lstm1, -lr);
            model.lstm2.add_scaled(grads.lstm2, -lr);
            model.conv_kernels.add_scaled(grads.conv_kernels, -lr);
            model.conv_bias.add_scaled(grads.conv_bias, -lr);
            model.dense_w.add_scaled(grads.dense_w, -lr);
            model.dense_b.add_scaled(grads.dense_b, -lr);
        }

        const double n = static_cast<double>(order.size());
        EpochStats stats;
        stats.loss = (ce_sum + l2_weighted) / n;
        stats.accuracy = static_cast<double>(correct) / n;
        if (!std::isfinite(stats.loss))
            throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1));
        model.trace.push_back(stats);
        model.epochs_run = epoch + 1;
        model.final_loss = stats.loss;

        if (config.early_stop_patience > 0) {
            if (stats.loss < best_loss - config.early_stop_min_delta) {
                best_loss = stats.loss;
                stale_epochs = 0;
            } else if (++stale_epochs >= config.early_stop_patience) {
                break;
            }
        }
    }
    return model;
}

int predict_one(const CascadeModel& model, const WindowedSample& sample) {
    const nn::Tensor probs = forward_probs(model, sample, false, nullptr);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[arg]) arg = c;
    return static_cast<int>(arg) + 1;
}

std::vector<int> predict(const CascadeModel& model, const std::vector<WindowedSample>& samples) {
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& sample : samples) labels.push_back(predict_one(model, sample));
    return labels;
}

namespace {

void write_lstm(std::ostream& out, const std::string& prefix, const nn::LstmCellParams& p) {
    nn::write_tensor(out, prefix + ".W_gx", p.W_gx);
    nn::write_tensor(out, prefix + ".W_gh", p.W_gh);
    nn::write_tensor(out, prefix + ".W_ix", p.W_ix);
    nn::write_tensor(out, prefix + ".W_ih", p.W_ih);
    nn::write_tensor(out, prefix + ".W_fx", p.W_fx);
    nn::write_tensor(out, prefix + ".W_fh", p.W_fh);
    nn::write_tensor(out, prefix + ".W_ox", p.W_ox);
    nn::write_tensor(out, prefix + ".W_oh", p.W_oh);
    nn::write_tensor(out, prefix + ".b_g", p.b_g);
    nn::write_tensor(out, prefix + ".b_i", p.b_i);
    nn::write_tensor(out, prefix + ".b_f", p.b_f);
    nn::write_tensor(out, prefix + ".b_o", p.b_o);
}

nn::LstmCellParams read_lstm(std::istream& in, const std::string& prefix) {
    nn::LstmCellParams p;
    p.W_gx = nn::read_tensor(in, prefix + ".W_gx");
    p.W_gh = nn::read_tensor(in, prefix + ".W_gh");
    p.W_ix = nn::read_tensor(in, prefix + ".W_ix");
    p.W_ih = nn::read_tensor(in, prefix + ".W_ih");
    p.W_fx = nn::read_tensor(in, prefix + ".W_fx");
    p.W_fh = nn::read_tensor(in, prefix + ".W_fh");
    p.W_ox = nn::read_tensor(in, prefix + ".W_ox");
    p.W_oh = nn::read_tensor(in, prefix + ".W_oh");
    p.b_g = nn::read_tensor(in, prefix + ".b_g");
    p.b_i = nn::read_tensor(in, prefix + ".b_i");
    p.b_f = nn::read_tensor(in, prefix + ".b_f");
    p.b_o = nn::read_tensor(in, prefix + ".b_o");
    return p;
}

} // namespace

void write_scaler(std::ostream& out, const ScaleParams& scaler) {
    out << "scaler " << scaler.offset.size() << '\n';
    for (std::size_t j = 0; j < scaler.offset.size(); ++j) {
        const std::string name = scaler.schema ? scaler.schema->name(j) : "f" + std::to_string(j);
        out << "feature " << name << ' ' << format_double(scaler.offset[j]) << ' '
            << format_double(scaler.range[j]) << '\n';
    }
}

ScaleParams read_scaler(std::istream& in, bool keyword_consumed) {
    std::string token;
    if (!keyword_consumed) {
        if (!(in >> token) || token != "scaler")
            throw FormatError("model file: expected 'scaler' section, got '" + token + "'");
    }
    std::size_t width = 0;
    if (!(in >> width)) throw FormatError("model file: bad scaler width");
    ScaleParams scaler;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < width; ++j) {
        std::string name;
        double offset = 0, range = 0;
        if (!(in >> token >> name >> offset >> range) || token != "feature")
            throw FormatError("model file: bad scaler feature line");
        names.push_back(name);
        scaler.offset.push_back(offset);
        scaler.range.push_back(range);
    }
    scaler.schema = std::make_shared<const FeatureSchema>(std::move(names));
    return scaler;
}

void save_model(const CascadeModel& model, std::ostream& out) {
    const CascadeConfig& c = model.config;
    out << "flowclass-model 1 " << to_string(c.arch) << '\n';
    out << "num_features " << c.num_features << '\n';
    out << "window " << c.window << '\n';
    out << "lstm_hidden " << c.lstm_hidden << '\n';
    out << "lstm_hidden2 " << c.lstm_hidden2 << '\n';
    out << "conv_filters " << c.conv_filters << '\n';
    out << "kernel " << c.kernel << '\n';
    out << "pool " << c.pool << '\n';
    out << "keep_prob " << format_double(c.keep_prob) << '\n';
    out << "num_classes " << c.num_classes << '\n';
    out << "learning_rate " << format_double(c.learning_rate) << '\n';
    out << "l2_lambda " << format_double(c.l2_lambda) << '\n';
    out << "batch_size " << c.batch_size << '\n';
    out << "epochs " << c.epochs << '\n';
    out << "early_stop_min_delta " << format_double(c.early_stop_min_delta) << '\n';
    out << "early_stop_patience " << c.early_stop_patience << '\n';
    out << "seed " << c.seed << '\n';
    out << "epochs_run " << model.epochs_run << '\n';
    out << "final_loss " << format_double(model.final_loss) << '\n';
    write_scaler(out, model.scaler);
    write_lstm(out, "lstm1", model.lstm1);
    write_lstm(out, "lstm2", model.lstm2);
    nn::write_tensor(out, "conv.kernels", model.conv_kernels);
    nn::write_tensor(out, "conv.bias", model.conv_bias);
    nn::write_tensor(out, "dense.W", model.dense_w);
    nn::write_tensor(out, "dense.b", model.dense_b);
    out << "end\n";
}

void save_model(const CascadeModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path.string());
    save_model(model, out);
    if (!out) throw IoError("failed while writing model file: " + path.string());
}

CascadeModel load_cascade_model(std::istream& in) {
    std::string magic, kind;
    int version = 0;
    if (!(in >> magic >> version >> kind) || magic != "flowclass-model")
        throw FormatError("not a flowclass model file");
    if (version != 1) throw FormatError("unsupported model format version");
    if (kind != "cascade" && kind != "lstm" && kind != "cnn")
        throw FormatError("model file holds a '" + kind + "' model, not a neural one");

    CascadeModel model;
    model.config.arch = architecture_from_string(kind);
    std::string key;
    while (in >> key) {
        if (key == "scaler") break;
        auto& c = model.config;
        if (key == "num_features") in >> c.num_features;
        else if (key == "window") in >> c.window;
        else if (key == "lstm_hidden") in >> c.lstm_hidden;
        else if (key == "lstm_hidden2") in >> c.lstm_hidden2;
        else if (key == "conv_filters") in >> c.conv_filters;
        else if (key == "kernel") in >> c.kernel;
        else if (key == "pool") in >> c.pool;
        else if (key == "keep_prob") in >> c.keep_prob;
        else if (key == "num_classes") in >> c.num_classes;
        else if (key == "learning_rate") in >> c.learning_rate;
        else if (key == "l2_lambda") in >> c.l2_lambda;
        else if (key == "batch_size") in >> c.batch_size;
        else if (key == "epochs") in >> c.epochs;
        else if (key == "early_stop_min_delta") in >> c.early_stop_min_delta;
        else if (key == "early_stop_patience") in >> c.early_stop_patience;
        else if (key == "seed") in >> c.seed;
        else if (key == "epochs_run") in >> model.epochs_run;
        else if (key == "final_loss") in >> model.final_loss;
        else throw FormatError("model file: unknown key '" + key + "'");
        if (!in) throw FormatError("model file: bad value for key '" + key + "'");
    }
    model.scaler = read_scaler(in, /*keyword_consumed=*/true);
    model.lstm1 = read_lstm(in, "lstm1");
    model.lstm2 = read_lstm(in, "lstm2");
    model.conv_kernels = nn::read_tensor(in, "conv.kernels");
    model.conv_bias = nn::read_tensor(in, "conv.bias");
    model.dense_w = nn::read_tensor(in, "dense.W");
    model.dense_b = nn::read_tensor(in, "dense.b");
    std::string tail;
    if (!(in >> tail) || tail != "end") throw FormatError("model file: missing end marker");
    return model;
}

CascadeModel load_cascade_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path.string());
    return load_cascade_model(in);
}

std::string model_to_string(const CascadeModel& model) {
    std::ostringstream out;
    save_model(model, out);
    return out.str();
}

} // namespace flowclass
