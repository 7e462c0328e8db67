#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "flowclass/rng.hpp"

namespace flowclass::nn {

// Dense row-major value container. Everything runs in 64-bit floating point;
// gradient checks at 1e-4 tolerance are not reliable below that.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
    static Tensor vector(std::size_t n) { return Tensor({n}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // rank-checked element access
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t k, std::size_t r, std::size_t c);
    double at(std::size_t k, std::size_t r, std::size_t c) const;

    void fill(double value);
    void scale(double factor);
    void add_scaled(const Tensor& other, double factor);  // this += factor * other
    double squared_norm() const;
    bool all_finite() const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

Tensor flattened(const Tensor& t);  // rank-1 copy in row-major order

double sigmoid(double x);

// y = W x + b
Tensor dense_forward(const Tensor& W, const Tensor& b, const Tensor& x);

struct DenseGrads {
    Tensor dW, db, dx;
};
DenseGrads dense_backward(const Tensor& W, const Tensor& x, const Tensor& dy);

// ---------------------------------------------------------------------------
// LSTM. Gate layout follows the usual g/i/f/o cell:
//   g = tanh(W_gx x + W_gh h_prev + b_g)        candidate
//   i,f,o = sigmoid(W_*x x + W_*h h_prev + b_*) input/forget/output gates
//   s = g*i + s_prev*f,  h = tanh(s)*o
// ---------------------------------------------------------------------------

struct LstmCellParams {
    Tensor W_gx, W_gh, W_ix, W_ih, W_fx, W_fh, W_ox, W_oh;  // hidden x input / hidden x hidden
    Tensor b_g, b_i, b_f, b_o;                              // hidden

    static LstmCellParams zeros(std::size_t input, std::size_t hidden);
    std::size_t input_size() const { return W_gx.dim(1); }
    std::size_t hidden_size() const { return W_gx.dim(0); }

    void add_scaled(const LstmCellParams& other, double factor);
    void scale(double factor);

    // weight matrices only (the L2 term excludes biases)
    std::vector<const Tensor*> weight_matrices() const;
    std::vector<Tensor*> weight_matrices();

    bool operator==(const LstmCellParams&) const = default;
};

struct LstmState {
    Tensor h, s;
    static LstmState zeros(std::size_t hidden);
};

struct LstmStepCache {
    Tensor g, i, f, o, s, tanh_s, h;
};

// One cell step; fills `cache` (when given) with everything backward needs
// beyond the inputs themselves.
LstmState lstm_cell_forward(const LstmCellParams& params, const Tensor& x, const LstmState& prev,
                            LstmStepCache* cache = nullptr);

struct LstmSequenceCache {
    std::vector<LstmStepCache> steps;  // steps[k].h is the k-th hidden state
};

// Chains the cell across the window from a zero initial state, writing every
// step's intermediates into the cache (the cascade consumes all hidden
// states). Cache tensors are overwritten in place, so one cache can be
// reused across samples without reallocating.
void lstm_layer_forward(const LstmCellParams& params, const std::vector<Tensor>& inputs,
                        LstmSequenceCache& cache);

// Convenience wrapper returning just the hidden states.
std::vector<Tensor> lstm_layer_forward(const LstmCellParams& params,
                                       const std::vector<Tensor>& inputs);

// Backpropagation through time across the cached steps. dh_out[k] is the loss
// gradient w.r.t. the layer's k-th emitted hidden state. Parameter gradients
// accumulate (+=) into param_grads; dx is overwritten with the gradient
// w.r.t. each input.
void lstm_layer_backward_into(const LstmCellParams& params, const std::vector<Tensor>& inputs,
                              const LstmSequenceCache& cache,
                              const std::vector<Tensor>& dh_out, LstmCellParams& param_grads,
                              std::vector<Tensor>& dx);

struct LstmLayerGrads {
    LstmCellParams params;      // gradients, same shapes as the parameters
    std::vector<Tensor> dx;     // gradient w.r.t. each input of the sequence
};

// Allocating wrapper around lstm_layer_backward_into.
LstmLayerGrads lstm_layer_backward(const LstmCellParams& params,
                                   const std::vector<Tensor>& inputs,
                                   const LstmSequenceCache& cache,
                                   const std::vector<Tensor>& dh_out);

// ---------------------------------------------------------------------------
// Convolution / pooling. Valid (no padding) cross-correlation with stride 1,
// single input channel; kernels are rank-3 (filters x kh x kw).
// ---------------------------------------------------------------------------

struct Conv2dCache {
    Tensor input;
    Tensor pre_activation;  // rank-3, before ReLU
};

// Returns ReLU(correlate(input, kernels) + bias), rank-3 maps of size
// filters x (h-kh+1) x (w-kw+1). Throws ShapeError when the input is smaller
// than the kernel.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      Conv2dCache* cache = nullptr);

// Accumulates (+=) kernel/bias gradients; dinput is overwritten.
void conv2d_backward_into(const Tensor& kernels, const Conv2dCache& cache, const Tensor& dout,
                          Tensor& dkernels, Tensor& dbias, Tensor& dinput);

struct Conv2dGrads {
    Tensor dkernels, dbias, dinput;
};
Conv2dGrads conv2d_backward(const Tensor& kernels, const Conv2dCache& cache, const Tensor& dout);

struct MaxPoolCache {
    std::vector<std::size_t> in_shape;   // shape of the pooled input
    std::vector<std::size_t> argmax;     // flat input index per output element
    std::size_t pool = 2;
};

// Non-overlapping pool x pool max over each map; trailing rows/columns that do
// not fill a window are dropped.
Tensor maxpool_forward(const Tensor& maps, std::size_t pool = 2, MaxPoolCache* cache = nullptr);
Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& dout);

// Inverted dropout: in training each unit is zeroed with probability
// 1-keep_prob and survivors are scaled by 1/keep_prob; in inference the input
// passes through untouched. Throws ParamError for keep_prob outside (0,1].
Tensor dropout_forward(const Tensor& x, double keep_prob, Rng& rng, bool training,
                       Tensor* mask_out = nullptr);
Tensor dropout_backward(const Tensor& mask, const Tensor& dy);

// Shift-invariant softmax; outputs are positive and sum to 1 within 1e-12.
Tensor softmax(const Tensor& logits);

// -log p[label] (+ lambda * sum of squared weight-matrix entries when weights
// are supplied; biases never contribute).
double cross_entropy(const Tensor& probs, std::size_t label_index);
double l2_penalty(const std::vector<const Tensor*>& weights, double lambda);
double cross_entropy_l2(const Tensor& probs, std::size_t label_index, double lambda,
                        const std::vector<const Tensor*>& weights);

// Combined softmax + cross-entropy gradient w.r.t. the logits: probs - onehot.
Tensor softmax_cross_entropy_backward(const Tensor& probs, std::size_t label_index);

// Exposed accumulation primitives for callers that fold per-sample gradients
// straight into batch accumulators.
void accumulate_outer(const Tensor& dy, const Tensor& x, Tensor& dW);            // dW += dy x^T
void accumulate_matvec_transposed(const Tensor& W, const Tensor& dy, Tensor& dx);  // dx += W^T dy

// Uniform [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))] init for a
// rank-2 weight (fan_in = cols, fan_out = rows).
void xavier_uniform(Tensor& W, Rng& rng);

// Xavier weights, zero biases, forget-gate bias 1.
LstmCellParams lstm_init(std::size_t input, std::size_t hidden, Rng& rng);

// ---------------------------------------------------------------------------
// Flat text serialization: `tensor <name> <rank> <dims...>` followed by the
// values with 17 significant digits. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

void write_tensor(std::ostream& out, std::string_view name, const Tensor& t);
Tensor read_tensor(std::istream& in, std::string_view expected_name);

} // namespace flowclass::nn
