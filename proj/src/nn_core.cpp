#include "flowclass/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "flowclass/errors.hpp"

namespace flowclass::nn {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void require(bool condition, const std::string& message) {
    if (!condition) throw ShapeError(message);
}

// W x + b accumulated row by row into out (rank-1, size rows)
void matvec_add(const Tensor& W, const Tensor& x, const Tensor& b, Tensor& out) {
    const std::size_t rows = W.dim(0), cols = W.dim(1);
    const double* w = W.data();
    const double* xv = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b.size() ? b[r] : 0.0;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xv[c];
        out[r] += acc;
    }
}

// out += W^T dy
void matvec_transposed_add(const Tensor& W, const Tensor& dy, Tensor& out) {
    const std::size_t rows = W.dim(0), cols = W.dim(1);
    const double* w = W.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * g;
    }
}

// dW += dy x^T
void outer_add(const Tensor& dy, const Tensor& x, Tensor& dW) {
    const std::size_t rows = dW.dim(0), cols = dW.dim(1);
    double* w = dW.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
    }
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

double& Tensor::at(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
}
double Tensor::at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
}
double& Tensor::at(std::size_t k, std::size_t r, std::size_t c) {
    return data_[(k * shape_[1] + r) * shape_[2] + c];
}
double Tensor::at(std::size_t k, std::size_t r, std::size_t c) const {
    return data_[(k * shape_[1] + r) * shape_[2] + c];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::scale(double factor) {
    for (double& v : data_) v *= factor;
}

void Tensor::add_scaled(const Tensor& other, double factor) {
    require(same_shape(other), "add_scaled: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += factor * other.data_[i];
}

double Tensor::squared_norm() const {
    double acc = 0;
    for (double v : data_) acc += v * v;
    return acc;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor flattened(const Tensor& t) {
    Tensor out = Tensor::vector(t.size());
    std::copy(t.data(), t.data() + t.size(), out.data());
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor dense_forward(const Tensor& W, const Tensor& b, const Tensor& x) {
    require(W.rank() == 2 && x.rank() == 1 && b.rank() == 1, "dense_forward: bad ranks");
    require(W.dim(1) == x.size() && W.dim(0) == b.size(), "dense_forward: dimension mismatch");
    Tensor y = Tensor::vector(W.dim(0));
    matvec_add(W, x, b, y);
    return y;
}

DenseGrads dense_backward(const Tensor& W, const Tensor& x, const Tensor& dy) {
    require(W.dim(0) == dy.size() && W.dim(1) == x.size(), "dense_backward: dimension mismatch");
    DenseGrads g;
    g.dW = Tensor::matrix(W.dim(0), W.dim(1));
    g.db = dy;
    g.dx = Tensor::vector(x.size());
    outer_add(dy, x, g.dW);
    matvec_transposed_add(W, dy, g.dx);
    return g;
}

LstmCellParams LstmCellParams::zeros(std::size_t input, std::size_t hidden) {
    LstmCellParams p;
    p.W_gx = Tensor::matrix(hidden, input);
    p.W_ix = Tensor::matrix(hidden, input);
    p.W_fx = Tensor::matrix(hidden, input);
    p.W_ox = Tensor::matrix(hidden, input);
    p.W_gh = Tensor::matrix(hidden, hidden);
    p.W_ih = Tensor::matrix(hidden, hidden);
    p.W_fh = Tensor::matrix(hidden, hidden);
    p.W_oh = Tensor::matrix(hidden, hidden);
    p.b_g = Tensor::vector(hidden);
    p.b_i = Tensor::vector(hidden);
    p.b_f = Tensor::vector(hidden);
    p.b_o = Tensor::vector(hidden);
    return p;
}

void LstmCellParams::add_scaled(const LstmCellParams& other, double factor) {
    W_gx.add_scaled(other.W_gx, factor);
    W_gh.add_scaled(other.W_gh, factor);
    W_ix.add_scaled(other.W_ix, factor);
    W_ih.add_scaled(other.W_ih, factor);
    W_fx.add_scaled(other.W_fx, factor);
    W_fh.add_scaled(other.W_fh, factor);
    W_ox.add_scaled(other.W_ox, factor);
    W_oh.add_scaled(other.W_oh, factor);
    b_g.add_scaled(other.b_g, factor);
    b_i.add_scaled(other.b_i, factor);
    b_f.add_scaled(other.b_f, factor);
    b_o.add_scaled(other.b_o, factor);
}

void LstmCellParams::scale(double factor) {
    for (Tensor* w : weight_matrices()) w->scale(factor);
    b_g.scale(factor);
    b_i.scale(factor);
    b_f.scale(factor);
    b_o.scale(factor);
}

std::vector<const Tensor*> LstmCellParams::weight_matrices() const {
    return {&W_gx, &W_gh, &W_ix, &W_ih, &W_fx, &W_fh, &W_ox, &W_oh};
}

std::vector<Tensor*> LstmCellParams::weight_matrices() {
    return {&W_gx, &W_gh, &W_ix, &W_ih, &W_fx, &W_fh, &W_ox, &W_oh};
}

LstmState LstmState::zeros(std::size_t hidden) {
    return {Tensor::vector(hidden), Tensor::vector(hidden)};
}

namespace {

// gate pre-activations + pointwise cell update written straight into `c`
void lstm_step(const LstmCellParams& params, const Tensor& x, const Tensor* h_prev,
               const Tensor* s_prev, LstmStepCache& c) {
    const std::size_t hidden = params.hidden_size();
    require(x.rank() == 1 && x.size() == params.input_size(),
            "lstm_cell_forward: input size mismatch");
    c.g = params.b_g;
    c.i = params.b_i;
    c.f = params.b_f;
    c.o = params.b_o;
    matvec_add(params.W_gx, x, Tensor(), c.g);
    matvec_add(params.W_ix, x, Tensor(), c.i);
    matvec_add(params.W_fx, x, Tensor(), c.f);
    matvec_add(params.W_ox, x, Tensor(), c.o);
    if (h_prev) {
        matvec_add(params.W_gh, *h_prev, Tensor(), c.g);
        matvec_add(params.W_ih, *h_prev, Tensor(), c.i);
        matvec_add(params.W_fh, *h_prev, Tensor(), c.f);
        matvec_add(params.W_oh, *h_prev, Tensor(), c.o);
    }
    if (c.s.size() != hidden) c.s = Tensor::vector(hidden);
    if (c.tanh_s.size() != hidden) c.tanh_s = Tensor::vector(hidden);
    if (c.h.size() != hidden) c.h = Tensor::vector(hidden);
    for (std::size_t u = 0; u < hidden; ++u) {
        c.g[u] = std::tanh(c.g[u]);
        c.i[u] = sigmoid(c.i[u]);
        c.f[u] = sigmoid(c.f[u]);
        c.o[u] = sigmoid(c.o[u]);
        c.s[u] = c.g[u] * c.i[u] + (s_prev ? (*s_prev)[u] * c.f[u] : 0.0);
        c.tanh_s[u] = std::tanh(c.s[u]);
        c.h[u] = c.tanh_s[u] * c.o[u];
    }
}

} // namespace

LstmState lstm_cell_forward(const LstmCellParams& params, const Tensor& x, const LstmState& prev,
                            LstmStepCache* cache) {
    const std::size_t hidden = params.hidden_size();
    require(prev.h.size() == hidden && prev.s.size() == hidden,
            "lstm_cell_forward: state size mismatch");
    LstmStepCache local;
    LstmStepCache& c = cache ? *cache : local;
    lstm_step(params, x, &prev.h, &prev.s, c);
    return {c.h, c.s};
}

void lstm_layer_forward(const LstmCellParams& params, const std::vector<Tensor>& inputs,
                        LstmSequenceCache& cache) {
    cache.steps.resize(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor* h_prev = k ? &cache.steps[k - 1].h : nullptr;
        const Tensor* s_prev = k ? &cache.steps[k - 1].s : nullptr;
        lstm_step(params, inputs[k], h_prev, s_prev, cache.steps[k]);
    }
}

std::vector<Tensor> lstm_layer_forward(const LstmCellParams& params,
                                       const std::vector<Tensor>& inputs) {
    LstmSequenceCache cache;
    lstm_layer_forward(params, inputs, cache);
    std::vector<Tensor> hidden;
    hidden.reserve(inputs.size());
    for (auto& step : cache.steps) hidden.push_back(std::move(step.h));
    return hidden;
}

void lstm_layer_backward_into(const LstmCellParams& params, const std::vector<Tensor>& inputs,
                              const LstmSequenceCache& cache,
                              const std::vector<Tensor>& dh_out, LstmCellParams& param_grads,
                              std::vector<Tensor>& dx) {
    const std::size_t hidden = params.hidden_size();
    const std::size_t input = params.input_size();
    const std::size_t steps = cache.steps.size();
    require(dh_out.size() == steps && inputs.size() == steps,
            "lstm_layer_backward: sequence length mismatch");

    dx.resize(steps);
    for (auto& d : dx) {
        if (d.size() != input) d = Tensor::vector(input);
        else d.fill(0.0);
    }

    Tensor dh_next = Tensor::vector(hidden);  // recurrent h gradient from step k+1
    Tensor ds_next = Tensor::vector(hidden);  // cell-state gradient from step k+1
    Tensor da_g = Tensor::vector(hidden), da_i = Tensor::vector(hidden);
    Tensor da_f = Tensor::vector(hidden), da_o = Tensor::vector(hidden);

    for (std::size_t k = steps; k-- > 0;) {
        const LstmStepCache& c = cache.steps[k];
        const Tensor* s_prev = k ? &cache.steps[k - 1].s : nullptr;
        for (std::size_t u = 0; u < hidden; ++u) {
            const double dh = dh_out[k][u] + dh_next[u];
            const double tanh_s = c.tanh_s[u];
            const double ds = dh * c.o[u] * (1.0 - tanh_s * tanh_s) + ds_next[u];
            const double dg = ds * c.i[u];
            const double di = ds * c.g[u];
            const double df = ds * (s_prev ? (*s_prev)[u] : 0.0);
            const double do_ = dh * tanh_s;
            da_g[u] = dg * (1.0 - c.g[u] * c.g[u]);
            da_i[u] = di * c.i[u] * (1.0 - c.i[u]);
            da_f[u] = df * c.f[u] * (1.0 - c.f[u]);
            da_o[u] = do_ * c.o[u] * (1.0 - c.o[u]);
            ds_next[u] = ds * c.f[u];
        }
        outer_add(da_g, inputs[k], param_grads.W_gx);
        outer_add(da_i, inputs[k], param_grads.W_ix);
        outer_add(da_f, inputs[k], param_grads.W_fx);
        outer_add(da_o, inputs[k], param_grads.W_ox);
        if (k) {
            const Tensor& h_prev = cache.steps[k - 1].h;
            outer_add(da_g, h_prev, param_grads.W_gh);
            outer_add(da_i, h_prev, param_grads.W_ih);
            outer_add(da_f, h_prev, param_grads.W_fh);
            outer_add(da_o, h_prev, param_grads.W_oh);
        }
        param_grads.b_g.add_scaled(da_g, 1.0);
        param_grads.b_i.add_scaled(da_i, 1.0);
        param_grads.b_f.add_scaled(da_f, 1.0);
        param_grads.b_o.add_scaled(da_o, 1.0);

        matvec_transposed_add(params.W_gx, da_g, dx[k]);
        matvec_transposed_add(params.W_ix, da_i, dx[k]);
        matvec_transposed_add(params.W_fx, da_f, dx[k]);
        matvec_transposed_add(params.W_ox, da_o, dx[k]);

        dh_next.fill(0.0);
        matvec_transposed_add(params.W_gh, da_g, dh_next);
        matvec_transposed_add(params.W_ih, da_i, dh_next);
        matvec_transposed_add(params.W_fh, da_f, dh_next);
        matvec_transposed_add(params.W_oh, da_o, dh_next);
    }
}

LstmLayerGrads lstm_layer_backward(const LstmCellParams& params,
                                   const std::vector<Tensor>& inputs,
                                   const LstmSequenceCache& cache,
                                   const std::vector<Tensor>& dh_out) {
    LstmLayerGrads grads;
    grads.params = LstmCellParams::zeros(params.input_size(), params.hidden_size());
    lstm_layer_backward_into(params, inputs, cache, dh_out, grads.params, grads.dx);
    return grads;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      Conv2dCache* cache) {
    require(input.rank() == 2 && kernels.rank() == 3, "conv2d_forward: bad ranks");
    const std::size_t h = input.dim(0), w = input.dim(1);
    const std::size_t filters = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2);
    require(bias.size() == filters, "conv2d_forward: bias size mismatch");
    if (h < kh || w < kw)
        throw ShapeError("conv2d_forward: input " + std::to_string(h) + "x" + std::to_string(w) +
                         " smaller than kernel " + std::to_string(kh) + "x" + std::to_string(kw));
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    Tensor pre({filters, oh, ow});
    for (std::size_t fidx = 0; fidx < filters; ++fidx) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double acc = bias[fidx];
                for (std::size_t kr = 0; kr < kh; ++kr)
                    for (std::size_t kc = 0; kc < kw; ++kc)
                        acc += kernels.at(fidx, kr, kc) * input.at(r + kr, c + kc);
                pre.at(fidx, r, c) = acc;
            }
        }
    }
    Tensor out = pre;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
    if (cache) {
        cache->input = input;
        cache->pre_activation = std::move(pre);
    }
    return out;
}

void conv2d_backward_into(const Tensor& kernels, const Conv2dCache& cache, const Tensor& dout,
                          Tensor& dkernels, Tensor& dbias, Tensor& dinput) {
    const Tensor& input = cache.input;
    const Tensor& pre = cache.pre_activation;
    require(dout.same_shape(pre), "conv2d_backward: gradient shape mismatch");
    require(dkernels.same_shape(kernels) && dbias.size() == kernels.dim(0),
            "conv2d_backward: accumulator shape mismatch");
    const std::size_t filters = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2);
    const std::size_t oh = pre.dim(1), ow = pre.dim(2);

    if (!dinput.same_shape(input)) dinput = Tensor(input.shape());
    else dinput.fill(0.0);
    for (std::size_t fidx = 0; fidx < filters; ++fidx) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                if (pre.at(fidx, r, c) <= 0.0) continue;  // ReLU gate
                const double grad = dout.at(fidx, r, c);
                if (grad == 0.0) continue;
                dbias[fidx] += grad;
                for (std::size_t kr = 0; kr < kh; ++kr) {
                    for (std::size_t kc = 0; kc < kw; ++kc) {
                        dkernels.at(fidx, kr, kc) += grad * input.at(r + kr, c + kc);
                        dinput.at(r + kr, c + kc) += grad * kernels.at(fidx, kr, kc);
                    }
                }
            }
        }
    }
}

Conv2dGrads conv2d_backward(const Tensor& kernels, const Conv2dCache& cache, const Tensor& dout) {
    Conv2dGrads g;
    g.dkernels = Tensor(kernels.shape());
    g.dbias = Tensor::vector(kernels.dim(0));
    conv2d_backward_into(kernels, cache, dout, g.dkernels, g.dbias, g.dinput);
    return g;
}

Tensor maxpool_forward(const Tensor& maps, std::size_t pool, MaxPoolCache* cache) {
    require(maps.rank() == 3, "maxpool_forward: expected rank-3 maps");
    if (pool == 0) throw ParamError("maxpool_forward: pool size must be positive");
    const std::size_t filters = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
    const std::size_t oh = h / pool, ow = w / pool;
    require(oh > 0 && ow > 0, "maxpool_forward: maps smaller than pool window");
    Tensor out({filters, oh, ow});
    if (cache) {
        cache->in_shape = maps.shape();
        cache->argmax.assign(out.size(), 0);
        cache->pool = pool;
    }
    std::size_t oidx = 0;
    for (std::size_t fidx = 0; fidx < filters; ++fidx) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c, ++oidx) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t pr = 0; pr < pool; ++pr) {
                    for (std::size_t pc = 0; pc < pool; ++pc) {
                        const std::size_t rr = r * pool + pr, cc = c * pool + pc;
                        const double v = maps.at(fidx, rr, cc);
                        if (v > best) {
                            best = v;
                            best_idx = (fidx * h + rr) * w + cc;
                        }
                    }
                }
                out.at(fidx, r, c) = best;
                if (cache) cache->argmax[oidx] = best_idx;
            }
        }
    }
    return out;
}

Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& dout) {
    require(dout.size() == cache.argmax.size(), "maxpool_backward: gradient size mismatch");
    Tensor dinput(cache.in_shape);
    for (std::size_t i = 0; i < dout.size(); ++i) dinput[cache.argmax[i]] += dout[i];
    return dinput;
}

Tensor dropout_forward(const Tensor& x, double keep_prob, Rng& rng, bool training,
                       Tensor* mask_out) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw ParamError("dropout: keep probability must lie in (0,1], got " +
                         std::to_string(keep_prob));
    Tensor out = x;
    Tensor mask(x.shape());
    mask.fill(1.0);
    if (training && keep_prob < 1.0) {
        const double inv = 1.0 / keep_prob;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (rng.uniform01() < keep_prob) {
                mask[i] = inv;
                out[i] *= inv;
            } else {
                mask[i] = 0.0;
                out[i] = 0.0;
            }
        }
    }
    if (mask_out) *mask_out = std::move(mask);
    return out;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
    return dx;
}

Tensor softmax(const Tensor& logits) {
    require(logits.rank() == 1 && logits.size() > 0, "softmax: expected non-empty vector");
    Tensor out = Tensor::vector(logits.size());
    double max_logit = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) max_logit = std::max(max_logit, logits[i]);
    double denom = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        denom += out[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= denom;
    return out;
}

double cross_entropy(const Tensor& probs, std::size_t label_index) {
    require(label_index < probs.size(), "cross_entropy: label index out of range");
    return -std::log(probs[label_index]);
}

double l2_penalty(const std::vector<const Tensor*>& weights, double lambda) {
    if (lambda < 0) throw ParamError("l2_penalty: lambda must be non-negative");
    double acc = 0;
    for (const Tensor* w : weights) acc += w->squared_norm();
    return lambda * acc;
}

double cross_entropy_l2(const Tensor& probs, std::size_t label_index, double lambda,
                        const std::vector<const Tensor*>& weights) {
    return cross_entropy(probs, label_index) + l2_penalty(weights, lambda);
}

Tensor softmax_cross_entropy_backward(const Tensor& probs, std::size_t label_index) {
    require(label_index < probs.size(), "softmax_cross_entropy_backward: label out of range");
    Tensor dlogits = probs;
    dlogits[label_index] -= 1.0;
    return dlogits;
}

void accumulate_outer(const Tensor& dy, const Tensor& x, Tensor& dW) {
    require(dW.rank() == 2 && dW.dim(0) == dy.size() && dW.dim(1) == x.size(),
            "accumulate_outer: shape mismatch");
    outer_add(dy, x, dW);
}

void accumulate_matvec_transposed(const Tensor& W, const Tensor& dy, Tensor& dx) {
    require(W.rank() == 2 && W.dim(0) == dy.size() && W.dim(1) == dx.size(),
            "accumulate_matvec_transposed: shape mismatch");
    matvec_transposed_add(W, dy, dx);
}

void xavier_uniform(Tensor& W, Rng& rng) {
    require(W.rank() == 2, "xavier_uniform: expected rank-2 weight");
    const double limit = std::sqrt(6.0 / static_cast<double>(W.dim(0) + W.dim(1)));
    for (std::size_t i = 0; i < W.size(); ++i) W[i] = rng.uniform(-limit, limit);
}

LstmCellParams lstm_init(std::size_t input, std::size_t hidden, Rng& rng) {
    LstmCellParams p = LstmCellParams::zeros(input, hidden);
    for (Tensor* w : p.weight_matrices()) xavier_uniform(*w, rng);
    p.b_f.fill(1.0);
    return p;
}

void write_tensor(std::ostream& out, std::string_view name, const Tensor& t) {
    out << "tensor " << name << ' ' << t.rank();
    for (std::size_t d : t.shape()) out << ' ' << d;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", t[i]);
        out << buf << ((i + 1) % 8 == 0 || i + 1 == t.size() ? '\n' : ' ');
    }
    if (t.size() == 0) out << '\n';
}

Tensor read_tensor(std::istream& in, std::string_view expected_name) {
    std::string token, name;
    if (!(in >> token) || token != "tensor")
        throw FormatError("model file: expected 'tensor' block, got '" + token + "'");
    in >> name;
    if (!expected_name.empty() && name != expected_name)
        throw FormatError("model file: expected tensor '" + std::string(expected_name) +
                          "', found '" + name + "'");
    std::size_t rank = 0;
    if (!(in >> rank) || rank > 4)
        throw FormatError("model file: bad rank for tensor '" + name + "'");
    if (rank == 0) return Tensor();  // placeholder tensor of an absent stage
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape)
        if (!(in >> d)) throw FormatError("model file: bad shape for tensor '" + name + "'");
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!(in >> t[i]))
            throw FormatError("model file: truncated values for tensor '" + name + "'");
    return t;
}

} // namespace flowclass::nn
