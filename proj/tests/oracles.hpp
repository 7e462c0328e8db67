// Independent reference implementations the tests check the library against.
// Everything here is deliberately written as plain loops in extended
// precision, separate from the code paths under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "flowclass/nn_core.hpp"
#include "flowclass/rng.hpp"

namespace oracle {

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

// true when a and b agree to `rel` relative error or `abs_floor` absolutely
inline bool close(double a, double b, double rel, double abs_floor = 0.0) {
    return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

// ---- statistics ----------------------------------------------------------

struct Moments {
    double max = 0, min = 0, mean = 0, sum = 0;
    double std_dev = 0, variance = 0, skewness = 0, kurtosis = 0;
};

// Two-pass population moments in long double.
inline Moments moments(const std::vector<double>& values) {
    Moments m;
    const std::size_t n = values.size();
    if (n == 0) return m;
    long double sum = 0.0L;
    long double max = values[0], min = values[0];
    for (double v : values) {
        sum += v;
        max = std::max<long double>(max, v);
        min = std::min<long double>(min, v);
    }
    const long double mean = sum / static_cast<long double>(n);
    long double m2 = 0.0L, m3 = 0.0L, m4 = 0.0L;
    for (double v : values) {
        const long double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<long double>(n);
    m3 /= static_cast<long double>(n);
    m4 /= static_cast<long double>(n);
    m.max = static_cast<double>(max);
    m.min = static_cast<double>(min);
    m.mean = static_cast<double>(mean);
    m.sum = static_cast<double>(sum);
    m.variance = static_cast<double>(m2);
    m.std_dev = static_cast<double>(std::sqrt(m2));
    if (m2 > 0.0L) {
        m.skewness = static_cast<double>(m3 / (m2 * std::sqrt(m2)));
        m.kurtosis = static_cast<double>(m4 / (m2 * m2));
    }
    return m;
}

// ---- neural layers -------------------------------------------------------

// Valid cross-correlation + bias + ReLU, quadruple loop in long double.
inline std::vector<std::vector<std::vector<double>>> conv2d(
    const std::vector<std::vector<double>>& input,
    const std::vector<std::vector<std::vector<double>>>& kernels,
    const std::vector<double>& bias) {
    const std::size_t h = input.size(), w = input[0].size();
    const std::size_t kh = kernels[0].size(), kw = kernels[0][0].size();
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    std::vector<std::vector<std::vector<double>>> out(
        kernels.size(), std::vector<std::vector<double>>(oh, std::vector<double>(ow, 0.0)));
    for (std::size_t f = 0; f < kernels.size(); ++f)
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t c = 0; c < ow; ++c) {
                long double acc = bias[f];
                for (std::size_t i = 0; i < kh; ++i)
                    for (std::size_t j = 0; j < kw; ++j)
                        acc += static_cast<long double>(kernels[f][i][j]) * input[r + i][c + j];
                out[f][r][c] = std::max(0.0, static_cast<double>(acc));
            }
    return out;
}

// Non-overlapping max pool with trailing remainder dropped.
inline std::vector<std::vector<std::vector<double>>> maxpool(
    const std::vector<std::vector<std::vector<double>>>& maps, std::size_t pool) {
    const std::size_t oh = maps[0].size() / pool, ow = maps[0][0].size() / pool;
    std::vector<std::vector<std::vector<double>>> out(
        maps.size(), std::vector<std::vector<double>>(oh, std::vector<double>(ow, 0.0)));
    for (std::size_t f = 0; f < maps.size(); ++f)
        for (std::size_t r = 0; r < oh; ++r)
            for (std::size_t c = 0; c < ow; ++c) {
                double best = maps[f][r * pool][c * pool];
                for (std::size_t i = 0; i < pool; ++i)
                    for (std::size_t j = 0; j < pool; ++j)
                        best = std::max(best, maps[f][r * pool + i][c * pool + j]);
                out[f][r][c] = best;
            }
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
    long double max = logits[0];
    for (double v : logits) max = std::max<long double>(max, v);
    long double denom = 0.0L;
    std::vector<long double> e(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(static_cast<long double>(logits[i]) - max);
        denom += e[i];
    }
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        out[i] = static_cast<double>(e[i] / denom);
    return out;
}

// One LSTM cell step evaluated element by element in long double.
struct LstmScalarState {
    std::vector<double> h, s;
};

inline LstmScalarState lstm_cell(const flowclass::nn::LstmCellParams& p,
                                 const std::vector<double>& x, const LstmScalarState& prev) {
    const std::size_t hidden = p.hidden_size(), input = p.input_size();
    LstmScalarState next{std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
    for (std::size_t u = 0; u < hidden; ++u) {
        long double ag = p.b_g[u], ai = p.b_i[u], af = p.b_f[u], ao = p.b_o[u];
        for (std::size_t j = 0; j < input; ++j) {
            ag += static_cast<long double>(p.W_gx.at(u, j)) * x[j];
            ai += static_cast<long double>(p.W_ix.at(u, j)) * x[j];
            af += static_cast<long double>(p.W_fx.at(u, j)) * x[j];
            ao += static_cast<long double>(p.W_ox.at(u, j)) * x[j];
        }
        for (std::size_t j = 0; j < hidden; ++j) {
            ag += static_cast<long double>(p.W_gh.at(u, j)) * prev.h[j];
            ai += static_cast<long double>(p.W_ih.at(u, j)) * prev.h[j];
            af += static_cast<long double>(p.W_fh.at(u, j)) * prev.h[j];
            ao += static_cast<long double>(p.W_oh.at(u, j)) * prev.h[j];
        }
        const long double g = std::tanh(ag);
        const long double i = 1.0L / (1.0L + std::exp(-ai));
        const long double f = 1.0L / (1.0L + std::exp(-af));
        const long double o = 1.0L / (1.0L + std::exp(-ao));
        const long double s = g * i + static_cast<long double>(prev.s[u]) * f;
        next.s[u] = static_cast<double>(s);
        next.h[u] = static_cast<double>(std::tanh(s) * o);
    }
    return next;
}

// ---- finite differences ---------------------------------------------------

// Central finite-difference gradient of `loss` with respect to the entries of
// `param`, in place.
template <class LossFn>
std::vector<double> fd_gradient(flowclass::nn::Tensor& param, double eps, LossFn&& loss) {
    std::vector<double> grad(param.size(), 0.0);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + eps;
        const double up = loss();
        param[i] = saved - eps;
        const double down = loss();
        param[i] = saved;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

// ---- random helpers --------------------------------------------------------

inline flowclass::nn::Tensor random_tensor(std::vector<std::size_t> shape, flowclass::Rng& rng,
                                           double lo = -1.0, double hi = 1.0) {
    flowclass::nn::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace oracle
