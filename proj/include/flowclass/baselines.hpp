#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flowclass/cascade.hpp"
#include "flowclass/features.hpp"

namespace flowclass {

// Counters filled while fitting: which device's samples reached the training
// routine and which device's vectors were folded into normalization
// statistics. The evaluation harness checks these against the held-out set.
struct FitAudit {
    std::map<MacAddress, std::size_t> fit_samples;
    std::map<MacAddress, std::size_t> norm_vectors;
};

// Shared surface for the cascade and every baseline; the evaluation harness
// only speaks this interface.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual std::string name() const = 0;
    virtual void fit(const std::vector<WindowedSample>& train, std::uint64_t seed,
                     FitAudit* audit = nullptr) = 0;
    virtual int predict(const WindowedSample& sample) const = 0;
    virtual void save(std::ostream& out) const = 0;

    std::vector<int> predict_all(const std::vector<WindowedSample>& samples) const;
    std::string serialized() const;
};

struct KnnConfig {
    std::size_t k = 10;
};

// Euclidean nearest neighbours on the flattened, min-max scaled window.
// Distance ties break by training order, vote ties by lowest label.
class KnnClassifier : public Classifier {
public:
    explicit KnnClassifier(KnnConfig config) : config_(config) {}

    std::string name() const override { return "knn"; }
    void fit(const std::vector<WindowedSample>& train, std::uint64_t seed,
             FitAudit* audit) override;
    int predict(const WindowedSample& sample) const override;
    void save(std::ostream& out) const override;
    static KnnClassifier load(std::istream& in);  // header line already consumed

    std::size_t k() const { return config_.k; }

private:
    KnnConfig config_;
    ScaleParams scaler_;
    std::vector<std::vector<double>> train_x_;
    std::vector<int> train_y_;
    std::size_t window_ = 0;
};

struct TreeConfig {
    std::size_t max_depth = 12;
};

// Greedy CART-style decision tree: each split minimizes weighted Gini
// impurity over midpoints of sorted distinct feature values.
class TreeClassifier : public Classifier {
public:
    explicit TreeClassifier(TreeConfig config) : config_(config) {}

    std::string name() const override { return "tree"; }
    void fit(const std::vector<WindowedSample>& train, std::uint64_t seed,
             FitAudit* audit) override;
    int predict(const WindowedSample& sample) const override;
    void save(std::ostream& out) const override;
    static TreeClassifier load(std::istream& in);

    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0;
        std::size_t left = 0, right = 0;
        std::vector<std::size_t> counts;  // per class, 1-based labels at index-1
    };
    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t depth() const;

private:
    std::size_t grow(const std::vector<std::size_t>& indices, std::size_t depth);

    TreeConfig config_;
    ScaleParams scaler_;
    std::vector<Node> nodes_;
    std::size_t num_classes_ = 0;
    std::size_t window_ = 0;
    // training-time scratch
    std::vector<std::vector<double>> fit_x_;
    std::vector<int> fit_y_;
};

// The cascade and its two ablations behind the shared interface.
class NeuralClassifier : public Classifier {
public:
    explicit NeuralClassifier(CascadeConfig config) : config_(std::move(config)) {}
    explicit NeuralClassifier(CascadeModel model);

    std::string name() const override { return std::string(to_string(config_.arch)); }
    void fit(const std::vector<WindowedSample>& train, std::uint64_t seed,
             FitAudit* audit) override;
    int predict(const WindowedSample& sample) const override;
    void save(std::ostream& out) const override;

    const CascadeModel& model() const;

private:
    CascadeConfig config_;
    std::unique_ptr<CascadeModel> model_;
};

// Everything the `key = value` config file can set: the cascade knobs plus
// the baseline hyperparameters.
struct AlgoConfig {
    CascadeConfig cascade;
    KnnConfig knn;
    TreeConfig tree;
};

AlgoConfig parse_algo_config(std::istream& in);
AlgoConfig load_algo_config(const std::filesystem::path& path);

// algo is one of cascade|lstm|cnn|knn|tree.
std::unique_ptr<Classifier> make_classifier(std::string_view algo, const AlgoConfig& config);

// Reads any model file of the family and restores the matching classifier.
std::unique_ptr<Classifier> load_classifier(std::istream& in);
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path);

// Flattens a window into one vector, time-major (vector 0 first).
std::vector<double> flatten_window(const WindowedSample& sample);

} // namespace flowclass
