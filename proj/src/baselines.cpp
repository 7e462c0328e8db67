#include "flowclass/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "flowclass/errors.hpp"

namespace flowclass {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void record_fit(FitAudit* audit, const std::vector<WindowedSample>& train) {
    if (!audit) return;
    for (const auto& sample : train) {
        audit->fit_samples[sample.device_mac] += 1;
        audit->norm_vectors[sample.device_mac] += sample.features.size();
    }
}

std::vector<FeatureVector> all_vectors(const std::vector<WindowedSample>& samples) {
    std::vector<FeatureVector> out;
    for (const auto& sample : samples)
        for (const auto& v : sample.features) out.push_back(v);
    return out;
}

std::vector<double> flatten_scaled(const ScaleParams& scaler, const WindowedSample& sample) {
    std::vector<double> out;
    out.reserve(sample.features.size() * scaler.offset.size());
    for (const auto& v : sample.features) {
        const FeatureVector scaled = apply_scale(scaler, v);
        out.insert(out.end(), scaled.values.begin(), scaled.values.end());
    }
    return out;
}

double gini(const std::vector<std::size_t>& counts, double n) {
    double acc = 1.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / n;
        acc -= p * p;
    }
    return acc;
}

int majority_label(const std::vector<std::size_t>& counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;  // strict: ties keep the lowest label
    return static_cast<int>(best) + 1;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

std::vector<int> Classifier::predict_all(const std::vector<WindowedSample>& samples) const {
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& sample : samples) labels.push_back(predict(sample));
    return labels;
}

std::string Classifier::serialized() const {
    std::ostringstream out;
    save(out);
    return out.str();
}

std::vector<double> flatten_window(const WindowedSample& sample) {
    std::vector<double> out;
    for (const auto& v : sample.features)
        out.insert(out.end(), v.values.begin(), v.values.end());
    return out;
}

// ---------------------------------------------------------------------------
// kNN
// ---------------------------------------------------------------------------

void KnnClassifier::fit(const std::vector<WindowedSample>& train, std::uint64_t /*seed*/,
                        FitAudit* audit) {
    if (train.empty()) throw DataError("knn fit: empty training set");
    if (config_.k < 1 || config_.k > train.size())
        throw ParamError("knn fit: k=" + std::to_string(config_.k) +
                         " outside [1, " + std::to_string(train.size()) + "]");
    record_fit(audit, train);
    scaler_ = fit_minmax(all_vectors(train));
    window_ = train.front().features.size();
    train_x_.clear();
    train_y_.clear();
    for (const auto& sample : train) {
        train_x_.push_back(flatten_scaled(scaler_, sample));
        train_y_.push_back(sample.label);
    }
}

int KnnClassifier::predict(const WindowedSample& sample) const {
    if (train_x_.empty()) throw ParamError("knn predict: fit has not been called");
    const std::vector<double> q = flatten_scaled(scaler_, sample);

    // k best (distance, index) pairs, ascending; lexicographic comparison
    // makes distance ties resolve to the earliest training row
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(config_.k + 1);
    for (std::size_t i = 0; i < train_x_.size(); ++i) {
        const std::vector<double>& row = train_x_[i];
        double d2 = 0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double diff = row[j] - q[j];
            d2 += diff * diff;
        }
        const std::pair<double, std::size_t> cand{d2, i};
        if (best.size() < config_.k) {
            best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        } else if (cand < best.back()) {
            best.pop_back();
            best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
        }
    }

    std::map<int, std::size_t> votes;
    for (const auto& [d2, i] : best) votes[train_y_[i]] += 1;
    int winner = 0;
    std::size_t winner_votes = 0;
    for (const auto& [label, count] : votes) {
        if (count > winner_votes) {  // map iterates labels ascending: ties keep lowest
            winner = label;
            winner_votes = count;
        }
    }
    return winner;
}

void KnnClassifier::save(std::ostream& out) const {
    out << "flowclass-model 1 knn\n";
    out << "k " << config_.k << '\n';
    out << "window " << window_ << '\n';
    out << "rows " << train_x_.size() << '\n';
    out << "cols " << (train_x_.empty() ? 0 : train_x_.front().size()) << '\n';
    write_scaler(out, scaler_);
    out << "data\n";
    for (std::size_t i = 0; i < train_x_.size(); ++i) {
        out << train_y_[i];
        for (double v : train_x_[i]) out << ' ' << format_double(v);
        out << '\n';
    }
    out << "end\n";
}

KnnClassifier KnnClassifier::load(std::istream& in) {
    KnnConfig config;
    std::size_t window = 0, rows = 0, cols = 0;
    std::string key;
    while (in >> key) {
        if (key == "scaler") break;
        if (key == "k") in >> config.k;
        else if (key == "window") in >> window;
        else if (key == "rows") in >> rows;
        else if (key == "cols") in >> cols;
        else throw FormatError("knn model: unknown key '" + key + "'");
        if (!in) throw FormatError("knn model: bad value for key '" + key + "'");
    }
    KnnClassifier knn(config);
    knn.window_ = window;
    knn.scaler_ = read_scaler(in, /*keyword_consumed=*/true);
    std::string token;
    if (!(in >> token) || token != "data") throw FormatError("knn model: missing data section");
    knn.train_x_.assign(rows, std::vector<double>(cols, 0.0));
    knn.train_y_.assign(rows, 0);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!(in >> knn.train_y_[i])) throw FormatError("knn model: truncated data");
        for (std::size_t j = 0; j < cols; ++j)
            if (!(in >> knn.train_x_[i][j])) throw FormatError("knn model: truncated data");
    }
    if (!(in >> token) || token != "end") throw FormatError("knn model: missing end marker");
    return knn;
}

// ---------------------------------------------------------------------------
// Decision tree
// ---------------------------------------------------------------------------

std::size_t TreeClassifier::grow(const std::vector<std::size_t>& indices, std::size_t depth) {
    Node node;
    node.counts.assign(num_classes_, 0);
    for (std::size_t i : indices) node.counts[static_cast<std::size_t>(fit_y_[i] - 1)] += 1;
    const std::size_t node_id = nodes_.size();
    nodes_.push_back(node);

    const bool pure =
        std::count_if(node.counts.begin(), node.counts.end(),
                      [](std::size_t c) { return c > 0; }) <= 1;
    if (pure || depth >= config_.max_depth || indices.size() < 2) return node_id;

    const std::size_t n_features = fit_x_.front().size();
    const double n = static_cast<double>(indices.size());
    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0;

    std::vector<std::pair<double, int>> column(indices.size());
    for (std::size_t f = 0; f < n_features; ++f) {
        for (std::size_t i = 0; i < indices.size(); ++i)
            column[i] = {fit_x_[indices[i]][f], fit_y_[indices[i]]};
        std::sort(column.begin(), column.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (column.front().first == column.back().first) continue;  // single distinct value

        std::vector<std::size_t> left_counts(num_classes_, 0);
        std::vector<std::size_t> right_counts = nodes_[node_id].counts;
        for (std::size_t i = 0; i + 1 < column.size(); ++i) {
            const std::size_t cls = static_cast<std::size_t>(column[i].second - 1);
            left_counts[cls] += 1;
            right_counts[cls] -= 1;
            if (column[i].first == column[i + 1].first) continue;
            const double n_left = static_cast<double>(i + 1);
            const double n_right = n - n_left;
            const double impurity =
                (n_left * gini(left_counts, n_left) + n_right * gini(right_counts, n_right)) / n;
            if (impurity < best_impurity) {
                best_impurity = impurity;
                best_feature = static_cast<int>(f);
                best_threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
            }
        }
    }
    if (best_feature < 0) return node_id;  // every feature constant on this node

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : indices) {
        if (fit_x_[i][static_cast<std::size_t>(best_feature)] <= best_threshold)
            left_idx.push_back(i);
        else
            right_idx.push_back(i);
    }
    if (left_idx.empty() || right_idx.empty()) return node_id;  // degenerate midpoint

    nodes_[node_id].feature = best_feature;
    nodes_[node_id].threshold = best_threshold;
    const std::size_t left = grow(left_idx, depth + 1);
    nodes_[node_id].left = left;
    const std::size_t right = grow(right_idx, depth + 1);
    nodes_[node_id].right = right;
    return node_id;
}

void TreeClassifier::fit(const std::vector<WindowedSample>& train, std::uint64_t /*seed*/,
                         FitAudit* audit) {
    if (train.empty()) throw DataError("tree fit: empty training set");
    record_fit(audit, train);
    scaler_ = fit_minmax(all_vectors(train));
    window_ = train.front().features.size();

    fit_x_.clear();
    fit_y_.clear();
    int max_label = 0;
    for (const auto& sample : train) {
        fit_x_.push_back(flatten_scaled(scaler_, sample));
        fit_y_.push_back(sample.label);
        max_label = std::max(max_label, sample.label);
    }
    num_classes_ = static_cast<std::size_t>(max_label);

    nodes_.clear();
    std::vector<std::size_t> indices(train.size());
    std::iota(indices.begin(), indices.end(), 0);
    grow(indices, 0);

    fit_x_.clear();
    fit_y_.clear();
}

int TreeClassifier::predict(const WindowedSample& sample) const {
    if (nodes_.empty()) throw ParamError("tree predict: fit has not been called");
    const std::vector<double> q = flatten_scaled(scaler_, sample);
    std::size_t at = 0;
    while (nodes_[at].feature >= 0) {
        const Node& node = nodes_[at];
        at = q[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return majority_label(nodes_[at].counts);
}

std::size_t TreeClassifier::depth() const {
    if (nodes_.empty()) return 0;
    std::size_t deepest = 0;
    // iterative DFS carrying depth
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [id, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes_[id].feature >= 0) {
            stack.push_back({nodes_[id].left, d + 1});
            stack.push_back({nodes_[id].right, d + 1});
        }
    }
    return deepest;
}

void TreeClassifier::save(std::ostream& out) const {
    out << "flowclass-model 1 tree\n";
    out << "max_depth " << config_.max_depth << '\n';
    out << "num_classes " << num_classes_ << '\n';
    out << "window " << window_ << '\n';
    out << "nodes " << nodes_.size() << '\n';
    write_scaler(out, scaler_);
    for (const Node& node : nodes_) {
        out << "node " << node.feature << ' ' << format_double(node.threshold) << ' '
            << node.left << ' ' << node.right;
        for (std::size_t c : node.counts) out << ' ' << c;
        out << '\n';
    }
    out << "end\n";
}

TreeClassifier TreeClassifier::load(std::istream& in) {
    TreeConfig config;
    std::size_t num_classes = 0, window = 0, node_count = 0;
    std::string key;
    while (in >> key) {
        if (key == "scaler") break;
        if (key == "max_depth") in >> config.max_depth;
        else if (key == "num_classes") in >> num_classes;
        else if (key == "window") in >> window;
        else if (key == "nodes") in >> node_count;
        else throw FormatError("tree model: unknown key '" + key + "'");
        if (!in) throw FormatError("tree model: bad value for key '" + key + "'");
    }
    TreeClassifier tree(config);
    tree.num_classes_ = num_classes;
    tree.window_ = window;
    tree.scaler_ = read_scaler(in, /*keyword_consumed=*/true);
    tree.nodes_.resize(node_count);
    for (Node& node : tree.nodes_) {
        std::string token;
        if (!(in >> token) || token != "node")
            throw FormatError("tree model: expected node line");
        in >> node.feature >> node.threshold >> node.left >> node.right;
        node.counts.resize(num_classes);
        for (auto& c : node.counts) in >> c;
        if (!in) throw FormatError("tree model: truncated node line");
    }
    std::string tail;
    if (!(in >> tail) || tail != "end") throw FormatError("tree model: missing end marker");
    return tree;
}

// ---------------------------------------------------------------------------
// Neural wrappers
// ---------------------------------------------------------------------------

NeuralClassifier::NeuralClassifier(CascadeModel model)
    : config_(model.config), model_(std::make_unique<CascadeModel>(std::move(model))) {}

void NeuralClassifier::fit(const std::vector<WindowedSample>& train, std::uint64_t seed,
                           FitAudit* audit) {
    record_fit(audit, train);
    CascadeConfig config = config_;
    config.seed = seed;
    model_ = std::make_unique<CascadeModel>(train_cascade(train, config));
    config_ = model_->config;
}

int NeuralClassifier::predict(const WindowedSample& sample) const {
    if (!model_) throw ParamError("neural predict: fit has not been called");
    return predict_one(*model_, sample);
}

void NeuralClassifier::save(std::ostream& out) const {
    if (!model_) throw ParamError("neural save: fit has not been called");
    save_model(*model_, out);
}

const CascadeModel& NeuralClassifier::model() const {
    if (!model_) throw ParamError("neural model: fit has not been called");
    return *model_;
}

// ---------------------------------------------------------------------------
// Config files and factories
// ---------------------------------------------------------------------------

AlgoConfig parse_algo_config(std::istream& in) {
    AlgoConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw FormatError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");

        const auto as_size = [&](std::size_t& target) {
            std::size_t v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || p != value.data() + value.size())
                throw FormatError("config line " + std::to_string(line_no) + ": bad integer '" +
                                  value + "'");
            target = v;
        };
        const auto as_double = [&](double& target) {
            double v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || p != value.data() + value.size())
                throw FormatError("config line " + std::to_string(line_no) + ": bad number '" +
                                  value + "'");
            target = v;
        };
        const auto as_u64 = [&](std::uint64_t& target) {
            std::uint64_t v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || p != value.data() + value.size())
                throw FormatError("config line " + std::to_string(line_no) + ": bad integer '" +
                                  value + "'");
            target = v;
        };

        auto& c = config.cascade;
        if (key == "arch") c.arch = architecture_from_string(value);
        else if (key == "num_features") as_size(c.num_features);
        else if (key == "window") as_size(c.window);
        else if (key == "lstm_hidden") as_size(c.lstm_hidden);
        else if (key == "lstm_hidden2") as_size(c.lstm_hidden2);
        else if (key == "conv_filters") as_size(c.conv_filters);
        else if (key == "kernel") as_size(c.kernel);
        else if (key == "pool") as_size(c.pool);
        else if (key == "keep_prob") as_double(c.keep_prob);
        else if (key == "num_classes") as_size(c.num_classes);
        else if (key == "learning_rate") as_double(c.learning_rate);
        else if (key == "l2_lambda") as_double(c.l2_lambda);
        else if (key == "batch_size") as_size(c.batch_size);
        else if (key == "epochs") as_size(c.epochs);
        else if (key == "early_stop_min_delta") as_double(c.early_stop_min_delta);
        else if (key == "early_stop_patience") as_size(c.early_stop_patience);
        else if (key == "seed") as_u64(c.seed);
        else if (key == "knn_k") as_size(config.knn.k);
        else if (key == "tree_max_depth") as_size(config.tree.max_depth);
        else
            throw FormatError("config line " + std::to_string(line_no) + ": unknown key '" +
                              key + "'");
    }
    return config;
}

AlgoConfig load_algo_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    return parse_algo_config(in);
}

std::unique_ptr<Classifier> make_classifier(std::string_view algo, const AlgoConfig& config) {
    if (algo == "knn") return std::make_unique<KnnClassifier>(config.knn);
    if (algo == "tree") return std::make_unique<TreeClassifier>(config.tree);
    CascadeConfig cascade = config.cascade;
    cascade.arch = architecture_from_string(algo);
    return std::make_unique<NeuralClassifier>(cascade);
}

std::unique_ptr<Classifier> load_classifier(std::istream& in) {
    std::string magic, kind;
    int version = 0;
    if (!(in >> magic >> version >> kind) || magic != "flowclass-model")
        throw FormatError("not a flowclass model file");
    if (version != 1) throw FormatError("unsupported model format version");
    if (kind == "knn") return std::make_unique<KnnClassifier>(KnnClassifier::load(in));
    if (kind == "tree") return std::make_unique<TreeClassifier>(TreeClassifier::load(in));
    if (kind == "cascade" || kind == "lstm" || kind == "cnn") {
        // neural loader re-reads the header
        in.seekg(0);
        return std::make_unique<NeuralClassifier>(load_cascade_model(in));
    }
    throw FormatError("unknown model kind '" + kind + "'");
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path.string());
    return load_classifier(in);
}

} // namespace flowclass
