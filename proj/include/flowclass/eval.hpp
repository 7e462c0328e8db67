#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowclass/baselines.hpp"
#include "flowclass/features.hpp"
#include "flowclass/ingest.hpp"

namespace flowclass {

// Held-out-device split: test devices never appear in training.
struct SplitSpec {
    std::set<MacAddress> train;
    std::set<MacAddress> test;

    // Throws ValidationError unless the sets are disjoint, train is non-empty
    // and every category appearing on the test side has at least one train
    // device to learn from.
    void validate(const DeviceTable& table) const;
};

SplitSpec load_split(const std::filesystem::path& path);  // [train] / [test] sections
SplitSpec parse_split(std::istream& in);
void write_split(const SplitSpec& split, std::ostream& out);
void save_split(const SplitSpec& split, const std::filesystem::path& path);

struct EvalReport {
    std::string algo;
    std::uint64_t seed = 0;
    std::size_t num_classes = 0;
    std::size_t test_samples = 0;
    double accuracy = 0;
    std::vector<double> precision;                    // per class id 1..C
    std::vector<double> recall;                       // per class id 1..C
    std::vector<std::vector<std::size_t>> confusion;  // [true-1][predicted-1]
    std::string notes;                                // run metadata

    bool operator==(const EvalReport&) const = default;
};

// Builds the confusion matrix / accuracy / per-class rates from labels.
EvalReport score_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                             std::size_t num_classes);

std::string format_report(const EvalReport& report);  // human-readable block
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

struct FeaturizeParams {
    double interval_secs = 300;
    std::size_t window = 6;
    std::size_t overlap = 3;
    std::vector<std::string> feature_names;  // empty -> the default six
    ControlProtocolSet control;
};

// Segments every stream, extracts and projects features, and windows them.
// Values stay raw; scaling happens inside each classifier's fit so the
// statistics can only come from training data.
std::map<MacAddress, std::vector<WindowedSample>> featurize_streams(
    const std::map<MacAddress, DeviceStream>& streams, const DeviceTable& table,
    const FeaturizeParams& params);

struct ExperimentResult {
    std::vector<EvalReport> reports;       // one per repeat
    std::vector<std::string> model_texts;  // serialized model per repeat
    double mean_accuracy = 0;
    double std_accuracy = 0;  // population standard deviation
    FitAudit audit;           // merged over repeats
};

struct ExperimentOptions {
    std::size_t repeats = 5;
    std::uint64_t base_seed = 1;
    double train_ratio = 1.0;  // fraction of train-device samples used for fitting
    bool parallel = true;      // repeats fan out across threads
};

// Unseen-device evaluation protocol: per repeat r, seed base+r; shuffle the
// training windows, fit the classifier (scaler fitted inside on train data
// only), predict every test-device window and score it.
ExperimentResult run_experiment(const std::map<MacAddress, std::vector<WindowedSample>>& windows,
                                const DeviceTable& table, const SplitSpec& split,
                                std::string_view algo, const AlgoConfig& config,
                                const ExperimentOptions& options);

enum class SweepParam { IntervalSecs, WindowSize, TrainRatio };

SweepParam sweep_param_from_string(std::string_view name);  // interval|window|ratio

struct SweepPoint {
    double value = 0;
    double mean_accuracy = 0;
    double std_accuracy = 0;
};

// One run_experiment per value. IntervalSecs refeaturizes with a new T;
// WindowSize rewindows with 50% overlap; TrainRatio subsamples the training
// windows (test devices stay held out either way).
std::vector<SweepPoint> sweep(const std::map<MacAddress, DeviceStream>& streams,
                              const DeviceTable& table, const SplitSpec& split, SweepParam param,
                              const std::vector<double>& values, std::string_view algo,
                              const AlgoConfig& config, const FeaturizeParams& featurize,
                              const ExperimentOptions& options);

std::string sweep_table_csv(SweepParam param, const std::vector<SweepPoint>& points);

} // namespace flowclass
