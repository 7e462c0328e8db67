#include "flowclass/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "flowclass/errors.hpp"
#include "flowclass/rng.hpp"

namespace flowclass {

namespace {

std::string format_double(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

} // namespace

void SplitSpec::validate(const DeviceTable& table) const {
    if (train.empty()) throw ValidationError("split: train side is empty");
    for (const MacAddress& mac : train)
        if (test.count(mac))
            throw ValidationError("split: device " + mac.to_string() +
                                  " appears on both sides");
    std::set<int> train_categories;
    for (const MacAddress& mac : train) {
        const auto category = table.category_of(mac);
        if (!category)
            throw ValidationError("split: train device " + mac.to_string() +
                                  " missing from the device table");
        train_categories.insert(*category);
    }
    for (const MacAddress& mac : test) {
        const auto category = table.category_of(mac);
        if (!category)
            throw ValidationError("split: test device " + mac.to_string() +
                                  " missing from the device table");
        if (!train_categories.count(*category))
            throw ValidationError("split: category " + std::to_string(*category) +
                                  " has test devices but no train device");
    }
}

SplitSpec parse_split(std::istream& in) {
    SplitSpec split;
    std::set<MacAddress>* side = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) stripped.push_back(c);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped == "[train]") {
            side = &split.train;
        } else if (stripped == "[test]") {
            side = &split.test;
        } else {
            const auto mac = MacAddress::parse(stripped);
            if (!mac)
                throw FormatError("split line " + std::to_string(line_no) + ": bad MAC '" +
                                  stripped + "'");
            if (!side)
                throw FormatError("split line " + std::to_string(line_no) +
                                  ": MAC before any [train]/[test] section");
            side->insert(*mac);
        }
    }
    return split;
}

SplitSpec load_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open split file: " + path.string());
    return parse_split(in);
}

void write_split(const SplitSpec& split, std::ostream& out) {
    out << "[train]\n";
    for (const MacAddress& mac : split.train) out << mac.to_string() << '\n';
    out << "[test]\n";
    for (const MacAddress& mac : split.test) out << mac.to_string() << '\n';
}

void save_split(const SplitSpec& split, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write split file: " + path.string());
    write_split(split, out);
}

EvalReport score_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                             std::size_t num_classes) {
    if (truth.size() != predicted.size())
        throw ParamError("score_predictions: label count mismatch");
    EvalReport report;
    report.num_classes = num_classes;
    report.test_samples = truth.size();
    report.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 1 || static_cast<std::size_t>(t) > num_classes || p < 1 ||
            static_cast<std::size_t>(p) > num_classes)
            throw DataError("score_predictions: label outside [1, num_classes]");
        report.confusion[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p - 1)] += 1;
        if (t == p) ++hits;
    }
    report.accuracy = truth.empty() ? 0.0 : static_cast<double>(hits) / truth.size();
    report.precision.assign(num_classes, 0.0);
    report.recall.assign(num_classes, 0.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::size_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            row_sum += report.confusion[c][j];
            col_sum += report.confusion[j][c];
        }
        report.recall[c] = row_sum ? static_cast<double>(report.confusion[c][c]) / row_sum : 0.0;
        report.precision[c] =
            col_sum ? static_cast<double>(report.confusion[c][c]) / col_sum : 0.0;
    }
    return report;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << "algo: " << report.algo << "  seed: " << report.seed
        << "  test samples: " << report.test_samples << '\n';
    if (!report.notes.empty()) out << report.notes << '\n';
    out << "accuracy: " << format_double(report.accuracy, 4) << '\n';
    out << "class  precision  recall\n";
    for (std::size_t c = 0; c < report.num_classes; ++c)
        out << "  " << (c + 1) << "      " << format_double(report.precision[c], 4) << "     "
            << format_double(report.recall[c], 4) << '\n';
    out << "confusion matrix (rows = true, columns = predicted):\n";
    for (std::size_t t = 0; t < report.num_classes; ++t) {
        out << " ";
        for (std::size_t p = 0; p < report.num_classes; ++p)
            out << ' ' << report.confusion[t][p];
        out << '\n';
    }
    return out.str();
}

std::string report_csv_header() { return "algo,seed,test_samples,accuracy"; }

std::string report_csv_row(const EvalReport& report) {
    std::ostringstream out;
    out << report.algo << ',' << report.seed << ',' << report.test_samples << ','
        << format_double(report.accuracy, 6);
    return out.str();
}

std::map<MacAddress, std::vector<WindowedSample>> featurize_streams(
    const std::map<MacAddress, DeviceStream>& streams, const DeviceTable& table,
    const FeaturizeParams& params) {
    std::vector<std::string> names =
        params.feature_names.empty() ? default_six_features() : params.feature_names;
    for (auto& name : names) name = resolve_feature_name(name);

    std::map<MacAddress, std::vector<WindowedSample>> windows;
    for (const auto& [mac, stream] : streams) {
        const auto category = table.category_of(mac);
        if (!category)
            throw DataError("featurize: device " + mac.to_string() +
                            " missing from the device table");
        const std::vector<Segment> segments = segment_stream(stream, params.interval_secs);
        std::vector<FeatureVector> sequence;
        sequence.reserve(segments.size());
        for (const Segment& segment : segments)
            sequence.push_back(
                select_schema(extract_features(segment, mac, params.control), names));
        const std::int64_t first_interval = segments.empty() ? 0 : segments.front().interval_index;
        windows.emplace(mac, make_windows(sequence, *category, mac, params.window,
                                          params.overlap, first_interval));
    }
    return windows;
}

namespace {

struct RepeatOutcome {
    EvalReport report;
    std::string model_text;
    FitAudit audit;
};

RepeatOutcome run_repeat(const std::map<MacAddress, std::vector<WindowedSample>>& windows,
                         const SplitSpec& split, std::string_view algo, const AlgoConfig& config,
                         std::uint64_t seed, double train_ratio, std::size_t num_classes,
                         const std::string& notes) {
    std::vector<WindowedSample> train;
    std::vector<WindowedSample> test;
    for (const auto& [mac, samples] : windows) {
        if (split.train.count(mac)) train.insert(train.end(), samples.begin(), samples.end());
        else if (split.test.count(mac)) test.insert(test.end(), samples.begin(), samples.end());
    }
    if (train.empty()) throw DataError("run_experiment: no training samples");

    Rng rng(seed);
    rng.shuffle(train);
    if (train_ratio < 1.0) {
        const auto keep = static_cast<std::size_t>(
            std::floor(train_ratio * static_cast<double>(train.size())));
        if (keep == 0) throw DataError("run_experiment: train ratio leaves no samples");
        train.resize(keep);
    }

    RepeatOutcome outcome;
    const std::unique_ptr<Classifier> classifier = make_classifier(algo, config);
    classifier->fit(train, seed, &outcome.audit);

    std::vector<int> truth;
    truth.reserve(test.size());
    for (const auto& sample : test) truth.push_back(sample.label);
    const std::vector<int> predicted = classifier->predict_all(test);

    outcome.report = score_predictions(truth, predicted, num_classes);
    outcome.report.algo = classifier->name();
    outcome.report.seed = seed;
    outcome.report.notes = notes;
    outcome.model_text = classifier->serialized();
    return outcome;
}

} // namespace

ExperimentResult run_experiment(const std::map<MacAddress, std::vector<WindowedSample>>& windows,
                                const DeviceTable& table, const SplitSpec& split,
                                std::string_view algo, const AlgoConfig& config,
                                const ExperimentOptions& options) {
    if (options.repeats < 1) throw ParamError("run_experiment: repeats must be >= 1");
    if (!(options.train_ratio > 0.0) || options.train_ratio > 1.0)
        throw ParamError("run_experiment: train ratio must lie in (0,1]");
    split.validate(table);

    std::size_t num_classes = config.cascade.num_classes;
    if (num_classes == 0) {
        int max_label = 0;
        for (const auto& entry : table.entries()) max_label = std::max(max_label,
                                                                       entry.category_id);
        num_classes = static_cast<std::size_t>(max_label);
    }

    std::ostringstream notes;
    notes << "train devices: " << split.train.size() << "  test devices: " << split.test.size()
          << "  train ratio: " << options.train_ratio
          << " (sample-level share of the train devices' windows)";

    ExperimentResult result;
    result.reports.resize(options.repeats);
    result.model_texts.resize(options.repeats);

    std::vector<FitAudit> audits(options.repeats);
    const auto run_one = [&](std::size_t r) {
        RepeatOutcome outcome = run_repeat(windows, split, algo, config,
                                           options.base_seed + r, options.train_ratio,
                                           num_classes, notes.str());
        result.reports[r] = std::move(outcome.report);
        result.model_texts[r] = std::move(outcome.model_text);
        audits[r] = std::move(outcome.audit);
    };

    if (options.parallel && options.repeats > 1) {
        std::vector<std::future<void>> jobs;
        jobs.reserve(options.repeats);
        for (std::size_t r = 0; r < options.repeats; ++r)
            jobs.push_back(std::async(std::launch::async, run_one, r));
        for (auto& job : jobs) job.get();
    } else {
        for (std::size_t r = 0; r < options.repeats; ++r) run_one(r);
    }

    for (const FitAudit& audit : audits) {
        for (const auto& [mac, count] : audit.fit_samples)
            result.audit.fit_samples[mac] += count;
        for (const auto& [mac, count] : audit.norm_vectors)
            result.audit.norm_vectors[mac] += count;
    }

    double sum = 0, sum_sq = 0;
    for (const auto& report : result.reports) {
        sum += report.accuracy;
        sum_sq += report.accuracy * report.accuracy;
    }
    const double n = static_cast<double>(options.repeats);
    result.mean_accuracy = sum / n;
    result.std_accuracy = std::sqrt(std::max(0.0, sum_sq / n - result.mean_accuracy *
                                                                   result.mean_accuracy));
    return result;
}

SweepParam sweep_param_from_string(std::string_view name) {
    if (name == "interval") return SweepParam::IntervalSecs;
    if (name == "window") return SweepParam::WindowSize;
    if (name == "ratio") return SweepParam::TrainRatio;
    throw ParamError("unknown sweep parameter '" + std::string(name) +
                     "' (expected interval|window|ratio)");
}

std::vector<SweepPoint> sweep(const std::map<MacAddress, DeviceStream>& streams,
                              const DeviceTable& table, const SplitSpec& split, SweepParam param,
                              const std::vector<double>& values, std::string_view algo,
                              const AlgoConfig& config, const FeaturizeParams& featurize,
                              const ExperimentOptions& options) {
    if (values.empty()) throw ParamError("sweep: no values given");
    std::vector<SweepPoint> points;
    for (const double value : values) {
        FeaturizeParams fp = featurize;
        AlgoConfig algo_config = config;
        ExperimentOptions opts = options;
        switch (param) {
            case SweepParam::IntervalSecs:
                if (!(value > 0)) throw ParamError("sweep: interval values must be positive");
                fp.interval_secs = value;
                break;
            case SweepParam::WindowSize: {
                const auto window = static_cast<std::size_t>(value);
                if (window < 2 || static_cast<double>(window) != value)
                    throw ParamError("sweep: window values must be integers >= 2");
                fp.window = window;
                fp.overlap = window / 2;  // keep the 50% overlap convention
                algo_config.cascade.window = window;
                break;
            }
            case SweepParam::TrainRatio:
                if (!(value > 0.0) || value > 1.0)
                    throw ParamError("sweep: ratio values must lie in (0,1]");
                opts.train_ratio = value;
                break;
        }
        const auto windows = featurize_streams(streams, table, fp);
        const ExperimentResult result =
            run_experiment(windows, table, split, algo, algo_config, opts);
        points.push_back({value, result.mean_accuracy, result.std_accuracy});
    }
    return points;
}

std::string sweep_table_csv(SweepParam param, const std::vector<SweepPoint>& points) {
    std::ostringstream out;
    switch (param) {
        case SweepParam::IntervalSecs: out << "interval_secs"; break;
        case SweepParam::WindowSize: out << "window"; break;
        case SweepParam::TrainRatio: out << "train_ratio"; break;
    }
    out << ",mean_accuracy,std_accuracy\n";
    for (const auto& point : points)
        out << format_double(point.value, 6) << ',' << format_double(point.mean_accuracy, 6)
            << ',' << format_double(point.std_accuracy, 6) << '\n';
    return out.str();
}

} // namespace flowclass
