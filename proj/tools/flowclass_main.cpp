// flowclass: classify IoT devices into semantic categories from their
// network traffic streams. Subcommands cover the whole pipeline: synthetic
// capture generation, ingest, featurization, training, prediction,
// evaluation and parameter sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowclass/baselines.hpp"
#include "flowclass/cascade.hpp"
#include "flowclass/errors.hpp"
#include "flowclass/eval.hpp"
#include "flowclass/features.hpp"
#include "flowclass/ingest.hpp"
#include "flowclass/synth.hpp"

namespace fs = std::filesystem;
using namespace flowclass;

namespace {

Scenario resolve_scenario(const std::string& arg) {
    if (arg == "default") return default_scenario();
    if (arg == "binary") return binary_scenario();
    return load_scenario(arg);
}

std::vector<std::string> read_feature_list(const std::string& arg) {
    if (arg.empty() || arg == "default6") return default_six_features();
    std::ifstream in(arg);
    if (!in) throw IoError("cannot open feature list file: " + arg);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        names.push_back(resolve_feature_name(line));
    }
    if (names.empty()) throw FormatError("feature list file is empty: " + arg);
    return names;
}

AlgoConfig config_from_option(const std::string& path) {
    if (path.empty()) return AlgoConfig{};
    return load_algo_config(path);
}

// The dataset fixes window length and schema width; keep the model config in
// step with it so a config file only has to set the learning knobs.
void sync_config_with_dataset(AlgoConfig& config, const std::vector<WindowedSample>& samples) {
    if (samples.empty()) return;
    config.cascade.window = samples.front().features.size();
    config.cascade.num_features = samples.front().features.front().values.size();
}

std::map<MacAddress, std::vector<WindowedSample>> group_by_device(
    const std::vector<WindowedSample>& samples) {
    std::map<MacAddress, std::vector<WindowedSample>> grouped;
    for (const auto& sample : samples) grouped[sample.device_mac].push_back(sample);
    return grouped;
}

DeviceTable table_from_samples(const std::vector<WindowedSample>& samples) {
    std::map<MacAddress, int> seen;
    for (const auto& sample : samples) seen.emplace(sample.device_mac, sample.label);
    std::vector<DeviceEntry> entries;
    for (const auto& [mac, label] : seen) entries.push_back({mac, label, mac.to_string()});
    return DeviceTable(std::move(entries));
}

int run(int argc, char** argv) {
    CLI::App app{"IoT device classification from network traffic streams"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic capture");
    std::string synth_scenario = "default";
    double synth_days = 19.0;
    std::uint64_t synth_seed = 1;
    std::string synth_out, synth_labels_out;
    synth_cmd->add_option("--scenario", synth_scenario,
                          "scenario file, or 'default' / 'binary' for the built-ins");
    synth_cmd->add_option("--duration-days", synth_days, "simulated duration in days");
    synth_cmd->add_option("--seed", synth_seed, "generation seed");
    synth_cmd->add_option("--out", synth_out, "capture CSV to write")->required();
    synth_cmd->add_option("--labels-out", synth_labels_out, "device list CSV to write")
        ->required();

    // --- ingest ---
    auto* ingest_cmd = app.add_subcommand("ingest", "split a capture into per-device streams");
    std::string ingest_input, ingest_devices, ingest_out;
    ingest_cmd->add_option("--input", ingest_input, "capture CSV")->required();
    ingest_cmd->add_option("--devices", ingest_devices, "device list CSV")->required();
    ingest_cmd->add_option("--out", ingest_out, "stream directory to write")->required();

    // --- featurize ---
    auto* feat_cmd = app.add_subcommand("featurize", "extract windowed feature datasets");
    std::string feat_streams, feat_out, feat_features = "default6", feat_control;
    double feat_interval = 300;
    std::size_t feat_window = 6, feat_overlap = 3;
    feat_cmd->add_option("--streams", feat_streams, "stream directory from ingest")->required();
    feat_cmd->add_option("--interval-secs", feat_interval, "segmentation interval T in seconds");
    feat_cmd->add_option("--window", feat_window, "time window size t");
    feat_cmd->add_option("--overlap", feat_overlap, "window overlap");
    feat_cmd->add_option("--features", feat_features,
                         "feature name list file or 'default6'");
    feat_cmd->add_option("--control-set", feat_control,
                         "control protocol label file (default embedded set)");
    feat_cmd->add_option("--out", feat_out, "dataset CSV to write")->required();

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "fit a classifier on a dataset");
    std::string train_algo = "cascade", train_dataset, train_config, train_model_out;
    std::uint64_t train_seed = 0;
    bool train_seed_set = false;
    train_cmd->add_option("--algo", train_algo, "cascade|lstm|cnn|knn|tree");
    train_cmd->add_option("--dataset", train_dataset, "dataset CSV")->required();
    train_cmd->add_option("--config", train_config, "key = value config file");
    train_cmd->add_option("--model-out", train_model_out, "model file to write")->required();
    train_cmd->add_option("--seed", train_seed, "training seed (overrides config)")
        ->each([&](const std::string&) { train_seed_set = true; });

    // --- predict ---
    auto* predict_cmd = app.add_subcommand("predict", "label a dataset with a trained model");
    std::string predict_model, predict_dataset, predict_out;
    predict_cmd->add_option("--model", predict_model, "model file")->required();
    predict_cmd->add_option("--dataset", predict_dataset, "dataset CSV")->required();
    predict_cmd->add_option("--out", predict_out, "labels CSV to write")->required();

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "held-out-device experiment with repeats");
    std::string eval_dataset, eval_split, eval_algo = "cascade", eval_config, eval_out;
    std::size_t eval_repeats = 5;
    std::uint64_t eval_seed = 1;
    bool eval_serial = false;
    eval_cmd->add_option("--dataset", eval_dataset, "dataset CSV")->required();
    eval_cmd->add_option("--split", eval_split, "split file with [train]/[test] sections")
        ->required();
    eval_cmd->add_option("--algo", eval_algo, "cascade|lstm|cnn|knn|tree");
    eval_cmd->add_option("--config", eval_config, "key = value config file");
    eval_cmd->add_option("--repeats", eval_repeats, "number of repeats");
    eval_cmd->add_option("--seed", eval_seed, "base seed (repeat r uses seed+r)");
    eval_cmd->add_flag("--serial", eval_serial, "run repeats sequentially");
    eval_cmd->add_option("--out", eval_out, "report directory")->required();

    // --- sweep ---
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep over repeated experiments");
    std::string sweep_param_name, sweep_streams, sweep_split, sweep_algo = "cascade";
    std::string sweep_config, sweep_out, sweep_features = "default6";
    std::vector<double> sweep_values;
    double sweep_interval = 300;
    std::size_t sweep_window = 6, sweep_overlap = 3, sweep_repeats = 5;
    std::uint64_t sweep_seed = 1;
    sweep_cmd->add_option("--param", sweep_param_name, "interval|window|ratio")->required();
    sweep_cmd->add_option("--values", sweep_values, "swept values")->required()->delimiter(',');
    sweep_cmd->add_option("--streams", sweep_streams, "stream directory from ingest")
        ->required();
    sweep_cmd->add_option("--split", sweep_split, "split file")->required();
    sweep_cmd->add_option("--algo", sweep_algo, "cascade|lstm|cnn|knn|tree");
    sweep_cmd->add_option("--config", sweep_config, "key = value config file");
    sweep_cmd->add_option("--features", sweep_features, "feature list file or 'default6'");
    sweep_cmd->add_option("--interval-secs", sweep_interval, "fixed T when not swept");
    sweep_cmd->add_option("--window", sweep_window, "fixed window when not swept");
    sweep_cmd->add_option("--overlap", sweep_overlap, "fixed overlap when not swept");
    sweep_cmd->add_option("--repeats", sweep_repeats, "repeats per sweep point");
    sweep_cmd->add_option("--seed", sweep_seed, "base seed");
    sweep_cmd->add_option("--out", sweep_out, "results CSV to write")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed()) {
        const Scenario scenario = resolve_scenario(synth_scenario);
        const GeneratedCapture generated =
            generate_capture(scenario, synth_days * 86400.0, synth_seed);
        write_capture_csv(generated.capture.records, fs::path(synth_out));
        save_device_table(generated.devices, fs::path(synth_labels_out));
        std::cout << "wrote " << generated.capture.records.size() << " records for "
                  << generated.devices.entries().size() << " devices to " << synth_out << '\n';
        return 0;
    }

    if (ingest_cmd->parsed()) {
        const DeviceTable table = load_device_table(ingest_devices);
        const CaptureFile capture = parse_capture(fs::path(ingest_input));
        const StreamSeparation separation = separate_streams(capture, table.macs());
        write_stream_dir(separation, table, ingest_out);
        std::size_t kept = 0;
        for (const auto& [mac, stream] : separation.streams) kept += stream.records.size();
        std::cout << "parsed " << capture.records.size() << " records ("
                  << capture.warnings.size() << " warnings), kept " << kept << " across "
                  << separation.streams.size() << " streams, dropped " << separation.dropped
                  << " unmatched\n";
        for (const auto& warning : capture.warnings)
            std::cerr << "warning: line " << warning.line << ": " << warning.reason << '\n';
        return 0;
    }

    if (feat_cmd->parsed()) {
        const DeviceTable table = load_device_table(fs::path(feat_streams) / "devices.csv");
        const auto streams = load_stream_dir(feat_streams, table);
        FeaturizeParams params;
        params.interval_secs = feat_interval;
        params.window = feat_window;
        params.overlap = feat_overlap;
        params.feature_names = read_feature_list(feat_features);
        if (!feat_control.empty()) params.control = ControlProtocolSet::from_file(feat_control);
        const auto windows = featurize_streams(streams, table, params);
        std::vector<WindowedSample> all;
        for (const auto& [mac, samples] : windows)
            all.insert(all.end(), samples.begin(), samples.end());
        if (all.empty()) throw DataError("featurize produced no samples");
        write_dataset(all, fs::path(feat_out));
        std::cout << "wrote " << all.size() << " windowed samples to " << feat_out << '\n';
        return 0;
    }

    if (train_cmd->parsed()) {
        const std::vector<WindowedSample> samples = read_dataset(fs::path(train_dataset));
        AlgoConfig config = config_from_option(train_config);
        sync_config_with_dataset(config, samples);
        if (train_seed_set) config.cascade.seed = train_seed;
        auto classifier = make_classifier(train_algo, config);
        classifier->fit(samples, config.cascade.seed, nullptr);
        std::ofstream out(train_model_out);
        if (!out) throw IoError("cannot write model file: " + train_model_out);
        classifier->save(out);
        std::cout << "trained " << classifier->name() << " on " << samples.size()
                  << " samples -> " << train_model_out << '\n';
        return 0;
    }

    if (predict_cmd->parsed()) {
        const auto classifier = load_classifier(fs::path(predict_model));
        const std::vector<WindowedSample> samples = read_dataset(fs::path(predict_dataset));
        const std::vector<int> labels = classifier->predict_all(samples);
        std::ofstream out(predict_out);
        if (!out) throw IoError("cannot write labels file: " + predict_out);
        out << "device_mac,true_label,predicted_label\n";
        for (std::size_t i = 0; i < samples.size(); ++i)
            out << samples[i].device_mac.to_string() << ',' << samples[i].label << ','
                << labels[i] << '\n';
        std::cout << "wrote " << labels.size() << " predictions to " << predict_out << '\n';
        return 0;
    }

    if (eval_cmd->parsed()) {
        const std::vector<WindowedSample> samples = read_dataset(fs::path(eval_dataset));
        AlgoConfig config = config_from_option(eval_config);
        sync_config_with_dataset(config, samples);
        const SplitSpec split = load_split(eval_split);
        const DeviceTable table = table_from_samples(samples);
        ExperimentOptions options;
        options.repeats = eval_repeats;
        options.base_seed = eval_seed;
        options.parallel = !eval_serial;
        const ExperimentResult result = run_experiment(group_by_device(samples), table, split,
                                                       eval_algo, config, options);
        fs::create_directories(eval_out);
        std::ofstream csv(fs::path(eval_out) / "reports.csv");
        csv << report_csv_header() << '\n';
        for (std::size_t r = 0; r < result.reports.size(); ++r) {
            csv << report_csv_row(result.reports[r]) << '\n';
            std::ofstream txt(fs::path(eval_out) / ("report_" + std::to_string(r) + ".txt"));
            txt << format_report(result.reports[r]);
        }
        std::ofstream summary(fs::path(eval_out) / "summary.txt");
        summary << "algo: " << eval_algo << "\nrepeats: " << eval_repeats
                << "\nmean accuracy: " << result.mean_accuracy
                << "\nstd accuracy: " << result.std_accuracy << '\n';
        std::cout << "mean accuracy " << result.mean_accuracy << " (std "
                  << result.std_accuracy << ") over " << eval_repeats << " repeats -> "
                  << eval_out << '\n';
        return 0;
    }

    if (sweep_cmd->parsed()) {
        const DeviceTable table = load_device_table(fs::path(sweep_streams) / "devices.csv");
        const auto streams = load_stream_dir(sweep_streams, table);
        const SplitSpec split = load_split(sweep_split);
        AlgoConfig config = config_from_option(sweep_config);
        FeaturizeParams featurize;
        featurize.interval_secs = sweep_interval;
        featurize.window = sweep_window;
        featurize.overlap = sweep_overlap;
        featurize.feature_names = read_feature_list(sweep_features);
        config.cascade.window = sweep_window;
        config.cascade.num_features = featurize.feature_names.size();
        ExperimentOptions options;
        options.repeats = sweep_repeats;
        options.base_seed = sweep_seed;
        const SweepParam param = sweep_param_from_string(sweep_param_name);
        const auto points = sweep(streams, table, split, param, sweep_values, sweep_algo,
                                  config, featurize, options);
        std::ofstream out(sweep_out);
        if (!out) throw IoError("cannot write sweep results: " + sweep_out);
        out << sweep_table_csv(param, points);
        std::cout << sweep_table_csv(param, points);
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}
