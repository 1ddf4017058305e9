// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"
#include "manifest.hpp"

#include <posloss/posloss.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#ifndef POSLOSS_DATA_DIR
#define POSLOSS_DATA_DIR "data"
#endif

namespace posloss::cli
{
namespace
{
enum ExitCode : int
{
    exit_ok = 0,
    exit_validation = 1,
    exit_io = 2,
    exit_selftest = 3,
};

struct SelftestFailure : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::string join(const fs::path& dir, const std::string& name)
{
    return (dir / name).string();
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_json(const std::string& path, const json& j)
{
    csv::write_file(path, j.dump(2) + "\n");
}

// --- generate -------------------------------------------------------------

struct GenerateArgs
{
    std::string out;
    std::string budget_out;
    std::size_t pairs = 500;
    std::size_t samples = 30;
    std::string layout = "random";
    double exponent = 1.7;
    double frequency = 5220.0;
    double sigma = 3.0;
    double area = 60.0;
    double asymmetry = 0.0;
    double min_distance = 1.0;
    bool snr_format = false;
    std::uint64_t seed = 1;
};

int cmd_generate(const GenerateArgs& a, const std::vector<std::string>& argv)
{
    SyntheticSpec spec;
    spec.n_pairs = a.pairs;
    spec.samples_per_pair = a.samples;
    if (a.layout == "axes")
        spec.layout = SyntheticSpec::Layout::axes;
    else if (a.layout != "random")
        throw ValidationError("--layout must be random or axes");
    spec.truth = {a.exponent, 1.0, a.frequency};
    spec.fading = {0.0, a.sigma};
    spec.area_m = a.area;
    spec.asymmetry_db = a.asymmetry;
    spec.min_distance_m = a.min_distance;
    spec.seed = a.seed;
    LinkBudget budget{WifiStandard::ieee80211a, 1.0, -7.0, -7.0, a.frequency, 20.0};
    if (a.snr_format)
        spec.budget = budget;

    csv::write_file(a.out, dataset_to_csv(generate_synthetic(spec)));
    Manifest m(argv, a.seed);
    m.output(a.out);
    if (!a.budget_out.empty())
    {
        write_json(a.budget_out, to_json(budget));
        m.output(a.budget_out);
    }
    m.write(a.out + ".manifest.json");
    std::cout << "wrote " << spec.n_pairs * spec.samples_per_pair << " samples to " << a.out << "\n";
    return exit_ok;
}

// --- preprocess -----------------------------------------------------------

struct PreprocessArgs
{
    std::string dataset;
    std::string budget;
    std::string out_dir;
    double z_threshold = 5.0;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
};

int cmd_preprocess(const PreprocessArgs& a, const std::vector<std::string>& argv)
{
    const auto loaded = load_dataset(a.dataset, a.budget.empty() ? std::nullopt : std::optional<std::string>(a.budget));
    const bool needs_budget = std::any_of(
        loaded.samples.begin(), loaded.samples.end(), [](const RawSample& s) { return !s.loss_db; });
    if (needs_budget && !loaded.budget)
        throw ValidationError("dataset " + a.dataset +
                              " carries SNR/rx-power rows; supply the link-budget JSON with --budget");

    const auto losses = derive_losses(loaded.samples, loaded.budget);
    const auto filtered = remove_outliers(losses, a.z_threshold);
    if (filtered.kept.size() < 2)
        throw ValidationError("only " + std::to_string(filtered.kept.size()) + " of " +
                              std::to_string(losses.size()) + " samples survive the outlier filter (z threshold " +
                              csv::format(a.z_threshold) + ")");
    std::vector<RawSample> kept_raw;
    for (auto i : filtered.kept_index)
        kept_raw.push_back(loaded.samples[i]);
    const auto data = split(decompose(filtered.kept), a.train_fraction, a.seed);

    ensure_dir(a.out_dir);
    const auto csv_path = join(a.out_dir, "preprocessed.csv");
    csv::write_file(csv_path, write_preprocessed_csv(kept_raw, data));

    double mean = 0.0, ss = 0.0;
    for (double r : data.fading_residuals)
        mean += r;
    mean /= static_cast<double>(data.fading_residuals.size());
    for (double r : data.fading_residuals)
        ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / static_cast<double>(data.fading_residuals.size()));
    const auto n_train = std::count(data.split.begin(), data.split.end(), SplitLabel::train);

    json summary = {{"total_samples", loaded.samples.size()}, {"outliers_removed", filtered.removed},
        {"kept_samples", data.samples.size()}, {"position_pairs", data.path_loss_table.size()},
        {"train_samples", n_train}, {"test_samples", static_cast<long>(data.samples.size()) - n_train},
        {"residual_mean_db", mean}, {"residual_std_db", sd}, {"z_threshold", a.z_threshold},
        {"train_fraction", a.train_fraction}, {"seed", a.seed}};
    const auto summary_path = join(a.out_dir, "summary.json");
    write_json(summary_path, summary);

    Manifest m(argv, a.seed);
    m.input(a.dataset);
    if (!a.budget.empty())
        m.input(a.budget);
    m.output(csv_path);
    m.output(summary_path);
    m.write(join(a.out_dir, "manifest.json"));
    std::cout << summary.dump(2) << "\n";
    return exit_ok;
}

// --- train ----------------------------------------------------------------

struct TrainArgs
{
    std::string data;
    std::string algo = "gbrt";
    std::string out;
    GbrtParams gbrt;
    SvrParams svr;
    bool grid = false;
    std::uint64_t seed = 1;
};

std::string canonical_algo(std::string algo)
{
    if (algo == "xgboost" || algo == "gbrt")
        return "gbrt";
    if (algo == "svr")
        return "svr";
    throw ValidationError("unknown --algo '" + algo + "' (expected gbrt, xgboost or svr)");
}

/// Small grid search on an internal validation split of the training rows.
PathLossModel grid_search(const std::string& algo, const std::vector<TrainingRow>& train, TrainArgs& a, json& report)
{
    const auto labels = split_labels(train.size(), 0.8, a.seed + 1);
    std::vector<TrainingRow> fit, val;
    for (std::size_t i = 0; i < train.size(); ++i)
        (labels[i] == SplitLabel::train ? fit : val).push_back(train[i]);

    double best = std::numeric_limits<double>::infinity();
    json tried = json::array();
    if (algo == "svr")
    {
        SvrParams best_p = a.svr;
        for (double c : {1.0, 10.0, 100.0})
            for (const char* g : {"scale", "0.5", "1", "2"})
            {
                auto p = a.svr;
                p.c = c;
                p.gamma_mode = g;
                const double mse = evaluate_mse(train_svr(fit, p), val);
                tried.push_back({{"C", c}, {"gamma", g}, {"validation_mse_db2", mse}});
                if (mse < best)
                {
                    best = mse;
                    best_p = p;
                }
            }
        a.svr = best_p;
        report["grid"] = tried;
        return train_svr(train, a.svr);
    }
    GbrtParams best_p = a.gbrt;
    for (std::size_t depth : {3, 6, 8})
        for (std::size_t trees : {50, 100, 200})
        {
            auto p = a.gbrt;
            p.max_depth = depth;
            p.n_trees = trees;
            const double mse = evaluate_mse(train_gbrt(fit, p), val);
            tried.push_back({{"max_depth", depth}, {"n_trees", trees}, {"validation_mse_db2", mse}});
            if (mse < best)
            {
                best = mse;
                best_p = p;
            }
        }
    a.gbrt = best_p;
    report["grid"] = tried;
    return train_gbrt(train, a.gbrt);
}

int cmd_train(TrainArgs a, const std::vector<std::string>& argv)
{
    const auto algo = canonical_algo(a.algo);
    const auto pre = load_preprocessed(a.data);
    if (pre.data.split.empty())
        throw ValidationError(a.data + " has no train/test split column; run preprocess first");
    const auto train = path_loss_rows(pre.data, SplitLabel::train);
    const auto test = path_loss_rows(pre.data, SplitLabel::test);
    a.gbrt.seed = a.svr.seed = a.seed;

    json report = {{"algo", algo}, {"train_rows", train.size()}, {"test_rows", test.size()}};
    PathLossModel model;
    if (a.grid)
        model = grid_search(algo, train, a, report);
    else if (algo == "gbrt")
        model = train_gbrt(train, a.gbrt);
    else
        model = train_svr(train, a.svr);

    if (algo == "gbrt")
        report["params"] = {{"n_trees", a.gbrt.n_trees}, {"max_depth", a.gbrt.max_depth},
            {"learning_rate", a.gbrt.learning_rate}, {"min_samples_leaf", a.gbrt.min_samples_leaf},
            {"subsample", a.gbrt.subsample}};
    else
    {
        const auto& s = std::get<SvrModel>(model);
        report["params"] = {{"C", a.svr.c}, {"epsilon", a.svr.epsilon}, {"gamma_mode", a.svr.gamma_mode},
            {"gamma", s.kernel_gamma}, {"tolerance", a.svr.tolerance}};
        report["support_vectors"] = s.support_vectors.size();
        report["converged"] = s.converged;
        report["iterations"] = s.iterations;
        if (!s.converged)
            std::cerr << "warning: SVR solver hit max_iterations before reaching the KKT tolerance\n";
    }
    report["test_mse_db2"] = test.empty() ? json(nullptr) : json(evaluate_mse(model, test));

    save_model(model, a.out);
    const auto report_path = a.out + ".report.json";
    write_json(report_path, report);
    Manifest m(argv, a.seed);
    m.input(a.data);
    m.output(a.out);
    m.output(report_path);
    m.write(a.out + ".manifest.json");
    std::cout << report.dump(2) << "\n";
    return exit_ok;
}

// --- fit-fading -----------------------------------------------------------

struct FitFadingArgs
{
    std::string data;
    std::string out;
    std::size_t max_points = default_cdf_points;
};

int cmd_fit_fading(const FitFadingArgs& a, const std::vector<std::string>& argv)
{
    const auto pre = load_preprocessed(a.data);
    std::vector<double> residuals;
    for (std::size_t i = 0; i < pre.data.samples.size(); ++i)
        if (pre.data.split.empty() || pre.data.split[i] == SplitLabel::train)
            residuals.push_back(pre.data.fading_residuals[i]);
    if (residuals.size() < 2)
        throw ValidationError("fit-fading: fewer than 2 fading residuals in " + a.data);
    if (a.max_points == 2)
        std::cerr << "warning: max_points 2 yields a degenerate two-point CDF (min to max)\n";

    const auto cdf = fit_cdf(residuals, a.max_points);
    export_cdf(cdf, a.out);
    const json report = {{"residuals", residuals.size()}, {"points", cdf.points().size()},
        {"fit_mse_30_bins", cdf_fit_mse(cdf, residuals, 30)}};
    const auto report_path = a.out + ".report.json";
    write_json(report_path, report);
    Manifest m(argv, 0);
    m.input(a.data);
    m.output(a.out);
    m.output(report_path);
    m.write(a.out + ".manifest.json");
    std::cout << report.dump(2) << "\n";
    return exit_ok;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs
{
    std::string model;
    std::string cdf;
    std::string data;
    std::string out_dir;
    bool friis = false;
    bool log_distance = false;
    double exponent = 1.7;
    double frequency = 5220.0;
    double baseline_sigma = 3.0;
    bool no_fading = false;
    std::string target = "total";
    std::uint64_t seed = 1;
    std::uint64_t stream_id = 0;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv)
{
    auto regressor = std::make_shared<const PathLossModel>(load_model(a.model));
    const FadingCdf cdf = a.no_fading ? FadingCdf({{0.0, 0.0}, {0.0, 100.0}}) : import_cdf(a.cdf);
    const auto pre = load_preprocessed(a.data);
    if (a.target != "total" && a.target != "path-loss")
        throw ValidationError("--target must be total or path-loss");

    std::vector<LossSample> test = loss_rows(pre.data, SplitLabel::test);
    if (a.target == "path-loss")
        for (auto& t : test)
            t.loss_db = pre.data.path_loss(t.pair);

    struct Candidate
    {
        std::string name;
        PropagationModel model;
    };
    std::vector<Candidate> models;
    models.push_back({"learned", PropagationModel::learned(regressor, cdf, a.seed, a.stream_id)});
    std::optional<NormalFading> baseline_fading;
    if (!a.no_fading)
        baseline_fading = NormalFading{0.0, a.baseline_sigma};
    if (a.friis)
        models.push_back({"friis", PropagationModel::friis(a.frequency, baseline_fading, a.seed, a.stream_id)});
    if (a.log_distance)
        models.push_back({"log-distance",
            PropagationModel::log_distance({a.exponent, 1.0, a.frequency}, baseline_fading, a.seed, a.stream_id)});

    ensure_dir(a.out_dir);
    Manifest m(argv, a.seed);
    m.input(a.model);
    if (!a.no_fading)
        m.input(a.cdf);
    m.input(a.data);

    json summary = json::object();
    std::printf("%-14s %12s %12s %12s %12s\n", "model", "median|E|dB", "p90|E|dB", "MSE dB^2", "E<0 frac");
    for (auto& c : models)
    {
        const auto errors = loss_errors(c.model, test);
        const auto abs_e = absolute(errors.values);
        const json row = {{"label", c.model.label()}, {"median_abs_error_db", median(abs_e)},
            {"p90_abs_error_db", percentile(abs_e, 90.0)}, {"mse_db2", mean_square(errors.values)},
            {"negative_fraction", negative_fraction(errors.values)}, {"samples", errors.values.size()}};
        summary[c.name] = row;
        std::printf("%-14s %12.4f %12.4f %12.4f %12.4f\n", c.name.c_str(), row["median_abs_error_db"].get<double>(),
            row["p90_abs_error_db"].get<double>(), row["mse_db2"].get<double>(),
            row["negative_fraction"].get<double>());
        for (const bool abs_mode : {false, true})
        {
            const auto path =
                join(a.out_dir, c.name + (abs_mode ? "-loss-abs-error-cdf.csv" : "-loss-error-cdf.csv"));
            csv::write_file(path, cdf_points_csv(error_cdf(errors, abs_mode), c.model.label(), ErrorKind::loss,
                                      a.seed, abs_mode));
            m.output(path);
        }
    }
    summary["path_loss_mse_db2"] = evaluate_mse(*regressor, path_loss_rows(pre.data, SplitLabel::test));
    const auto summary_path = join(a.out_dir, "eval-summary.json");
    write_json(summary_path, summary);
    m.output(summary_path);
    m.write(join(a.out_dir, "manifest.json"));
    return exit_ok;
}

// --- simulate -------------------------------------------------------------

struct SimulateArgs
{
    std::string scenario;
    std::string model_config;
    std::string out_dir;
    std::string reference;
    std::optional<std::uint64_t> seed;
    std::size_t export_trace = 0;
};

ModelConfig scenario_model(const Scenario& s, const std::string& model_config_path)
{
    if (!model_config_path.empty())
        return load_model_config(model_config_path);
    if (s.inline_model)
        return model_config_from_json(*s.inline_model, s.origin);
    throw ValidationError("no model: pass --model-config or add a 'model' object to the scenario");
}

std::string result_csv(const SimResult& r)
{
    std::string out = "tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,throughput_mbps,delivered,lost\n";
    for (const auto& p : r.pairs)
    {
        for (double v : features(p.pair))
            out += csv::format(v) + ',';
        out += csv::format(p.throughput_mbps) + ',' + std::to_string(p.delivered) + ',' + std::to_string(p.lost) + '\n';
    }
    return out;
}

/// Measurement-window frames as dataset rows (rx power, SNR, noise, pair throughput).
std::string trace_csv(const SimResult& r, const LinkSimConfig& cfg, std::size_t per_pair)
{
    std::string out = std::string(dataset_header) + '\n';
    for (const auto& p : r.pairs)
    {
        std::size_t n = 0;
        for (const auto& f : p.trace)
        {
            if (!f.counted)
                continue;
            if (n++ == per_pair)
                break;
            for (double v : features(p.pair))
                out += csv::format(v) + ',';
            out += ',' + csv::format(f.rx_power_dbm - cfg.noise_floor_dbm) + ',' + csv::format(cfg.noise_floor_dbm) +
                   ',' + csv::format(f.rx_power_dbm) + ',' + csv::format(p.throughput_mbps) + '\n';
        }
    }
    return out;
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv)
{
    auto scenario = load_scenario(a.scenario);
    if (a.seed)
        scenario.sim.seed = *a.seed;
    if (scenario.pairs.empty())
        throw ValidationError("scenario " + a.scenario + " lists no position pairs");
    const ModelFactory factory(scenario_model(scenario, a.model_config));
    auto model = factory.make(scenario.sim.seed);
    scenario.sim.record_trace = a.export_trace > 0;

    const auto result = run_scenario(scenario.pairs, model, scenario.sim);

    ensure_dir(a.out_dir);
    Manifest m(argv, scenario.sim.seed);
    m.input(a.scenario);
    if (!a.model_config.empty())
        m.input(a.model_config);
    const auto results_path = join(a.out_dir, "sim-results.csv");
    csv::write_file(results_path, result_csv(result));
    m.output(results_path);

    json meta = {{"seed", scenario.sim.seed}, {"stream_id", scenario.sim.stream_id}, {"model", model.label()},
        {"pairs", result.pairs.size()}, {"wall_clock_s", result.wall_clock_s},
        {"cache", {{"hits", result.cache.hits}, {"misses", result.cache.misses},
                      {"evaluations", result.cache.evaluations}, {"size", result.cache.size}}}};

    if (a.export_trace > 0)
    {
        const auto trace_path = join(a.out_dir, "trace.csv");
        csv::write_file(trace_path, trace_csv(result, scenario.sim, a.export_trace));
        const auto budget_path = join(a.out_dir, "link-budget.json");
        write_json(budget_path, to_json(scenario.sim.budget));
        m.output(trace_path);
        m.output(budget_path);
    }
    if (!a.reference.empty())
    {
        m.input(a.reference);
        const auto ref = throughput_reference(parse_dataset_csv(csv::read_lines(a.reference)));
        const auto errors = throughput_errors(result, ref, model.label());
        const auto abs_e = absolute(errors.values);
        meta["throughput_error"] = {{"p50_abs_mbps", median(abs_e)}, {"p90_abs_mbps", percentile(abs_e, 90.0)},
            {"mean_mbps", std::accumulate(errors.values.begin(), errors.values.end(), 0.0) /
                              static_cast<double>(errors.values.size())}};
        for (const bool abs_mode : {false, true})
        {
            const auto path =
                join(a.out_dir, abs_mode ? "throughput-abs-error-cdf.csv" : "throughput-error-cdf.csv");
            csv::write_file(path, cdf_points_csv(error_cdf(errors, abs_mode), model.label(), ErrorKind::throughput,
                                      scenario.sim.seed, abs_mode));
            m.output(path);
        }
    }
    // metadata carries wall-clock time, so it is deliberately not hashed as an output
    write_json(join(a.out_dir, "sim-metadata.json"), meta);
    m.write(join(a.out_dir, "manifest.json"));
    std::cout << meta.dump(2) << "\n";
    return exit_ok;
}

// --- bench ----------------------------------------------------------------

struct BenchArgs
{
    std::string scenario;
    std::vector<std::string> model_configs;
    std::size_t repetitions = 10;
    std::string out;
};

int cmd_bench(const BenchArgs& a, const std::vector<std::string>& argv)
{
    if (a.repetitions < 2)
        throw ValidationError("--repetitions must be >= 2 for a 95% confidence interval");
    const auto scenario = load_scenario(a.scenario);
    if (scenario.pairs.empty())
        throw ValidationError("scenario " + a.scenario + " lists no position pairs");
    std::vector<ModelFactory> factories;
    for (const auto& p : a.model_configs)
        factories.emplace_back(load_model_config(p));
    if (factories.empty())
        factories.emplace_back(scenario_model(scenario, ""));

    std::vector<BenchModel> models;
    for (const auto& f : factories)
        models.push_back({f.config().label, [&f](std::uint64_t seed) { return f.make(seed); }});

    const auto result = benchmark(scenario.pairs, models, scenario.sim, a.repetitions);
    std::string out = "model,cache,mean_s,ci95_s,runs\n";
    std::printf("%-20s %-6s %12s %12s\n", "model", "cache", "mean s", "95% CI s");
    for (const auto& r : result.rows)
    {
        out += r.label + ',' + (r.cache ? "on" : "off") + ',' + csv::format(r.duration.mean) + ',' +
               csv::format(r.duration.half_width) + ',' + std::to_string(r.durations_s.size()) + '\n';
        std::printf("%-20s %-6s %12.6f %12.6f\n", r.label.c_str(), r.cache ? "on" : "off", r.duration.mean,
            r.duration.half_width);
    }
    for (std::size_t i = 0; i + 1 < result.rows.size(); i += 2)
        std::printf("%-20s speedup %.2fx\n", result.rows[i].label.c_str(),
            result.rows[i].duration.mean / result.rows[i + 1].duration.mean);
    std::printf("cache on/off outcomes identical: %s\n", result.outcomes_identical ? "yes" : "NO");
    csv::write_file(a.out, out);

    Manifest m(argv, scenario.sim.seed);
    m.input(a.scenario);
    for (const auto& p : a.model_configs)
        m.input(p);
    m.output(a.out);
    m.write(a.out + ".manifest.json");
    if (!result.outcomes_identical)
        throw ValidationError("cache transparency violated: outcomes differ between cache on and off");
    return exit_ok;
}

// --- selftest -------------------------------------------------------------

struct SelftestArgs
{
    std::string data_dir = POSLOSS_DATA_DIR;
    std::string model;
    std::string cdf;
    double tolerance_db = 0.5;
};

int cmd_selftest(const SelftestArgs& a)
{
    const fs::path dir = fs::path(a.data_dir) / "example";
    const auto model_path = a.model.empty() ? join(dir, "model-svr.bin") : a.model;
    const auto cdf_path = a.cdf.empty() ? join(dir, "fading-cdf.csv") : a.cdf;

    int failures = 0;
    auto check = [&](const std::string& name, auto&& body) {
        try
        {
            const std::string detail = body();
            std::printf("[PASS] %-22s %s\n", name.c_str(), detail.c_str());
        }
        catch (const std::exception& e)
        {
            ++failures;
            std::printf("[FAIL] %-22s %s\n", name.c_str(), e.what());
        }
    };

    std::optional<LoadedDataset> dataset;
    std::shared_ptr<const PathLossModel> regressor;
    std::optional<FadingCdf> cdf;

    check("dataset-load", [&] {
        dataset = load_dataset(join(dir, "position-dataset.csv"), join(dir, "link-budget.json"));
        const auto losses = derive_losses(dataset->samples, dataset->budget);
        return std::to_string(losses.size()) + " samples";
    });
    check("model-load", [&] {
        regressor = std::make_shared<const PathLossModel>(load_model(model_path));
        return std::string(kind_name(*regressor)) + " from " + model_path;
    });
    check("cdf-load", [&] {
        cdf = import_cdf(cdf_path);
        return std::to_string(cdf->points().size()) + " points";
    });
    check("known-pairs", [&] {
        if (!regressor || !cdf)
            throw SelftestFailure("model or CDF unavailable");
        const auto lines = csv::read_lines(join(dir, "selftest-pairs.csv"));
        if (lines.size() < 2)
            throw SelftestFailure("selftest-pairs.csv has no rows");
        const double pinned = cdf->quantile(50.0);
        auto model = PropagationModel::learned(regressor, *cdf, 1, 0);
        double worst = 0.0;
        for (std::size_t i = 1; i < lines.size(); ++i)
        {
            const auto c = csv::split_row(lines[i]);
            if (c.size() != 7)
                throw ParseError("selftest-pairs.csv: expected 7 columns", i + 1);
            FeatureVector v;
            for (std::size_t k = 0; k < 6; ++k)
                v[k] = csv::parse_required(c[k], i + 1, "position");
            const double recorded = csv::parse_required(c[6], i + 1, "loss_db");
            const double computed = model.path_loss(pair_from_features(v)) + pinned;
            worst = std::max(worst, std::abs(computed - recorded));
            if (std::abs(computed - recorded) > a.tolerance_db)
                throw SelftestFailure("pair at row " + std::to_string(i + 1) + ": computed " + csv::format(computed) +
                                      " dB vs recorded " + csv::format(recorded) + " dB");
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu pairs, worst |diff| %.3f dB", lines.size() - 1, worst);
        return std::string(buf);
    });
    check("cache-transparency", [&] {
        if (!regressor || !cdf)
            throw SelftestFailure("model or CDF unavailable");
        auto on = PropagationModel::learned(regressor, *cdf, 7, 0);
        auto off = PropagationModel::learned(regressor, *cdf, 7, 0, 0);
        const auto pairs = unique_pairs(dataset ? dataset->samples : std::vector<RawSample>{});
        if (pairs.empty())
            throw SelftestFailure("no pairs");
        for (std::size_t q = 0; q < 20 * pairs.size(); ++q)
        {
            const auto& p = pairs[q % pairs.size()];
            if (on.total_loss(p) != off.total_loss(p))
                throw SelftestFailure("cached and uncached losses differ");
        }
        if (on.cache_stats().evaluations != pairs.size())
            throw SelftestFailure("unexpected evaluation count");
        return std::to_string(on.cache_stats().hits) + " hits";
    });
    check("sampler-determinism", [&] {
        if (!cdf)
            throw SelftestFailure("CDF unavailable");
        FadingSampler s1(*cdf, 42, 3), s2(*cdf, 42, 3);
        for (int i = 0; i < 1000; ++i)
            if (s1.sample() != s2.sample())
                throw SelftestFailure("equal seeds diverged");
        return std::string("1000 draws identical");
    });
    check("airtime", [&] {
        if (airtime_us(54, 1400) != 385.5)
            throw SelftestFailure("54 Mbit/s exchange is not 385.5 us");
        return std::string("385.5 us at 54 Mbit/s");
    });

    std::printf("%s: %d failure(s)\n", failures ? "SELFTEST FAILED" : "selftest passed", failures);
    return failures ? exit_selftest : exit_ok;
}

}  // namespace

int run(std::vector<std::string> args);

namespace
{
int cmd_rerun(const std::string& manifest_path)
{
    const auto j = read_json(manifest_path);
    const auto command = j.at("command").get<std::vector<std::string>>();
    if (!command.empty() && command.front() == "rerun")
        throw ValidationError("refusing to rerun a rerun manifest");
    const auto previous = fs::current_path();
    fs::current_path(j.at("cwd").get<std::string>());
    const int rc = run(command);
    int mismatches = 0;
    for (const auto& o : j.at("outputs"))
    {
        const auto path = o.at("path").get<std::string>();
        const bool same = sha256_file(path) == o.at("sha256").get<std::string>();
        std::printf("%s %s\n", same ? "identical" : "DIFFERS  ", path.c_str());
        mismatches += same ? 0 : 1;
    }
    fs::current_path(previous);
    if (rc != exit_ok)
        return rc;
    return mismatches ? exit_validation : exit_ok;
}
}  // namespace

int run(std::vector<std::string> args)
{
    CLI::App app{"posloss: position-based propagation-loss training and link simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version));

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic log-distance + Normal fading trace dataset");
    g->add_option("--out", gen.out, "Output dataset CSV")->required();
    g->add_option("--budget-out", gen.budget_out, "Also write the link-budget JSON used for SNR rows");
    g->add_option("--pairs", gen.pairs, "Number of position pairs");
    g->add_option("--samples", gen.samples, "Samples per pair");
    g->add_option("--layout", gen.layout, "random | axes");
    g->add_option("--exponent", gen.exponent, "Log-distance exponent of the truth");
    g->add_option("--frequency", gen.frequency, "Channel frequency, MHz");
    g->add_option("--sigma", gen.sigma, "Fading standard deviation, dB");
    g->add_option("--area", gen.area, "Side of the square area, m (random layout)");
    g->add_option("--asymmetry", gen.asymmetry, "Extra loss when rx.x < tx.x, dB");
    g->add_option("--min-distance", gen.min_distance, "Minimum tx-rx distance, m");
    g->add_flag("--snr-format", gen.snr_format, "Emit SNR + noise columns instead of loss");
    g->add_option("--seed", gen.seed, "Seed");

    PreprocessArgs pre;
    auto* p = app.add_subcommand("preprocess", "Derive loss, remove outliers, decompose and split a dataset");
    p->add_option("--dataset", pre.dataset, "Trace CSV")->required();
    p->add_option("--budget", pre.budget, "Link-budget JSON (required for SNR/rx-power rows)");
    p->add_option("--out-dir", pre.out_dir, "Output directory")->required();
    p->add_option("--z-threshold", pre.z_threshold, "Outlier |z| threshold");
    p->add_option("--train-fraction", pre.train_fraction, "Training fraction");
    p->add_option("--seed", pre.seed, "Split seed");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a path-loss regressor on a preprocessed dataset");
    t->add_option("--data", tr.data, "Preprocessed CSV")->required();
    t->add_option("--algo", tr.algo, "gbrt | xgboost | svr");
    t->add_option("--out", tr.out, "Model file")->required();
    t->add_option("--n-trees", tr.gbrt.n_trees);
    t->add_option("--max-depth", tr.gbrt.max_depth);
    t->add_option("--learning-rate", tr.gbrt.learning_rate);
    t->add_option("--min-samples-leaf", tr.gbrt.min_samples_leaf);
    t->add_option("--subsample", tr.gbrt.subsample);
    t->add_option("--c", tr.svr.c, "SVR C");
    t->add_option("--epsilon", tr.svr.epsilon, "SVR epsilon, dB");
    t->add_option("--gamma", tr.svr.gamma_mode, "SVR RBF gamma: scale or a number");
    t->add_option("--max-iterations", tr.svr.max_iterations, "SVR solver cap (0 = 10 N^2)");
    t->add_option("--tolerance", tr.svr.tolerance, "SVR KKT tolerance");
    t->add_flag("--grid", tr.grid, "Grid-search hyperparameters on a validation split");
    t->add_option("--seed", tr.seed);

    FitFadingArgs ff;
    auto* f = app.add_subcommand("fit-fading", "Fit and export the fast-fading empirical CDF");
    f->add_option("--data", ff.data, "Preprocessed CSV")->required();
    f->add_option("--out", ff.out, "CDF CSV")->required();
    f->add_option("--max-points", ff.max_points, "Maximum CDF points");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Propagation-loss error CDFs on the test split");
    e->add_option("--model", ev.model, "Model file")->required();
    e->add_option("--cdf", ev.cdf, "Fading CDF CSV");
    e->add_option("--data", ev.data, "Preprocessed CSV")->required();
    e->add_option("--out-dir", ev.out_dir, "Output directory")->required();
    e->add_flag("--friis", ev.friis, "Also evaluate the Friis baseline");
    e->add_flag("--log-distance", ev.log_distance, "Also evaluate the log-distance baseline");
    e->add_option("--exponent", ev.exponent);
    e->add_option("--frequency", ev.frequency);
    e->add_option("--baseline-sigma", ev.baseline_sigma, "Normal fading sd of the baselines, dB");
    e->add_flag("--no-fading", ev.no_fading, "Disable every fading term");
    e->add_option("--target", ev.target, "total | path-loss");
    e->add_option("--seed", ev.seed);
    e->add_option("--stream-id", ev.stream_id);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Run the link simulation for a scenario");
    s->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
    s->add_option("--model-config", sim.model_config, "Model assembly JSON");
    s->add_option("--out-dir", sim.out_dir, "Output directory")->required();
    s->add_option("--reference", sim.reference, "Dataset CSV with measured throughput");
    s->add_option("--seed", sim.seed, "Override the scenario seed");
    s->add_option("--export-trace", sim.export_trace, "Export up to N measured frames per pair as a dataset");

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Wall-clock benchmark with and without the path-loss cache");
    b->add_option("--scenario", bench.scenario, "Scenario JSON")->required();
    b->add_option("--model-config", bench.model_configs, "Model assembly JSON (repeatable)");
    b->add_option("--repetitions", bench.repetitions);
    b->add_option("--out", bench.out, "Duration table CSV")->required();

    SelftestArgs st;
    auto* sf = app.add_subcommand("selftest", "Check the shipped example model against known pairs");
    sf->add_option("--data-dir", st.data_dir);
    sf->add_option("--model", st.model, "Override the model file");
    sf->add_option("--cdf", st.cdf, "Override the fading CDF");
    sf->add_option("--tolerance", st.tolerance_db);

    std::string manifest;
    auto* rr = app.add_subcommand("rerun", "Repeat a run from its manifest and compare output hashes");
    rr->add_option("manifest", manifest)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try
    {
        app.parse(reversed);
    }
    catch (const CLI::ParseError& err)
    {
        const int rc = app.exit(err);
        return rc == 0 ? exit_ok : exit_validation;
    }

    try
    {
        if (*g)
            return cmd_generate(gen, args);
        if (*p)
            return cmd_preprocess(pre, args);
        if (*t)
            return cmd_train(tr, args);
        if (*f)
            return cmd_fit_fading(ff, args);
        if (*e)
            return cmd_eval(ev, args);
        if (*s)
            return cmd_simulate(sim, args);
        if (*b)
            return cmd_bench(bench, args);
        if (*sf)
            return cmd_selftest(st);
        if (*rr)
            return cmd_rerun(manifest);
    }
    catch (const IoError& err)
    {
        std::cerr << "error: " << err.what() << "\n";
        return exit_io;
    }
    catch (const std::exception& err)
    {
        std::cerr << "error: " << err.what() << "\n";
        return exit_validation;
    }
    return exit_validation;
}

}  // namespace posloss::cli

int main(int argc, char** argv)
{
    return posloss::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
