// main.cpp - svcfp command line: synth, fingerprint, sweep, augment,
// classify, metrics
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svcfp/evaluation.hpp"
#include "svcfp/io.hpp"
#include "svcfp/pipeline.hpp"
#include "svcfp/synthgen.hpp"

namespace fs = std::filesystem;
using namespace svcfp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v, const char* frac_fmt = "%.9f") {
    char buf[64];
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) <= 9.0e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    } else {
        std::snprintf(buf, sizeof buf, frac_fmt, v);
    }
    return buf;
}

void write_run_json(const std::string& out_dir, int argc, char** argv) {
    nlohmann::json j;
    j["argv"] = nlohmann::json::array();
    for (int i = 0; i < argc; ++i) j["argv"].push_back(argv[i]);
    write_json_file(out_dir + "/run.json", j);
}

Granularity parse_g_or_throw(const std::string& s) {
    auto g = Granularity::parse(s);
    if (!g) throw CLI::ValidationError("--g", "expected a positive integer or 'inf'");
    return *g;
}

DeviceFlows load_trace(const std::string& path, double merge_gap_s) {
    ParseSummary summary;
    DeviceFlows flows = load_flows(path, &summary);
    if (summary.rows_skipped > 0) {
        std::cerr << "note: skipped " << summary.rows_skipped << " of "
                  << summary.rows_total << " rows in " << path << "\n";
    }
    if (merge_gap_s > 0.0) flows = dedup_flows(flows, merge_gap_s);
    return flows;
}

double derive_anchor(const DeviceFlows& flows) {
    double min_ts = kInf;
    for (const auto& [id, recs] : flows) {
        if (!recs.empty()) {
            min_ts = std::min(min_ts, static_cast<double>(recs.front().timestamp));
        }
    }
    if (!std::isfinite(min_ts)) {
        throw std::runtime_error("trace holds no usable flows; pass --anchor");
    }
    return std::floor(min_ts / kSecondsPerDay) * kSecondsPerDay;
}

// ----- synth -----

struct SynthArgs {
    std::string fleet = "closed13";
    std::string spec_path; // overrides --fleet when given
    std::uint64_t seed = 7;
    bool seed_given = false;
    int days = 0; // 0 keeps the input's own duration
    std::string out;
};

void run_synth(const SynthArgs& a) {
    SimSpec spec;
    if (!a.spec_path.empty()) {
        spec = read_json_file(a.spec_path).get<SimSpec>();
        if (a.seed_given) spec.seed = a.seed;
    } else {
        FleetKind kind = a.fleet == "open22" ? FleetKind::Open22 : FleetKind::Closed13;
        spec = builtin_fleet(kind, a.seed);
    }
    if (a.days > 0) spec.duration_days = a.days;
    DeviceFlows flows = generate_trace(spec);
    fs::create_directories(a.out);
    write_flows_csv(a.out + "/flows.csv.gz", flows);
}

// ----- fingerprint -----

struct FingerprintArgs {
    std::string flows;
    std::string out;
    std::string g = "2048";
    double theta = 0.95;
    double anchor = kInf; // inf = derive from the trace
    double l0_days = 1.0;
    int i_max = 6;
    double delta = 0.5;
    double merge_gap_s = 60.0;
    double training_end = kInf;
    int calibration_windows = 26;
    int calibration_window_days = 8;
};

nlohmann::json failures_json(const std::map<std::string, DidNotConverge>& failures) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, f] : failures) {
        nlohmann::json entry;
        entry["iterations_run"] = f.iterations_run;
        entry["last_similarity"] =
            f.last_similarity ? nlohmann::json(*f.last_similarity)
                              : nlohmann::json(nullptr);
        j[id] = std::move(entry);
    }
    return j;
}

void run_fingerprint(const FingerprintArgs& a) {
    DeviceFlows flows = load_trace(a.flows, a.merge_gap_s);

    ExportConfig cfg;
    cfg.anchor_time = std::isfinite(a.anchor) ? a.anchor : derive_anchor(flows);
    cfg.initial_window_s = a.l0_days * kSecondsPerDay;
    cfg.max_iterations = a.i_max;
    cfg.similarity_threshold = a.theta;
    cfg.growth_threshold = a.delta;
    cfg.g = parse_g_or_throw(a.g);

    ExportRunResult result = export_all(flows, cfg);

    FingerprintPool pool;
    pool.config = cfg;
    pool.fingerprints = std::move(result.fingerprints);
    calibrate_unknown_threshold(pool, flows, a.calibration_windows,
                                a.calibration_window_days, a.training_end);

    fs::create_directories(a.out);
    write_json_file(a.out + "/pool.json", nlohmann::json(pool));
    write_json_file(a.out + "/failures.json", failures_json(result.failures));
}

// ----- sweep -----

struct SweepArgs {
    std::string flows;
    std::string out;
    std::vector<std::string> g_values;
    std::vector<double> theta_values;
    double anchor = kInf;
    double l0_days = 1.0;
    int i_max = 6;
    double delta = 0.5;
    double merge_gap_s = 60.0;
    int recur_window_days = 8;
    int recur_windows = 18;
    double data_end = kInf;
};

void run_sweep_cmd(const SweepArgs& a) {
    DeviceFlows flows = load_trace(a.flows, a.merge_gap_s);

    SweepGrid grid = SweepGrid::defaults();
    if (!a.g_values.empty()) {
        grid.g_values.clear();
        for (const std::string& s : a.g_values) {
            grid.g_values.push_back(parse_g_or_throw(s));
        }
    }
    if (!a.theta_values.empty()) grid.theta_values = a.theta_values;

    ExportConfig base;
    base.anchor_time = std::isfinite(a.anchor) ? a.anchor : derive_anchor(flows);
    base.initial_window_s = a.l0_days * kSecondsPerDay;
    base.max_iterations = a.i_max;
    base.growth_threshold = a.delta;

    SweepReport report = run_sweep(flows, grid, base, a.recur_window_days,
                                   a.recur_windows, a.data_end);

    fs::create_directories(a.out);
    {
        std::ofstream out(a.out + "/sweep.csv", std::ios::binary);
        out << "theta,g,converged_fraction,converged_count,avg_recurrence,"
               "period_p50_days,period_p80_days,period_p90_days\n";
        for (const SweepCell& c : report.cells) {
            out << num(c.theta) << ',' << c.g.to_string() << ','
                << num(c.convergence_fraction) << ',' << c.converged_count << ',';
            if (c.avg_recurrence) out << num(*c.avg_recurrence);
            out << ',';
            if (c.periods) {
                out << num(c.periods->p50_days) << ',' << num(c.periods->p80_days)
                    << ',' << num(c.periods->p90_days);
            } else {
                out << ",,";
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("error writing sweep.csv");
    }
    {
        std::ofstream out(a.out + "/convergence.csv", std::ios::binary);
        out << "theta";
        for (const Granularity& g : report.grid.g_values) out << ',' << g.to_string();
        out << '\n';
        for (std::size_t ti = 0; ti < report.grid.theta_values.size(); ++ti) {
            out << num(report.grid.theta_values[ti]);
            for (std::size_t gi = 0; gi < report.grid.g_values.size(); ++gi) {
                out << ',' << num(report.convergence.fraction[ti][gi]);
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("error writing convergence.csv");
    }
    {
        // Same layout as convergence.csv; cells with no converged device
        // stay blank rather than pretending a zero score.
        std::ofstream out(a.out + "/recurrence.csv", std::ios::binary);
        out << "theta";
        for (const Granularity& g : report.grid.g_values) out << ',' << g.to_string();
        out << '\n';
        for (std::size_t ti = 0; ti < report.grid.theta_values.size(); ++ti) {
            out << num(report.grid.theta_values[ti]);
            for (std::size_t gi = 0; gi < report.grid.g_values.size(); ++gi) {
                out << ',';
                double v = report.avg_recurrence[ti][gi];
                if (std::isfinite(v)) out << num(v);
            }
            out << '\n';
        }
        if (!out) throw std::runtime_error("error writing recurrence.csv");
    }
    {
        nlohmann::json cells = nlohmann::json::array();
        for (const SweepCell& c : report.cells) {
            nlohmann::json jc;
            jc["theta"] = c.theta;
            jc["g"] = c.g.is_infinite() ? nlohmann::json("inf")
                                        : nlohmann::json(c.g.value());
            jc["converged_fraction"] = c.convergence_fraction;
            jc["converged_count"] = c.converged_count;
            jc["avg_recurrence"] = c.avg_recurrence
                                       ? nlohmann::json(*c.avg_recurrence)
                                       : nlohmann::json(nullptr);
            if (c.periods) {
                jc["period_days"] = {{"p50", c.periods->p50_days},
                                     {"p80", c.periods->p80_days},
                                     {"p90", c.periods->p90_days}};
            } else {
                jc["period_days"] = nullptr;
            }
            nlohmann::json devices = nlohmann::json::array();
            for (const DeviceRecurrence& dr : c.recurrence) {
                devices.push_back({{"device_id", dr.device_id},
                                   {"mean", dr.mean},
                                   {"scores", dr.scores}});
            }
            jc["devices"] = std::move(devices);
            cells.push_back(std::move(jc));
        }
        nlohmann::json j;
        j["theta_values"] = report.grid.theta_values;
        nlohmann::json gs = nlohmann::json::array();
        for (const Granularity& g : report.grid.g_values) gs.push_back(g.to_string());
        j["g_values"] = std::move(gs);
        j["cells"] = std::move(cells);
        write_json_file(a.out + "/sweep.json", j);
    }
}

// ----- augment -----

struct AugmentArgs {
    std::string pool;
    std::string flows;
    std::string out;
    double training_end = 0.0;
    int window_days = 8;
    double merge_gap_s = 60.0;
    int calibration_windows = 26;
    int calibration_window_days = 8;
};

void run_augment(const AugmentArgs& a) {
    FingerprintPool pool = read_json_file(a.pool).get<FingerprintPool>();
    DeviceFlows flows = load_trace(a.flows, a.merge_gap_s);

    int added = augment_pool(pool, flows, a.training_end, a.window_days);
    calibrate_unknown_threshold(pool, flows, a.calibration_windows,
                                a.calibration_window_days, a.training_end);

    fs::create_directories(a.out);
    write_json_file(a.out + "/pool.json", nlohmann::json(pool));
    nlohmann::json summary;
    summary["variants_added"] = added;
    write_json_file(a.out + "/augment.json", summary);
}

// ----- classify / metrics -----

void write_metric_files(const std::string& out_dir, const ConfusionMatrix& cm,
                        const MacroMetrics& macro, std::size_t windows) {
    write_confusion_csv(out_dir + "/confusion.csv", cm, false);
    write_confusion_csv(out_dir + "/confusion_norm.csv", cm, true);

    nlohmann::json j;
    j["windows"] = windows;
    j["macro_precision"] = macro.precision;
    j["macro_recall"] = macro.recall;
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t i = 0; i < macro.classes.size(); ++i) {
        per[macro.classes[i]] = {{"precision", macro.per_class_precision[i]},
                                 {"recall", macro.per_class_recall[i]}};
    }
    j["per_class"] = std::move(per);
    write_json_file(out_dir + "/metrics.json", j);
}

struct ClassifyArgs {
    std::string pool;
    std::string flows;
    std::string out;
    std::string mode = "closed";
    double anchor = kInf;
    double end = kInf;
    int window_days = 8;
    int slide_days = 1;
    double merge_gap_s = 60.0;
    bool no_volume_tiebreak = false;
};

void run_classify(const ClassifyArgs& a) {
    FingerprintPool pool = read_json_file(a.pool).get<FingerprintPool>();
    ClassifyMode mode = a.mode == "open" ? ClassifyMode::Open : ClassifyMode::Closed;
    if (mode == ClassifyMode::Open && pool.calibration.empty()) {
        throw std::runtime_error(
            "open mode needs a calibrated pool; run augment (or fingerprint) "
            "over the training trace first");
    }
    DeviceFlows flows = load_trace(a.flows, a.merge_gap_s);

    std::optional<double> start, end;
    if (std::isfinite(a.anchor)) start = a.anchor;
    if (std::isfinite(a.end)) end = a.end;
    ClassifySpan span = derive_span(flows, a.window_days, a.slide_days, start, end);

    ClassifyOptions opts;
    opts.use_volume_tiebreak = !a.no_volume_tiebreak;
    ClassifyRun run = run_classification(flows, pool, mode, span, opts);

    fs::create_directories(a.out);
    write_predictions_csv(a.out + "/predictions.csv", run.rows);
    write_metric_files(a.out, run.matrix, run.macro, run.rows.size());
}

struct MetricsArgs {
    std::string predictions;
    std::string out;
};

void run_metrics(const MetricsArgs& a) {
    std::vector<PredictionRow> rows = read_predictions_csv(a.predictions);
    std::vector<std::string> truth, predicted;
    truth.reserve(rows.size());
    predicted.reserve(rows.size());
    for (const PredictionRow& r : rows) {
        truth.push_back(r.device_true);
        predicted.push_back(r.device_pred);
    }
    ConfusionMatrix cm = confusion(truth, predicted);
    MacroMetrics macro = macro_precision_recall(cm);

    fs::create_directories(a.out);
    write_metric_files(a.out, cm, macro, rows.size());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"service-usage fingerprinting of IoT devices from flow records"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic flow trace");
    auto* fleet_opt = synth->add_option("--fleet", synth_args.fleet, "built-in device fleet")
                          ->check(CLI::IsMember({"closed13", "open22"}))
                          ->capture_default_str();
    synth->add_option("--spec", synth_args.spec_path, "simulation spec JSON file")
        ->excludes(fleet_opt);
    auto* seed_opt = synth->add_option("--seed", synth_args.seed, "generator seed")
                         ->capture_default_str();
    synth->add_option("--days", synth_args.days,
                      "override trace length in days (0 = the fleet's full length)");
    synth->add_option("--out", synth_args.out, "output directory")->required();

    FingerprintArgs fp_args;
    auto* fingerprint =
        app.add_subcommand("fingerprint", "export device fingerprints to a pool");
    fingerprint->add_option("--flows", fp_args.flows, "input trace")->required();
    fingerprint->add_option("--out", fp_args.out, "output directory")->required();
    fingerprint->add_option("--g", fp_args.g, "sub-window count or 'inf'")
        ->capture_default_str();
    fingerprint->add_option("--theta", fp_args.theta, "similarity threshold")
        ->capture_default_str();
    fingerprint->add_option("--anchor", fp_args.anchor,
                            "export anchor, epoch seconds (default: first day)");
    fingerprint->add_option("--l0-days", fp_args.l0_days, "initial window, days")
        ->capture_default_str();
    fingerprint->add_option("--i-max", fp_args.i_max, "window doublings")
        ->capture_default_str();
    fingerprint->add_option("--delta", fp_args.delta, "flow-count growth threshold")
        ->capture_default_str();
    fingerprint->add_option("--merge-gap-s", fp_args.merge_gap_s,
                            "conn-key dedup gap, seconds (0 disables)")
        ->capture_default_str();
    fingerprint->add_option("--training-end", fp_args.training_end,
                            "calibration data bound, epoch seconds");
    fingerprint->add_option("--calibration-windows", fp_args.calibration_windows,
                            "calibration window count")
        ->capture_default_str();
    fingerprint->add_option("--calibration-window-days",
                            fp_args.calibration_window_days,
                            "calibration window length, days")
        ->capture_default_str();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand(
        "sweep", "convergence and recurrence across granularities and thresholds");
    sweep->add_option("--flows", sweep_args.flows, "input trace")->required();
    sweep->add_option("--out", sweep_args.out, "output directory")->required();
    sweep->add_option("--g", sweep_args.g_values,
                      "granularities (default: powers of two up to 4096, inf)");
    sweep->add_option("--theta", sweep_args.theta_values,
                      "thresholds (default: 0.80 0.85 0.90 0.95 0.99)");
    sweep->add_option("--anchor", sweep_args.anchor,
                      "export anchor, epoch seconds (default: first day)");
    sweep->add_option("--l0-days", sweep_args.l0_days, "initial window, days")
        ->capture_default_str();
    sweep->add_option("--i-max", sweep_args.i_max, "window doublings")
        ->capture_default_str();
    sweep->add_option("--delta", sweep_args.delta, "flow-count growth threshold")
        ->capture_default_str();
    sweep->add_option("--merge-gap-s", sweep_args.merge_gap_s,
                      "conn-key dedup gap, seconds (0 disables)")
        ->capture_default_str();
    sweep->add_option("--window-days", sweep_args.recur_window_days,
                      "recurrence window length, days")
        ->capture_default_str();
    sweep->add_option("--windows", sweep_args.recur_windows,
                      "recurrence window count")
        ->capture_default_str();
    sweep->add_option("--data-end", sweep_args.data_end,
                      "ignore recurrence windows past this time");

    AugmentArgs aug_args;
    auto* augment = app.add_subcommand(
        "augment", "add drift variants to a pool and recalibrate");
    augment->add_option("--pool", aug_args.pool, "input pool.json")->required();
    augment->add_option("--flows", aug_args.flows, "input trace")->required();
    augment->add_option("--out", aug_args.out, "output directory")->required();
    augment->add_option("--training-end", aug_args.training_end,
                        "monitoring bound, epoch seconds")
        ->required();
    augment->add_option("--window-days", aug_args.window_days,
                        "monitor window length, days")
        ->capture_default_str();
    augment->add_option("--merge-gap-s", aug_args.merge_gap_s,
                        "conn-key dedup gap, seconds (0 disables)")
        ->capture_default_str();
    augment->add_option("--calibration-windows", aug_args.calibration_windows,
                        "calibration window count")
        ->capture_default_str();
    augment->add_option("--calibration-window-days",
                        aug_args.calibration_window_days,
                        "calibration window length, days")
        ->capture_default_str();

    ClassifyArgs cls_args;
    auto* classify =
        app.add_subcommand("classify", "match sliding windows against a pool");
    classify->add_option("--pool", cls_args.pool, "input pool.json")->required();
    classify->add_option("--flows", cls_args.flows, "input trace")->required();
    classify->add_option("--out", cls_args.out, "output directory")->required();
    classify->add_option("--mode", cls_args.mode, "closed or open set")
        ->check(CLI::IsMember({"closed", "open"}))
        ->capture_default_str();
    classify->add_option("--anchor", cls_args.anchor,
                         "span start, epoch seconds (default: first day)");
    classify->add_option("--end", cls_args.end,
                         "span end, epoch seconds (default: last day)");
    classify->add_option("--window-days", cls_args.window_days,
                         "window length, days")
        ->capture_default_str();
    classify->add_option("--slide-days", cls_args.slide_days, "window stride, days")
        ->capture_default_str();
    classify->add_option("--merge-gap-s", cls_args.merge_gap_s,
                         "conn-key dedup gap, seconds (0 disables)")
        ->capture_default_str();
    classify->add_flag("--no-volume-tiebreak", cls_args.no_volume_tiebreak,
                       "break similarity ties by device id instead of volume");

    MetricsArgs met_args;
    auto* metrics =
        app.add_subcommand("metrics", "confusion matrix and macro averages");
    metrics->add_option("--predictions", met_args.predictions,
                        "predictions.csv from classify")
        ->required();
    metrics->add_option("--out", met_args.out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage error
    }
    synth_args.seed_given = seed_opt->count() > 0;

    std::string out_dir;
    try {
        if (*synth) {
            run_synth(synth_args);
            out_dir = synth_args.out;
        } else if (*fingerprint) {
            run_fingerprint(fp_args);
            out_dir = fp_args.out;
        } else if (*sweep) {
            run_sweep_cmd(sweep_args);
            out_dir = sweep_args.out;
        } else if (*augment) {
            run_augment(aug_args);
            out_dir = aug_args.out;
        } else if (*classify) {
            run_classify(cls_args);
            out_dir = cls_args.out;
        } else if (*metrics) {
            run_metrics(met_args);
            out_dir = met_args.out;
        }
        write_run_json(out_dir, argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1; // runtime failure
    }
    return 0;
}
