// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: ingest -> train -> generate -> evaluate -> report.
//
// Settings come from a flat `key = value` config file, overridden by flags
// (flags win). Artifacts of one run live in `<out>/run-<hash>`, where the hash
// covers every data, model and training setting, so a results directory can
// always be traced back to the exact configuration that produced it.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "homesynth/datapipe.hpp"
#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"
#include "homesynth/metrics.hpp"
#include "homesynth/nets.hpp"
#include "homesynth/synth.hpp"
#include "homesynth/trainer.hpp"

namespace homesynth::cli {

namespace fs = std::filesystem;

enum class Scope { Data, Model, Train, Generate, Evaluate, Output };

struct KeySpec {
    const char* key;
    const char* fallback;
    Scope scope;
    const char* help;
};

inline const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys{
        {"input", "", Scope::Data, "raw smart-meter CSV (required by ingest)"},
        {"timestamp_column", "timestamp", Scope::Data, "name of the ISO-8601 timestamp column"},
        {"value_column", "power", Scope::Data, "name of the power column (watts)"},
        {"kind", "load", Scope::Data, "series kind: load or pv"},
        {"household", "", Scope::Data, "household identifier, recorded in metadata"},
        {"utc_offset", "+00:00", Scope::Data, "fixed UTC offset of local midnight"},
        {"resample_minutes", "15", Scope::Data, "target resolution in minutes"},
        {"day_coverage", "1", Scope::Data, "fraction of slots a day needs to be kept"},
        {"model", "vaegan", Scope::Model, "vaegan or gan"},
        {"latent", "32", Scope::Model, "latent dimension"},
        {"channels", "32", Scope::Model, "channels per convolution layer"},
        {"kernel", "3", Scope::Model, "convolution kernel size"},
        {"dilations", "1,2,4,8", Scope::Model, "dilation of each convolution layer"},
        {"leaky_slope", "0.2", Scope::Model, "leaky-ReLU negative slope"},
        {"epochs", "100", Scope::Train, "training epochs"},
        {"batch_size", "32", Scope::Train, "days per batch"},
        {"lr_g", "0.0002", Scope::Train, "encoder/generator learning rate"},
        {"lr_d", "0.0002", Scope::Train, "discriminator learning rate"},
        {"adam_beta1", "0.5", Scope::Train, "Adam beta1"},
        {"adam_beta2", "0.999", Scope::Train, "Adam beta2"},
        {"adam_eps", "1e-08", Scope::Train, "Adam epsilon"},
        {"seed", "42", Scope::Train, "seed for initialisation, training and sampling"},
        {"d_steps_per_g_step", "1", Scope::Train, "discriminator updates per generator update"},
        {"checkpoint_every", "10", Scope::Train, "epochs between checkpoints (0: only at the end)"},
        {"fake_includes_prior", "false", Scope::Train, "also show D decoded prior samples as fakes"},
        {"n", "0", Scope::Generate, "profiles to generate (0: as many as ingested days)"},
        {"bins", "100", Scope::Evaluate, "histogram bins for KL divergence"},
        {"sigma", "median", Scope::Evaluate, "RBF width: median or a positive number"},
        {"mmd_basis", "days", Scope::Evaluate, "MMD samples: days (96-d vectors) or readings"},
        {"alpha_high", "0.9", Scope::Evaluate, "high-load threshold fraction"},
        {"alpha_low", "0.1", Scope::Evaluate, "near-base threshold fraction"},
        {"out", "runs", Scope::Output, "root directory for run directories"},
    };
    return keys;
}

inline std::string describe_keys() {
    std::ostringstream os;
    os << "Config keys (key = default):\n";
    for (const auto& k : config_keys()) {
        os << "  " << std::left << std::setw(20) << k.key << " = " << std::setw(10)
           << (*k.fallback ? k.fallback : "(none)") << "  " << k.help << '\n';
    }
    return os.str();
}

class RunConfig {
public:
    /// Defaults, then the config file (if any), then overrides.
    static RunConfig load(const std::string& config_path, const KeyValues& overrides) {
        RunConfig c;
        for (const auto& k : config_keys()) c.values_[k.key] = k.fallback;
        auto merge = [&](const KeyValues& kv, const std::string& source) {
            for (const auto& [k, v] : kv) {
                if (!c.values_.contains(k)) throw UsageError(source + ": unknown config key '" + k + "'");
                c.values_[k] = v;
            }
        };
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw UsageError("cannot open config file " + config_path);
            merge(parse_key_values(in, config_path), config_path);
        }
        merge(overrides, "command line");
        return c;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
        return it->second;
    }

    long long get_int(const std::string& key) const {
        long long v;
        if (!parse_int(get(key), v)) throw UsageError("config key '" + key + "' needs an integer, got '" + get(key) + "'");
        return v;
    }

    std::size_t get_size(const std::string& key) const {
        const long long v = get_int(key);
        if (v < 0) throw UsageError("config key '" + key + "' must be non-negative");
        return static_cast<std::size_t>(v);
    }

    double get_double(const std::string& key) const {
        double v;
        if (!parse_double(get(key), v)) throw UsageError("config key '" + key + "' needs a number, got '" + get(key) + "'");
        return v;
    }

    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw UsageError("config key '" + key + "' needs true or false, got '" + v + "'");
    }

    const KeyValues& values() const noexcept { return values_; }

    /// Hash of everything that determines the trained model except its
    /// length, so a resumed run with more epochs stays in the same directory.
    std::string run_id() const {
        std::string text;
        for (const auto& k : config_keys()) {
            const std::string_view key = k.key;
            if (key == "epochs" || key == "checkpoint_every") continue;  // run length, not identity
            if (k.scope == Scope::Data || k.scope == Scope::Model || k.scope == Scope::Train) {
                text += std::string(key) + "=" + get(k.key) + "\n";
            }
        }
        return "run-" + hex64(fnv1a(text));
    }

    fs::path run_dir() const { return fs::path(get("out")) / run_id(); }

    nets::ModelKind model_kind() const { return nets::parse_model_kind(get("model")); }

    nets::ArchConfig arch() const {
        nets::ArchConfig a;
        a.latent = get_size("latent");
        a.channels = get_size("channels");
        a.kernel = get_size("kernel");
        a.dilations = nets::detail::parse_sizes(get("dilations"), "dilations");
        a.leaky_slope = get_double("leaky_slope");
        a.validate();
        return a;
    }

    train::TrainConfig train_config() const {
        train::TrainConfig t;
        t.epochs = static_cast<int>(get_int("epochs"));
        t.batch_size = get_size("batch_size");
        t.lr_g = get_double("lr_g");
        t.lr_d = get_double("lr_d");
        t.adam_beta1 = get_double("adam_beta1");
        t.adam_beta2 = get_double("adam_beta2");
        t.adam_eps = get_double("adam_eps");
        t.seed = static_cast<std::uint64_t>(get_size("seed"));
        t.d_steps_per_g_step = static_cast<int>(get_int("d_steps_per_g_step"));
        t.checkpoint_every = static_cast<int>(get_int("checkpoint_every"));
        t.fake_includes_prior = get_bool("fake_includes_prior");
        t.validate();
        return t;
    }

    metrics::MetricsConfig metrics_config() const {
        metrics::MetricsConfig m;
        const long long bins = get_int("bins");
        if (bins < 1) throw UsageError("bins must be at least 1");
        m.bins = static_cast<std::size_t>(bins);
        if (get("sigma") != "median") {
            const double s = get_double("sigma");
            if (!(s > 0.0)) throw UsageError("sigma must be 'median' or a positive number");
            m.sigma = s;
        }
        const std::string& basis = get("mmd_basis");
        if (basis != "days" && basis != "readings") throw UsageError("mmd_basis must be days or readings");
        m.mmd_on_days = basis == "days";
        m.shape.alpha_high = get_double("alpha_high");
        m.shape.alpha_low = get_double("alpha_low");
        m.shape.validate();
        return m;
    }

private:
    KeyValues values_;
};

// ---------------------------------------------------------------------------
// Run directory layout

struct RunPaths {
    fs::path dir;
    fs::path config() const { return dir / "config.txt"; }
    fs::path days() const { return dir / "days.csv"; }
    fs::path checkpoint() const { return dir / "checkpoint.txt"; }
    fs::path train_log() const { return dir / "train_log.csv"; }
    fs::path epoch_log() const { return dir / "epoch_log.csv"; }
    fs::path synthetic() const { return dir / "synthetic.csv"; }
    fs::path report() const { return dir / "report.json"; }
    fs::path histogram() const { return dir / "histogram.csv"; }
};

inline RunPaths prepare_run(const RunConfig& cfg) {
    RunPaths p{cfg.run_dir()};
    std::error_code ec;
    fs::create_directories(p.dir, ec);
    if (ec) throw DataError("cannot create run directory " + p.dir.string() + ": " + ec.message());
    KeyValues echo;
    for (const auto& k : config_keys()) {
        if (k.scope == Scope::Data || k.scope == Scope::Model || k.scope == Scope::Train) echo[k.key] = cfg.get(k.key);
    }
    write_key_values(p.config().string(), echo);
    return p;
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit code on success and throws on
// failure (see exit_code()).

inline int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
    const std::string input = cfg.get("input");
    if (input.empty()) throw UsageError("ingest needs an input file (config key 'input')");
    data::ColumnSpec spec;
    spec.timestamp = cfg.get("timestamp_column");
    spec.value = cfg.get("value_column");
    const auto series = data::load_csv(input, spec);

    data::DayOptions day_opts;
    day_opts.utc_offset_minutes = data::parse_utc_offset(cfg.get("utc_offset"));
    day_opts.min_coverage = cfg.get_double("day_coverage");
    day_opts.kind = data::parse_kind(cfg.get("kind"));
    const int minutes = static_cast<int>(cfg.get_int("resample_minutes"));
    if (minutes != data::kSlotMinutes) {
        throw UsageError("resample_minutes must be " + std::to_string(data::kSlotMinutes) + " (96 slots per day)");
    }
    const auto days = data::normalize(data::clean_days(data::resample(series, minutes), day_opts));

    const RunPaths paths = prepare_run(cfg);
    data::write_day_matrix(paths.days().string(), days,
                           {{"household", cfg.get("household")}, {"source", input},
                            {"source_rows", std::to_string(series.size())}});
    out << "kept " << days.rows << " complete days\n" << "run directory: " << paths.dir.string() << '\n';
    return 0;
}

inline data::DayMatrix load_training_days(const RunPaths& paths) {
    if (!fs::exists(paths.days())) {
        throw DataError("no ingested data at " + paths.days().string() + " (run ingest with the same config first)");
    }
    auto days = data::read_day_matrix(paths.days().string());
    if (!days.normalized) throw DataError(paths.days().string() + " is not normalized");
    return days;
}

inline int cmd_train(const RunConfig& cfg, bool resume, std::ostream& out) {
    const auto tc = cfg.train_config();
    const auto kind = cfg.model_kind();
    const auto arch = cfg.arch();
    const RunPaths paths = prepare_run(cfg);
    const auto days = load_training_days(paths);

    std::optional<train::Trainer> trainer;
    std::vector<train::StepRecord> prior_steps;
    std::vector<train::EpochRecord> prior_epochs;
    if (resume) {
        if (!fs::exists(paths.checkpoint())) throw DataError("no checkpoint to resume at " + paths.checkpoint().string());
        trainer.emplace(train::Trainer::resume(nets::load_checkpoint(paths.checkpoint().string()), tc.epochs));
        if (fs::exists(paths.train_log())) {
            for (const auto& r : train::read_train_log(paths.train_log().string())) {
                if (r.step <= trainer->steps_done()) prior_steps.push_back(r);
            }
        }
        if (fs::exists(paths.epoch_log())) {
            for (const auto& e : train::read_epoch_log(paths.epoch_log().string())) {
                if (e.epoch <= trainer->epochs_done()) prior_epochs.push_back(e);
            }
        }
        out << "resuming at epoch " << trainer->epochs_done() << '\n';
    } else {
        trainer.emplace(kind, arch, tc);
    }

    auto persist = [&](const train::Trainer& t) {
        nets::save_checkpoint(paths.checkpoint().string(), t.checkpoint());
        std::vector<train::StepRecord> steps = prior_steps;
        steps.insert(steps.end(), t.log().steps.begin(), t.log().steps.end());
        train::write_train_log(paths.train_log().string(), steps);
        std::vector<train::EpochRecord> epochs = prior_epochs;
        epochs.insert(epochs.end(), t.log().epochs.begin(), t.log().epochs.end());
        train::write_epoch_log(paths.epoch_log().string(), epochs);
    };
    trainer->run(days, [&](const train::Trainer& t) {
        const int every = t.config().checkpoint_every;
        if (every > 0 && t.epochs_done() % every == 0) persist(t);
    });
    persist(*trainer);
    out << "trained " << nets::to_string(trainer->model().kind) << " for " << trainer->epochs_done() << " epochs ("
        << trainer->steps_done() << " steps)\n"
        << "checkpoint: " << paths.checkpoint().string() << '\n';
    return 0;
}

inline std::string file_id(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return hex64(fnv1a(os.str()));
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& out) {
    const RunPaths paths{cfg.run_dir()};
    if (!fs::exists(paths.checkpoint())) {
        throw DataError("no checkpoint at " + paths.checkpoint().string() + " (run train with the same config first)");
    }
    const auto ck = nets::load_checkpoint(paths.checkpoint().string());
    std::size_t n = cfg.get_size("n");
    if (n == 0) n = load_training_days(paths).rows;
    const auto batch = synth::sample(ck.model, n, static_cast<std::uint64_t>(cfg.get_size("seed")),
                                     file_id(paths.checkpoint()));
    synth::export_batch(batch, paths.synthetic().string());
    out << "generated " << n << " profiles: " << paths.synthetic().string() << '\n';
    return 0;
}

inline int cmd_evaluate(const RunConfig& cfg, const std::string& real_path, const std::string& synth_path,
                        std::ostream& out) {
    const RunPaths paths{cfg.run_dir()};
    const std::string rp = real_path.empty() ? paths.days().string() : real_path;
    const std::string sp = synth_path.empty() ? paths.synthetic().string() : synth_path;
    KeyValues synth_meta;
    const auto real = data::denormalize(data::read_day_matrix(rp));
    const auto synth = data::denormalize(data::read_day_matrix(sp, &synth_meta));

    auto report = metrics::full_report(real, synth, cfg.metrics_config());
    report.label = synth_meta.contains("model") ? synth_meta["model"] : fs::path(sp).stem().string();

    const fs::path dir = synth_path.empty() ? paths.dir : fs::path(sp).parent_path();
    const fs::path report_path = synth_path.empty() ? paths.report() : dir / "report.json";
    const fs::path hist_path = synth_path.empty() ? paths.histogram() : dir / "histogram.csv";
    if (!dir.empty()) fs::create_directories(dir);
    metrics::write_report(report_path.string(), report);
    metrics::write_histogram_csv(hist_path.string(), report.real_hist, report.synth_hist);
    out << "kl = " << format_double(report.kl) << "\nmmd = " << format_double(report.mmd)
        << "\nwasserstein = " << format_double(report.wasserstein) << "\nreport: " << report_path.string() << '\n';
    return 0;
}

struct ReportRow {
    std::string model;
    double kl, wasserstein, mmd;
};

inline ReportRow read_report_row(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report " + path);
    nlohmann::json j;
    try {
        in >> j;
        ReportRow r{j.value("label", std::string{}), j.at("kl").get<double>(), j.at("wasserstein").get<double>(),
                    j.at("mmd").get<double>()};
        if (r.model.empty()) r.model = fs::path(path).stem().string();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": not a metrics report (" + e.what() + ")");
    }
}

/// Side-by-side distance table, one row per report, columns in the fixed
/// order KL, Wasserstein, MMD.
inline std::string format_comparison(const std::vector<ReportRow>& rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %14s %14s %14s\n", "model", "kl", "wasserstein", "mmd");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-16s %14.6g %14.6g %14.6g\n", r.model.c_str(), r.kl, r.wasserstein, r.mmd);
        os << buf;
    }
    return os.str();
}

inline std::string comparison_csv(const std::vector<ReportRow>& rows) {
    std::string s = "model,kl,wasserstein,mmd\n";
    for (const auto& r : rows) {
        s += r.model + "," + format_double(r.kl) + "," + format_double(r.wasserstein) + "," + format_double(r.mmd) + "\n";
    }
    return s;
}

inline int cmd_report(const RunConfig& cfg, const std::vector<std::string>& report_paths, std::ostream& out) {
    if (report_paths.empty()) throw UsageError("report needs at least one report file");
    std::vector<ReportRow> rows;
    for (const auto& p : report_paths) rows.push_back(read_report_row(p));
    const std::string table = format_comparison(rows);
    const fs::path dir(cfg.get("out"));
    fs::create_directories(dir);
    {
        std::ofstream txt(dir / "comparison.txt", std::ios::trunc);
        txt << table;
        std::ofstream csv(dir / "comparison.csv", std::ios::trunc);
        csv << comparison_csv(rows);
        if (!txt || !csv) throw DataError("cannot write comparison files under " + dir.string());
    }
    out << table;
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e)) return 1;
    if (dynamic_cast<const DivergenceError*>(&e)) return 3;
    return 2;
}

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on usage
/// errors, 2 on data errors, 3 on training divergence.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"homesynth: synthetic smart-home load and PV profiles"};
    app.require_subcommand(1);
    app.footer(describe_keys());

    std::string config_path;
    std::vector<std::string> sets;
    std::string model, seed, outdir, n, bins, sigma;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key = value config file");
        sub->add_option("--set", sets, "override any config key: key=value (repeatable)");
        sub->add_option("--model", model, "vaegan or gan");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", outdir, "root directory for run directories");
        sub->footer(describe_keys());
    };

    auto* ingest = app.add_subcommand("ingest", "parse, resample, clean and normalize a raw CSV");
    common(ingest);
    auto* train_cmd = app.add_subcommand("train", "train the configured model");
    common(train_cmd);
    bool resume = false;
    train_cmd->add_flag("--resume", resume, "continue from the run's checkpoint");
    auto* generate = app.add_subcommand("generate", "sample synthetic daily profiles");
    common(generate);
    generate->add_option("--n", n, "number of profiles");
    auto* evaluate = app.add_subcommand("evaluate", "compare real and synthetic profiles");
    common(evaluate);
    std::string real_path, synth_path;
    evaluate->add_option("--real", real_path, "real DayMatrix CSV (default: the run's days.csv)");
    evaluate->add_option("--synth", synth_path, "synthetic CSV (default: the run's synthetic.csv)");
    evaluate->add_option("--bins", bins, "histogram bins for KL");
    evaluate->add_option("--sigma", sigma, "median or a positive RBF width");
    auto* report = app.add_subcommand("report", "side-by-side table of metric reports");
    common(report);
    std::vector<std::string> report_paths;
    report->add_option("reports", report_paths, "report.json files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        KeyValues overrides;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            overrides[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
        }
        auto flag = [&](const char* key, const std::string& v) {
            if (!v.empty()) overrides[key] = v;
        };
        flag("model", model);
        flag("seed", seed);
        flag("out", outdir);
        flag("n", n);
        flag("bins", bins);
        flag("sigma", sigma);
        const RunConfig cfg = RunConfig::load(config_path, overrides);

        if (ingest->parsed()) return cmd_ingest(cfg, out);
        if (train_cmd->parsed()) return cmd_train(cfg, resume, out);
        if (generate->parsed()) return cmd_generate(cfg, out);
        if (evaluate->parsed()) return cmd_evaluate(cfg, real_path, synth_path, out);
        return cmd_report(cfg, report_paths, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    }
}

}  // namespace homesynth::cli
