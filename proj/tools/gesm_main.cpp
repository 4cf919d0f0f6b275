#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gesm/dataset.hpp"
#include "gesm/error.hpp"
#include "gesm/losses.hpp"
#include "gesm/model.hpp"
#include "gesm/trainer.hpp"

namespace {

using namespace gesm;

bool quiet_logs() {
    const char* v = std::getenv("GESM_LOG");
    return v != nullptr && std::string_view(v) == "quiet";
}

void log_line(const std::string& msg) {
    if (!quiet_logs()) {
        std::cerr << msg << '\n';
    }
}

// Shortest decimal form that parses back to the same double.
std::string shortest(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct SplitFlags {
    std::string mode = "auto"; // auto: stored masks when present, else public
    std::size_t train_per_class = 20;
    double rate = 0.01;
    std::size_t val_count = 500;
    std::size_t test_count = 1000;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_split_flags(CLI::App* cmd, SplitFlags& flags) {
    cmd->add_option("--split", flags.mode, "Split source: auto, stored, public, per-class, rate")
        ->check(CLI::IsMember({"auto", "stored", "public", "per-class", "rate"}));
    cmd->add_option("--train-per-class", flags.train_per_class,
                    "Training nodes per class (public/per-class splits)");
    cmd->add_option("--rate", flags.rate, "Training label rate (rate split)");
    cmd->add_option("--val-count", flags.val_count, "Validation nodes for generated splits");
    cmd->add_option("--test-count", flags.test_count, "Test nodes for generated splits");
    cmd->add_option("--split-seed", flags.seed, "Seed for randomized splits (default: --seed)")
        ->each([&flags](const std::string&) { flags.seed_given = true; });
}

bool has_stored_split(const GraphDataset& ds) {
    const auto any = [](const std::vector<std::uint8_t>& m) {
        return std::find(m.begin(), m.end(), std::uint8_t{1}) != m.end();
    };
    return any(ds.train_mask) && any(ds.val_mask) && any(ds.test_mask);
}

void apply_split_flags(GraphDataset& ds, const SplitFlags& flags, std::uint64_t fallback_seed) {
    std::string mode = flags.mode;
    if (mode == "auto") {
        mode = has_stored_split(ds) ? "stored" : "public";
    }
    if (mode == "stored") {
        if (!has_stored_split(ds)) {
            throw ValueError("--split stored requires masks in the container");
        }
        return;
    }
    SplitSpec spec;
    spec.train_per_class = flags.train_per_class;
    spec.rate = flags.rate;
    spec.val_count = flags.val_count;
    spec.test_count = flags.test_count;
    spec.seed = flags.seed_given ? flags.seed : fallback_seed;
    if (mode == "public") {
        spec.mode = SplitMode::Public;
    } else if (mode == "per-class") {
        spec.mode = SplitMode::PerClassCount;
    } else {
        spec.mode = SplitMode::LabelRate;
    }
    set_split(ds, make_split(ds, spec));
}

struct ConfigFlags {
    std::string preset = "cora-public";
    std::string config_path;
    std::vector<std::string> overrides;
    std::string variant;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--preset", flags.preset,
                    "Starting configuration: cora-public, citeseer-public, pubmed-public, "
                    "cora-low-rate, ppi");
    cmd->add_option("--config", flags.config_path, "key=value configuration file");
    cmd->add_option("--set", flags.overrides, "Override one key=value (repeatable)");
    cmd->add_option("--variant", flags.variant, "Model variant: base, att, full")
        ->check(CLI::IsMember({"base", "att", "full"}));
    cmd->add_option("--seed", flags.seed, "Master seed")
        ->each([&flags](const std::string&) { flags.seed_given = true; });
}

GesmConfig resolve_config(const ConfigFlags& flags, const GraphDataset* ds) {
    GesmConfig cfg = config_preset(flags.preset);
    if (ds != nullptr) {
        cfg.multi_label = ds->multi_label;
    }
    if (!flags.config_path.empty()) {
        cfg = load_config(flags.config_path, cfg);
    }
    for (const std::string& assignment : flags.overrides) {
        apply_config_override(cfg, assignment);
    }
    if (!flags.variant.empty()) {
        apply_config_override(cfg, "variant=" + flags.variant);
    }
    if (flags.seed_given) {
        cfg.seed = flags.seed;
    }
    validate_config(cfg);
    return cfg;
}

std::ofstream open_output(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(p);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    return out;
}

// Writes to the file when a path was given, else to stdout.
void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        std::ofstream out = open_output(out_path);
        out << content;
        if (!out) {
            throw IoError("write to " + out_path + " failed");
        }
    }
}

int run_train(const std::string& data_path, const SplitFlags& split, const ConfigFlags& cflags,
              std::size_t seeds, const std::string& out_dir, bool inductive) {
    if (inductive) {
        InductiveDataset ds = load_inductive(data_path);
        log_line("loaded " + std::to_string(ds.train.size()) + " train / " +
                 std::to_string(ds.val.size()) + " val / " + std::to_string(ds.test.size()) +
                 " test graphs");
        GesmConfig cfg = resolve_config(cflags, nullptr);
        cfg.multi_label = true;
        const TrainResult result = train_inductive(ds, cfg);
        std::ostringstream report;
        write_report(result.report, report);
        if (out_dir.empty()) {
            std::cout << report.str();
        } else {
            std::filesystem::create_directories(out_dir);
            emit(out_dir + "/report.csv", report.str());
            save_params(result.params, out_dir + "/params.gesm");
        }
        std::cout << std::setprecision(17) << "test_metric=" << result.report.test_metric
                  << " best_epoch=" << result.report.best_epoch
                  << " epochs=" << result.report.epochs.size() << '\n';
        return result.report.diverged ? 1 : 0;
    }

    GraphDataset ds = load_dataset(data_path);
    GesmConfig cfg = resolve_config(cflags, &ds);
    apply_split_flags(ds, split, cfg.seed);
    log_line(describe(ds));

    if (seeds > 1) {
        const SeedSweep sweep = run_seeds(ds, cfg, seeds);
        std::ostringstream csv;
        csv << std::setprecision(17) << "seed,test_metric,failure\n";
        for (std::size_t i = 0; i < sweep.seeds.size(); ++i) {
            csv << sweep.seeds[i] << ',';
            if (sweep.failures[i].empty()) {
                csv << sweep.metrics[i];
            }
            csv << ',' << sweep.failures[i] << '\n';
        }
        csv << "# summary mean=" << sweep.mean << " std=" << sweep.stddev
            << " succeeded=" << sweep.succeeded << " of=" << sweep.seeds.size() << '\n';
        emit(out_dir.empty() ? "" : out_dir + "/seeds.csv", csv.str());
        std::cout << std::setprecision(17) << "mean=" << sweep.mean << " std=" << sweep.stddev
                  << " succeeded=" << sweep.succeeded << "/" << sweep.seeds.size() << '\n';
        return 0;
    }

    const TrainResult result = train(ds, cfg);
    std::ostringstream report;
    write_report(result.report, report);
    if (out_dir.empty()) {
        std::cout << report.str();
    } else {
        std::filesystem::create_directories(out_dir);
        emit(out_dir + "/report.csv", report.str());
        save_params(result.params, out_dir + "/params.gesm");
    }
    std::cout << std::setprecision(17) << "test_metric=" << result.report.test_metric
              << " best_epoch=" << result.report.best_epoch
              << " epochs=" << result.report.epochs.size() << '\n';
    return result.report.diverged ? 1 : 0;
}

int run_eval(const std::string& data_path, const std::string& params_path,
             const SplitFlags& split, const ConfigFlags& cflags, const std::string& mask_name) {
    GraphDataset ds = load_dataset(data_path);
    GesmConfig cfg = resolve_config(cflags, &ds);
    apply_split_flags(ds, split, cfg.seed);
    const GesmParams params = load_params(params_path);
    cfg.hidden = params.dims.h;
    cfg.steps = params.dims.steps;
    cfg.heads = params.dims.heads;
    cfg.variant = params.variant;
    const auto& mask = mask_name == "train" ? ds.train_mask
                       : mask_name == "val" ? ds.val_mask
                                            : ds.test_mask;
    const double metric = evaluate(ds, params, cfg, mask);
    std::cout << std::setprecision(17) << mask_name << "_metric=" << metric << '\n';
    return 0;
}

int run_sweep_steps(const std::string& data_path, const SplitFlags& split,
                    const ConfigFlags& cflags, std::vector<std::size_t> steps,
                    const std::string& out_path) {
    if (steps.empty()) {
        throw ValueError("--steps needs at least one value");
    }
    if (!std::is_sorted(steps.begin(), steps.end())) {
        throw ValueError("--steps must be ascending");
    }
    GraphDataset ds = load_dataset(data_path);
    GesmConfig base = resolve_config(cflags, &ds);
    apply_split_flags(ds, split, base.seed);
    log_line(describe(ds));
    std::ostringstream csv;
    csv << std::setprecision(17) << "steps,train_acc,val_acc,test_acc\n";
    for (std::size_t s : steps) {
        GesmConfig cfg = base;
        cfg.steps = s;
        try {
            const TrainResult result = train(ds, cfg);
            const double train_acc = evaluate(ds, result.params, cfg, ds.train_mask);
            const double val_acc = evaluate(ds, result.params, cfg, ds.val_mask);
            csv << s << ',' << train_acc << ',' << val_acc << ','
                << result.report.test_metric << '\n';
        } catch (const GesmError& ex) {
            log_line("steps=" + std::to_string(s) + " failed: " + ex.what());
        }
    }
    emit(out_path, csv.str());
    return 0;
}

int run_sweep_label_rate(const std::string& data_path, const SplitFlags& split,
                         const ConfigFlags& cflags, std::vector<double> rates,
                         std::size_t seeds, const std::string& out_path) {
    if (rates.empty()) {
        throw ValueError("--rates needs at least one value");
    }
    GraphDataset ds = load_dataset(data_path);
    const GesmConfig cfg = resolve_config(cflags, &ds);
    std::ostringstream csv;
    csv << std::setprecision(17) << "rate,mean_test_metric,std,succeeded,runs\n";
    for (double rate : rates) {
        // The low-rate protocol redraws the labeled set every run, so each
        // seed gets its own stratified split before it trains.
        std::vector<double> metrics;
        for (std::size_t i = 0; i < seeds; ++i) {
            const std::uint64_t run_seed =
                (split.seed_given ? split.seed : cfg.seed) + i;
            SplitSpec spec;
            spec.mode = SplitMode::LabelRate;
            spec.rate = rate;
            spec.val_count = split.val_count;
            spec.test_count = split.test_count;
            spec.seed = run_seed;
            try {
                GraphDataset run_ds = ds;
                set_split(run_ds, make_split(run_ds, spec));
                GesmConfig run_cfg = cfg;
                run_cfg.seed = run_seed;
                const TrainResult result = train(run_ds, run_cfg);
                if (result.report.diverged) {
                    throw NumericError("run diverged");
                }
                metrics.push_back(result.report.test_metric);
            } catch (const GesmError& ex) {
                log_line("rate=" + shortest(rate) + " seed=" + std::to_string(run_seed) +
                         " failed: " + ex.what());
            }
        }
        if (metrics.empty()) {
            log_line("rate=" + shortest(rate) + ": no run succeeded");
            continue;
        }
        double mean = 0.0;
        for (double m : metrics) mean += m;
        mean /= static_cast<double>(metrics.size());
        double var = 0.0;
        for (double m : metrics) var += (m - mean) * (m - mean);
        const double stddev =
            metrics.size() > 1 ? std::sqrt(var / static_cast<double>(metrics.size() - 1)) : 0.0;
        csv << shortest(rate) << ',' << mean << ',' << stddev << ',' << metrics.size() << ','
            << seeds << '\n';
    }
    emit(out_path, csv.str());
    return 0;
}

int run_time_inference(const std::string& data_path, const SplitFlags& split,
                       const ConfigFlags& cflags, std::vector<std::size_t> steps,
                       std::size_t repeats, const std::string& out_path) {
    if (steps.empty()) {
        throw ValueError("--steps needs at least one value");
    }
    if (repeats < 3) {
        throw ValueError("--repeats must be at least 3");
    }
    GraphDataset ds = load_dataset(data_path);
    GesmConfig base = resolve_config(cflags, &ds);
    apply_split_flags(ds, split, base.seed);
    const GraphOperators ops = build_graph_operators(ds);
    std::ostringstream csv;
    csv << "steps,median_ms,min_ms,max_ms\n";
    for (std::size_t s : steps) {
        const GesmDims dims{ds.f, base.hidden, ds.c, s, base.heads};
        Rng init = Rng::substream(base.seed, "init");
        const GesmParams params = make_params(dims, base.variant, init);
        gesm_eval(params, ds.features, ops, base.multi_label, base.pooling); // warmup
        std::vector<double> ms;
        ms.reserve(repeats);
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            gesm_eval(params, ds.features, ops, base.multi_label, base.pooling);
            const auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(ms.begin(), ms.end());
        const double median = ms.size() % 2 == 1
                                  ? ms[ms.size() / 2]
                                  : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
        csv << s << ',' << std::setprecision(6) << median << ',' << ms.front() << ','
            << ms.back() << '\n';
    }
    emit(out_path, csv.str());
    return 0;
}

int run_dump_embeddings(const std::string& data_path, const std::string& params_path,
                        const std::string& layer, const std::string& out_path) {
    GraphDataset ds = load_dataset(data_path);
    const GesmParams params = load_params(params_path);
    const GraphOperators ops = build_graph_operators(ds);
    Matrix chosen;
    if (layer == "pre-propagation") {
        chosen = gesm_eval(params, ds.features, ops, ds.multi_label).reg_embedding;
    } else {
        const Matrix h = params.variant.use_attention
                             ? attention_feature(ds.features, params, ops)
                             : embed(ds.features, params.w_embed);
        const Matrix f_cat = step_mixture(h, ops.a_hat, params.dims.steps);
        Matrix logits = matmul(f_cat, params.w_pred);
        for (std::size_t i = 0; i < logits.rows; ++i) {
            for (std::size_t k = 0; k < logits.cols; ++k) {
                logits.at(i, k) += params.b_pred.at(0, k);
            }
        }
        chosen = std::move(logits);
    }
    export_embeddings(chosen, out_path);
    log_line("wrote " + std::to_string(chosen.rows) + "x" + std::to_string(chosen.cols) +
             " values to " + out_path);
    return 0;
}

int run_validate_data(const std::string& data_path) {
    const GraphDataset ds = load_dataset(data_path);
    std::cout << describe(ds) << '\n';
    return 0;
}

int run_synth(std::size_t n_per_cluster, double p_in, double p_out, std::uint64_t seed,
              double noise, const std::string& out_path) {
    const GraphDataset ds = synth_two_cluster(n_per_cluster, p_in, p_out, seed, noise);
    const std::filesystem::path p(out_path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    save_dataset(ds, out_path);
    std::cout << describe(ds) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Step-mixture graph network: training, evaluation, and experiment sweeps"};
    app.require_subcommand(1);

    SplitFlags split;
    ConfigFlags cflags;
    std::string data_path;
    std::string params_path;
    std::string out_path;
    std::string mask_name = "test";
    std::string layer = "pre-softmax";
    std::vector<std::size_t> step_list;
    std::vector<double> rate_list;
    std::size_t seeds = 1;
    std::size_t repeats = 7;
    bool inductive = false;

    auto* train_cmd = app.add_subcommand("train", "Train and report metrics");
    train_cmd->add_option("--data", data_path, "Dataset container (or directory with --inductive)")
        ->required();
    train_cmd->add_flag("--inductive", inductive, "Treat --data as a multi-graph directory");
    train_cmd->add_option("--seeds", seeds, "Number of seeded runs (mean/std over runs)");
    train_cmd->add_option("--out", out_path, "Directory for report.csv and params.gesm");
    add_config_flags(train_cmd, cflags);
    add_split_flags(train_cmd, split);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate saved parameters");
    eval_cmd->add_option("--data", data_path, "Dataset container")->required();
    eval_cmd->add_option("--params", params_path, "Trained parameter file")->required();
    eval_cmd->add_option("--mask", mask_name, "Which split to score")
        ->check(CLI::IsMember({"train", "val", "test"}));
    add_config_flags(eval_cmd, cflags);
    add_split_flags(eval_cmd, split);

    auto* sweep_cmd = app.add_subcommand("sweep-steps", "One training run per step depth");
    sweep_cmd->add_option("--data", data_path, "Dataset container")->required();
    sweep_cmd->add_option("--steps", step_list, "Ascending step depths")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", out_path, "CSV output file (default stdout)");
    add_config_flags(sweep_cmd, cflags);
    add_split_flags(sweep_cmd, split);

    auto* rate_cmd = app.add_subcommand("sweep-label-rate", "Seeded runs per label rate");
    rate_cmd->add_option("--data", data_path, "Dataset container")->required();
    rate_cmd->add_option("--rates", rate_list, "Label rates, e.g. 0.005,0.01,0.03")
        ->required()
        ->delimiter(',');
    rate_cmd->add_option("--seeds", seeds, "Runs per rate");
    rate_cmd->add_option("--out", out_path, "CSV output file (default stdout)");
    add_config_flags(rate_cmd, cflags);
    add_split_flags(rate_cmd, split);

    auto* time_cmd = app.add_subcommand("time-inference", "Median eval wall time per step depth");
    time_cmd->add_option("--data", data_path, "Dataset container")->required();
    time_cmd->add_option("--steps", step_list, "Step depths")->required()->delimiter(',');
    time_cmd->add_option("--repeats", repeats, "Timed passes per depth (>= 3)");
    time_cmd->add_option("--out", out_path, "CSV output file (default stdout)");
    add_config_flags(time_cmd, cflags);
    add_split_flags(time_cmd, split);

    auto* dump_cmd = app.add_subcommand("dump-embeddings", "Write node representations as text");
    dump_cmd->add_option("--data", data_path, "Dataset container")->required();
    dump_cmd->add_option("--params", params_path, "Trained parameter file")->required();
    dump_cmd->add_option("--layer", layer, "pre-propagation or pre-softmax")
        ->check(CLI::IsMember({"pre-propagation", "pre-softmax"}));
    dump_cmd->add_option("--out", out_path, "Output text file")->required();

    auto* validate_cmd = app.add_subcommand("validate-data", "Load and sanity-check a container");
    validate_cmd->add_option("--data", data_path, "Dataset container")->required();

    std::size_t n_per_cluster = 60;
    double p_in = 0.1;
    double p_out = 0.01;
    double noise = 0.1;
    std::uint64_t synth_seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a two-community test container");
    synth_cmd->add_option("--out", out_path, "Output container (.json for the text twin)")
        ->required();
    synth_cmd->add_option("--n-per-cluster", n_per_cluster, "Nodes per community");
    synth_cmd->add_option("--p-in", p_in, "Within-community edge probability");
    synth_cmd->add_option("--p-out", p_out, "Cross-community edge probability");
    synth_cmd->add_option("--noise", noise, "Feature noise scale");
    synth_cmd->add_option("--seed", synth_seed, "Generator seed");

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) {
            return run_train(data_path, split, cflags, seeds, out_path, inductive);
        }
        if (eval_cmd->parsed()) {
            return run_eval(data_path, params_path, split, cflags, mask_name);
        }
        if (sweep_cmd->parsed()) {
            return run_sweep_steps(data_path, split, cflags, step_list, out_path);
        }
        if (rate_cmd->parsed()) {
            return run_sweep_label_rate(data_path, split, cflags, rate_list, seeds, out_path);
        }
        if (time_cmd->parsed()) {
            return run_time_inference(data_path, split, cflags, step_list, repeats, out_path);
        }
        if (dump_cmd->parsed()) {
            return run_dump_embeddings(data_path, params_path, layer, out_path);
        }
        if (synth_cmd->parsed()) {
            return run_synth(n_per_cluster, p_in, p_out, synth_seed, noise, out_path);
        }
        return run_validate_data(data_path);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\nrun with --help for usage\n";
        return 2;
    } catch (const gesm::GesmError& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
}
