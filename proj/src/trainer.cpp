#include "gesm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include "gesm/error.hpp"
#include "gesm/optim.hpp"

namespace gesm {

namespace {

std::size_t mask_count(const std::vector<std::uint8_t>& mask) {
    std::size_t m = 0;
    for (std::uint8_t v : mask) {
        m += v != 0;
    }
    return m;
}

// Triplet sample size per epoch: every stored direction once, capped at 10n.
std::size_t triplet_count(const CsrMatrix& adjacency) {
    return std::min(adjacency.nnz(), 10 * adjacency.n_rows);
}

void count_confusion(const Matrix& output, const Matrix& label_matrix,
                     const std::vector<std::uint8_t>& mask, double threshold,
                     std::size_t& tp, std::size_t& fp, std::size_t& fn) {
    if (!output.same_shape(label_matrix)) {
        throw DimensionError("output and label matrix shapes differ");
    }
    if (mask.size() != output.rows) {
        throw SizeError("mask length does not match output rows");
    }
    for (std::size_t i = 0; i < output.rows; ++i) {
        if (!mask[i]) {
            continue;
        }
        for (std::size_t k = 0; k < output.cols; ++k) {
            const bool pred = output.at(i, k) > threshold;
            const bool truth = label_matrix.at(i, k) != 0.0;
            tp += pred && truth;
            fp += pred && !truth;
            fn += !pred && truth;
        }
    }
}

struct BestTracker {
    double metric = -std::numeric_limits<double>::infinity();
    double loss = std::numeric_limits<double>::infinity();

    bool snapshot_better(double m, double l) const {
        return m > metric || (m == metric && l < loss);
    }
};

} // namespace

void validate_config(const GesmConfig& cfg) {
    if (cfg.hidden == 0) {
        throw ValueError("hidden width must be positive");
    }
    if (cfg.variant.use_attention && (cfg.heads == 0 || cfg.hidden % cfg.heads != 0)) {
        throw ValueError("hidden width " + std::to_string(cfg.hidden) +
                         " is not divisible into " + std::to_string(cfg.heads) + " heads");
    }
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) {
        throw ValueError("dropout must lie in [0, 1)");
    }
    if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) {
        throw ValueError("beta must lie in [0, 1]");
    }
    if (!(cfg.lr > 0.0)) {
        throw ValueError("learning rate must be positive");
    }
    if (cfg.l2 < 0.0) {
        throw ValueError("l2 strength must be nonnegative");
    }
    if (cfg.patience == 0) {
        throw ValueError("patience must be at least 1");
    }
    if (cfg.max_epochs == 0) {
        throw ValueError("max_epochs must be at least 1");
    }
}

GesmConfig config_preset(const std::string& name) {
    GesmConfig cfg; // defaults are the cora-public settings
    if (name == "cora-public") {
        return cfg;
    }
    if (name == "citeseer-public") {
        cfg.steps = 15;
        cfg.patience = 100;
        return cfg;
    }
    if (name == "pubmed-public") {
        cfg.steps = 15;
        cfg.l2 = 0.0005;
        cfg.beta = 0.5;
        cfg.patience = 100;
        return cfg;
    }
    if (name == "cora-low-rate") {
        cfg.steps = 15;
        cfg.patience = 100;
        return cfg;
    }
    if (name == "ppi") {
        cfg.hidden = 512;
        cfg.dropout = 0.0;
        cfg.l2 = 0.0;
        cfg.beta = 0.5;
        cfg.lr = 0.0008;
        cfg.patience = 100;
        cfg.multi_label = true;
        return cfg;
    }
    throw ValueError("unknown preset '" + name +
                     "'; choices: cora-public, citeseer-public, pubmed-public, "
                     "cora-low-rate, ppi");
}

void apply_config_override(GesmConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValueError("expected key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    const auto as_count = [&](const char* what) -> std::size_t {
        try {
            size_t pos = 0;
            const unsigned long long v = std::stoull(value, &pos);
            if (pos != value.size()) {
                throw std::invalid_argument(value);
            }
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ValueError(std::string("cannot parse ") + what + " from '" + value + "'");
        }
    };
    const auto as_real = [&](const char* what) -> double {
        try {
            size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) {
                throw std::invalid_argument(value);
            }
            return v;
        } catch (const std::exception&) {
            throw ValueError(std::string("cannot parse ") + what + " from '" + value + "'");
        }
    };
    const auto as_flag = [&](const char* what) -> bool {
        if (value == "1" || value == "true") {
            return true;
        }
        if (value == "0" || value == "false") {
            return false;
        }
        throw ValueError(std::string("cannot parse ") + what + " from '" + value + "'");
    };
    if (key == "hidden") {
        cfg.hidden = as_count("hidden");
    } else if (key == "steps") {
        cfg.steps = as_count("steps");
    } else if (key == "heads") {
        cfg.heads = as_count("heads");
    } else if (key == "dropout") {
        cfg.dropout = as_real("dropout");
    } else if (key == "l2") {
        cfg.l2 = as_real("l2");
    } else if (key == "beta") {
        cfg.beta = as_real("beta");
    } else if (key == "lr") {
        cfg.lr = as_real("lr");
    } else if (key == "max_epochs") {
        cfg.max_epochs = as_count("max_epochs");
    } else if (key == "patience") {
        cfg.patience = as_count("patience");
    } else if (key == "seed") {
        cfg.seed = as_count("seed");
    } else if (key == "variant") {
        if (value == "base") {
            cfg.variant = GesmVariant{false, false};
        } else if (value == "att") {
            cfg.variant = GesmVariant{true, false};
        } else if (value == "full") {
            cfg.variant = GesmVariant{true, true};
        } else {
            throw ValueError("variant must be base, att, or full; got '" + value + "'");
        }
    } else if (key == "task") {
        if (value == "single") {
            cfg.multi_label = false;
        } else if (value == "multi") {
            cfg.multi_label = true;
        } else {
            throw ValueError("task must be single or multi; got '" + value + "'");
        }
    } else if (key == "freeze_triplets") {
        cfg.freeze_triplets = as_flag("freeze_triplets");
    } else if (key == "pooling") {
        if (value == "dot") {
            cfg.pooling = Tape::EdgePooling::DotProduct;
        } else if (value == "outer") {
            cfg.pooling = Tape::EdgePooling::OuterSum;
        } else {
            throw ValueError("pooling must be dot or outer; got '" + value + "'");
        }
    } else {
        throw ValueError("unknown config key '" + key +
                         "'; known keys: hidden steps heads dropout l2 beta lr max_epochs "
                         "patience seed variant task freeze_triplets pooling");
    }
}

GesmConfig load_config(const std::string& path, const GesmConfig& base) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path);
    }
    GesmConfig cfg = base;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) {
            continue;
        }
        const auto end = line.find_last_not_of(" \t\r");
        apply_config_override(cfg, line.substr(begin, end - begin + 1));
    }
    return cfg;
}

void write_report(const TrainReport& report, std::ostream& out) {
    out << std::setprecision(17);
    out << "epoch,train_loss,val_loss,val_metric\n";
    for (const EpochRecord& rec : report.epochs) {
        out << rec.epoch << ',' << rec.train.total << ',' << rec.val_loss << ','
            << rec.val_metric << '\n';
    }
    out << "# summary seed=" << report.seed << " epochs=" << report.epochs.size()
        << " best_epoch=" << report.best_epoch << " best_val_metric=" << report.best_val_metric
        << " best_val_loss=" << report.best_val_loss << " test_metric=" << report.test_metric
        << " eval_ms=" << report.wall_time_per_eval_ms
        << " diverged=" << (report.diverged ? 1 : 0) << '\n';
}

double accuracy_from_output(const Matrix& output, const std::vector<std::uint32_t>& labels,
                            const std::vector<std::uint8_t>& mask) {
    if (labels.size() != output.rows || mask.size() != output.rows) {
        throw SizeError("labels/mask length does not match output rows");
    }
    std::size_t m = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < output.rows; ++i) {
        if (!mask[i]) {
            continue;
        }
        ++m;
        std::size_t arg = 0;
        for (std::size_t k = 1; k < output.cols; ++k) {
            if (output.at(i, k) > output.at(i, arg)) {
                arg = k;
            }
        }
        correct += arg == labels[i];
    }
    if (m == 0) {
        throw ValueError("mask selects no nodes");
    }
    return static_cast<double>(correct) / static_cast<double>(m);
}

double micro_f1_from_output(const Matrix& output, const Matrix& label_matrix,
                            const std::vector<std::uint8_t>& mask, double threshold) {
    if (mask_count(mask) == 0) {
        throw ValueError("mask selects no nodes");
    }
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    count_confusion(output, label_matrix, mask, threshold, tp, fp, fn);
    const std::size_t denom = 2 * tp + fp + fn;
    // No positives anywhere on either side counts as a perfect (vacuous) match.
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double evaluate(const GraphDataset& ds, const GesmParams& params, const GesmConfig& cfg,
                const std::vector<std::uint8_t>& mask) {
    if (cfg.multi_label != ds.multi_label) {
        throw ValueError("config task does not match the dataset's label mode");
    }
    const GraphOperators ops = build_graph_operators(ds);
    const GesmEval ev = gesm_eval(params, ds.features, ops, cfg.multi_label, cfg.pooling);
    return cfg.multi_label ? micro_f1_from_output(ev.output, ds.label_matrix, mask)
                           : accuracy_from_output(ev.output, ds.labels, mask);
}

TrainResult train(const GraphDataset& ds, const GesmConfig& cfg) {
    validate_config(cfg);
    validate_dataset(ds);
    if (cfg.multi_label != ds.multi_label) {
        throw ValueError("config task does not match the dataset's label mode");
    }
    if (mask_count(ds.train_mask) == 0 || mask_count(ds.val_mask) == 0 ||
        mask_count(ds.test_mask) == 0) {
        throw ValueError("training needs nonempty train, val, and test masks");
    }
    const GesmDims dims{ds.f, cfg.hidden, ds.c, cfg.steps, cfg.heads};
    const GraphOperators ops = build_graph_operators(ds);
    Rng init_rng = Rng::substream(cfg.seed, "init");
    Rng dropout_rng = Rng::substream(cfg.seed, "dropout");
    Rng triplet_rng = Rng::substream(cfg.seed, "triplets");

    GesmParams params = make_params(dims, cfg.variant, init_rng);
    const std::vector<Matrix*> plist = param_list(params);
    AdamState adam = adam_init(plist, cfg.lr);

    TripletBatch frozen;
    if (cfg.variant.use_regularizer && cfg.freeze_triplets) {
        frozen = sample_triplets(ops.adjacency, triplet_rng, triplet_count(ops.adjacency));
    }

    TrainReport report;
    report.seed = cfg.seed;
    GesmParams best_params = params;
    BestTracker snapshot;
    double best_metric_seen = -std::numeric_limits<double>::infinity();
    double best_loss_seen = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;
    double eval_ms_sum = 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Tape tape;
        const GesmStage stage = stage_params(tape, params, true);
        const Tensor x = tape.leaf(ds.features, false);
        const GesmForward fwd = gesm_forward(tape, stage, x, ops, params, cfg.dropout,
                                             dropout_rng, true, cfg.multi_label, cfg.pooling);
        const Tensor j = cfg.multi_label
                             ? binary_cross_entropy_node(tape, fwd.output, ds.label_matrix,
                                                         ds.train_mask)
                             : cross_entropy_node(tape, fwd.output, ds.labels, ds.train_mask);
        Tensor total = j;
        double r_val = 0.0;
        if (cfg.variant.use_regularizer) {
            const TripletBatch batch =
                cfg.freeze_triplets
                    ? frozen
                    : sample_triplets(ops.adjacency, triplet_rng, triplet_count(ops.adjacency));
            const Tensor r = triplet_node(tape, fwd.reg_embedding, batch, cfg.beta);
            r_val = tape.value(r).at(0, 0);
            total = tape.add(total, r);
        }
        const std::vector<Tensor> penalized = stage.weights();
        const Tensor l2 = tape.l2_norm_sq(penalized);
        const double l2_val = tape.value(l2).at(0, 0);
        total = tape.add(total, tape.scale(l2, cfg.l2));

        const LossReport terms =
            make_loss_report(tape.value(j).at(0, 0), r_val, l2_val, cfg.l2);
        if (!std::isfinite(terms.total)) {
            report.diverged = true;
            break;
        }
        tape.backward(total);
        std::vector<const Matrix*> grads;
        for (Tensor t : stage.trainable()) {
            grads.push_back(&tape.grad(t));
        }
        adam_step(adam, plist, grads);

        const auto t0 = std::chrono::steady_clock::now();
        const GesmEval ev = gesm_eval(params, ds.features, ops, cfg.multi_label, cfg.pooling);
        const auto t1 = std::chrono::steady_clock::now();
        eval_ms_sum += std::chrono::duration<double, std::milli>(t1 - t0).count();

        const double val_loss =
            cfg.multi_label ? masked_binary_cross_entropy(ev.output, ds.label_matrix, ds.val_mask)
                            : masked_cross_entropy(ev.output, ds.labels, ds.val_mask);
        const double val_metric =
            cfg.multi_label ? micro_f1_from_output(ev.output, ds.label_matrix, ds.val_mask)
                            : accuracy_from_output(ev.output, ds.labels, ds.val_mask);
        report.epochs.push_back(EpochRecord{epoch, terms, val_loss, val_metric});

        if (snapshot.snapshot_better(val_metric, val_loss)) {
            snapshot.metric = val_metric;
            snapshot.loss = val_loss;
            best_params = params;
            report.best_epoch = epoch;
        }
        bool improved = false;
        if (val_metric > best_metric_seen) {
            best_metric_seen = val_metric;
            improved = true;
        }
        if (val_loss < best_loss_seen) {
            best_loss_seen = val_loss;
            improved = true;
        }
        stall = improved ? 0 : stall + 1;
        if (stall >= cfg.patience) {
            break;
        }
    }

    report.best_val_metric = report.best_epoch == 0 ? 0.0 : snapshot.metric;
    report.best_val_loss = report.best_epoch == 0 ? 0.0 : snapshot.loss;
    report.wall_time_per_eval_ms =
        report.epochs.empty() ? 0.0 : eval_ms_sum / static_cast<double>(report.epochs.size());
    const GraphOperators& eval_ops = ops;
    const GesmEval final_ev =
        gesm_eval(best_params, ds.features, eval_ops, cfg.multi_label, cfg.pooling);
    report.test_metric =
        cfg.multi_label ? micro_f1_from_output(final_ev.output, ds.label_matrix, ds.test_mask)
                        : accuracy_from_output(final_ev.output, ds.labels, ds.test_mask);
    return TrainResult{std::move(report), std::move(best_params)};
}

SeedSweep run_seeds(const GraphDataset& ds, const GesmConfig& cfg, std::size_t k) {
    if (k == 0) {
        throw ValueError("run_seeds needs at least one run");
    }
    SeedSweep sweep;
    sweep.seeds.reserve(k);
    sweep.metrics.assign(k, std::numeric_limits<double>::quiet_NaN());
    sweep.failures.assign(k, "");
    for (std::size_t i = 0; i < k; ++i) {
        GesmConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + i;
        sweep.seeds.push_back(run_cfg.seed);
        try {
            const TrainResult result = train(ds, run_cfg);
            if (result.report.diverged) {
                sweep.failures[i] = "diverged after epoch " +
                                    std::to_string(result.report.epochs.size());
                continue;
            }
            sweep.metrics[i] = result.report.test_metric;
            ++sweep.succeeded;
        } catch (const GesmError& ex) {
            sweep.failures[i] = ex.what();
        }
    }
    if (sweep.succeeded == 0) {
        std::string first;
        for (const std::string& f : sweep.failures) {
            if (!f.empty()) {
                first = f;
                break;
            }
        }
        throw ValueError("all " + std::to_string(k) + " runs failed; first failure: " + first);
    }
    double sum = 0.0;
    for (double m : sweep.metrics) {
        if (!std::isnan(m)) {
            sum += m;
        }
    }
    sweep.mean = sum / static_cast<double>(sweep.succeeded);
    if (sweep.succeeded > 1) {
        double sq = 0.0;
        for (double m : sweep.metrics) {
            if (!std::isnan(m)) {
                sq += (m - sweep.mean) * (m - sweep.mean);
            }
        }
        sweep.stddev = std::sqrt(sq / static_cast<double>(sweep.succeeded - 1));
    }
    return sweep;
}

InductiveDataset load_inductive(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw IoError(dir + " is not a directory");
    }
    std::vector<std::string> names[3];
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const std::string name = entry.path().filename().string();
        if (name.starts_with("train-")) {
            names[0].push_back(entry.path().string());
        } else if (name.starts_with("val-")) {
            names[1].push_back(entry.path().string());
        } else if (name.starts_with("test-")) {
            names[2].push_back(entry.path().string());
        }
    }
    InductiveDataset out;
    std::vector<GraphDataset>* groups[3] = {&out.train, &out.val, &out.test};
    for (int g = 0; g < 3; ++g) {
        std::sort(names[g].begin(), names[g].end());
        for (const std::string& path : names[g]) {
            groups[g]->push_back(load_dataset(path));
        }
    }
    if (out.train.empty() || out.val.empty() || out.test.empty()) {
        throw ValueError(dir + " needs train-*, val-*, and test-* containers");
    }
    return out;
}

TrainResult train_inductive(const InductiveDataset& ds, const GesmConfig& cfg) {
    validate_config(cfg);
    if (!cfg.multi_label) {
        throw ValueError("the inductive path supports multi-label tasks only");
    }
    const auto check_graph = [&](const GraphDataset& g) {
        validate_dataset(g);
        if (!g.multi_label) {
            throw ValueError("inductive graphs must be multi-label");
        }
        if (g.f != ds.train[0].f || g.c != ds.train[0].c) {
            throw DimensionError("inductive graphs disagree on feature/class counts");
        }
    };
    for (const auto* group : {&ds.train, &ds.val, &ds.test}) {
        for (const GraphDataset& g : *group) {
            check_graph(g);
        }
    }

    const GesmDims dims{ds.train[0].f, cfg.hidden, ds.train[0].c, cfg.steps, cfg.heads};
    std::vector<GraphOperators> train_ops;
    std::vector<GraphOperators> val_ops;
    std::vector<GraphOperators> test_ops;
    for (const GraphDataset& g : ds.train) {
        train_ops.push_back(build_graph_operators(g));
    }
    for (const GraphDataset& g : ds.val) {
        val_ops.push_back(build_graph_operators(g));
    }
    for (const GraphDataset& g : ds.test) {
        test_ops.push_back(build_graph_operators(g));
    }
    const auto all_nodes = [](const GraphDataset& g) {
        return std::vector<std::uint8_t>(g.n, 1);
    };

    Rng init_rng = Rng::substream(cfg.seed, "init");
    Rng dropout_rng = Rng::substream(cfg.seed, "dropout");
    Rng triplet_rng = Rng::substream(cfg.seed, "triplets");
    GesmParams params = make_params(dims, cfg.variant, init_rng);
    const std::vector<Matrix*> plist = param_list(params);
    AdamState adam = adam_init(plist, cfg.lr);

    // Pooled micro-F1 and mean loss across a held-out graph group.
    const auto pooled_metrics = [&](const std::vector<GraphDataset>& graphs,
                                    const std::vector<GraphOperators>& ops_list,
                                    const GesmParams& p, double& loss_out) {
        std::size_t tp = 0;
        std::size_t fp = 0;
        std::size_t fn = 0;
        double loss_sum = 0.0;
        for (std::size_t g = 0; g < graphs.size(); ++g) {
            const GesmEval ev = gesm_eval(p, graphs[g].features, ops_list[g], true, cfg.pooling);
            const std::vector<std::uint8_t> mask = all_nodes(graphs[g]);
            loss_sum += masked_binary_cross_entropy(ev.output, graphs[g].label_matrix, mask);
            count_confusion(ev.output, graphs[g].label_matrix, mask, 0.5, tp, fp, fn);
        }
        loss_out = loss_sum / static_cast<double>(graphs.size());
        const std::size_t denom = 2 * tp + fp + fn;
        return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    };

    TrainReport report;
    report.seed = cfg.seed;
    GesmParams best_params = params;
    BestTracker snapshot;
    double best_metric_seen = -std::numeric_limits<double>::infinity();
    double best_loss_seen = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;
    double eval_ms_sum = 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs && !report.diverged; ++epoch) {
        double j_sum = 0.0;
        double r_sum = 0.0;
        for (std::size_t g = 0; g < ds.train.size(); ++g) {
            const GraphDataset& graph = ds.train[g];
            Tape tape;
            const GesmStage stage = stage_params(tape, params, true);
            const Tensor x = tape.leaf(graph.features, false);
            // Dropout and L2 stay off on the inductive path.
            const GesmForward fwd = gesm_forward(tape, stage, x, train_ops[g], params, 0.0,
                                                 dropout_rng, true, true, cfg.pooling);
            const std::vector<std::uint8_t> mask = all_nodes(graph);
            const Tensor j = binary_cross_entropy_node(tape, fwd.output, graph.label_matrix, mask);
            Tensor total = j;
            double r_val = 0.0;
            if (cfg.variant.use_regularizer && train_ops[g].adjacency.nnz() > 0) {
                const TripletBatch batch = sample_triplets(
                    train_ops[g].adjacency, triplet_rng, triplet_count(train_ops[g].adjacency));
                const Tensor r = triplet_node(tape, fwd.reg_embedding, batch, cfg.beta);
                r_val = tape.value(r).at(0, 0);
                total = tape.add(total, r);
            }
            const double j_val = tape.value(j).at(0, 0);
            if (!std::isfinite(j_val + r_val)) {
                report.diverged = true;
                break;
            }
            j_sum += j_val;
            r_sum += r_val;
            tape.backward(total);
            std::vector<const Matrix*> grads;
            for (Tensor t : stage.trainable()) {
                grads.push_back(&tape.grad(t));
            }
            adam_step(adam, plist, grads);
        }
        if (report.diverged) {
            break;
        }
        const double inv = 1.0 / static_cast<double>(ds.train.size());
        const LossReport terms = make_loss_report(j_sum * inv, r_sum * inv, 0.0, 0.0);

        const auto t0 = std::chrono::steady_clock::now();
        double val_loss = 0.0;
        const double val_metric = pooled_metrics(ds.val, val_ops, params, val_loss);
        const auto t1 = std::chrono::steady_clock::now();
        eval_ms_sum += std::chrono::duration<double, std::milli>(t1 - t0).count();
        report.epochs.push_back(EpochRecord{epoch, terms, val_loss, val_metric});

        if (snapshot.snapshot_better(val_metric, val_loss)) {
            snapshot.metric = val_metric;
            snapshot.loss = val_loss;
            best_params = params;
            report.best_epoch = epoch;
        }
        bool improved = false;
        if (val_metric > best_metric_seen) {
            best_metric_seen = val_metric;
            improved = true;
        }
        if (val_loss < best_loss_seen) {
            best_loss_seen = val_loss;
            improved = true;
        }
        stall = improved ? 0 : stall + 1;
        if (stall >= cfg.patience) {
            break;
        }
    }

    report.best_val_metric = report.best_epoch == 0 ? 0.0 : snapshot.metric;
    report.best_val_loss = report.best_epoch == 0 ? 0.0 : snapshot.loss;
    report.wall_time_per_eval_ms =
        report.epochs.empty() ? 0.0 : eval_ms_sum / static_cast<double>(report.epochs.size());
    double test_loss = 0.0;
    report.test_metric = pooled_metrics(ds.test, test_ops, best_params, test_loss);
    return TrainResult{std::move(report), std::move(best_params)};
}

} // namespace gesm
