#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gesm/dataset.hpp"
#include "gesm/losses.hpp"
#include "gesm/model.hpp"

namespace gesm {

/// One concrete training setup. Presets bundle the grid choices per dataset;
/// every field can be overridden from key=value text.
struct GesmConfig {
    std::size_t hidden = 64;
    std::size_t steps = 5;
    std::size_t heads = 8;
    double dropout = 0.7;
    double l2 = 0.003;
    double beta = 1.0; // triplet pull/push weight
    double lr = 0.003;
    std::size_t max_epochs = 300;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    GesmVariant variant;
    bool multi_label = false;
    bool freeze_triplets = false; // sample once instead of every epoch
    Tape::EdgePooling pooling = Tape::EdgePooling::DotProduct;
};

/// Throws unless sizes, rates, and head divisibility are sound.
void validate_config(const GesmConfig& cfg);

/// Named starting points: cora-public, citeseer-public, pubmed-public,
/// cora-low-rate, ppi. Unknown names raise ValueError listing the choices.
GesmConfig config_preset(const std::string& name);

/// Applies one "key=value" setting; unknown keys or unparsable values throw.
void apply_config_override(GesmConfig& cfg, const std::string& assignment);

/// Reads key=value lines ('#' comments and blank lines skipped).
GesmConfig load_config(const std::string& path, const GesmConfig& base = GesmConfig{});

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    LossReport train;      // train.total is the optimized loss
    double val_loss = 0.0;
    double val_metric = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // 1-based; 0 when no epoch completed
    double best_val_metric = 0.0;
    double best_val_loss = 0.0;
    double test_metric = 0.0;
    double wall_time_per_eval_ms = 0.0;
    std::uint64_t seed = 0;
    bool diverged = false;
};

/// Report rows as CSV plus a trailing summary comment line.
void write_report(const TrainReport& report, std::ostream& out);

struct TrainResult {
    TrainReport report;
    GesmParams params; // best-validation-epoch weights
};

/// Full-graph gradient descent with Adam, fresh triplet samples per epoch
/// (unless frozen), and early stopping once `patience` epochs pass without a
/// strict improvement in validation accuracy or validation loss. The
/// returned parameters are the best-validation snapshot, which also produces
/// the reported test metric.
TrainResult train(const GraphDataset& ds, const GesmConfig& cfg);

/// Accuracy (single-label) or micro-F1 at threshold 0.5 (multi-label) of a
/// forward pass restricted to the masked nodes.
double evaluate(const GraphDataset& ds, const GesmParams& params, const GesmConfig& cfg,
                const std::vector<std::uint8_t>& mask);

/// Metric helpers shared by the trainer and the CLI sweeps.
double accuracy_from_output(const Matrix& output, const std::vector<std::uint32_t>& labels,
                            const std::vector<std::uint8_t>& mask);
double micro_f1_from_output(const Matrix& output, const Matrix& label_matrix,
                            const std::vector<std::uint8_t>& mask, double threshold = 0.5);

struct SeedSweep {
    std::vector<std::uint64_t> seeds;
    std::vector<double> metrics;    // NaN where the run failed
    std::vector<std::string> failures; // empty string where the run succeeded
    std::size_t succeeded = 0;
    double mean = 0.0;
    double stddev = 0.0; // sample std over successes; 0 when fewer than 2
};

/// k runs seeded cfg.seed, cfg.seed+1, ...; per-run failures are recorded and
/// only an all-failure sweep throws.
SeedSweep run_seeds(const GraphDataset& ds, const GesmConfig& cfg, std::size_t k);

/// Multi-graph corpus for inductive tasks: gradients come only from the
/// training graphs; validation/test graphs are evaluated, never trained on.
struct InductiveDataset {
    std::vector<GraphDataset> train;
    std::vector<GraphDataset> val;
    std::vector<GraphDataset> test;
};

/// Loads every "train-*", "val-*", "test-*" container under a directory,
/// sorted by filename.
InductiveDataset load_inductive(const std::string& dir);

/// One Adam step per training graph per epoch; the loss covers every node of
/// the graph. Dropout and the L2 penalty are disabled on this path; metrics
/// are micro-F1 pooled across the held-out graphs.
TrainResult train_inductive(const InductiveDataset& ds, const GesmConfig& cfg);

} // namespace gesm
