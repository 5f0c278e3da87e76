#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/data.hpp"
#include "hsc/evaluation.hpp"
#include "hsc/scheme.hpp"
#include "hsc/taxonomy.hpp"
#include "hsc/training.hpp"

namespace hsc {

/// Everything one experiment run needs. Per-stage seeds are derived from
/// `seed`; the `seed` fields inside `train` and `gen` are overwritten.
struct RunConfig {
    std::string taxonomy_path;  // empty: built-in fisheries taxonomy
    std::string data_path;
    std::string model_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    double split_ratio = 0.8;
    std::optional<double> threshold;
    std::vector<Scheme> schemes{Scheme::Baseline, Scheme::Scheme1, Scheme::Scheme2,
                                Scheme::Scheme3};
    TrainConfig train;
    GenConfig gen;

    /// Fields absent from the document keep their defaults.
    static RunConfig from_json(std::string_view text);

    Taxonomy load_taxonomy() const;
    GenConfig gen_config() const;
    TrainConfig train_config(Scheme scheme) const;
    std::uint64_t split_seed() const;
};

struct SchemeRun {
    Scheme scheme = Scheme::Scheme3;
    Checkpoint model;
    std::vector<double> loss_history;
    std::optional<ThresholdSearch> threshold;  // absent for the baseline
    EvalReport report;
};

struct AblationResult {
    Dataset dataset;
    Split split;
    std::vector<SchemeRun> runs;
};

/// Trains, thresholds and evaluates one scheme on a split.
SchemeRun run_scheme(const RunConfig& config, Scheme scheme, const Split& split,
                     const Taxonomy& taxonomy);

/// Full comparison: load or generate the dataset, split it by track, run every
/// configured scheme with its own searched threshold. When `write_outputs` is
/// set, the table, per-scheme reports, checkpoints and loss curves go to
/// `config.out_dir`.
AblationResult run_ablation(const RunConfig& config, bool write_outputs = true);

/// Command-line entry point; returns the process exit status.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace hsc
