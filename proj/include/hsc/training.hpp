#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/model.hpp"
#include "hsc/scheme.hpp"
#include "hsc/taxonomy.hpp"

namespace hsc {

struct TrainConfig {
    Scheme scheme = Scheme::Scheme3;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    FeatureMode mode = FeatureMode::Trunk;
    Dims dims;

    /// Throws Error{ConfigError} when a field is out of range.
    void validate() const;

    std::string to_json() const;
    /// Fields missing from the document keep the values already in `base`.
    static TrainConfig from_json(std::string_view text, TrainConfig base);
    static TrainConfig from_json(std::string_view text);
};

/// Coarse label is a group index, fine label a global species index.
struct Label {
    std::size_t group = 0;
    std::size_t species = 0;

    friend bool operator==(const Label&, const Label&) = default;
};

struct LabeledExample {
    FrameInput input;
    Label label;
};

/// Throws Error{LabelOutOfRange} or Error{InconsistentLabels}.
void check_label(const Taxonomy& taxonomy, const Label& label);

/// Per-image loss of a hierarchical scheme.
///   scheme1: -log coarse[y1] - log fine_local[y1][local(y2)]
///   scheme2: -log coarse[y1] - log joint[y2], the ground-truth head's product scores
///   scheme3: -log coarse[y1] - sum_s y'_s log joint[s] over all S species
double compute_loss(Scheme scheme, const HeadOutputs& outputs, const Taxonomy& taxonomy,
                    const Label& label);

/// Baseline loss, -log flat[y2].
double compute_flat_loss(std::span<const double> flat, const Taxonomy& taxonomy,
                         const Label& label);

struct Gradients {
    ModelParams grad;  // same shapes as the parameters
    double mean_loss = 0.0;
};

/// Exact gradient of the mean batch loss. Parameters the scheme does not use
/// (the flat head for hierarchical schemes, the hierarchical heads for the
/// baseline) receive zero gradient.
Gradients compute_gradients(const ModelParams& params, std::span<const LabeledExample> batch,
                            Scheme scheme, const Taxonomy& taxonomy);

/// Mean loss over a batch without gradients.
double batch_loss(const ModelParams& params, std::span<const LabeledExample> batch, Scheme scheme,
                  const Taxonomy& taxonomy);

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history;  // mean training loss per epoch
};

/// Mini-batch SGD with momentum on individual images. Initialization and the
/// per-epoch shuffle derive only from `config.seed`, so equal inputs give
/// bit-identical parameters.
TrainResult train(const TrainConfig& config, std::span<const LabeledExample> examples,
                  const Taxonomy& taxonomy);

/// `epoch,mean_loss` CSV, one row per epoch starting at 1.
std::string loss_history_csv(std::span<const double> history);

}  // namespace hsc
