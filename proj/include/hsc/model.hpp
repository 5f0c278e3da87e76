#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hsc/scheme.hpp"
#include "hsc/taxonomy.hpp"

namespace hsc {

enum class FeatureMode { Trunk, Precomputed };

std::string_view to_string(FeatureMode mode);
FeatureMode parse_feature_mode(std::string_view name);

/// Layer widths. `input` is ignored in precomputed mode.
struct Dims {
    std::size_t input = 32;
    std::size_t shallow = 24;
    std::size_t hidden = 24;
    std::size_t deep = 16;

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Features already extracted by an upstream backbone.
struct FeaturePair {
    std::vector<double> shallow;
    std::vector<double> deep;

    friend bool operator==(const FeaturePair&, const FeaturePair&) = default;
};

/// A raw vector for trunk mode or a (shallow, deep) pair for precomputed mode.
using FrameInput = std::variant<std::vector<double>, FeaturePair>;

/// Fully connected layer y = W x + b, W stored row-major (out x in).
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    Dense() = default;
    Dense(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

    void apply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> apply(std::span<const double> x) const;

    friend bool operator==(const Dense&, const Dense&) = default;
};

/// Parameters of the hierarchical network and of the flat baseline head.
///
///   raw --trunk1,ReLU--> shallow --trunk2,ReLU--> deep
///   shallow --coarse1,ReLU--> hidden --coarse2--> softmax over G
///   deep --fine[g]--> softmax over the species of group g
///   deep --flat1,ReLU--> hidden --flat2--> softmax over S   (baseline)
///
/// In precomputed mode the trunk layers are empty and (shallow, deep) are
/// supplied directly.
struct ModelParams {
    FeatureMode mode = FeatureMode::Trunk;
    Dims dims;
    std::uint64_t taxonomy_hash = 0;

    Dense trunk1, trunk2;
    Dense coarse1, coarse2;
    std::vector<Dense> fine;
    Dense flat1, flat2;

    std::vector<Dense*> layers();
    std::vector<const Dense*> layers() const;

    std::size_t group_count() const { return fine.size(); }
    std::size_t species_count() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights, zero biases, seeded.
ModelParams init_params(const Taxonomy& taxonomy, FeatureMode mode, const Dims& dims,
                        std::uint64_t seed);

/// Same shapes, every entry zero.
ModelParams zeros_like(const ModelParams& params);

/// Throws Error{TaxonomyMismatch} when the head shapes or hash disagree.
void check_compatible(const ModelParams& params, const Taxonomy& taxonomy);

struct HeadOutputs {
    std::vector<double> coarse;
    std::vector<std::vector<double>> fine_local;
    std::vector<double> joint;  // group-major global species order
};

std::vector<double> stable_softmax(std::span<const double> logits);

/// joint[to_global(g, i)] = coarse[g] * fine_local[g][i].
std::vector<double> joint_scores(const Taxonomy& taxonomy, std::span<const double> coarse,
                                 const std::vector<std::vector<double>>& fine_local);

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
    std::vector<double> input;
    std::vector<double> shallow_pre, shallow;
    std::vector<double> deep_pre, deep;
    std::vector<double> coarse_hidden_pre, coarse_hidden;
    std::vector<double> flat_hidden_pre, flat_hidden;
    HeadOutputs heads;
    std::vector<double> flat;
};

/// Runs the trunk (or unpacks precomputed features) and the requested heads.
ForwardTrace trace_forward(const ModelParams& params, const FrameInput& input, bool hierarchical,
                           bool flat);

HeadOutputs forward(const ModelParams& params, const FrameInput& input);
std::vector<double> forward_flat(const ModelParams& params, const FrameInput& input);

/// Trunk outputs for a raw input, as a precomputed-mode input.
FeaturePair extract_features(const ModelParams& params, std::span<const double> raw);

/// A trained model plus the scheme that produced it.
struct Checkpoint {
    Scheme scheme = Scheme::Scheme3;
    ModelParams params;
};

/// JSON with mode, dims, taxonomy hash, head sizes and row-major weights.
/// Doubles are written in shortest round-trip form so load(save(x)) == x.
std::string save_checkpoint(const Checkpoint& checkpoint);
Checkpoint load_checkpoint(std::string_view text, const Taxonomy& taxonomy);

void write_checkpoint_file(const Checkpoint& checkpoint, const std::string& path);
Checkpoint read_checkpoint_file(const std::string& path, const Taxonomy& taxonomy);

}  // namespace hsc
