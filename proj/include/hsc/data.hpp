#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/model.hpp"
#include "hsc/taxonomy.hpp"
#include "hsc/training.hpp"

namespace hsc {

struct Frame {
    std::string track_id;
    std::size_t frame_index = 0;
    Label label;
    FrameInput features;

    friend bool operator==(const Frame&, const Frame&) = default;
};

/// One individual fish: frames ordered by frame_index, all sharing one label.
struct Track {
    std::string id;
    Label label;
    std::vector<Frame> frames;

    friend bool operator==(const Track&, const Track&) = default;
};

struct Dataset {
    std::vector<Track> tracks;

    bool empty() const noexcept { return tracks.empty(); }
    std::size_t frame_count() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Synthetic long-tail track generator settings. Separations and noise levels
/// are expected vector norms in feature space.
struct GenConfig {
    double zipf_exponent = 1.2;
    std::size_t tracks_total = 600;
    std::size_t min_frames = 8;
    std::size_t max_frames = 24;
    double group_separation = 2.5;
    double species_separation = 1.5;
    double track_jitter = 0.8;
    double frame_noise = 3.5;
    FeatureMode mode = FeatureMode::Trunk;
    Dims dims;  // input (trunk) or shallow/deep (precomputed) widths are used
    std::uint64_t seed = 1;

    void validate() const;
    std::string to_json() const;
    static GenConfig from_json(std::string_view text, GenConfig base);
    static GenConfig from_json(std::string_view text);
};

/// Tracks per species: 2 each, plus the remainder split in proportion to
/// rank^-zipf_exponent (largest remainder rounding). Ranks are assigned to
/// species by a seeded permutation. Throws Error{InfeasibleConfig}.
std::vector<std::size_t> species_track_counts(const Taxonomy& taxonomy, const GenConfig& config);

Dataset generate(const Taxonomy& taxonomy, const GenConfig& config);

struct Split {
    Dataset train;
    Dataset eval;
};

/// Stratified per species: each species' tracks are shuffled and the first
/// min(ceil(ratio * n), n - 1) go to training. Throws Error{SpeciesTooSmall}
/// when a species has fewer than two tracks.
Split split_by_track(const Dataset& dataset, const Taxonomy& taxonomy, double ratio,
                     std::uint64_t seed);

/// Every frame as an independent training image.
std::vector<LabeledExample> to_examples(const Dataset& dataset);

/// Track count per species (global index order).
std::vector<std::size_t> tracks_per_species(const Dataset& dataset, const Taxonomy& taxonomy);

std::string to_jsonl(const Dataset& dataset, const Taxonomy& taxonomy);
/// Frames are regrouped by track_id (first-appearance order) and sorted by
/// frame_index. Errors: MalformedRecord, InconsistentLabels, DimensionMismatch,
/// each reporting a 1-based line number.
Dataset parse_jsonl(std::string_view text, const Taxonomy& taxonomy);

void save_jsonl(const Dataset& dataset, const Taxonomy& taxonomy, const std::string& path);
Dataset load_jsonl(const std::string& path, const Taxonomy& taxonomy);

}  // namespace hsc
