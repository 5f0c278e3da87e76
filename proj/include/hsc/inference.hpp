#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/data.hpp"
#include "hsc/model.hpp"
#include "hsc/taxonomy.hpp"
#include "hsc/training.hpp"

namespace hsc {

enum class Level { Coarse, Fine };
/// Image: one frame. VideoAvg: mean scores over the track. VideoVote: majority vote.
enum class Unit { Image, VideoAvg, VideoVote };

std::string_view to_string(Level level);
std::string_view to_string(Unit unit);
/// Table column label: "img", "video", "video*".
std::string_view table_label(Unit unit);

struct Prediction {
    Level level = Level::Fine;
    std::size_t label = 0;  // group index when coarse, global species index when fine
    double confidence = 0.0;
    Unit unit = Unit::Image;
};

/// What one inference unit selects at each level; the common input to the
/// fallback rule and to the metrics.
struct UnitSummary {
    Unit unit = Unit::Image;
    std::size_t coarse = 0;       // Level-1 choice
    double coarse_confidence = 0.0;
    std::size_t level2a = 0;      // best species inside the chosen group
    std::size_t level2b = 0;      // best species by joint score
    double confidence = 0.0;      // joint confidence of the level2b choice
};

/// Per-image choices. Ties resolve to the lowest index.
UnitSummary select_image(const HeadOutputs& outputs, const Taxonomy& taxonomy);

/// Per-frame head outputs of one track, in frame order.
using TrackScores = std::vector<HeadOutputs>;

struct AverageAggregate {
    std::vector<double> p1;  // mean coarse scores over frames
    std::vector<double> p2;  // mean joint scores over frames
    UnitSummary summary;     // level2b = argmax p2, coarse = argmax p1
};

/// Mean-confidence aggregation over all T frames. Level-2 A picks the best
/// species of argmax p1 by mean fine-level score. Throws Error{EmptyTrack}.
AverageAggregate aggregate_avg(std::span<const HeadOutputs> track, const Taxonomy& taxonomy);

/// Majority vote over per-frame argmaxes. A vote's confidence is the mean
/// score over the frames that voted for the winner. Ties go to the higher such
/// mean, then to the lower index. The coarse choice is a vote over per-frame
/// coarse argmaxes; Level-2 A votes per-frame fine argmaxes of that group.
/// Throws Error{EmptyTrack}.
UnitSummary aggregate_vote(std::span<const HeadOutputs> track, const Taxonomy& taxonomy);

/// Fallback rule: confidence < tau stops at the coarse choice, otherwise the
/// fine (level2b) choice is kept. Throws Error{InvalidThreshold} for
/// negative or non-finite tau.
Prediction decide(const UnitSummary& summary, double tau);

/// Same rule from raw coarse scores (argmax with lowest-index ties).
Prediction decide(double confidence, std::span<const double> coarse_scores,
                  std::size_t fine_selection, double tau, Unit unit);

/// Value of tau that stops every unit.
inline constexpr double kStopAllEpsilon = 1e-9;

/// One evaluation unit as seen by the threshold search.
struct ThresholdRow {
    double confidence = 0.0;
    bool fine_correct = false;
    bool coarse_correct = false;
};

struct ThresholdSearch {
    double tau = 0.0;
    std::size_t correct = 0;
    std::size_t stop = 0;
    std::size_t proceed = 0;
};

/// Scans tau over {0} u {row confidences} u {1 + eps} and keeps the value with
/// the most correct Level-2 C decisions; ties go to the smallest tau, which
/// lets the most units proceed to the fine level. Throws Error{EmptyEvalSet}.
ThresholdSearch search_threshold(std::span<const ThresholdRow> rows);

/// Forward pass over every frame of every track.
std::vector<TrackScores> score_tracks(const ModelParams& params, const Dataset& dataset);

/// Threshold search on the video_avg unit of a hierarchical model.
ThresholdSearch search_threshold(const Checkpoint& model, const Dataset& eval,
                                 const Taxonomy& taxonomy);

/// One JSON object per line: track_id, unit, level, label (name), confidence.
/// Image-unit lines carry an extra frame_index.
std::string predictions_jsonl(const Checkpoint& model, const Dataset& dataset,
                              const Taxonomy& taxonomy, double tau);

}  // namespace hsc
