#include "hsc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hsc/error.hpp"
#include "json.hpp"

namespace hsc {

std::string_view to_string(Level level) { return level == Level::Coarse ? "coarse" : "fine"; }

std::string_view to_string(Unit unit) {
    switch (unit) {
        case Unit::Image: return "image";
        case Unit::VideoAvg: return "video_avg";
        case Unit::VideoVote: return "video_vote";
    }
    return "unknown";
}

std::string_view table_label(Unit unit) {
    switch (unit) {
        case Unit::Image: return "img";
        case Unit::VideoAvg: return "video";
        case Unit::VideoVote: return "video*";
    }
    return "unknown";
}

namespace {

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void require_track(std::span<const HeadOutputs> track) {
    if (track.empty()) throw Error(ErrorKind::EmptyTrack, "track has no frames");
}

struct Ballot {
    std::size_t choice;
    double score;
};

struct VoteResult {
    std::size_t choice;
    double confidence;
};

VoteResult majority_vote(std::span<const Ballot> ballots) {
    struct Tally {
        std::size_t count = 0;
        double sum = 0.0;
    };
    std::map<std::size_t, Tally> tallies;  // ordered: lowest index wins residual ties
    for (const auto& b : ballots) {
        auto& t = tallies[b.choice];
        ++t.count;
        t.sum += b.score;
    }
    VoteResult best{0, -1.0};
    std::size_t best_count = 0;
    for (const auto& [choice, t] : tallies) {
        const double mean = t.sum / static_cast<double>(t.count);
        if (t.count > best_count || (t.count == best_count && mean > best.confidence)) {
            best = {choice, mean};
            best_count = t.count;
        }
    }
    return best;
}

}  // namespace

UnitSummary select_image(const HeadOutputs& outputs, const Taxonomy& taxonomy) {
    if (outputs.coarse.size() != taxonomy.group_count() ||
        outputs.joint.size() != taxonomy.species_count() ||
        outputs.fine_local.size() != taxonomy.group_count())
        throw Error(ErrorKind::ShapeMismatch, "head outputs do not match the taxonomy");
    UnitSummary u;
    u.unit = Unit::Image;
    u.coarse = argmax(outputs.coarse);
    u.coarse_confidence = outputs.coarse[u.coarse];
    u.level2a = taxonomy.to_global(u.coarse, argmax(outputs.fine_local[u.coarse]));
    u.level2b = argmax(outputs.joint);
    u.confidence = outputs.joint[u.level2b];
    return u;
}

AverageAggregate aggregate_avg(std::span<const HeadOutputs> track, const Taxonomy& taxonomy) {
    require_track(track);
    const double inv_t = 1.0 / static_cast<double>(track.size());
    AverageAggregate a;
    a.p1.assign(taxonomy.group_count(), 0.0);
    a.p2.assign(taxonomy.species_count(), 0.0);
    for (const auto& frame : track) {
        if (frame.coarse.size() != a.p1.size() || frame.joint.size() != a.p2.size())
            throw Error(ErrorKind::ShapeMismatch, "frame scores do not match the taxonomy");
        for (std::size_t g = 0; g < a.p1.size(); ++g) a.p1[g] += frame.coarse[g];
        for (std::size_t s = 0; s < a.p2.size(); ++s) a.p2[s] += frame.joint[s];
    }
    for (double& v : a.p1) v *= inv_t;
    for (double& v : a.p2) v *= inv_t;

    auto& u = a.summary;
    u.unit = Unit::VideoAvg;
    u.coarse = argmax(a.p1);
    u.coarse_confidence = a.p1[u.coarse];
    u.level2b = argmax(a.p2);
    u.confidence = a.p2[u.level2b];

    std::vector<double> fine_mean(taxonomy.group_size(u.coarse), 0.0);
    for (const auto& frame : track)
        for (std::size_t i = 0; i < fine_mean.size(); ++i)
            fine_mean[i] += frame.fine_local.at(u.coarse).at(i);
    u.level2a = taxonomy.to_global(u.coarse, argmax(fine_mean));
    return a;
}

UnitSummary aggregate_vote(std::span<const HeadOutputs> track, const Taxonomy& taxonomy) {
    require_track(track);
    std::vector<Ballot> species_ballots, group_ballots;
    for (const auto& frame : track) {
        const UnitSummary f = select_image(frame, taxonomy);
        species_ballots.push_back({f.level2b, f.confidence});
        group_ballots.push_back({f.coarse, f.coarse_confidence});
    }
    UnitSummary u;
    u.unit = Unit::VideoVote;
    const auto fine = majority_vote(species_ballots);
    u.level2b = fine.choice;
    u.confidence = fine.confidence;
    const auto coarse = majority_vote(group_ballots);
    u.coarse = coarse.choice;
    u.coarse_confidence = coarse.confidence;

    std::vector<Ballot> within_group;
    for (const auto& frame : track) {
        const auto& local = frame.fine_local[u.coarse];
        const std::size_t i = argmax(local);
        within_group.push_back({taxonomy.to_global(u.coarse, i), local[i]});
    }
    u.level2a = majority_vote(within_group).choice;
    return u;
}

Prediction decide(const UnitSummary& summary, double tau) {
    if (!std::isfinite(tau) || tau < 0.0)
        throw Error(ErrorKind::InvalidThreshold, "threshold must be finite and >= 0");
    if (summary.confidence < tau)
        return {Level::Coarse, summary.coarse, summary.coarse_confidence, summary.unit};
    return {Level::Fine, summary.level2b, summary.confidence, summary.unit};
}

Prediction decide(double confidence, std::span<const double> coarse_scores,
                  std::size_t fine_selection, double tau, Unit unit) {
    if (coarse_scores.empty()) throw Error(ErrorKind::EmptyInput, "no coarse scores");
    UnitSummary u;
    u.unit = unit;
    u.coarse = argmax(coarse_scores);
    u.coarse_confidence = coarse_scores[u.coarse];
    u.level2b = fine_selection;
    u.level2a = fine_selection;
    u.confidence = confidence;
    return decide(u, tau);
}

ThresholdSearch search_threshold(std::span<const ThresholdRow> rows) {
    if (rows.empty()) throw Error(ErrorKind::EmptyEvalSet, "threshold search needs eval units");

    std::vector<ThresholdRow> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end(), [](const ThresholdRow& a, const ThresholdRow& b) {
        return a.confidence < b.confidence;
    });
    std::vector<double> candidates{0.0};
    for (const auto& r : sorted) candidates.push_back(r.confidence);
    candidates.push_back(1.0 + kStopAllEpsilon);
    std::sort(candidates.begin(), candidates.end());

    // Start with nothing stopped, then move units whose confidence falls
    // below each successive candidate over to the coarse decision.
    std::size_t correct = 0;
    for (const auto& r : sorted) correct += r.fine_correct ? 1 : 0;
    std::size_t stopped = 0;
    ThresholdSearch best{candidates.front(), 0, 0, sorted.size()};
    bool have_best = false;
    for (double tau : candidates) {
        while (stopped < sorted.size() && sorted[stopped].confidence < tau) {
            const auto& r = sorted[stopped];
            correct = correct - (r.fine_correct ? 1 : 0) + (r.coarse_correct ? 1 : 0);
            ++stopped;
        }
        if (!have_best || correct > best.correct) {
            best = {tau, correct, stopped, sorted.size() - stopped};
            have_best = true;
        }
    }
    return best;
}

std::vector<TrackScores> score_tracks(const ModelParams& params, const Dataset& dataset) {
    std::vector<TrackScores> out;
    out.reserve(dataset.tracks.size());
    for (const auto& track : dataset.tracks) {
        TrackScores scores;
        scores.reserve(track.frames.size());
        for (const auto& frame : track.frames) scores.push_back(forward(params, frame.features));
        out.push_back(std::move(scores));
    }
    return out;
}

ThresholdSearch search_threshold(const Checkpoint& model, const Dataset& eval,
                                 const Taxonomy& taxonomy) {
    if (!is_hierarchical(model.scheme))
        throw Error(ErrorKind::ConfigError, "the flat baseline has no coarse level to fall back to");
    if (eval.empty()) throw Error(ErrorKind::EmptyEvalSet, "threshold search needs eval tracks");
    check_compatible(model.params, taxonomy);
    const auto scores = score_tracks(model.params, eval);
    std::vector<ThresholdRow> rows;
    rows.reserve(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const auto& label = eval.tracks[k].label;
        const auto summary = aggregate_avg(scores[k], taxonomy).summary;
        rows.push_back({summary.confidence, summary.level2b == label.species,
                        summary.coarse == label.group});
    }
    return search_threshold(rows);
}

namespace {

void emit(std::string& out, const Taxonomy& taxonomy, const std::string& track_id,
          const Prediction& p, const std::size_t* frame_index) {
    nlohmann::ordered_json j;
    j["track_id"] = track_id;
    if (frame_index) j["frame_index"] = *frame_index;
    j["unit"] = std::string(to_string(p.unit));
    j["level"] = std::string(to_string(p.level));
    j["label"] = p.level == Level::Coarse ? taxonomy.group_name(p.label)
                                          : taxonomy.species_name(p.label);
    j["confidence"] = p.confidence;
    out += j.dump();
    out += '\n';
}

}  // namespace

std::string predictions_jsonl(const Checkpoint& model, const Dataset& dataset,
                              const Taxonomy& taxonomy, double tau) {
    check_compatible(model.params, taxonomy);
    std::string out;
    for (const auto& track : dataset.tracks) {
        if (track.frames.empty()) throw Error(ErrorKind::EmptyTrack, "track " + track.id);
        if (!is_hierarchical(model.scheme)) {
            // Flat classifier: fine predictions only, averaged for the track.
            std::vector<double> mean(taxonomy.species_count(), 0.0);
            for (const auto& frame : track.frames) {
                const auto p = forward_flat(model.params, frame.features);
                const auto s = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
                emit(out, taxonomy, track.id, {Level::Fine, s, p[s], Unit::Image}, &frame.frame_index);
                for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i] / static_cast<double>(track.frames.size());
            }
            const auto s = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
            emit(out, taxonomy, track.id, {Level::Fine, s, mean[s], Unit::VideoAvg}, nullptr);
            continue;
        }
        TrackScores scores;
        for (const auto& frame : track.frames) {
            scores.push_back(forward(model.params, frame.features));
            emit(out, taxonomy, track.id, decide(select_image(scores.back(), taxonomy), tau),
                 &frame.frame_index);
        }
        emit(out, taxonomy, track.id, decide(aggregate_avg(scores, taxonomy).summary, tau), nullptr);
        emit(out, taxonomy, track.id, decide(aggregate_vote(scores, taxonomy), tau), nullptr);
    }
    return out;
}

}  // namespace hsc
