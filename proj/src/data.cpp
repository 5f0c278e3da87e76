#include "hsc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "hsc/error.hpp"
#include "hsc/rng.hpp"
#include "json.hpp"

namespace hsc {

std::size_t Dataset::frame_count() const {
    std::size_t n = 0;
    for (const auto& t : tracks) n += t.frames.size();
    return n;
}

// ---------------------------------------------------------------------------
// generator

void GenConfig::validate() const {
    if (!(zipf_exponent >= 0.0)) throw Error(ErrorKind::ConfigError, "zipf_exponent must be >= 0");
    if (min_frames == 0 || max_frames < min_frames)
        throw Error(ErrorKind::ConfigError, "frames per track range must satisfy 1 <= min <= max");
    for (double v : {group_separation, species_separation, track_jitter, frame_noise})
        if (!(v > 0.0) || !std::isfinite(v))
            throw Error(ErrorKind::ConfigError, "separations and noise levels must be > 0");
    if (mode == FeatureMode::Trunk ? dims.input == 0 : (dims.shallow == 0 || dims.deep == 0))
        throw Error(ErrorKind::ConfigError, "feature widths must be positive");
}

std::string GenConfig::to_json() const {
    nlohmann::ordered_json j;
    j["zipf_exponent"] = zipf_exponent;
    j["tracks_total"] = tracks_total;
    j["min_frames"] = min_frames;
    j["max_frames"] = max_frames;
    j["group_separation"] = group_separation;
    j["species_separation"] = species_separation;
    j["track_jitter"] = track_jitter;
    j["frame_noise"] = frame_noise;
    j["mode"] = std::string(to_string(mode));
    j["dims"] = {{"input", dims.input}, {"shallow", dims.shallow}, {"deep", dims.deep}};
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

GenConfig GenConfig::from_json(std::string_view text) { return from_json(text, GenConfig{}); }

GenConfig GenConfig::from_json(std::string_view text, GenConfig base) {
    try {
        const auto j = nlohmann::json::parse(text);
        auto take = [&j](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        take("zipf_exponent", base.zipf_exponent);
        take("tracks_total", base.tracks_total);
        take("min_frames", base.min_frames);
        take("max_frames", base.max_frames);
        take("group_separation", base.group_separation);
        take("species_separation", base.species_separation);
        take("track_jitter", base.track_jitter);
        take("frame_noise", base.frame_noise);
        take("seed", base.seed);
        if (j.contains("mode")) base.mode = parse_feature_mode(j["mode"].get<std::string>());
        if (j.contains("dims")) {
            const auto& d = j["dims"];
            if (d.contains("input")) base.dims.input = d["input"].get<std::size_t>();
            if (d.contains("shallow")) base.dims.shallow = d["shallow"].get<std::size_t>();
            if (d.contains("deep")) base.dims.deep = d["deep"].get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("generator config: ") + e.what());
    }
    base.validate();
    return base;
}

std::vector<std::size_t> species_track_counts(const Taxonomy& taxonomy, const GenConfig& config) {
    const std::size_t S = taxonomy.species_count();
    if (config.tracks_total < 2 * S)
        throw Error(ErrorKind::InfeasibleConfig,
                    std::to_string(config.tracks_total) + " tracks cannot give each of " +
                        std::to_string(S) + " species two tracks");

    std::vector<double> weight(S);
    for (std::size_t r = 0; r < S; ++r)
        weight[r] = std::pow(static_cast<double>(r + 1), -config.zipf_exponent);
    const double total_weight = std::accumulate(weight.begin(), weight.end(), 0.0);

    const std::size_t extra = config.tracks_total - 2 * S;
    std::vector<std::size_t> by_rank(S, 2);
    std::vector<double> remainder(S);
    std::size_t assigned = 0;
    for (std::size_t r = 0; r < S; ++r) {
        const double share = static_cast<double>(extra) * weight[r] / total_weight;
        const auto whole = static_cast<std::size_t>(std::floor(share));
        by_rank[r] += whole;
        remainder[r] = share - static_cast<double>(whole);
        assigned += whole;
    }
    std::vector<std::size_t> ranks(S);
    std::iota(ranks.begin(), ranks.end(), std::size_t{0});
    std::stable_sort(ranks.begin(), ranks.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < extra; ++k, ++assigned) ++by_rank[ranks[k % S]];

    // Rank -> species.
    std::vector<std::size_t> species_of_rank(S);
    std::iota(species_of_rank.begin(), species_of_rank.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(config.seed, "species-ranks"));
    shuffle_in_place(species_of_rank, rng);

    std::vector<std::size_t> counts(S);
    for (std::size_t r = 0; r < S; ++r) counts[species_of_rank[r]] = by_rank[r];
    return counts;
}

namespace {

std::vector<double> gaussian_vector(std::size_t dim, double norm, std::mt19937_64& rng) {
    std::vector<double> v(dim);
    const double scale = norm / std::sqrt(static_cast<double>(dim));
    for (double& x : v) x = scale * standard_normal(rng);
    return v;
}

void add(std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

// Class-conditional structure for one feature space of width `dim`.
struct FeatureSpace {
    std::vector<std::vector<double>> species_center;

    FeatureSpace(const Taxonomy& taxonomy, const GenConfig& config, std::size_t dim,
                 std::mt19937_64& rng) {
        std::vector<std::vector<double>> group_mean;
        for (std::size_t g = 0; g < taxonomy.group_count(); ++g)
            group_mean.push_back(gaussian_vector(dim, config.group_separation, rng));
        for (std::size_t s = 0; s < taxonomy.species_count(); ++s) {
            auto center = group_mean[taxonomy.group_of(s)];
            add(center, gaussian_vector(dim, config.species_separation, rng));
            species_center.push_back(std::move(center));
        }
    }

    struct TrackSampler {
        std::vector<double> base;
        double noise;
        std::vector<double> sample(std::mt19937_64& rng) const {
            auto x = base;
            add(x, gaussian_vector(x.size(), noise, rng));
            return x;
        }
    };

    TrackSampler track(std::size_t species, const GenConfig& config, std::mt19937_64& rng) const {
        auto base = species_center[species];
        // Shared by every frame of the track: one fish, one pose/occlusion regime.
        add(base, gaussian_vector(base.size(), config.track_jitter, rng));
        return {std::move(base), config.frame_noise};
    }
};

}  // namespace

Dataset generate(const Taxonomy& taxonomy, const GenConfig& config) {
    config.validate();
    const auto counts = species_track_counts(taxonomy, config);

    std::mt19937_64 structure_rng(derive_seed(config.seed, "structure"));
    std::vector<FeatureSpace> spaces;
    if (config.mode == FeatureMode::Trunk) {
        spaces.emplace_back(taxonomy, config, config.dims.input, structure_rng);
    } else {
        spaces.emplace_back(taxonomy, config, config.dims.shallow, structure_rng);
        spaces.emplace_back(taxonomy, config, config.dims.deep, structure_rng);
    }

    std::vector<std::size_t> track_species;
    for (std::size_t s = 0; s < counts.size(); ++s)
        track_species.insert(track_species.end(), counts[s], s);
    std::mt19937_64 order_rng(derive_seed(config.seed, "track-order"));
    shuffle_in_place(track_species, order_rng);

    std::mt19937_64 rng(derive_seed(config.seed, "frames"));
    Dataset dataset;
    dataset.tracks.reserve(track_species.size());
    char id[32];
    for (std::size_t k = 0; k < track_species.size(); ++k) {
        const std::size_t s = track_species[k];
        std::snprintf(id, sizeof id, "t%04zu", k);
        Track track{id, {taxonomy.group_of(s), s}, {}};

        const std::size_t span = config.max_frames - config.min_frames + 1;
        const std::size_t frames = config.min_frames + static_cast<std::size_t>(rng() % span);

        std::vector<FeatureSpace::TrackSampler> samplers;
        for (const auto& space : spaces) samplers.push_back(space.track(s, config, rng));

        for (std::size_t f = 0; f < frames; ++f) {
            Frame frame{track.id, f, track.label, {}};
            if (config.mode == FeatureMode::Trunk) {
                frame.features = samplers[0].sample(rng);
            } else {
                FeaturePair pair;
                pair.shallow = samplers[0].sample(rng);
                pair.deep = samplers[1].sample(rng);
                frame.features = std::move(pair);
            }
            track.frames.push_back(std::move(frame));
        }
        dataset.tracks.push_back(std::move(track));
    }
    return dataset;
}

// ---------------------------------------------------------------------------
// split

Split split_by_track(const Dataset& dataset, const Taxonomy& taxonomy, double ratio,
                     std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw Error(ErrorKind::ConfigError, "split ratio must lie in (0, 1)");

    std::vector<std::vector<std::size_t>> by_species(taxonomy.species_count());
    for (std::size_t k = 0; k < dataset.tracks.size(); ++k) {
        check_label(taxonomy, dataset.tracks[k].label);
        by_species[dataset.tracks[k].label.species].push_back(k);
    }

    std::vector<char> to_train(dataset.tracks.size(), 0);
    std::mt19937_64 rng(derive_seed(seed, "split"));
    for (std::size_t s = 0; s < by_species.size(); ++s) {
        auto& members = by_species[s];
        if (members.empty()) continue;
        if (members.size() < 2)
            throw Error(ErrorKind::SpeciesTooSmall,
                        "species '" + taxonomy.species_name(s) + "' has a single track");
        shuffle_in_place(members, rng);
        const auto n = static_cast<double>(members.size());
        // The epsilon keeps e.g. 0.8 * 10 from rounding up to 9.
        auto n_train = static_cast<std::size_t>(std::ceil(ratio * n - 1e-9));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        for (std::size_t k = 0; k < n_train; ++k) to_train[members[k]] = 1;
    }

    Split split;
    for (std::size_t k = 0; k < dataset.tracks.size(); ++k)
        (to_train[k] ? split.train : split.eval).tracks.push_back(dataset.tracks[k]);
    return split;
}

std::vector<LabeledExample> to_examples(const Dataset& dataset) {
    std::vector<LabeledExample> out;
    out.reserve(dataset.frame_count());
    for (const auto& track : dataset.tracks)
        for (const auto& frame : track.frames) out.push_back({frame.features, frame.label});
    return out;
}

std::vector<std::size_t> tracks_per_species(const Dataset& dataset, const Taxonomy& taxonomy) {
    std::vector<std::size_t> counts(taxonomy.species_count(), 0);
    for (const auto& track : dataset.tracks) {
        check_label(taxonomy, track.label);
        ++counts[track.label.species];
    }
    return counts;
}

// ---------------------------------------------------------------------------
// JSONL

std::string to_jsonl(const Dataset& dataset, const Taxonomy& taxonomy) {
    std::string out;
    for (const auto& track : dataset.tracks) {
        for (const auto& frame : track.frames) {
            nlohmann::ordered_json j;
            j["track_id"] = frame.track_id;
            j["frame_index"] = frame.frame_index;
            j["group"] = taxonomy.group_name(frame.label.group);
            j["species"] = taxonomy.species_name(frame.label.species);
            if (const auto* raw = std::get_if<std::vector<double>>(&frame.features)) {
                j["features"] = *raw;
            } else {
                const auto& pair = std::get<FeaturePair>(frame.features);
                j["shallow"] = pair.shallow;
                j["deep"] = pair.deep;
            }
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

Dataset parse_jsonl(std::string_view text, const Taxonomy& taxonomy) {
    Dataset dataset;
    std::unordered_map<std::string, std::size_t> track_slot;
    std::size_t raw_dim = 0, shallow_dim = 0, deep_dim = 0;
    bool have_dims = false;
    bool raw_mode = false;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        const std::string where = "line " + std::to_string(line_no);
        Frame frame;
        try {
            const auto j = nlohmann::json::parse(line);
            frame.track_id = j.at("track_id").get<std::string>();
            frame.frame_index = j.at("frame_index").get<std::size_t>();
            const std::size_t g = taxonomy.group_index(j.at("group").get<std::string>());
            const std::size_t s = taxonomy.species_index(j.at("species").get<std::string>());
            frame.label = {g, s};
            if (j.contains("features")) {
                frame.features = j["features"].get<std::vector<double>>();
            } else {
                frame.features = FeaturePair{j.at("shallow").get<std::vector<double>>(),
                                             j.at("deep").get<std::vector<double>>()};
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, where + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorKind::MalformedRecord, where + ": " + e.what());
        }
        if (taxonomy.group_of(frame.label.species) != frame.label.group)
            throw Error(ErrorKind::InconsistentLabels,
                        where + ": species is not a member of the stated group");

        const auto* raw = std::get_if<std::vector<double>>(&frame.features);
        const auto* pair = std::get_if<FeaturePair>(&frame.features);
        if (!have_dims) {
            have_dims = true;
            raw_mode = raw != nullptr;
            if (raw) raw_dim = raw->size();
            else {
                shallow_dim = pair->shallow.size();
                deep_dim = pair->deep.size();
            }
        } else if ((raw != nullptr) != raw_mode ||
                   (raw && raw->size() != raw_dim) ||
                   (pair && (pair->shallow.size() != shallow_dim || pair->deep.size() != deep_dim))) {
            throw Error(ErrorKind::DimensionMismatch,
                        where + ": feature layout differs from earlier records");
        }

        auto [it, inserted] = track_slot.emplace(frame.track_id, dataset.tracks.size());
        if (inserted) {
            dataset.tracks.push_back({frame.track_id, frame.label, {}});
        } else if (!(dataset.tracks[it->second].label == frame.label)) {
            throw Error(ErrorKind::InconsistentLabels,
                        where + ": track '" + frame.track_id +
                            "' already has a different label");
        }
        Track& track = dataset.tracks[it->second];
        for (const auto& existing : track.frames)
            if (existing.frame_index == frame.frame_index)
                throw Error(ErrorKind::MalformedRecord,
                            where + ": duplicate frame_index in track '" + frame.track_id + "'");
        track.frames.push_back(std::move(frame));
    }

    for (auto& track : dataset.tracks)
        std::stable_sort(track.frames.begin(), track.frames.end(),
                         [](const Frame& a, const Frame& b) { return a.frame_index < b.frame_index; });
    return dataset;
}

void save_jsonl(const Dataset& dataset, const Taxonomy& taxonomy, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path);
    out << to_jsonl(dataset, taxonomy);
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path);
}

Dataset load_jsonl(const std::string& path, const Taxonomy& taxonomy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_jsonl(buf.str(), taxonomy);
}

}  // namespace hsc
