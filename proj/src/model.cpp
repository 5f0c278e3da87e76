#include "hsc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "hsc/error.hpp"
#include "json.hpp"

namespace hsc {

namespace {

void relu(std::span<const double> x, std::vector<double>& y) {
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void require_finite(std::span<const double> v, const char* where) {
    for (double x : v)
        if (!std::isfinite(x))
            throw Error(ErrorKind::NonFiniteActivation, std::string("non-finite value in ") + where);
}

void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has " +
                                                      std::to_string(got) + " entries, expected " +
                                                      std::to_string(want));
}

void glorot(Dense& layer, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weight) w = dist(rng);
}

}  // namespace

std::string_view to_string(FeatureMode mode) {
    return mode == FeatureMode::Trunk ? "trunk" : "precomputed";
}

FeatureMode parse_feature_mode(std::string_view name) {
    if (name == "trunk") return FeatureMode::Trunk;
    if (name == "precomputed") return FeatureMode::Precomputed;
    throw Error(ErrorKind::ConfigError, "unknown feature mode '" + std::string(name) + "'");
}

void Dense::apply(std::span<const double> x, std::span<double> y) const {
    require_dim(x.size(), in, "layer input");
    for (std::size_t r = 0; r < out; ++r) {
        double acc = bias[r];
        const double* row = weight.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

std::vector<double> Dense::apply(std::span<const double> x) const {
    std::vector<double> y(out);
    apply(x, y);
    return y;
}

std::vector<Dense*> ModelParams::layers() {
    std::vector<Dense*> all{&trunk1, &trunk2, &coarse1, &coarse2};
    for (auto& head : fine) all.push_back(&head);
    all.push_back(&flat1);
    all.push_back(&flat2);
    return all;
}

std::vector<const Dense*> ModelParams::layers() const {
    std::vector<const Dense*> all{&trunk1, &trunk2, &coarse1, &coarse2};
    for (const auto& head : fine) all.push_back(&head);
    all.push_back(&flat1);
    all.push_back(&flat2);
    return all;
}

std::size_t ModelParams::species_count() const {
    std::size_t s = 0;
    for (const auto& head : fine) s += head.out;
    return s;
}

ModelParams init_params(const Taxonomy& taxonomy, FeatureMode mode, const Dims& dims,
                        std::uint64_t seed) {
    if (dims.shallow == 0 || dims.hidden == 0 || dims.deep == 0 ||
        (mode == FeatureMode::Trunk && dims.input == 0))
        throw Error(ErrorKind::ConfigError, "layer widths must be positive");

    ModelParams p;
    p.mode = mode;
    p.dims = dims;
    if (mode == FeatureMode::Precomputed) p.dims.input = 0;
    p.taxonomy_hash = taxonomy.hash();
    if (mode == FeatureMode::Trunk) {
        p.trunk1 = Dense(dims.input, dims.shallow);
        p.trunk2 = Dense(dims.shallow, dims.deep);
    }
    p.coarse1 = Dense(dims.shallow, dims.hidden);
    p.coarse2 = Dense(dims.hidden, taxonomy.group_count());
    for (std::size_t g = 0; g < taxonomy.group_count(); ++g)
        p.fine.emplace_back(dims.deep, taxonomy.group_size(g));
    p.flat1 = Dense(dims.deep, dims.hidden);
    p.flat2 = Dense(dims.hidden, taxonomy.species_count());

    std::mt19937_64 rng(seed);
    for (Dense* layer : p.layers())
        if (layer->in > 0 && layer->out > 0) glorot(*layer, rng);
    return p;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z = params;
    for (Dense* layer : z.layers()) {
        std::fill(layer->weight.begin(), layer->weight.end(), 0.0);
        std::fill(layer->bias.begin(), layer->bias.end(), 0.0);
    }
    return z;
}

void check_compatible(const ModelParams& params, const Taxonomy& taxonomy) {
    bool ok = params.taxonomy_hash == taxonomy.hash() &&
              params.fine.size() == taxonomy.group_count() &&
              params.coarse2.out == taxonomy.group_count() &&
              params.flat2.out == taxonomy.species_count();
    for (std::size_t g = 0; ok && g < params.fine.size(); ++g)
        ok = params.fine[g].out == taxonomy.group_size(g);
    if (!ok) throw Error(ErrorKind::TaxonomyMismatch, "model was not built for this taxonomy");
}

std::vector<double> stable_softmax(std::span<const double> logits) {
    if (logits.empty()) throw Error(ErrorKind::EmptyInput, "softmax of an empty vector");
    for (double z : logits)
        if (!std::isfinite(z)) throw Error(ErrorKind::NonFiniteInput, "softmax logit is not finite");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<double> joint_scores(const Taxonomy& taxonomy, std::span<const double> coarse,
                                 const std::vector<std::vector<double>>& fine_local) {
    if (coarse.size() != taxonomy.group_count() || fine_local.size() != taxonomy.group_count())
        throw Error(ErrorKind::ShapeMismatch, "score vectors do not match the group count");
    std::vector<double> joint(taxonomy.species_count());
    for (std::size_t g = 0; g < taxonomy.group_count(); ++g) {
        if (fine_local[g].size() != taxonomy.group_size(g))
            throw Error(ErrorKind::ShapeMismatch,
                        "fine scores of group " + std::to_string(g) + " have the wrong length");
        const std::size_t base = taxonomy.offset(g);
        for (std::size_t i = 0; i < fine_local[g].size(); ++i)
            joint[base + i] = coarse[g] * fine_local[g][i];
    }
    return joint;
}

ForwardTrace trace_forward(const ModelParams& params, const FrameInput& input, bool hierarchical,
                           bool flat) {
    ForwardTrace t;
    if (params.mode == FeatureMode::Trunk) {
        const auto* raw = std::get_if<std::vector<double>>(&input);
        if (raw == nullptr)
            throw Error(ErrorKind::DimensionMismatch, "trunk-mode model needs a raw feature vector");
        require_dim(raw->size(), params.dims.input, "raw input");
        t.input = *raw;
        t.shallow_pre = params.trunk1.apply(t.input);
        relu(t.shallow_pre, t.shallow);
        t.deep_pre = params.trunk2.apply(t.shallow);
        relu(t.deep_pre, t.deep);
    } else {
        const auto* pair = std::get_if<FeaturePair>(&input);
        if (pair == nullptr)
            throw Error(ErrorKind::DimensionMismatch,
                        "precomputed-mode model needs a (shallow, deep) feature pair");
        require_dim(pair->shallow.size(), params.dims.shallow, "shallow features");
        require_dim(pair->deep.size(), params.dims.deep, "deep features");
        t.shallow = pair->shallow;
        t.deep = pair->deep;
    }

    if (hierarchical) {
        t.coarse_hidden_pre = params.coarse1.apply(t.shallow);
        relu(t.coarse_hidden_pre, t.coarse_hidden);
        const auto coarse_logits = params.coarse2.apply(t.coarse_hidden);
        require_finite(coarse_logits, "coarse head");
        t.heads.coarse = stable_softmax(coarse_logits);
        t.heads.fine_local.reserve(params.fine.size());
        for (const auto& head : params.fine) {
            const auto logits = head.apply(t.deep);
            require_finite(logits, "fine head");
            t.heads.fine_local.push_back(stable_softmax(logits));
        }
        // Group-major concatenation of coarse[g] * fine_local[g].
        t.heads.joint.reserve(params.species_count());
        for (std::size_t g = 0; g < params.fine.size(); ++g)
            for (double f : t.heads.fine_local[g]) t.heads.joint.push_back(t.heads.coarse[g] * f);
    }
    if (flat) {
        t.flat_hidden_pre = params.flat1.apply(t.deep);
        relu(t.flat_hidden_pre, t.flat_hidden);
        const auto logits = params.flat2.apply(t.flat_hidden);
        require_finite(logits, "flat head");
        t.flat = stable_softmax(logits);
    }
    return t;
}

HeadOutputs forward(const ModelParams& params, const FrameInput& input) {
    return std::move(trace_forward(params, input, true, false).heads);
}

std::vector<double> forward_flat(const ModelParams& params, const FrameInput& input) {
    return std::move(trace_forward(params, input, false, true).flat);
}

FeaturePair extract_features(const ModelParams& params, std::span<const double> raw) {
    if (params.mode != FeatureMode::Trunk)
        throw Error(ErrorKind::DimensionMismatch, "model has no trunk");
    auto t = trace_forward(params, std::vector<double>(raw.begin(), raw.end()), false, false);
    return {std::move(t.shallow), std::move(t.deep)};
}

// ---------------------------------------------------------------------------
// checkpoint

namespace {

using nlohmann::ordered_json;

ordered_json dense_to_json(const Dense& d) {
    return {{"in", d.in}, {"out", d.out}, {"weight", d.weight}, {"bias", d.bias}};
}

Dense dense_from_json(const nlohmann::json& j) {
    Dense d;
    d.in = j.at("in").get<std::size_t>();
    d.out = j.at("out").get<std::size_t>();
    d.weight = j.at("weight").get<std::vector<double>>();
    d.bias = j.at("bias").get<std::vector<double>>();
    if (d.weight.size() != d.in * d.out || d.bias.size() != d.out)
        throw Error(ErrorKind::MalformedDocument, "layer arrays do not match their shape");
    for (double v : d.weight)
        if (!std::isfinite(v)) throw Error(ErrorKind::MalformedDocument, "non-finite weight");
    return d;
}

}  // namespace

std::string save_checkpoint(const Checkpoint& checkpoint) {
    const ModelParams& p = checkpoint.params;
    ordered_json doc;
    doc["format"] = "hsc-checkpoint/1";
    doc["scheme"] = std::string(to_string(checkpoint.scheme));
    doc["mode"] = std::string(to_string(p.mode));
    doc["dims"] = {{"input", p.dims.input},
                   {"shallow", p.dims.shallow},
                   {"hidden", p.dims.hidden},
                   {"deep", p.dims.deep}};
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(p.taxonomy_hash));
    doc["taxonomy_hash"] = hash;
    doc["trunk1"] = dense_to_json(p.trunk1);
    doc["trunk2"] = dense_to_json(p.trunk2);
    doc["coarse1"] = dense_to_json(p.coarse1);
    doc["coarse2"] = dense_to_json(p.coarse2);
    doc["fine"] = ordered_json::array();
    for (const auto& head : p.fine) doc["fine"].push_back(dense_to_json(head));
    doc["flat1"] = dense_to_json(p.flat1);
    doc["flat2"] = dense_to_json(p.flat2);
    return doc.dump() + "\n";
}

Checkpoint load_checkpoint(std::string_view text, const Taxonomy& taxonomy) {
    Checkpoint c;
    try {
        const auto doc = nlohmann::json::parse(text);
        c.scheme = parse_scheme(doc.at("scheme").get<std::string>());
        ModelParams& p = c.params;
        p.mode = parse_feature_mode(doc.at("mode").get<std::string>());
        const auto& dims = doc.at("dims");
        p.dims = {dims.at("input").get<std::size_t>(), dims.at("shallow").get<std::size_t>(),
                  dims.at("hidden").get<std::size_t>(), dims.at("deep").get<std::size_t>()};
        p.taxonomy_hash = std::stoull(doc.at("taxonomy_hash").get<std::string>(), nullptr, 16);
        p.trunk1 = dense_from_json(doc.at("trunk1"));
        p.trunk2 = dense_from_json(doc.at("trunk2"));
        p.coarse1 = dense_from_json(doc.at("coarse1"));
        p.coarse2 = dense_from_json(doc.at("coarse2"));
        for (const auto& head : doc.at("fine")) p.fine.push_back(dense_from_json(head));
        p.flat1 = dense_from_json(doc.at("flat1"));
        p.flat2 = dense_from_json(doc.at("flat2"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedDocument, std::string("checkpoint: ") + e.what());
    } catch (const std::logic_error& e) {
        throw Error(ErrorKind::MalformedDocument, std::string("checkpoint: ") + e.what());
    }
    check_compatible(c.params, taxonomy);
    const auto& p = c.params;
    const bool trunk_ok = p.mode == FeatureMode::Precomputed
                              ? (p.trunk1.out == 0 && p.trunk2.out == 0)
                              : (p.trunk1.in == p.dims.input && p.trunk1.out == p.dims.shallow &&
                                 p.trunk2.in == p.dims.shallow && p.trunk2.out == p.dims.deep);
    if (!trunk_ok || p.coarse1.in != p.dims.shallow || p.coarse1.out != p.dims.hidden ||
        p.coarse2.in != p.dims.hidden || p.flat1.in != p.dims.deep ||
        p.flat1.out != p.dims.hidden || p.flat2.in != p.dims.hidden)
        throw Error(ErrorKind::MalformedDocument, "checkpoint layer shapes disagree with dims");
    for (const auto& head : p.fine)
        if (head.in != p.dims.deep)
            throw Error(ErrorKind::MalformedDocument, "fine head input width disagrees with dims");
    return c;
}

void write_checkpoint_file(const Checkpoint& checkpoint, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path);
    out << save_checkpoint(checkpoint);
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path);
}

Checkpoint read_checkpoint_file(const std::string& path, const Taxonomy& taxonomy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_checkpoint(buf.str(), taxonomy);
}

}  // namespace hsc
