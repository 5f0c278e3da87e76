#include "hsc/training.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "hsc/error.hpp"
#include "hsc/rng.hpp"
#include "json.hpp"

namespace hsc {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw Error(ErrorKind::ConfigError, "learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw Error(ErrorKind::ConfigError, "momentum must lie in [0, 1)");
    if (batch_size == 0) throw Error(ErrorKind::ConfigError, "batch_size must be positive");
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["scheme"] = std::string(to_string(scheme));
    j["learning_rate"] = learning_rate;
    j["momentum"] = momentum;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["seed"] = seed;
    j["mode"] = std::string(to_string(mode));
    j["dims"] = {{"input", dims.input},
                 {"shallow", dims.shallow},
                 {"hidden", dims.hidden},
                 {"deep", dims.deep}};
    return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(std::string_view text) { return from_json(text, TrainConfig{}); }

TrainConfig TrainConfig::from_json(std::string_view text, TrainConfig base) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.contains("scheme")) base.scheme = parse_scheme(j["scheme"].get<std::string>());
        if (j.contains("learning_rate")) base.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("momentum")) base.momentum = j["momentum"].get<double>();
        if (j.contains("epochs")) base.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("batch_size")) base.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("mode")) base.mode = parse_feature_mode(j["mode"].get<std::string>());
        if (j.contains("dims")) {
            const auto& d = j["dims"];
            if (d.contains("input")) base.dims.input = d["input"].get<std::size_t>();
            if (d.contains("shallow")) base.dims.shallow = d["shallow"].get<std::size_t>();
            if (d.contains("hidden")) base.dims.hidden = d["hidden"].get<std::size_t>();
            if (d.contains("deep")) base.dims.deep = d["deep"].get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("train config: ") + e.what());
    }
    base.validate();
    return base;
}

void check_label(const Taxonomy& taxonomy, const Label& label) {
    if (label.group >= taxonomy.group_count() || label.species >= taxonomy.species_count())
        throw Error(ErrorKind::LabelOutOfRange,
                    "label (" + std::to_string(label.group) + ", " +
                        std::to_string(label.species) + ") outside the taxonomy");
    if (taxonomy.group_of(label.species) != label.group)
        throw Error(ErrorKind::InconsistentLabels,
                    "species '" + taxonomy.species_name(label.species) +
                        "' is not in group '" + taxonomy.group_name(label.group) + "'");
}

double compute_loss(Scheme scheme, const HeadOutputs& outputs, const Taxonomy& taxonomy,
                    const Label& label) {
    if (scheme == Scheme::Baseline)
        throw Error(ErrorKind::ConfigError, "baseline loss needs flat outputs");
    check_label(taxonomy, label);
    if (outputs.coarse.size() != taxonomy.group_count() ||
        outputs.fine_local.size() != taxonomy.group_count() ||
        outputs.joint.size() != taxonomy.species_count())
        throw Error(ErrorKind::ShapeMismatch, "head outputs do not match the taxonomy");

    const std::size_t local = taxonomy.to_local(label.species).local;
    const double coarse_term = -std::log(outputs.coarse[label.group]);
    switch (scheme) {
        case Scheme::Scheme1:
            return coarse_term - std::log(outputs.fine_local[label.group][local]);
        case Scheme::Scheme2: {
            // Cross entropy restricted to the ground-truth group's head; y2 is
            // one-hot over that head's local species.
            const std::size_t base = taxonomy.offset(label.group);
            double fine_term = 0.0;
            for (std::size_t i = 0; i < taxonomy.group_size(label.group); ++i)
                if (i == local) fine_term -= std::log(outputs.joint[base + i]);
            return coarse_term + fine_term;
        }
        case Scheme::Scheme3: {
            // Cross entropy over all S joint scores with one-hot y'2.
            double fine_term = 0.0;
            for (std::size_t s = 0; s < outputs.joint.size(); ++s)
                if (s == label.species) fine_term -= std::log(outputs.joint[s]);
            return coarse_term + fine_term;
        }
        case Scheme::Baseline: break;
    }
    return 0.0;
}

double compute_flat_loss(std::span<const double> flat, const Taxonomy& taxonomy,
                         const Label& label) {
    check_label(taxonomy, label);
    if (flat.size() != taxonomy.species_count())
        throw Error(ErrorKind::ShapeMismatch, "flat outputs do not match the species count");
    return -std::log(flat[label.species]);
}

namespace {

// Accumulates dL/dW += delta (x) input, dL/db += delta, returns W^T delta.
std::vector<double> backprop_dense(const Dense& layer, Dense& grad, std::span<const double> input,
                                   std::span<const double> delta) {
    std::vector<double> upstream(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        grad.bias[r] += d;
        double* grow = grad.weight.data() + r * layer.in;
        const double* wrow = layer.weight.data() + r * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) {
            grow[c] += d * input[c];
            upstream[c] += d * wrow[c];
        }
    }
    return upstream;
}

void relu_backward(std::vector<double>& delta, std::span<const double> pre) {
    for (std::size_t i = 0; i < delta.size(); ++i)
        if (!(pre[i] > 0.0)) delta[i] = 0.0;
}

void add_into(std::vector<double>& acc, std::span<const double> v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

// Gradient of -weight * log softmax(z)[target] with respect to z.
std::vector<double> xent_logit_grad(std::span<const double> probs, std::size_t target,
                                    double weight) {
    std::vector<double> d(probs.begin(), probs.end());
    d[target] -= 1.0;
    for (double& v : d) v *= weight;
    return d;
}

double accumulate_example(const ModelParams& params, ModelParams& grad, const LabeledExample& ex,
                          Scheme scheme, const Taxonomy& taxonomy) {
    const bool hierarchical = is_hierarchical(scheme);
    const ForwardTrace t = trace_forward(params, ex.input, hierarchical, !hierarchical);

    std::vector<double> d_shallow(t.shallow.size(), 0.0);
    std::vector<double> d_deep(t.deep.size(), 0.0);
    double loss = 0.0;

    if (hierarchical) {
        loss = compute_loss(scheme, t.heads, taxonomy, ex.label);
        const auto [g, local] = taxonomy.to_local(ex.label.species);
        // scheme1 weights the coarse term once; in schemes 2 and 3 the joint
        // score of the true species is coarse[y1] * fine[y1][i], so the coarse
        // log-probability enters a second time through the product.
        const double coarse_weight = scheme == Scheme::Scheme1 ? 1.0 : 2.0;

        auto d_coarse_logits = xent_logit_grad(t.heads.coarse, ex.label.group, coarse_weight);
        auto d_hidden = backprop_dense(params.coarse2, grad.coarse2, t.coarse_hidden,
                                       d_coarse_logits);
        relu_backward(d_hidden, t.coarse_hidden_pre);
        add_into(d_shallow, backprop_dense(params.coarse1, grad.coarse1, t.shallow, d_hidden));

        // Only the ground-truth group's fine head appears in any hierarchical loss.
        auto d_fine_logits = xent_logit_grad(t.heads.fine_local[g], local, 1.0);
        add_into(d_deep, backprop_dense(params.fine[g], grad.fine[g], t.deep, d_fine_logits));
    } else {
        loss = compute_flat_loss(t.flat, taxonomy, ex.label);
        auto d_logits = xent_logit_grad(t.flat, ex.label.species, 1.0);
        auto d_hidden = backprop_dense(params.flat2, grad.flat2, t.flat_hidden, d_logits);
        relu_backward(d_hidden, t.flat_hidden_pre);
        add_into(d_deep, backprop_dense(params.flat1, grad.flat1, t.deep, d_hidden));
    }

    if (params.mode == FeatureMode::Trunk) {
        relu_backward(d_deep, t.deep_pre);
        add_into(d_shallow, backprop_dense(params.trunk2, grad.trunk2, t.shallow, d_deep));
        relu_backward(d_shallow, t.shallow_pre);
        backprop_dense(params.trunk1, grad.trunk1, t.input, d_shallow);
    }
    return loss;
}

void scale(ModelParams& p, double factor) {
    for (Dense* layer : p.layers()) {
        for (double& w : layer->weight) w *= factor;
        for (double& b : layer->bias) b *= factor;
    }
}

}  // namespace

Gradients compute_gradients(const ModelParams& params, std::span<const LabeledExample> batch,
                            Scheme scheme, const Taxonomy& taxonomy) {
    if (batch.empty()) throw Error(ErrorKind::EmptyDataset, "gradient of an empty batch");
    check_compatible(params, taxonomy);
    Gradients out{zeros_like(params), 0.0};
    for (const auto& ex : batch)
        out.mean_loss += accumulate_example(params, out.grad, ex, scheme, taxonomy);
    const double inv = 1.0 / static_cast<double>(batch.size());
    scale(out.grad, inv);
    out.mean_loss *= inv;
    return out;
}

double batch_loss(const ModelParams& params, std::span<const LabeledExample> batch, Scheme scheme,
                  const Taxonomy& taxonomy) {
    if (batch.empty()) throw Error(ErrorKind::EmptyDataset, "loss of an empty batch");
    double total = 0.0;
    for (const auto& ex : batch) {
        if (is_hierarchical(scheme))
            total += compute_loss(scheme, forward(params, ex.input), taxonomy, ex.label);
        else
            total += compute_flat_loss(forward_flat(params, ex.input), taxonomy, ex.label);
    }
    return total / static_cast<double>(batch.size());
}

TrainResult train(const TrainConfig& config, std::span<const LabeledExample> examples,
                  const Taxonomy& taxonomy) {
    config.validate();
    if (examples.empty()) throw Error(ErrorKind::EmptyDataset, "no training examples");
    for (const auto& ex : examples) check_label(taxonomy, ex.label);

    TrainResult result{
        init_params(taxonomy, config.mode, config.dims, derive_seed(config.seed, "init")), {}};
    ModelParams velocity = zeros_like(result.params);

    std::vector<std::size_t> order(examples.size());
    std::vector<LabeledExample> batch;
    batch.reserve(config.batch_size);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(derive_seed(config.seed, "shuffle"), epoch));
        shuffle_in_place(order, rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(examples[order[k]]);

            Gradients g;
            try {
                g = compute_gradients(result.params, batch, config.scheme, taxonomy);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::NonFiniteActivation)
                    throw Error(ErrorKind::DivergedTraining,
                                "epoch " + std::to_string(epoch + 1) + ": " + e.what());
                throw;
            }
            if (!std::isfinite(g.mean_loss))
                throw Error(ErrorKind::DivergedTraining,
                            "non-finite loss in epoch " + std::to_string(epoch + 1) +
                                "; lower the learning rate");
            epoch_loss += g.mean_loss * static_cast<double>(stop - start);

            auto params_layers = result.params.layers();
            auto velocity_layers = velocity.layers();
            auto grad_layers = g.grad.layers();
            for (std::size_t l = 0; l < params_layers.size(); ++l) {
                auto step = [&](std::vector<double>& p, std::vector<double>& v,
                                const std::vector<double>& d) {
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        v[i] = config.momentum * v[i] + d[i];
                        p[i] -= config.learning_rate * v[i];
                    }
                };
                step(params_layers[l]->weight, velocity_layers[l]->weight, grad_layers[l]->weight);
                step(params_layers[l]->bias, velocity_layers[l]->bias, grad_layers[l]->bias);
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return result;
}

std::string loss_history_csv(std::span<const double> history) {
    std::string out = "epoch,mean_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, history[e]);
        out += buf;
    }
    return out;
}

}  // namespace hsc
