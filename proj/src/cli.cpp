#include "hsc/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hsc/error.hpp"
#include "hsc/inference.hpp"
#include "hsc/rng.hpp"
#include "json.hpp"

namespace hsc {

namespace fs = std::filesystem;

RunConfig RunConfig::from_json(std::string_view text) {
    RunConfig c;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw Error(ErrorKind::ConfigError, "run config must be an object");
        auto take = [&j](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        take("taxonomy", c.taxonomy_path);
        take("data", c.data_path);
        take("model", c.model_path);
        take("out", c.out_dir);
        take("seed", c.seed);
        take("split_ratio", c.split_ratio);
        if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
        if (j.contains("schemes")) {
            c.schemes.clear();
            for (const auto& s : j["schemes"]) c.schemes.push_back(parse_scheme(s.get<std::string>()));
        }
        if (j.contains("train")) c.train = TrainConfig::from_json(j["train"].dump(), c.train);
        if (j.contains("gen")) c.gen = GenConfig::from_json(j["gen"].dump(), c.gen);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("run config: ") + e.what());
    }
    return c;
}

Taxonomy RunConfig::load_taxonomy() const {
    return taxonomy_path.empty() ? fisheries_taxonomy() : load_taxonomy_file(taxonomy_path);
}

GenConfig RunConfig::gen_config() const {
    GenConfig g = gen;
    g.seed = derive_seed(seed, "gen");
    g.mode = train.mode;
    if (g.mode == FeatureMode::Trunk) g.dims.input = train.dims.input;
    else {
        g.dims.shallow = train.dims.shallow;
        g.dims.deep = train.dims.deep;
    }
    return g;
}

TrainConfig RunConfig::train_config(Scheme scheme) const {
    TrainConfig t = train;
    t.scheme = scheme;
    // Same seed for every scheme: identical initialization and batch order.
    t.seed = derive_seed(seed, "train");
    return t;
}

std::uint64_t RunConfig::split_seed() const { return derive_seed(seed, "split"); }

SchemeRun run_scheme(const RunConfig& config, Scheme scheme, const Split& split,
                     const Taxonomy& taxonomy) {
    SchemeRun run;
    run.scheme = scheme;
    const auto examples = to_examples(split.train);
    auto trained = train(config.train_config(scheme), examples, taxonomy);
    run.model = {scheme, std::move(trained.params)};
    run.loss_history = std::move(trained.loss_history);
    double tau = 0.0;
    if (is_hierarchical(scheme)) {
        run.threshold = search_threshold(run.model, split.eval, taxonomy);
        tau = run.threshold->tau;
    }
    run.report = evaluate(run.model, split.eval, taxonomy, tau);
    return run;
}

AblationResult run_ablation(const RunConfig& config, bool write_outputs) {
    if (config.schemes.empty()) throw Error(ErrorKind::ConfigError, "no schemes to run");
    const Taxonomy taxonomy = config.load_taxonomy();
    AblationResult result;
    result.dataset = config.data_path.empty() ? generate(taxonomy, config.gen_config())
                                              : load_jsonl(config.data_path, taxonomy);
    if (result.dataset.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no tracks");
    result.split = split_by_track(result.dataset, taxonomy, config.split_ratio, config.split_seed());

    std::vector<EvalReport> reports;
    for (Scheme scheme : config.schemes) {
        result.runs.push_back(run_scheme(config, scheme, result.split, taxonomy));
        reports.push_back(result.runs.back().report);
    }

    if (write_outputs) {
        std::error_code ec;
        fs::create_directories(config.out_dir, ec);
        if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + config.out_dir);
        const fs::path out(config.out_dir);
        write_text_file((out / "table.csv").string(), table_csv(reports));
        for (const auto& run : result.runs) {
            const std::string prefix = std::string(to_string(run.scheme)) + "_";
            write_report(run.report, config.out_dir, prefix);
            write_text_file((out / (prefix + "loss.csv")).string(),
                            loss_history_csv(run.loss_history));
            write_checkpoint_file(run.model, (out / (prefix + "model.json")).string());
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// command line

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scheme;
    std::optional<std::string> data;
    std::optional<std::string> taxonomy;
    std::optional<std::string> out;
    std::optional<std::string> model;
    std::optional<double> threshold;
    std::optional<std::size_t> epochs;
};

void add_flags(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "JSON run configuration");
    cmd.add_option("--seed", f.seed, "top-level seed");
    cmd.add_option("--scheme", f.scheme, "baseline | scheme1 | scheme2 | scheme3");
    cmd.add_option("--data", f.data, "frame JSONL dataset");
    cmd.add_option("--taxonomy", f.taxonomy, "taxonomy JSON (default: built-in)");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_option("--model", f.model, "model checkpoint");
    cmd.add_option("--threshold", f.threshold, "coarse fallback threshold");
    cmd.add_option("--epochs", f.epochs, "training epochs");
}

// Flags > config file > defaults.
RunConfig resolve(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::from_json(read_text_file(f.config));
    if (f.seed) c.seed = *f.seed;
    if (f.scheme) {
        c.train.scheme = parse_scheme(*f.scheme);
        c.schemes = {c.train.scheme};
    }
    if (f.data) c.data_path = *f.data;
    if (f.taxonomy) c.taxonomy_path = *f.taxonomy;
    if (f.out) c.out_dir = *f.out;
    if (f.model) c.model_path = *f.model;
    if (f.threshold) c.threshold = *f.threshold;
    if (f.epochs) c.train.epochs = *f.epochs;
    return c;
}

std::string out_path(const RunConfig& c, const std::string& name) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + c.out_dir);
    return (fs::path(c.out_dir) / name).string();
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw Error(ErrorKind::ConfigError, std::string(flag) + " is required");
}

std::string model_file(const RunConfig& c) {
    return c.model_path.empty() ? out_path(c, "model.json") : c.model_path;
}

double threshold_for(const RunConfig& c, const Checkpoint& model, const Dataset& data,
                     const Taxonomy& taxonomy) {
    if (c.threshold) return *c.threshold;
    if (!is_hierarchical(model.scheme)) return 0.0;
    return search_threshold(model, data, taxonomy).tau;
}

int cmd_gen(const RunConfig& c, std::ostream& out) {
    const Taxonomy taxonomy = c.load_taxonomy();
    const GenConfig g = c.gen_config();
    const Dataset dataset = generate(taxonomy, g);
    save_jsonl(dataset, taxonomy, out_path(c, "dataset.jsonl"));
    write_text_file(out_path(c, "taxonomy.json"), taxonomy.to_json());
    write_text_file(out_path(c, "gen_config.json"), g.to_json());
    out << "wrote " << dataset.tracks.size() << " tracks, " << dataset.frame_count()
        << " frames to " << out_path(c, "dataset.jsonl") << "\n";
    return 0;
}

int cmd_split(const RunConfig& c, std::ostream& out) {
    require(c.data_path, "--data");
    const Taxonomy taxonomy = c.load_taxonomy();
    const Split split =
        split_by_track(load_jsonl(c.data_path, taxonomy), taxonomy, c.split_ratio, c.split_seed());
    save_jsonl(split.train, taxonomy, out_path(c, "train.jsonl"));
    save_jsonl(split.eval, taxonomy, out_path(c, "eval.jsonl"));
    out << "train " << split.train.tracks.size() << " tracks, eval " << split.eval.tracks.size()
        << " tracks\n";
    return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
    require(c.data_path, "--data");
    const Taxonomy taxonomy = c.load_taxonomy();
    const auto examples = to_examples(load_jsonl(c.data_path, taxonomy));
    const TrainConfig tc = c.train_config(c.train.scheme);
    auto result = train(tc, examples, taxonomy);
    const std::string path = model_file(c);
    write_checkpoint_file({tc.scheme, std::move(result.params)}, path);
    write_text_file(out_path(c, "loss.csv"), loss_history_csv(result.loss_history));
    out << "trained " << to_string(tc.scheme) << " for " << tc.epochs << " epochs";
    if (!result.loss_history.empty()) out << ", final loss " << result.loss_history.back();
    out << "; checkpoint " << path << "\n";
    return 0;
}

int cmd_search(const RunConfig& c, std::ostream& out) {
    require(c.data_path, "--data");
    const Taxonomy taxonomy = c.load_taxonomy();
    const Checkpoint model = read_checkpoint_file(model_file(c), taxonomy);
    const ThresholdSearch s = search_threshold(model, load_jsonl(c.data_path, taxonomy), taxonomy);
    nlohmann::ordered_json j;
    j["scheme"] = std::string(to_string(model.scheme));
    j["threshold"] = s.tau;
    j["correct"] = s.correct;
    j["stop"] = s.stop;
    j["proceed"] = s.proceed;
    write_text_file(out_path(c, "threshold.json"), j.dump(2) + "\n");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", s.tau);
    out << buf << "\n";
    return 0;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
    require(c.data_path, "--data");
    const Taxonomy taxonomy = c.load_taxonomy();
    const Checkpoint model = read_checkpoint_file(model_file(c), taxonomy);
    const Dataset data = load_jsonl(c.data_path, taxonomy);
    const EvalReport report = evaluate(model, data, taxonomy, threshold_for(c, model, data, taxonomy));
    write_report(report, c.out_dir);
    out << table_csv(std::span(&report, 1));
    return 0;
}

int cmd_infer(const RunConfig& c, std::ostream& out) {
    require(c.data_path, "--data");
    const Taxonomy taxonomy = c.load_taxonomy();
    const Checkpoint model = read_checkpoint_file(model_file(c), taxonomy);
    const Dataset data = load_jsonl(c.data_path, taxonomy);
    const double tau = threshold_for(c, model, data, taxonomy);
    write_text_file(out_path(c, "predictions.jsonl"), predictions_jsonl(model, data, taxonomy, tau));
    out << "wrote predictions for " << data.tracks.size() << " tracks to "
        << out_path(c, "predictions.jsonl") << "\n";
    return 0;
}

int cmd_ablation(const RunConfig& c, std::ostream& out) {
    const auto result = run_ablation(c, true);
    std::vector<EvalReport> reports;
    for (const auto& run : result.runs) reports.push_back(run.report);
    out << table_csv(reports);
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical species classification: generate, split, train, threshold, "
                 "evaluate"};
    app.name(args.empty() ? "hsc" : args.front());
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&, std::ostream&);
    };
    const Command commands[] = {
        {"gen", "write a synthetic long-tail dataset", cmd_gen},
        {"split", "split a dataset 80/20 by track", cmd_split},
        {"train", "train one scheme and write a checkpoint", cmd_train},
        {"search-threshold", "search the coarse fallback threshold", cmd_search},
        {"eval", "evaluate a checkpoint", cmd_eval},
        {"infer", "write per-track predictions", cmd_infer},
        {"ablation", "run every scheme and write the comparison table", cmd_ablation},
    };
    std::vector<Flags> flags(std::size(commands));
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        subs.push_back(app.add_subcommand(commands[i].name, commands[i].help));
        add_flags(*subs.back(), flags[i]);
    }

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << app.get_name() << ": " << to_string(ErrorKind::UnknownCommand) << ": " << e.what()
            << "\n";
        return 2;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        try {
            return commands[i].run(resolve(flags[i]), out);
        } catch (const Error& e) {
            err << app.get_name() << " " << commands[i].name << ": " << e.what() << "\n";
            return 1;
        } catch (const std::exception& e) {
            err << app.get_name() << " " << commands[i].name << ": " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace hsc
