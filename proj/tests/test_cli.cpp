#include <algorithm>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "hsc/cli.hpp"
#include "hsc/error.hpp"
#include "hsc/rng.hpp"
#include "json.hpp"

using namespace hsc;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "hsc");
    std::ostringstream out, err;
    const int status = dispatch(args, out, err);
    return {status, out.str(), err.str()};
}

// Scratch directory with a small, fast run configuration.
struct Workspace {
    fs::path dir;
    std::string config;

    explicit Workspace(const std::string& name) {
        dir = fs::temp_directory_path() / name;
        fs::remove_all(dir);
        fs::create_directories(dir);
        config = (dir / "config.json").string();
        write_text_file(config, R"({
  "seed": 7,
  "gen": {"tracks_total": 80, "min_frames": 3, "max_frames": 5},
  "train": {"epochs": 3, "batch_size": 16}
})");
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("unknown commands and bad flags fail") {
    const auto a = run({"frobnicate"});
    CHECK(a.status != 0);
    CHECK(a.err.find("UnknownCommand") != std::string::npos);
    CHECK(run({}).status != 0);
    CHECK(run({"train", "--epochs", "many"}).status != 0);

    const auto missing = run({"train"});
    CHECK(missing.status == 1);
    CHECK(missing.err.find("--data") != std::string::npos);
    CHECK(run({"train", "--scheme", "scheme9", "--data", "x"}).status == 1);
}

TEST_CASE("gen, split, train, search-threshold, eval, infer") {
    Workspace ws("hsc_cli_pipeline");
    const std::string cfg = ws.config, out = ws.dir.string();

    REQUIRE(run({"gen", "--config", cfg, "--out", out}).status == 0);
    CHECK(fs::exists(ws.path("dataset.jsonl")));
    REQUIRE(run({"split", "--config", cfg, "--out", out, "--data", ws.path("dataset.jsonl")}).status == 0);

    REQUIRE(run({"train", "--config", cfg, "--out", out, "--data", ws.path("train.jsonl")}).status == 0);
    const auto loss = read_text_file(ws.path("loss.csv"));
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);

    const auto search = run({"search-threshold", "--config", cfg, "--out", out, "--data",
                             ws.path("eval.jsonl")});
    REQUIRE(search.status == 0);
    const std::string tau = search.out.substr(0, search.out.find('\n'));

    const auto ev = run({"eval", "--config", cfg, "--out", out, "--data", ws.path("eval.jsonl"),
                         "--threshold", tau});
    REQUIRE(ev.status == 0);
    const auto report = EvalReport::from_json(read_text_file(ws.path("report.json")));
    const auto& avg = report.unit(Unit::VideoAvg);
    CHECK(avg.level2c_correct >= avg.level2b_correct);
    const auto th = nlohmann::json::parse(read_text_file(ws.path("threshold.json")));
    CHECK(th["correct"].get<std::size_t>() == avg.level2c_correct);

    REQUIRE(run({"infer", "--config", cfg, "--out", out, "--data", ws.path("eval.jsonl"),
                 "--threshold", tau})
                .status == 0);
    const auto predictions = read_text_file(ws.path("predictions.jsonl"));
    CHECK(predictions.find("\"unit\":\"video_avg\"") != std::string::npos);
}

TEST_CASE("train with zero epochs writes the seeded initialization") {
    Workspace ws("hsc_cli_epochs0");
    const std::string cfg = ws.config, out = ws.dir.string();
    REQUIRE(run({"gen", "--config", cfg, "--out", out}).status == 0);
    REQUIRE(run({"train", "--config", cfg, "--out", out, "--data", ws.path("dataset.jsonl"),
                 "--epochs", "0", "--scheme", "scheme1"})
                .status == 0);

    const auto c = RunConfig::from_json(read_text_file(cfg));
    const auto taxonomy = c.load_taxonomy();
    const auto model = read_checkpoint_file(ws.path("model.json"), taxonomy);
    const auto tc = c.train_config(Scheme::Scheme1);
    CHECK(model.scheme == Scheme::Scheme1);
    CHECK(model.params == init_params(taxonomy, tc.mode, tc.dims, derive_seed(tc.seed, "init")));
}

TEST_CASE("ablation table layout") {
    Workspace ws("hsc_cli_ablation");
    auto c = RunConfig::from_json(read_text_file(ws.config));
    c.schemes = {Scheme::Baseline, Scheme::Scheme1, Scheme::Scheme3};
    c.out_dir = ws.dir.string();
    const auto result = run_ablation(c);
    REQUIRE(result.runs.size() == 3);

    const auto table = read_text_file(ws.path("table.csv"));
    std::istringstream lines(table);
    std::vector<std::string> rows;
    for (std::string line; std::getline(lines, line);) rows.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
    const std::vector<std::string> expected{"model,unit",          "Baseline,img",
                                            "Scheme-1,img",        "Scheme-1,video*",
                                            "Scheme-1,video",      "Scheme-3,img",
                                            "Scheme-3,video*",     "Scheme-3,video"};
    CHECK(rows == expected);
    for (const char* name : {"scheme3_report.json", "scheme3_model.json", "scheme3_loss.csv",
                             "baseline_report.json", "scheme1_stop_fraction.csv"})
        CHECK(fs::exists(ws.path(name)));
}
