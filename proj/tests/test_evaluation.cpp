#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "hsc/data.hpp"
#include "hsc/error.hpp"
#include "hsc/evaluation.hpp"
#include "hsc/training.hpp"
#include "test_support.hpp"

using namespace hsc;
using namespace hsc::testing;

namespace {

HeadOutputs one_hot(const Taxonomy& t, const Label& label) {
    HeadOutputs o;
    o.coarse.assign(t.group_count(), 0.0);
    o.coarse[label.group] = 1.0;
    for (std::size_t g = 0; g < t.group_count(); ++g) {
        o.fine_local.emplace_back(t.group_size(g), 0.0);
        o.fine_local.back()[0] = 1.0;
    }
    o.fine_local[label.group].assign(t.group_size(label.group), 0.0);
    o.fine_local[label.group][t.to_local(label.species).local] = 1.0;
    o.joint = joint_scores(t, o.coarse, o.fine_local);
    return o;
}

HeadOutputs uniform(const Taxonomy& t) {
    HeadOutputs o;
    o.coarse.assign(t.group_count(), 1.0 / static_cast<double>(t.group_count()));
    for (std::size_t g = 0; g < t.group_count(); ++g)
        o.fine_local.emplace_back(t.group_size(g), 1.0 / static_cast<double>(t.group_size(g)));
    o.joint = joint_scores(t, o.coarse, o.fine_local);
    return o;
}

std::size_t argmax(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// Vote oracle: count, then mean supporting score, then lowest index.
std::pair<std::size_t, double> vote(const std::vector<std::size_t>& picks,
                                    const std::vector<double>& scores) {
    std::map<std::size_t, std::pair<std::size_t, double>> tally;
    for (std::size_t f = 0; f < picks.size(); ++f) {
        tally[picks[f]].first += 1;
        tally[picks[f]].second += scores[f];
    }
    std::size_t best = 0, best_n = 0;
    double best_mean = -1.0;
    for (const auto& [label, ns] : tally) {
        const double mean = ns.second / static_cast<double>(ns.first);
        if (ns.first > best_n || (ns.first == best_n && mean > best_mean))
            best = label, best_n = ns.first, best_mean = mean;
    }
    return {best, best_mean};
}

struct Counts {
    std::size_t units = 0, l1 = 0, l2a = 0, l2b = 0, l2c = 0, stop = 0;
};

void tally(Counts& c, const Label& y, std::size_t coarse, std::size_t l2a, std::size_t l2b,
           double conf, double tau) {
    ++c.units;
    c.l1 += coarse == y.group;
    c.l2a += l2a == y.species;
    c.l2b += l2b == y.species;
    if (conf < tau) {
        ++c.stop;
        c.l2c += coarse == y.group;
    } else {
        c.l2c += l2b == y.species;
    }
}

// Enumerates every unit's decision directly from the per-frame scores.
std::map<Unit, Counts> enumerate(const std::vector<TrackScores>& scores,
                                 const std::vector<Label>& labels, const Taxonomy& t, double tau) {
    std::map<Unit, Counts> out;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const auto& y = labels[k];
        const auto& frames = scores[k];
        const double T = static_cast<double>(frames.size());
        std::vector<double> p1(t.group_count(), 0.0), p2(t.species_count(), 0.0);
        std::vector<std::size_t> coarse_pick, fine_pick;
        std::vector<double> coarse_score, fine_score;
        for (const auto& f : frames) {
            const std::size_t g = argmax(f.coarse);
            const std::size_t s = argmax(f.joint);
            tally(out[Unit::Image], y, g, t.to_global(g, argmax(f.fine_local[g])), s,
                  f.joint[s], tau);
            for (std::size_t i = 0; i < p1.size(); ++i) p1[i] += f.coarse[i] / T;
            for (std::size_t i = 0; i < p2.size(); ++i) p2[i] += f.joint[i] / T;
            coarse_pick.push_back(g);
            coarse_score.push_back(f.coarse[g]);
            fine_pick.push_back(s);
            fine_score.push_back(f.joint[s]);
        }
        // avg
        const std::size_t g_avg = argmax(p1);
        std::vector<double> fine_mean(t.group_size(g_avg), 0.0);
        for (const auto& f : frames)
            for (std::size_t i = 0; i < fine_mean.size(); ++i) fine_mean[i] += f.fine_local[g_avg][i] / T;
        const std::size_t s_avg = argmax(p2);
        tally(out[Unit::VideoAvg], y, g_avg, t.to_global(g_avg, argmax(fine_mean)), s_avg,
              p2[s_avg], tau);
        // vote
        const std::size_t g_vote = vote(coarse_pick, coarse_score).first;
        const auto [s_vote, s_conf] = vote(fine_pick, fine_score);
        std::vector<std::size_t> local_pick;
        std::vector<double> local_score;
        for (const auto& f : frames) {
            const std::size_t i = argmax(f.fine_local[g_vote]);
            local_pick.push_back(i);
            local_score.push_back(f.fine_local[g_vote][i]);
        }
        const std::size_t a_vote = t.to_global(g_vote, vote(local_pick, local_score).first);
        tally(out[Unit::VideoVote], y, g_vote, a_vote, s_vote, s_conf, tau);
    }
    return out;
}

struct Toy {
    Taxonomy taxonomy = small_taxonomy({2, 3});
    Dataset eval;
    Checkpoint model;
};

Toy trained_toy() {
    Toy toy;
    GenConfig gen;
    gen.tracks_total = 60;
    gen.min_frames = 3;
    gen.max_frames = 6;
    gen.dims.input = 6;
    gen.frame_noise = 2.0;
    const auto data = generate(toy.taxonomy, gen);
    const auto split = split_by_track(data, toy.taxonomy, 0.8, 2);
    TrainConfig config;
    config.epochs = 3;
    config.dims = {6, 8, 8, 6};
    const auto examples = to_examples(split.train);
    toy.model = {Scheme::Scheme3, train(config, examples, toy.taxonomy).params};
    toy.eval = split.eval;
    return toy;
}

}  // namespace

TEST_CASE("perfect model") {
    const auto t = small_taxonomy({2, 3});
    std::vector<TrackScores> scores;
    std::vector<Label> labels;
    for (std::size_t s = 0; s < 5; ++s) {
        const Label y{t.group_of(s), s};
        scores.push_back(TrackScores(3, one_hot(t, y)));
        labels.push_back(y);
    }
    const auto r = evaluate_scores(Scheme::Scheme3, scores, labels, t, 0.5);
    for (const auto& u : r.units) {
        CHECK(*u.level1_acc() == 100.0);
        CHECK(*u.level2a_acc() == 100.0);
        CHECK(u.level2b_acc() == 100.0);
        CHECK(*u.level2c_acc() == 100.0);
        CHECK(u.stop == 0);
    }
    CHECK(r.unit(Unit::Image).units == 15);
    CHECK(r.unit(Unit::VideoAvg).units == 5);
}

TEST_CASE("uniform model predicts index 0 everywhere") {
    const auto t = small_taxonomy({2, 2});
    std::vector<TrackScores> scores;
    std::vector<Label> labels;
    for (std::size_t s = 0; s < 4; ++s) {
        scores.push_back(TrackScores(2, uniform(t)));
        labels.push_back({t.group_of(s), s});
    }
    const auto r = evaluate_scores(Scheme::Scheme3, scores, labels, t, 0.0);
    for (const auto& u : r.units) {
        CHECK(*u.level1_acc() == 50.0);
        CHECK(u.level2b_acc() == 25.0);
        CHECK(u.group_level1[0].predicted == u.units);
        CHECK(u.species_level2b[0].predicted == u.units);
    }
}

TEST_CASE("trained toy model matches the enumeration oracle") {
    const auto toy = trained_toy();
    const auto& t = toy.taxonomy;
    const auto scores = score_tracks(toy.model.params, toy.eval);
    std::vector<Label> labels;
    for (const auto& tr : toy.eval.tracks) labels.push_back(tr.label);
    for (double tau : {0.0, 0.3, 0.55, 0.8, 1.0 + kStopAllEpsilon}) {
        const auto report = evaluate(toy.model, toy.eval, t, tau);
        const auto oracle = enumerate(scores, labels, t, tau);
        for (Unit u : {Unit::Image, Unit::VideoAvg, Unit::VideoVote}) {
            CAPTURE(to_string(u));
            CAPTURE(tau);
            const auto& r = report.unit(u);
            const auto& o = oracle.at(u);
            CHECK(r.units == o.units);
            CHECK(r.level1_correct == o.l1);
            CHECK(r.level2a_correct == o.l2a);
            CHECK(r.level2b_correct == o.l2b);
            CHECK(r.level2c_correct == o.l2c);
            CHECK(r.stop == o.stop);
            CHECK(r.proceed == o.units - o.stop);
        }
    }
}

TEST_CASE("threshold extremes and the Level-2 A bound") {
    const auto toy = trained_toy();
    const auto at_zero = evaluate(toy.model, toy.eval, toy.taxonomy, 0.0);
    const auto at_max = evaluate(toy.model, toy.eval, toy.taxonomy, 1.0 + kStopAllEpsilon);
    for (Unit u : {Unit::Image, Unit::VideoAvg, Unit::VideoVote}) {
        CHECK(at_zero.unit(u).level2c_correct == at_zero.unit(u).level2b_correct);
        CHECK(at_zero.unit(u).stop == 0);
        CHECK(at_max.unit(u).level2c_correct == at_max.unit(u).level1_correct);
        CHECK(at_max.unit(u).proceed == 0);
        CHECK(at_zero.unit(u).level2a_correct <= at_zero.unit(u).level1_correct);
    }
}

TEST_CASE("per-class counts recompose the micro accuracies") {
    const auto toy = trained_toy();
    const auto r = evaluate(toy.model, toy.eval, toy.taxonomy, 0.5);
    for (const auto& u : r.units) {
        std::size_t predicted = 0, correct = 0;
        for (const auto& c : u.species_level2b) predicted += c.predicted, correct += c.correct;
        CHECK(predicted == u.units);
        CHECK(correct == u.level2b_correct);
        std::size_t l1 = 0;
        for (const auto& c : u.group_level1) l1 += c.correct;
        CHECK(l1 == u.level1_correct);
        std::size_t stopped = 0, units = 0;
        for (std::size_t s = 0; s < u.species_units.size(); ++s) {
            stopped += u.species_stopped[s];
            units += u.species_units[s];
            if (u.species_units[s] > 0)
                CHECK(*u.stop_fraction(s) ==
                      doctest::Approx(100.0 * double(u.species_stopped[s]) / double(u.species_units[s])));
            else
                CHECK(!u.stop_fraction(s));
        }
        CHECK(stopped == u.stop);
        CHECK(units == u.units);
    }
}

TEST_CASE("flat baseline report") {
    const auto t = small_taxonomy({1, 2});
    const std::vector<std::vector<std::vector<double>>> scores{
        {{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}}, {{0.1, 0.1, 0.8}}};
    const std::vector<Label> labels{{0, 0}, {1, 2}};
    const auto r = evaluate_flat_scores(scores, labels, t);
    REQUIRE(r.units.size() == 1);
    const auto& u = r.units[0];
    CHECK(u.units == 3);
    CHECK(u.level2b_correct == 2);
    CHECK(!u.level1_acc());
    CHECK(!u.level2c_acc());
    CHECK(table_csv(std::vector<EvalReport>{r}) ==
          "model,unit,level1,level2a,level2b,level2c,stop,proceed,threshold\n"
          "Baseline,img,-,-,66.7,-,-,-,-\n");
}

TEST_CASE("report tables and JSON") {
    const auto toy = trained_toy();
    std::vector<EvalReport> reports;
    for (Scheme s : {Scheme::Scheme1, Scheme::Scheme2, Scheme::Scheme3}) {
        auto r = evaluate(toy.model, toy.eval, toy.taxonomy, 0.5);
        r.scheme = s;
        reports.push_back(r);
    }
    const auto csv = table_csv(reports);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
    CHECK(csv.find("Scheme-2,video*,") != std::string::npos);

    const auto& r = reports.back();
    CHECK(EvalReport::from_json(r.to_json()) == r);

    const auto per_class = per_class_csv(r);
    CHECK(std::count(per_class.level1_precision.begin(), per_class.level1_precision.end(), '\n') ==
          1 + static_cast<long>(toy.taxonomy.group_count()));
    CHECK(std::count(per_class.stop_fraction.begin(), per_class.stop_fraction.end(), '\n') ==
          1 + static_cast<long>(toy.taxonomy.species_count()));

    const auto dir = (std::filesystem::temp_directory_path() / "hsc_report_test").string();
    write_report(r, dir, "x_");
    for (const char* name : {"x_report.json", "x_table.csv", "x_level1_precision.csv",
                             "x_level2a_precision.csv", "x_level2b_precision.csv", "x_stop_fraction.csv"})
        CHECK(std::filesystem::exists(std::filesystem::path(dir) / name));
    CHECK(EvalReport::from_json(read_text_file(dir + "/x_report.json")) == r);
    std::filesystem::remove_all(dir);
}

TEST_CASE("evaluation input errors") {
    const auto toy = trained_toy();
    try {
        evaluate(toy.model, Dataset{}, toy.taxonomy, 0.5);
        FAIL("expected EmptyEvalSet");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyEvalSet);
    }
    try {
        evaluate(toy.model, toy.eval, small_taxonomy({3, 2}), 0.5);
        FAIL("expected TaxonomyMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TaxonomyMismatch);
    }
}
