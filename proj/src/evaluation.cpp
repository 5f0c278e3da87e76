#include "hsc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hsc/error.hpp"
#include "json.hpp"

namespace hsc {

namespace {

std::optional<double> percent(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

UnitReport empty_unit(Unit unit, bool hierarchical, const Taxonomy& taxonomy) {
    UnitReport r;
    r.unit = unit;
    r.hierarchical = hierarchical;
    r.group_level1.assign(taxonomy.group_count(), {});
    r.species_level2a.assign(taxonomy.species_count(), {});
    r.species_level2b.assign(taxonomy.species_count(), {});
    r.species_units.assign(taxonomy.species_count(), 0);
    r.species_stopped.assign(taxonomy.species_count(), 0);
    return r;
}

void tally(ClassCounts& c, bool correct) {
    ++c.predicted;
    if (correct) ++c.correct;
}

void record(UnitReport& r, const UnitSummary& u, const Label& label, double tau) {
    ++r.units;
    ++r.species_units[label.species];

    const bool l1 = u.coarse == label.group;
    const bool l2a = u.level2a == label.species;
    const bool l2b = u.level2b == label.species;
    r.level1_correct += l1;
    r.level2a_correct += l2a;
    r.level2b_correct += l2b;
    tally(r.group_level1[u.coarse], l1);
    tally(r.species_level2a[u.level2a], l2a);
    tally(r.species_level2b[u.level2b], l2b);

    const Prediction p = decide(u, tau);
    if (p.level == Level::Coarse) {
        ++r.stop;
        ++r.species_stopped[label.species];
        r.level2c_correct += p.label == label.group;
    } else {
        ++r.proceed;
        r.level2c_correct += p.label == label.species;
    }
}

EvalReport report_skeleton(Scheme scheme, double tau, const Taxonomy& taxonomy) {
    EvalReport report;
    report.scheme = scheme;
    report.tau = tau;
    for (const auto& g : taxonomy.groups()) {
        report.group_names.push_back(g.name);
        for (const auto& s : g.species) report.species_names.push_back(s);
    }
    for (std::size_t s = 0; s < taxonomy.species_count(); ++s)
        report.species_group.push_back(taxonomy.group_of(s));
    return report;
}

void check_inputs(std::size_t tracks, std::size_t labels, const Taxonomy& taxonomy,
                  std::span<const Label> all_labels) {
    if (tracks == 0) throw Error(ErrorKind::EmptyEvalSet, "no evaluation tracks");
    if (tracks != labels)
        throw Error(ErrorKind::ShapeMismatch, "one label is needed per track");
    for (const auto& l : all_labels) check_label(taxonomy, l);
}

}  // namespace

std::optional<double> ClassCounts::precision() const { return percent(correct, predicted); }

std::optional<double> UnitReport::level1_acc() const {
    return hierarchical ? percent(level1_correct, units) : std::nullopt;
}
std::optional<double> UnitReport::level2a_acc() const {
    return hierarchical ? percent(level2a_correct, units) : std::nullopt;
}
double UnitReport::level2b_acc() const { return percent(level2b_correct, units).value_or(0.0); }
std::optional<double> UnitReport::level2c_acc() const {
    return hierarchical ? percent(level2c_correct, units) : std::nullopt;
}
std::optional<double> UnitReport::stop_fraction(std::size_t species) const {
    if (!hierarchical) return std::nullopt;
    return percent(species_stopped.at(species), species_units.at(species));
}

const UnitReport& EvalReport::unit(Unit u) const {
    for (const auto& r : units)
        if (r.unit == u) return r;
    throw Error(ErrorKind::IndexOutOfRange, "report has no " + std::string(to_string(u)) + " unit");
}

EvalReport evaluate_scores(Scheme scheme, std::span<const TrackScores> scores,
                           std::span<const Label> labels, const Taxonomy& taxonomy, double tau) {
    check_inputs(scores.size(), labels.size(), taxonomy, labels);
    if (!std::isfinite(tau) || tau < 0.0)
        throw Error(ErrorKind::InvalidThreshold, "threshold must be finite and >= 0");

    EvalReport report = report_skeleton(scheme, tau, taxonomy);
    UnitReport image = empty_unit(Unit::Image, true, taxonomy);
    UnitReport vote = empty_unit(Unit::VideoVote, true, taxonomy);
    UnitReport avg = empty_unit(Unit::VideoAvg, true, taxonomy);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        for (const auto& frame : scores[k]) record(image, select_image(frame, taxonomy), labels[k], tau);
        record(vote, aggregate_vote(scores[k], taxonomy), labels[k], tau);
        record(avg, aggregate_avg(scores[k], taxonomy).summary, labels[k], tau);
    }
    report.units = {std::move(image), std::move(vote), std::move(avg)};
    return report;
}

EvalReport evaluate_flat_scores(std::span<const std::vector<std::vector<double>>> scores,
                                std::span<const Label> labels, const Taxonomy& taxonomy) {
    check_inputs(scores.size(), labels.size(), taxonomy, labels);
    EvalReport report = report_skeleton(Scheme::Baseline, 0.0, taxonomy);
    UnitReport image = empty_unit(Unit::Image, false, taxonomy);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        for (const auto& frame : scores[k]) {
            if (frame.size() != taxonomy.species_count())
                throw Error(ErrorKind::ShapeMismatch, "flat scores do not match the species count");
            const auto s =
                static_cast<std::size_t>(std::max_element(frame.begin(), frame.end()) - frame.begin());
            const auto& label = labels[k];
            ++image.units;
            ++image.species_units[label.species];
            image.level2b_correct += s == label.species;
            tally(image.species_level2b[s], s == label.species);
        }
    }
    report.units = {std::move(image)};
    return report;
}

EvalReport evaluate(const Checkpoint& model, const Dataset& eval, const Taxonomy& taxonomy,
                    double tau) {
    if (eval.empty()) throw Error(ErrorKind::EmptyEvalSet, "no evaluation tracks");
    check_compatible(model.params, taxonomy);
    std::vector<Label> labels;
    for (const auto& track : eval.tracks) {
        if (track.frames.empty()) throw Error(ErrorKind::EmptyTrack, "track " + track.id);
        labels.push_back(track.label);
    }

    if (is_hierarchical(model.scheme))
        return evaluate_scores(model.scheme, score_tracks(model.params, eval), labels, taxonomy,
                               tau);

    std::vector<std::vector<std::vector<double>>> flat;
    for (const auto& track : eval.tracks) {
        auto& per_frame = flat.emplace_back();
        for (const auto& frame : track.frames)
            per_frame.push_back(forward_flat(model.params, frame.features));
    }
    return evaluate_flat_scores(flat, labels, taxonomy);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::ordered_json;

ordered_json counts_json(const std::vector<ClassCounts>& counts) {
    ordered_json a = ordered_json::array();
    for (const auto& c : counts) a.push_back({c.predicted, c.correct});
    return a;
}

std::vector<ClassCounts> counts_from(const nlohmann::json& j) {
    std::vector<ClassCounts> out;
    for (const auto& pair : j) out.push_back({pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()});
    return out;
}

ordered_json optional_json(std::optional<double> v) { return v ? ordered_json(*v) : ordered_json(); }

Unit parse_unit(const std::string& name) {
    for (Unit u : {Unit::Image, Unit::VideoAvg, Unit::VideoVote})
        if (to_string(u) == name) return u;
    throw Error(ErrorKind::MalformedDocument, "unknown unit '" + name + "'");
}

}  // namespace

std::string EvalReport::to_json() const {
    ordered_json doc;
    doc["scheme"] = std::string(to_string(scheme));
    doc["threshold"] = tau;
    doc["groups"] = group_names;
    doc["species"] = species_names;
    doc["species_group"] = species_group;
    doc["units"] = ordered_json::array();
    for (const auto& r : units) {
        ordered_json u;
        u["unit"] = std::string(to_string(r.unit));
        u["hierarchical"] = r.hierarchical;
        u["units"] = r.units;
        u["level1_acc"] = optional_json(r.level1_acc());
        u["level2a_acc"] = optional_json(r.level2a_acc());
        u["level2b_acc"] = r.level2b_acc();
        u["level2c_acc"] = optional_json(r.level2c_acc());
        u["level1_correct"] = r.level1_correct;
        u["level2a_correct"] = r.level2a_correct;
        u["level2b_correct"] = r.level2b_correct;
        u["level2c_correct"] = r.level2c_correct;
        u["stop"] = r.stop;
        u["proceed"] = r.proceed;
        u["group_level1"] = counts_json(r.group_level1);
        u["species_level2a"] = counts_json(r.species_level2a);
        u["species_level2b"] = counts_json(r.species_level2b);
        u["species_units"] = r.species_units;
        u["species_stopped"] = r.species_stopped;
        doc["units"].push_back(std::move(u));
    }
    return doc.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
    EvalReport report;
    try {
        const auto doc = nlohmann::json::parse(text);
        report.scheme = parse_scheme(doc.at("scheme").get<std::string>());
        report.tau = doc.at("threshold").get<double>();
        report.group_names = doc.at("groups").get<std::vector<std::string>>();
        report.species_names = doc.at("species").get<std::vector<std::string>>();
        report.species_group = doc.at("species_group").get<std::vector<std::size_t>>();
        for (const auto& u : doc.at("units")) {
            UnitReport r;
            r.unit = parse_unit(u.at("unit").get<std::string>());
            r.hierarchical = u.at("hierarchical").get<bool>();
            r.units = u.at("units").get<std::size_t>();
            r.level1_correct = u.at("level1_correct").get<std::size_t>();
            r.level2a_correct = u.at("level2a_correct").get<std::size_t>();
            r.level2b_correct = u.at("level2b_correct").get<std::size_t>();
            r.level2c_correct = u.at("level2c_correct").get<std::size_t>();
            r.stop = u.at("stop").get<std::size_t>();
            r.proceed = u.at("proceed").get<std::size_t>();
            r.group_level1 = counts_from(u.at("group_level1"));
            r.species_level2a = counts_from(u.at("species_level2a"));
            r.species_level2b = counts_from(u.at("species_level2b"));
            r.species_units = u.at("species_units").get<std::vector<std::size_t>>();
            r.species_stopped = u.at("species_stopped").get<std::vector<std::size_t>>();
            report.units.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedDocument, std::string("report: ") + e.what());
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fixed1(std::optional<double> v, const char* missing) {
    if (!v) return missing;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *v);
    return buf;
}

std::string model_label(Scheme scheme) {
    switch (scheme) {
        case Scheme::Baseline: return "Baseline";
        case Scheme::Scheme1: return "Scheme-1";
        case Scheme::Scheme2: return "Scheme-2";
        case Scheme::Scheme3: return "Scheme-3";
    }
    return "unknown";
}

// Quotes a CSV field when it contains a separator or quote.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

const Unit kTableOrder[] = {Unit::Image, Unit::VideoVote, Unit::VideoAvg};

}  // namespace

std::string table_csv(std::span<const EvalReport> reports) {
    std::string out = "model,unit,level1,level2a,level2b,level2c,stop,proceed,threshold\n";
    for (const auto& report : reports) {
        for (Unit u : kTableOrder) {
            const auto it = std::find_if(report.units.begin(), report.units.end(),
                                         [u](const UnitReport& r) { return r.unit == u; });
            if (it == report.units.end()) continue;
            const UnitReport& r = *it;
            out += model_label(report.scheme) + "," + std::string(table_label(u)) + ",";
            out += fixed1(r.level1_acc(), "-") + ",";
            out += fixed1(r.level2a_acc(), "-") + ",";
            out += fixed1(r.level2b_acc(), "-") + ",";
            out += fixed1(r.level2c_acc(), "-") + ",";
            if (r.hierarchical) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", r.stop, r.proceed, report.tau);
                out += buf;
            } else {
                out += "-,-,-\n";
            }
        }
    }
    return out;
}

PerClassCsv per_class_csv(const EvalReport& report) {
    std::vector<const UnitReport*> cols;
    std::string header;
    for (Unit u : kTableOrder)
        for (const auto& r : report.units)
            if (r.unit == u) {
                cols.push_back(&r);
                header += "," + std::string(table_label(u));
            }

    PerClassCsv csv;
    csv.level1_precision = "group" + header + "\n";
    for (std::size_t g = 0; g < report.group_names.size(); ++g) {
        csv.level1_precision += csv_field(report.group_names[g]);
        for (const auto* r : cols)
            csv.level1_precision +=
                "," + (r->hierarchical ? fixed1(r->group_level1[g].precision(), "") : std::string());
        csv.level1_precision += "\n";
    }

    auto species_table = [&](auto value) {
        std::string t = "species,group" + header + "\n";
        for (std::size_t s = 0; s < report.species_names.size(); ++s) {
            t += csv_field(report.species_names[s]) + "," +
                 csv_field(report.group_names.at(report.species_group.at(s)));
            for (const auto* r : cols) t += "," + fixed1(value(*r, s), "");
            t += "\n";
        }
        return t;
    };
    csv.level2a_precision = species_table([](const UnitReport& r, std::size_t s) {
        return r.hierarchical ? r.species_level2a[s].precision() : std::nullopt;
    });
    csv.level2b_precision = species_table(
        [](const UnitReport& r, std::size_t s) { return r.species_level2b[s].precision(); });
    csv.stop_fraction = species_table(
        [](const UnitReport& r, std::size_t s) { return r.stop_fraction(s); });
    return csv;
}

void write_text_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_report(const EvalReport& report, const std::string& dir, const std::string& prefix) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir + ": " + ec.message());
    const std::filesystem::path base(dir);
    auto path = [&](const char* name) { return (base / (prefix + name)).string(); };

    write_text_file(path("report.json"), report.to_json());
    write_text_file(path("table.csv"), table_csv(std::span(&report, 1)));
    const auto csv = per_class_csv(report);
    write_text_file(path("level1_precision.csv"), csv.level1_precision);
    write_text_file(path("level2a_precision.csv"), csv.level2a_precision);
    write_text_file(path("level2b_precision.csv"), csv.level2b_precision);
    write_text_file(path("stop_fraction.csv"), csv.stop_fraction);
}

}  // namespace hsc
