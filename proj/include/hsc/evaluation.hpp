#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsc/data.hpp"
#include "hsc/inference.hpp"
#include "hsc/model.hpp"
#include "hsc/scheme.hpp"
#include "hsc/taxonomy.hpp"

namespace hsc {

/// Predictions of one class and how many of them were right.
struct ClassCounts {
    std::size_t predicted = 0;
    std::size_t correct = 0;

    /// Percentage; empty when the class was never predicted.
    std::optional<double> precision() const;

    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Metrics of one inference unit. Accuracies are micro averages over units,
/// in percent. The flat baseline only fills the Level-2 B fields.
struct UnitReport {
    Unit unit = Unit::Image;
    bool hierarchical = true;
    std::size_t units = 0;

    std::size_t level1_correct = 0;
    std::size_t level2a_correct = 0;
    std::size_t level2b_correct = 0;
    std::size_t level2c_correct = 0;
    std::size_t stop = 0;
    std::size_t proceed = 0;

    std::vector<ClassCounts> group_level1;     // by predicted group
    std::vector<ClassCounts> species_level2a;  // by predicted species
    std::vector<ClassCounts> species_level2b;
    std::vector<std::size_t> species_units;    // by ground-truth species
    std::vector<std::size_t> species_stopped;

    std::optional<double> level1_acc() const;
    std::optional<double> level2a_acc() const;
    double level2b_acc() const;
    std::optional<double> level2c_acc() const;
    /// Percentage of a species' units that stopped at the coarse level.
    std::optional<double> stop_fraction(std::size_t species) const;

    friend bool operator==(const UnitReport&, const UnitReport&) = default;
};

struct EvalReport {
    Scheme scheme = Scheme::Scheme3;
    double tau = 0.0;
    std::vector<std::string> group_names;
    std::vector<std::string> species_names;
    std::vector<std::size_t> species_group;
    std::vector<UnitReport> units;  // image, video_vote, video_avg order

    const UnitReport& unit(Unit u) const;

    std::string to_json() const;
    static EvalReport from_json(std::string_view text);

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Metrics from precomputed per-frame head outputs of a hierarchical model.
EvalReport evaluate_scores(Scheme scheme, std::span<const TrackScores> scores,
                           std::span<const Label> labels, const Taxonomy& taxonomy, double tau);

/// Metrics of the flat baseline from per-frame S-way outputs (image unit only).
EvalReport evaluate_flat_scores(std::span<const std::vector<std::vector<double>>> scores,
                                std::span<const Label> labels, const Taxonomy& taxonomy);

/// Runs the model over the eval split and scores every unit.
/// Throws Error{EmptyEvalSet} or Error{TaxonomyMismatch}.
EvalReport evaluate(const Checkpoint& model, const Dataset& eval, const Taxonomy& taxonomy,
                    double tau);

/// Table layout: model,unit,level1,level2a,level2b,level2c,stop,proceed,threshold.
/// Accuracies with one decimal; "-" where a metric does not apply.
std::string table_csv(std::span<const EvalReport> reports);

struct PerClassCsv {
    std::string level1_precision;   // per group
    std::string level2a_precision;  // per species
    std::string level2b_precision;  // per species
    std::string stop_fraction;      // per species, Level-2 C
};

/// Per-class tables with one column per unit; blank cells for undefined values.
PerClassCsv per_class_csv(const EvalReport& report);

/// Writes report.json, table.csv and the four per-class CSVs into `dir`.
/// `prefix` is prepended to every file name. Throws Error{IoFailure}.
void write_report(const EvalReport& report, const std::string& dir,
                  const std::string& prefix = "");

void write_text_file(const std::string& path, std::string_view contents);
std::string read_text_file(const std::string& path);

}  // namespace hsc
