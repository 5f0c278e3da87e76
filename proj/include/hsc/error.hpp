#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsc {

enum class ErrorKind {
    DuplicateName,
    EmptyTaxonomy,
    MalformedDocument,
    IndexOutOfRange,
    EmptyInput,
    NonFiniteInput,
    ShapeMismatch,
    DimensionMismatch,
    NonFiniteActivation,
    LabelOutOfRange,
    InconsistentLabels,
    EmptyDataset,
    DivergedTraining,
    EmptyTrack,
    InvalidThreshold,
    EmptyEvalSet,
    TaxonomyMismatch,
    IoFailure,
    InfeasibleConfig,
    SpeciesTooSmall,
    MalformedRecord,
    UnknownCommand,
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

// Every module reports failures through this one exception type; `kind()`
// lets callers and tests discriminate without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hsc
