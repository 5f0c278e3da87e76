#include "hsc/error.hpp"

namespace hsc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DuplicateName: return "DuplicateName";
        case ErrorKind::EmptyTaxonomy: return "EmptyTaxonomy";
        case ErrorKind::MalformedDocument: return "MalformedDocument";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonFiniteActivation: return "NonFiniteActivation";
        case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorKind::InconsistentLabels: return "InconsistentLabels";
        case ErrorKind::EmptyDataset: return "EmptyDataset";
        case ErrorKind::DivergedTraining: return "DivergedTraining";
        case ErrorKind::EmptyTrack: return "EmptyTrack";
        case ErrorKind::InvalidThreshold: return "InvalidThreshold";
        case ErrorKind::EmptyEvalSet: return "EmptyEvalSet";
        case ErrorKind::TaxonomyMismatch: return "TaxonomyMismatch";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::InfeasibleConfig: return "InfeasibleConfig";
        case ErrorKind::SpeciesTooSmall: return "SpeciesTooSmall";
        case ErrorKind::MalformedRecord: return "MalformedRecord";
        case ErrorKind::UnknownCommand: return "UnknownCommand";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace hsc
