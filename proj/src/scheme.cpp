#include "hsc/scheme.hpp"

#include <string>

#include "hsc/error.hpp"

namespace hsc {

std::string_view to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Baseline: return "baseline";
        case Scheme::Scheme1: return "scheme1";
        case Scheme::Scheme2: return "scheme2";
        case Scheme::Scheme3: return "scheme3";
    }
    return "unknown";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "baseline") return Scheme::Baseline;
    if (name == "scheme1") return Scheme::Scheme1;
    if (name == "scheme2") return Scheme::Scheme2;
    if (name == "scheme3") return Scheme::Scheme3;
    throw Error(ErrorKind::ConfigError, "unknown scheme '" + std::string(name) + "'");
}

}  // namespace hsc
