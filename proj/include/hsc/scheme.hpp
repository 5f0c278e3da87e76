#pragma once

#include <string_view>

namespace hsc {

/// Training/evaluation configurations compared in the ablation study.
///   Baseline  flat S-way classifier on the deep features, fine labels only.
///   Scheme1   hierarchical heads, independent cross entropies on the coarse
///             head and the ground-truth group's fine head (no product in the loss).
///   Scheme2   coarse cross entropy + cross entropy of the ground-truth head's
///             joint (product) scores.
///   Scheme3   coarse cross entropy + cross entropy over all S joint scores.
enum class Scheme { Baseline, Scheme1, Scheme2, Scheme3 };

std::string_view to_string(Scheme scheme);
/// Accepts "baseline", "scheme1", "scheme2", "scheme3". Throws Error{ConfigError}.
Scheme parse_scheme(std::string_view name);

inline bool is_hierarchical(Scheme scheme) { return scheme != Scheme::Baseline; }

}  // namespace hsc
