#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hsc {

/// Position of a species inside its group's fine head.
struct LocalSpecies {
    std::size_t group = 0;
    std::size_t local = 0;

    friend bool operator==(const LocalSpecies&, const LocalSpecies&) = default;
};

/// Two-level, non-overlapping group -> species tree.
///
/// Species carry a global index in group-major order: every species of
/// group 0, then group 1, and so on. The joint score vector of the model is
/// laid out in this order, so a group's species occupy a contiguous range
/// `[offset(g), offset(g) + group_size(g))`.
///
/// Immutable after construction.
class Taxonomy {
public:
    struct Group {
        std::string name;
        std::vector<std::string> species;
    };

    /// Validates and builds. Throws Error{EmptyTaxonomy} or Error{DuplicateName}.
    explicit Taxonomy(std::vector<Group> groups);

    std::size_t group_count() const noexcept { return groups_.size(); }
    std::size_t species_count() const noexcept { return species_group_.size(); }
    std::size_t group_size(std::size_t g) const;
    std::size_t offset(std::size_t g) const;

    const std::string& group_name(std::size_t g) const;
    const std::string& species_name(std::size_t s) const;
    const std::vector<Group>& groups() const noexcept { return groups_; }

    std::size_t to_global(std::size_t g, std::size_t i) const;
    LocalSpecies to_local(std::size_t s) const;
    std::size_t group_of(std::size_t s) const { return to_local(s).group; }

    /// Name lookups; throw Error{IndexOutOfRange} for unknown names.
    std::size_t group_index(std::string_view name) const;
    std::size_t species_index(std::string_view name) const;

    /// Stable 64-bit FNV-1a digest of the ordered names, used to tie
    /// checkpoints to the taxonomy they were trained on.
    std::uint64_t hash() const;
    std::string hash_hex() const;

    std::string to_json() const;

    friend bool operator==(const Taxonomy& a, const Taxonomy& b) {
        return a.group_names_equal(b);
    }

private:
    bool group_names_equal(const Taxonomy& other) const;

    std::vector<Group> groups_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> species_group_;
    std::unordered_map<std::string, std::size_t> group_lookup_;
    std::unordered_map<std::string, std::size_t> species_lookup_;
};

/// Parses `{"groups":[{"name":..., "species":[...]}, ...]}`.
Taxonomy load_taxonomy(std::string_view text);
Taxonomy load_taxonomy_file(const std::string& path);

/// The 6-group / 31-species longline catch taxonomy.
Taxonomy fisheries_taxonomy();

}  // namespace hsc
