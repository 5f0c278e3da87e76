#include "hsc/taxonomy.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hsc/error.hpp"
#include "json.hpp"

namespace hsc {

Taxonomy::Taxonomy(std::vector<Group> groups) : groups_(std::move(groups)) {
    if (groups_.empty()) throw Error(ErrorKind::EmptyTaxonomy, "taxonomy has no groups");
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        const auto& group = groups_[g];
        if (group.species.empty())
            throw Error(ErrorKind::EmptyTaxonomy, "group '" + group.name + "' has no species");
        if (!group_lookup_.emplace(group.name, g).second)
            throw Error(ErrorKind::DuplicateName, "group '" + group.name + "' appears twice");
        offsets_.push_back(species_group_.size());
        for (const auto& name : group.species) {
            if (!species_lookup_.emplace(name, species_group_.size()).second)
                throw Error(ErrorKind::DuplicateName, "species '" + name + "' appears twice");
            species_group_.push_back(g);
        }
    }
}

std::size_t Taxonomy::group_size(std::size_t g) const {
    if (g >= groups_.size())
        throw Error(ErrorKind::IndexOutOfRange, "group " + std::to_string(g));
    return groups_[g].species.size();
}

std::size_t Taxonomy::offset(std::size_t g) const {
    if (g >= groups_.size())
        throw Error(ErrorKind::IndexOutOfRange, "group " + std::to_string(g));
    return offsets_[g];
}

const std::string& Taxonomy::group_name(std::size_t g) const {
    if (g >= groups_.size())
        throw Error(ErrorKind::IndexOutOfRange, "group " + std::to_string(g));
    return groups_[g].name;
}

const std::string& Taxonomy::species_name(std::size_t s) const {
    const auto [g, i] = to_local(s);
    return groups_[g].species[i];
}

std::size_t Taxonomy::to_global(std::size_t g, std::size_t i) const {
    if (g >= groups_.size() || i >= groups_[g].species.size())
        throw Error(ErrorKind::IndexOutOfRange,
                    "(group " + std::to_string(g) + ", local " + std::to_string(i) + ")");
    return offsets_[g] + i;
}

LocalSpecies Taxonomy::to_local(std::size_t s) const {
    if (s >= species_group_.size())
        throw Error(ErrorKind::IndexOutOfRange, "species " + std::to_string(s));
    const std::size_t g = species_group_[s];
    return {g, s - offsets_[g]};
}

std::size_t Taxonomy::group_index(std::string_view name) const {
    auto it = group_lookup_.find(std::string(name));
    if (it == group_lookup_.end())
        throw Error(ErrorKind::IndexOutOfRange, "unknown group '" + std::string(name) + "'");
    return it->second;
}

std::size_t Taxonomy::species_index(std::string_view name) const {
    auto it = species_lookup_.find(std::string(name));
    if (it == species_lookup_.end())
        throw Error(ErrorKind::IndexOutOfRange, "unknown species '" + std::string(name) + "'");
    return it->second;
}

std::uint64_t Taxonomy::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xff;  // field separator, not a valid UTF-8 byte
        h *= 1099511628211ull;
    };
    for (const auto& group : groups_) {
        mix(group.name);
        for (const auto& s : group.species) mix(s);
        mix("\x01");
    }
    return h;
}

std::string Taxonomy::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

std::string Taxonomy::to_json() const {
    nlohmann::ordered_json doc;
    doc["groups"] = nlohmann::ordered_json::array();
    for (const auto& group : groups_)
        doc["groups"].push_back({{"name", group.name}, {"species", group.species}});
    return doc.dump(2) + "\n";
}

bool Taxonomy::group_names_equal(const Taxonomy& other) const {
    if (groups_.size() != other.groups_.size()) return false;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (groups_[g].name != other.groups_[g].name) return false;
        if (groups_[g].species != other.groups_[g].species) return false;
    }
    return true;
}

Taxonomy load_taxonomy(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedDocument, e.what());
    }
    if (!doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array())
        throw Error(ErrorKind::MalformedDocument, "expected an object with a 'groups' array");

    std::vector<Taxonomy::Group> groups;
    for (const auto& entry : doc["groups"]) {
        if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() ||
            !entry.contains("species") || !entry["species"].is_array())
            throw Error(ErrorKind::MalformedDocument,
                        "each group needs a string 'name' and a 'species' array");
        Taxonomy::Group group{entry["name"].get<std::string>(), {}};
        for (const auto& s : entry["species"]) {
            if (!s.is_string())
                throw Error(ErrorKind::MalformedDocument, "species names must be strings");
            group.species.push_back(s.get<std::string>());
        }
        groups.push_back(std::move(group));
    }
    return Taxonomy(std::move(groups));
}

Taxonomy load_taxonomy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_taxonomy(buf.str());
}

Taxonomy fisheries_taxonomy() {
    return Taxonomy({
        {"Skates", {"Big Skate", "Longnose Skate"}},
        {"Sharks", {"Pacific Sleeper Shark", "Spiny Dogfish"}},
        {"Roundfish",
         {"Pacific Cod", "Sablefish", "Walleye Pollock", "Pacific Hake", "Lingcod",
          "Giant Grenadier", "Pacific Grenadier", "Popeye Grenadier", "Kelp Greenling",
          "Great Sculpin", "Yellow Irish Lord"}},
        {"Flatfishes",
         {"Pacific Halibut", "Arrowtooth Flounder", "Kamchatka Flounder", "Greenland Turbot",
          "Petrale Sole", "Rex Sole", "Dover Sole", "Flathead Sole", "Starry Flounder"}},
        {"Rockfishes",
         {"SRB Rockfish", "Shortspine Thornyhead", "Yelloweye Rockfish", "Redbanded Rockfish",
          "Silvergray Rockfish"}},
        {"Invertebrates", {"Giant Octopus", "Sea Star"}},
    });
}

}  // namespace hsc
