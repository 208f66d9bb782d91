#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cbx {

enum class DatasetId { dsprites, dsprites_colour, shapes3d_proxy };

std::string dataset_id_name(DatasetId id);
std::optional<DatasetId> parse_dataset_id(const std::string& s);

using Rgb = std::array<double, 3>;

// One named concept and its ordered value grid. `rgb` is populated only for
// the appended Colour concept of dsprites_colour, where a value is an RGB
// triple rather than a scalar.
struct ConceptDef {
    std::string name;
    std::vector<double> values;
    std::vector<Rgb> rgb;

    int cardinality() const { return static_cast<int>(values.size()); }
};

struct ConceptVector {
    std::vector<int> indices;

    bool operator==(const ConceptVector& o) const { return indices == o.indices; }
};

// Per-concept list of retained value indices, applied to a parent schema.
struct SubsetSpec {
    std::vector<std::vector<int>> retained;
};

struct ConceptSchema {
    DatasetId dataset_id = DatasetId::dsprites;
    std::vector<ConceptDef> concepts;

    int num_concepts() const { return static_cast<int>(concepts.size()); }
    int cardinality(int concept_idx) const { return concepts[concept_idx].cardinality(); }
    int channels() const { return dataset_id == DatasetId::dsprites ? 1 : 3; }

    std::uint64_t total_count() const;
    bool valid_vector(const ConceptVector& c) const;

    // Concepts with at least two values (the only ones a pair can differ in).
    std::vector<int> non_degenerate_concepts() const;

    // FNV-1a over a canonical text form; identifies a schema in manifests.
    std::uint64_t hash() const;
};

// Schemas with the exact concept grids of the two benchmark datasets.
// dsprites_colour appends a 2-valued Colour concept with the given RGB pair.
ConceptSchema build_schema(DatasetId id, std::optional<std::pair<Rgb, Rgb>> colour_pair = std::nullopt);

// Restriction of a schema to retained value indices, order preserved.
ConceptSchema apply_subset(const ConceptSchema& schema, const SubsetSpec& spec);

// Row-major enumeration of the concept product, first concept slowest-varying.
// The two maps are mutually inverse bijections on [0, total_count).
ConceptVector index_to_concepts(const ConceptSchema& schema, std::uint64_t index);
std::uint64_t concepts_to_index(const ConceptSchema& schema, const ConceptVector& c);

}  // namespace cbx
