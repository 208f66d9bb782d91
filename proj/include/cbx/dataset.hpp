#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbx/image.hpp"
#include "cbx/render.hpp"
#include "cbx/rng.hpp"
#include "cbx/schema.hpp"

namespace cbx {

struct Sample {
    Image image;
    ConceptVector concepts;
    std::optional<int> label;
};

// Two samples whose concept vectors differ in exactly k concepts.
struct PairSample {
    Sample first;
    Sample second;
    int k = 1;
};

struct Dataset {
    ConceptSchema schema;
    int resolution = 64;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
};

struct GenerateOptions {
    int resolution = 64;
    std::uint64_t seed = 0;      // used only when shuffle is requested
    bool shuffle = false;
    std::uint64_t max_samples = 1'000'000;  // memory guard for full products
};

// Enumerates the full concept product in index order (optionally shuffled) and
// renders every sample. Refuses products above max_samples.
Dataset generate_dataset(const ConceptSchema& schema, const GenerateOptions& opts = {});

// Renders only the given enumeration indices, in the given order.
Dataset generate_subset(const ConceptSchema& schema, const std::vector<std::uint64_t>& indices,
                        int resolution);

// Draws a weak-supervision pair: the first concept vector uniform over the
// product, k distinct concepts of cardinality >= 2 chosen uniformly, and each
// chosen concept's value resampled to a different one.
PairSample sample_pair(const ConceptSchema& schema, int k, Rng& rng, int resolution = 64);

// Concept-vector-only variant; used where images are rendered lazily.
std::pair<ConceptVector, ConceptVector> sample_pair_concepts(const ConceptSchema& schema, int k, Rng& rng);

// The perturbation half of pair sampling: k distinct concepts of cardinality
// >= 2 chosen uniformly, each resampled to a different value.
ConceptVector resample_concepts(const ConceptSchema& schema, const ConceptVector& base, int k, Rng& rng);

// Directory export: images/ (8-bit PNG), concepts.csv (header = concept
// names), schema.json. export -> import round-trips concept vectors exactly
// and images within 1/255 per channel.
void export_dataset(const Dataset& ds, const std::string& dir);
Dataset import_dataset(const std::string& dir);

}  // namespace cbx
