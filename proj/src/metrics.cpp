#include "cbx/metrics.hpp"

namespace cbx {

ConceptAccuracy concept_accuracy(const std::vector<ConceptVector>& predictions,
                                 const std::vector<ConceptVector>& truth) {
    if (predictions.size() != truth.size() || truth.empty()) {
        throw std::invalid_argument("concept_accuracy: prediction/truth lengths differ or empty");
    }
    const std::size_t num_concepts = truth.front().indices.size();
    for (const auto& v : predictions) {
        if (v.indices.size() != num_concepts) throw std::invalid_argument("concept_accuracy: concept count mismatch");
    }
    for (const auto& v : truth) {
        if (v.indices.size() != num_concepts) throw std::invalid_argument("concept_accuracy: concept count mismatch");
    }
    ConceptAccuracy acc;
    acc.per_concept.assign(num_concepts, 0.0);
    for (std::size_t s = 0; s < truth.size(); ++s) {
        for (std::size_t c = 0; c < num_concepts; ++c) {
            if (predictions[s].indices[c] == truth[s].indices[c]) acc.per_concept[c] += 1.0;
        }
    }
    for (auto& v : acc.per_concept) v /= double(truth.size());
    for (double v : acc.per_concept) acc.average += v;
    acc.average /= double(num_concepts);
    return acc;
}

}  // namespace cbx
