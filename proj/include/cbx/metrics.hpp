#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbx/schema.hpp"

namespace cbx {

// One evaluation checkpoint, indexed by training step or labelled fraction.
struct MetricRecord {
    double index = 0.0;
    std::vector<double> per_concept;
    double average = std::numeric_limits<double>::quiet_NaN();
    double task_accuracy = std::numeric_limits<double>::quiet_NaN();
    double loss = std::numeric_limits<double>::quiet_NaN();
};

struct MetricSeries {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<std::string> concept_names;
    std::vector<MetricRecord> records;

    void add(MetricRecord r) {
        if (!records.empty() && !(r.index > records.back().index)) {
            throw std::invalid_argument("MetricSeries: indices must be strictly increasing");
        }
        for (double a : r.per_concept) {
            if (a < 0.0 || a > 1.0) throw std::invalid_argument("MetricSeries: accuracy outside [0,1]");
        }
        records.push_back(std::move(r));
    }
};

struct ConceptAccuracy {
    std::vector<double> per_concept;
    double average = 0.0;
};

// Per-concept exact-match rate plus the unweighted mean over concepts.
ConceptAccuracy concept_accuracy(const std::vector<ConceptVector>& predictions,
                                 const std::vector<ConceptVector>& truth);

}  // namespace cbx
