#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cbx/schema.hpp"

namespace cbx {

// Deterministic map from a concept vector to a task label. Label functions
// read concept *indices* of the schema they are applied to; binary tasks
// encode false -> 0, true -> 1.
struct TaskSpec {
    std::string name;
    DatasetId dataset_id = DatasetId::dsprites;
    int num_classes = 2;
    std::function<int(const ConceptVector&)> label_fn;

    int label(const ConceptVector& c) const { return label_fn(c); }
};

// Tasks: "shape" (y = c_shape), "bin_shape" (binarized shape), and
// "bin_scale_xor_bin_shape".
TaskSpec make_task(DatasetId dataset_id, const std::string& task_name);
std::vector<std::string> task_names();

// Grid reductions used by the data-efficiency and concept-to-task protocols:
// dsprites keeps every other position value and every 5th rotation (36864
// samples); shapes3d keeps every other value of each concept except shape
// (14000 samples).
ConceptSchema make_reduced_schema(DatasetId dataset_id);

// A dataset configuration for the variance-fragility protocol.
struct LoudnessSetup {
    std::string name;
    ConceptSchema schema;
    std::vector<std::string> loud_concepts;    // concepts with outsized pixel variance
    std::vector<std::string> focus_concepts;   // concepts whose accuracy the protocol compares
};

// High/Low spatial variance: identical per-concept cardinalities, but the
// high setup spaces the position values ten grid steps apart.
std::pair<LoudnessSetup, LoudnessSetup> make_spatial_variance_setups();

// Three dsprites_colour setups whose second colour moves closer to green in
// RGB space: purple, blue, turquoise.
std::vector<LoudnessSetup> make_colour_variance_setups();

// Three shapes3d subsets of 16000 samples each with different loudness
// profiles (wide orientation range vs fixed orientation, low vs high scales).
std::vector<LoudnessSetup> make_shapes3d_loudness_setups();

}  // namespace cbx
