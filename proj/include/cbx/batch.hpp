#pragma once

#include <vector>

#include "cbx/dataset.hpp"
#include "cbx/nn.hpp"
#include "cbx/tasks.hpp"

namespace cbx {

// Nets consume images flattened channel-major (c, y, x), one sample per row.
void image_to_row(const Image& img, double* dst);
Image row_to_image(const double* src, int height, int width, int channels);

Mat dataset_to_matrix(const Dataset& ds);
Mat images_to_matrix(const std::vector<Image>& images);

std::vector<int> task_labels(const Dataset& ds, const TaskSpec& task);
std::vector<ConceptVector> dataset_concepts(const Dataset& ds);

// One-hot encoding of a concept vector under its schema, concatenated across
// concepts (dimension = sum of cardinalities).
Mat concepts_to_onehot(const std::vector<ConceptVector>& concepts, const ConceptSchema& schema);

}  // namespace cbx
