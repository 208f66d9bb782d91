#include "cbx/batch.hpp"

#include <stdexcept>

namespace cbx {

void image_to_row(const Image& img, double* dst) {
    const int h = img.height, w = img.width, ch = img.channels;
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                dst[(c * h + y) * w + x] = double(img.at(y, x, c));
            }
        }
    }
}

Image row_to_image(const double* src, int height, int width, int channels) {
    Image img(height, width, channels);
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                img.at(y, x, c) = float(src[(c * height + y) * width + x]);
            }
        }
    }
    return img;
}

Mat dataset_to_matrix(const Dataset& ds) {
    if (ds.samples.empty()) return Mat(0, 0);
    const auto& first = ds.samples.front().image;
    const Eigen::Index dim = Eigen::Index(first.size());
    Mat x(Eigen::Index(ds.samples.size()), dim);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (Eigen::Index(ds.samples[i].image.size()) != dim) {
            throw std::invalid_argument("dataset_to_matrix: inconsistent image shapes");
        }
        image_to_row(ds.samples[i].image, x.row(Eigen::Index(i)).data());
    }
    return x;
}

Mat images_to_matrix(const std::vector<Image>& images) {
    if (images.empty()) return Mat(0, 0);
    const Eigen::Index dim = Eigen::Index(images.front().size());
    Mat x(Eigen::Index(images.size()), dim);
    for (std::size_t i = 0; i < images.size(); ++i) {
        image_to_row(images[i], x.row(Eigen::Index(i)).data());
    }
    return x;
}

std::vector<int> task_labels(const Dataset& ds, const TaskSpec& task) {
    std::vector<int> labels(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        labels[i] = task.label(ds.samples[i].concepts);
        if (labels[i] < 0 || labels[i] >= task.num_classes) {
            throw std::logic_error("task label outside [0, num_classes)");
        }
    }
    return labels;
}

std::vector<ConceptVector> dataset_concepts(const Dataset& ds) {
    std::vector<ConceptVector> out(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) out[i] = ds.samples[i].concepts;
    return out;
}

Mat concepts_to_onehot(const std::vector<ConceptVector>& concepts, const ConceptSchema& schema) {
    int total = 0;
    for (int i = 0; i < schema.num_concepts(); ++i) total += schema.cardinality(i);
    Mat x = Mat::Zero(Eigen::Index(concepts.size()), total);
    for (std::size_t s = 0; s < concepts.size(); ++s) {
        if (!schema.valid_vector(concepts[s])) throw std::invalid_argument("concepts_to_onehot: invalid vector");
        int offset = 0;
        for (int i = 0; i < schema.num_concepts(); ++i) {
            x(Eigen::Index(s), offset + concepts[s].indices[i]) = 1.0;
            offset += schema.cardinality(i);
        }
    }
    return x;
}

}  // namespace cbx
