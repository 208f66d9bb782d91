#include "cbx/tasks.hpp"

#include <stdexcept>

namespace cbx {

namespace {

std::vector<int> all_indices(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

std::vector<int> strided(int start, int stride, int count) {
    std::vector<int> v(count);
    for (int i = 0; i < count; ++i) v[i] = start + stride * i;
    return v;
}

}  // namespace

std::vector<std::string> task_names() {
    return {"shape", "bin_shape", "bin_scale_xor_bin_shape"};
}

TaskSpec make_task(DatasetId dataset_id, const std::string& task_name) {
    TaskSpec t;
    t.name = task_name;
    t.dataset_id = dataset_id;
    const bool dsprites_like = dataset_id == DatasetId::dsprites || dataset_id == DatasetId::dsprites_colour;
    // dsprites concept order: color, shape, scale, ... ; shapes3d order:
    // floor_hue, wall_hue, object_hue, scale, shape, orientation.
    const int shape_idx = dsprites_like ? 1 : 4;
    const int scale_idx = dsprites_like ? 2 : 3;

    if (task_name == "shape") {
        t.num_classes = dsprites_like ? 3 : 4;
        t.label_fn = [shape_idx](const ConceptVector& c) { return c.indices[shape_idx]; };
    } else if (task_name == "bin_shape") {
        t.num_classes = 2;
        if (dsprites_like) {
            // "not a heart": shape index 0 or 1.
            t.label_fn = [shape_idx](const ConceptVector& c) {
                return (c.indices[shape_idx] == 0 || c.indices[shape_idx] == 1) ? 1 : 0;
            };
        } else {
            t.label_fn = [shape_idx](const ConceptVector& c) { return c.indices[shape_idx] >= 2 ? 1 : 0; };
        }
    } else if (task_name == "bin_scale_xor_bin_shape") {
        t.num_classes = 2;
        if (dsprites_like) {
            t.label_fn = [shape_idx, scale_idx](const ConceptVector& c) {
                return ((c.indices[shape_idx] == 2) != (c.indices[scale_idx] > 2)) ? 1 : 0;
            };
        } else {
            t.label_fn = [shape_idx, scale_idx](const ConceptVector& c) {
                return ((c.indices[shape_idx] >= 2) != (c.indices[scale_idx] > 2)) ? 1 : 0;
            };
        }
    } else {
        throw std::invalid_argument("make_task: unknown task name '" + task_name + "'");
    }
    return t;
}

ConceptSchema make_reduced_schema(DatasetId dataset_id) {
    if (dataset_id == DatasetId::dsprites) {
        const ConceptSchema full = build_schema(DatasetId::dsprites);
        SubsetSpec spec;
        spec.retained = {
            all_indices(1),        // color
            all_indices(3),        // shape
            all_indices(6),        // scale
            strided(0, 5, 8),      // rotation: every 5th of 40
            strided(0, 2, 16),     // pos_x: every other of 32
            strided(0, 2, 16),     // pos_y
        };
        return apply_subset(full, spec);
    }
    if (dataset_id == DatasetId::shapes3d_proxy) {
        const ConceptSchema full = build_schema(DatasetId::shapes3d_proxy);
        SubsetSpec spec;
        // Every other value for all concepts except shape. Orientation keeps
        // 7 of its 15 values ({0,2,...,12}) so the total lands on 14000.
        spec.retained = {
            strided(0, 2, 5),   // floor_hue
            strided(0, 2, 5),   // wall_hue
            strided(0, 2, 5),   // object_hue
            strided(0, 2, 4),   // scale
            all_indices(4),     // shape
            strided(0, 2, 7),   // orientation
        };
        return apply_subset(full, spec);
    }
    throw std::invalid_argument("make_reduced_schema: only dsprites and shapes3d_proxy have reduced grids");
}

std::pair<LoudnessSetup, LoudnessSetup> make_spatial_variance_setups() {
    const ConceptSchema full = build_schema(DatasetId::dsprites);
    // The listed shape range [0..3] exceeds the 3 available shapes; clamp.
    SubsetSpec high_spec;
    high_spec.retained = {
        all_indices(1),
        all_indices(3),
        all_indices(6),
        all_indices(20),       // rotation 0..19
        {0, 10, 20, 30},       // pos_x, ten grid steps apart
        {0, 10, 20, 30},       // pos_y
    };
    SubsetSpec low_spec = high_spec;
    low_spec.retained[4] = {0, 1, 2, 3};
    low_spec.retained[5] = {0, 1, 2, 3};

    LoudnessSetup high{"spatial_high", apply_subset(full, high_spec),
                       {"pos_x", "pos_y"},
                       {"shape", "scale", "rotation"}};
    LoudnessSetup low{"spatial_low", apply_subset(full, low_spec),
                      {},
                      {"shape", "scale", "rotation"}};
    return {high, low};
}

std::vector<LoudnessSetup> make_colour_variance_setups() {
    const Rgb green{0.0, 1.0, 0.0};
    const std::vector<std::pair<std::string, Rgb>> seconds = {
        {"colour_purple", Rgb{1.0, 0.0, 1.0}},
        {"colour_blue", Rgb{0.0, 0.0, 1.0}},
        {"colour_turquoise", Rgb{0.0, 1.0, 0.85}},
    };
    SubsetSpec spec;
    spec.retained = {
        all_indices(1),      // color (the legacy white channel concept)
        all_indices(3),      // shape
        {0, 1, 2},           // scale
        {0, 2, 4, 6},        // rotation
        strided(0, 2, 9),    // pos_x: 0,2,...,16
        strided(0, 2, 9),    // pos_y
        all_indices(2),      // colour
    };
    std::vector<LoudnessSetup> setups;
    for (const auto& [name, rgb] : seconds) {
        const ConceptSchema schema = build_schema(DatasetId::dsprites_colour, std::make_pair(green, rgb));
        setups.push_back({name, apply_subset(schema, spec), {}, {"colour"}});
    }
    return setups;
}

std::vector<LoudnessSetup> make_shapes3d_loudness_setups() {
    const ConceptSchema full = build_schema(DatasetId::shapes3d_proxy);

    // All three land on 16000 samples. Task 1 trades hue/scale coverage for a
    // wide orientation range (8 of 15 values); tasks 2 and 3 pin orientation
    // and differ only in which scale values they keep.
    SubsetSpec task1;
    task1.retained = {
        strided(0, 2, 5), strided(0, 2, 5), strided(0, 2, 5),
        strided(0, 2, 4),
        all_indices(4),
        strided(0, 2, 8),
    };
    SubsetSpec task2;
    task2.retained = {
        all_indices(10), all_indices(10), all_indices(10),
        {0, 1, 2, 3},
        all_indices(4),
        {0},
    };
    SubsetSpec task3 = task2;
    task3.retained[3] = {4, 5, 6, 7};

    return {
        {"shapes3d_task1", apply_subset(full, task1), {"orientation"}, {"scale", "shape"}},
        {"shapes3d_task2", apply_subset(full, task2), {}, {"scale", "shape"}},
        {"shapes3d_task3", apply_subset(full, task3), {"scale"}, {"scale", "shape"}},
    };
}

}  // namespace cbx
