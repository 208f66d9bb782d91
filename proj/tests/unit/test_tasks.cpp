#include "doctest.h"

#include <map>

#include "cbx/image.hpp"
#include "cbx/render.hpp"
#include "cbx/tasks.hpp"

using namespace cbx;

TEST_CASE("dsprites task label formulas") {
    const ConceptSchema s = make_reduced_schema(DatasetId::dsprites);
    const TaskSpec shape = make_task(DatasetId::dsprites, "shape");
    const TaskSpec bin_shape = make_task(DatasetId::dsprites, "bin_shape");
    const TaskSpec xorshape = make_task(DatasetId::dsprites, "bin_scale_xor_bin_shape");

    ConceptVector c{{0, 2, 3, 0, 0, 0}};
    CHECK(shape.label(c) == 2);
    CHECK(shape.num_classes == 3);
    CHECK(bin_shape.label(c) == 0);  // heart
    CHECK(xorshape.label(c) == 0);   // (shape==2) XOR (scale>2) = 1 XOR 1

    c.indices[1] = 1;
    CHECK(bin_shape.label(c) == 1);
    CHECK(xorshape.label(c) == 1);

    CHECK_THROWS(make_task(DatasetId::dsprites, "nope"));

    // Purity and range over the whole reduced grid; shape classes balanced.
    std::map<int, int> counts;
    for (std::uint64_t i = 0; i < s.total_count(); ++i) {
        const ConceptVector cv = index_to_concepts(s, i);
        const int y = shape.label(cv);
        CHECK(y == shape.label(cv));
        CHECK(y >= 0);
        CHECK(y < shape.num_classes);
        counts[y]++;
    }
    CHECK(counts[0] == counts[1]);
    CHECK(counts[1] == counts[2]);
}

TEST_CASE("shapes3d task label formulas") {
    const TaskSpec shape = make_task(DatasetId::shapes3d_proxy, "shape");
    const TaskSpec bin_shape = make_task(DatasetId::shapes3d_proxy, "bin_shape");
    const TaskSpec xorshape = make_task(DatasetId::shapes3d_proxy, "bin_scale_xor_bin_shape");
    CHECK(shape.num_classes == 4);

    ConceptVector c{{0, 0, 0, 3, 2, 0}};
    CHECK(shape.label(c) == 2);
    CHECK(bin_shape.label(c) == 1);
    CHECK(xorshape.label(c) == 0);  // shape>=2 XOR scale>2 = 1 XOR 1
}

TEST_CASE("reduced schemas hit the published sample counts") {
    CHECK(make_reduced_schema(DatasetId::dsprites).total_count() == 36864);
    CHECK(make_reduced_schema(DatasetId::shapes3d_proxy).total_count() == 14000);
}

TEST_CASE("spatial variance setups: equal cardinalities, louder positions") {
    auto [high, low] = make_spatial_variance_setups();
    CHECK(high.schema.total_count() == 5760);
    CHECK(low.schema.total_count() == 5760);
    for (int i = 0; i < high.schema.num_concepts(); ++i) {
        CHECK(high.schema.cardinality(i) == low.schema.cardinality(i));
    }
    for (const auto& name : high.loud_concepts) {
        bool found = false;
        for (const auto& c : high.schema.concepts) found |= c.name == name;
        CHECK(found);
    }

    // Mean pixel distance between adjacent pos_x values is larger in the
    // high-variance setup.
    auto adjacent_step = [](const LoudnessSetup& setup) {
        double total = 0.0;
        int n = 0;
        for (int px = 0; px + 1 < 4; ++px) {
            ConceptVector a{{0, 0, 3, 5, px, 1}};
            ConceptVector b{{0, 0, 3, 5, px + 1, 1}};
            total += l2_diff(render(setup.schema, a, 32), render(setup.schema, b, 32));
            ++n;
        }
        return total / n;
    };
    CHECK(adjacent_step(high) > 2.0 * adjacent_step(low));
}

TEST_CASE("colour variance setups: fixed grid, shrinking RGB distance") {
    const auto setups = make_colour_variance_setups();
    REQUIRE(setups.size() == 3);
    for (const auto& setup : setups) {
        CHECK(setup.schema.total_count() == 5832);
        // Non-colour grids identical across setups.
        for (int i = 0; i + 1 < setup.schema.num_concepts(); ++i) {
            CHECK(setup.schema.concepts[std::size_t(i)].values == setups[0].schema.concepts[std::size_t(i)].values);
        }
    }
    auto rgb_dist = [](const LoudnessSetup& s) {
        const auto& rgb = s.schema.concepts.back().rgb;
        double d = 0.0;
        for (int i = 0; i < 3; ++i) d += (rgb[0][i] - rgb[1][i]) * (rgb[0][i] - rgb[1][i]);
        return std::sqrt(d);
    };
    CHECK(rgb_dist(setups[0]) == doctest::Approx(std::sqrt(3.0)));
    CHECK(rgb_dist(setups[1]) == doctest::Approx(std::sqrt(2.0)));
    CHECK(rgb_dist(setups[2]) == doctest::Approx(0.85));
    CHECK(rgb_dist(setups[0]) > rgb_dist(setups[1]));
    CHECK(rgb_dist(setups[1]) > rgb_dist(setups[2]));
}

TEST_CASE("shapes3d loudness setups: 16000 samples each") {
    const auto setups = make_shapes3d_loudness_setups();
    REQUIRE(setups.size() == 3);
    for (const auto& setup : setups) CHECK(setup.schema.total_count() == 16000);

    // Task 1 keeps a wide orientation range; tasks 2/3 pin it.
    CHECK(setups[0].schema.concepts[5].cardinality() > setups[1].schema.concepts[5].cardinality());
    CHECK(setups[1].schema.concepts[5].cardinality() == 1);
    // Tasks 2 and 3 differ only in the scale values.
    for (int i = 0; i < 6; ++i) {
        if (i == 3) {
            CHECK(setups[1].schema.concepts[std::size_t(i)].values != setups[2].schema.concepts[std::size_t(i)].values);
        } else {
            CHECK(setups[1].schema.concepts[std::size_t(i)].values == setups[2].schema.concepts[std::size_t(i)].values);
        }
    }
}
