#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "cbx/dataset.hpp"
#include "cbx/png_io.hpp"
#include "cbx/render.hpp"
#include "cbx/schema.hpp"

using namespace cbx;

namespace {

int hamming(const ConceptVector& a, const ConceptVector& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.indices.size(); ++i) d += a.indices[i] != b.indices[i];
    return d;
}

double centroid_col(const Image& img) {
    double mass = 0.0, weighted = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double v = img.at(y, x, 0);
            mass += v;
            weighted += v * x;
        }
    }
    return weighted / mass;
}

double pixel_mass(const Image& img) {
    double mass = 0.0;
    for (float v : img.pixels) mass += v;
    return mass;
}

struct BBox {
    int x0 = 1 << 30, x1 = -1, y0 = 1 << 30, y1 = -1;
};

BBox nonzero_bbox(const Image& img) {
    BBox b;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.at(y, x, 0) > 0.0f) {
                b.x0 = std::min(b.x0, x);
                b.x1 = std::max(b.x1, x);
                b.y0 = std::min(b.y0, y);
                b.y1 = std::max(b.y1, y);
            }
        }
    }
    return b;
}

// Independent enumeration oracle: an odometer over the cardinalities, run
// forward i steps.
std::vector<int> odometer_at(const std::vector<int>& cards, std::uint64_t i) {
    std::vector<int> digits(cards.size(), 0);
    for (std::uint64_t step = 0; step < i; ++step) {
        for (int pos = int(cards.size()) - 1; pos >= 0; --pos) {
            if (++digits[std::size_t(pos)] < cards[std::size_t(pos)]) break;
            digits[std::size_t(pos)] = 0;
        }
    }
    return digits;
}

}  // namespace

TEST_CASE("dsprites schema matches the published concept grid") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);
    REQUIRE(s.num_concepts() == 6);
    const std::vector<int> cards = {1, 3, 6, 40, 32, 32};
    for (int i = 0; i < 6; ++i) CHECK(s.cardinality(i) == cards[std::size_t(i)]);
    CHECK(s.total_count() == 737280);
    CHECK(s.concepts[0].name == "color");
    CHECK(s.concepts[2].values.front() == doctest::Approx(0.5));
    CHECK(s.concepts[2].values.back() == doctest::Approx(1.0));
    CHECK(s.concepts[3].values.back() == doctest::Approx(2.0 * M_PI));
}

TEST_CASE("shapes3d proxy schema cardinalities") {
    const ConceptSchema s = build_schema(DatasetId::shapes3d_proxy);
    const std::vector<int> cards = {10, 10, 10, 8, 4, 15};
    for (int i = 0; i < 6; ++i) CHECK(s.cardinality(i) == cards[std::size_t(i)]);
    CHECK(s.total_count() == 480000);
    CHECK(s.concepts[5].values.front() == doctest::Approx(-30.0));
    CHECK(s.concepts[5].values.back() == doctest::Approx(30.0));
}

TEST_CASE("dsprites_colour appends the provided RGB pair") {
    const Rgb green{0, 1, 0}, purple{1, 0, 1};
    const ConceptSchema s = build_schema(DatasetId::dsprites_colour, std::make_pair(green, purple));
    REQUIRE(s.num_concepts() == 7);
    CHECK(s.concepts[6].name == "colour");
    CHECK(s.concepts[6].cardinality() == 2);
    CHECK(s.concepts[6].rgb[0] == green);
    CHECK(s.concepts[6].rgb[1] == purple);

    CHECK_THROWS(build_schema(DatasetId::dsprites_colour));
    CHECK_THROWS(build_schema(DatasetId::dsprites, std::make_pair(green, purple)));
}

TEST_CASE("apply_subset reproduces the reduced grid sizes") {
    const ConceptSchema dsprites = build_schema(DatasetId::dsprites);
    SubsetSpec reduced;
    reduced.retained = {{0}, {0, 1, 2}, {0, 1, 2, 3, 4, 5}, {}, {}, {}};
    for (int i = 0; i < 8; ++i) reduced.retained[3].push_back(5 * i);
    for (int i = 0; i < 16; ++i) reduced.retained[4].push_back(2 * i);
    reduced.retained[5] = reduced.retained[4];
    CHECK(apply_subset(dsprites, reduced).total_count() == 36864);

    SubsetSpec identity;
    for (int i = 0; i < dsprites.num_concepts(); ++i) {
        std::vector<int> all(std::size_t(dsprites.cardinality(i)));
        std::iota(all.begin(), all.end(), 0);
        identity.retained.push_back(all);
    }
    const ConceptSchema same = apply_subset(dsprites, identity);
    CHECK(same.total_count() == dsprites.total_count());
    CHECK(same.hash() == dsprites.hash());

    SubsetSpec bad = identity;
    bad.retained[1].clear();
    CHECK_THROWS(apply_subset(dsprites, bad));
    bad = identity;
    bad.retained[1] = {99};
    CHECK_THROWS(apply_subset(dsprites, bad));
}

TEST_CASE("index/concept maps are inverse bijections") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);

    const ConceptVector zero = index_to_concepts(s, 0);
    for (int v : zero.indices) CHECK(v == 0);

    for (std::uint64_t i = 0; i < 100; ++i) {
        CHECK(concepts_to_index(s, index_to_concepts(s, i)) == i);
    }
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::uint64_t i = rng.uniform_int(s.total_count());
        CHECK(concepts_to_index(s, index_to_concepts(s, i)) == i);
    }

    // Last index against the frozen odometer-oracle value.
    const ConceptVector last = index_to_concepts(s, 737279);
    CHECK(last.indices == std::vector<int>{0, 2, 5, 39, 31, 31});
    // Spot-check a mid index against the independent odometer.
    const std::uint64_t mid = 123456;
    CHECK(index_to_concepts(s, mid).indices ==
          odometer_at({1, 3, 6, 40, 32, 32}, mid));

    CHECK_THROWS(index_to_concepts(s, s.total_count()));
}

TEST_CASE("render: dsprites fill is white with anti-aliased edges") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);
    ConceptVector c{{0, 0, 5, 0, 16, 16}};
    const Image img = render(s, c, 64);
    REQUIRE(img.channels == 1);
    int interior = 0, nonzero = 0;
    for (float v : img.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        if (v > 0.0f) ++nonzero;
        if (v == 1.0f) ++interior;
    }
    CHECK(nonzero > 20);
    // The fill colour is white: fully covered pixels are exactly 1.0 and
    // dominate the anti-aliased rim.
    CHECK(interior > nonzero / 2);

    CHECK_THROWS(render(s, c, 48));
}

TEST_CASE("render: position moves the sprite, scale grows it") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);
    const Image left = render(s, ConceptVector{{0, 0, 3, 0, 0, 16}}, 64);
    const Image right = render(s, ConceptVector{{0, 0, 3, 0, 31, 16}}, 64);
    CHECK(centroid_col(right) > centroid_col(left));

    // Translation: stepping pos_x shifts the bounding box without resizing it much.
    const Image a = render(s, ConceptVector{{0, 0, 3, 0, 8, 16}}, 64);
    const Image b = render(s, ConceptVector{{0, 0, 3, 0, 24, 16}}, 64);
    const BBox ba = nonzero_bbox(a), bb = nonzero_bbox(b);
    CHECK(bb.x0 > ba.x0);
    CHECK(bb.x1 > ba.x1);
    CHECK(std::abs((bb.x1 - bb.x0) - (ba.x1 - ba.x0)) <= 1);
    CHECK(std::abs(bb.y0 - ba.y0) <= 1);

    double prev_mass = 0.0;
    for (int scale = 0; scale < 6; ++scale) {
        const double mass = pixel_mass(render(s, ConceptVector{{0, 1, scale, 0, 16, 16}}, 64));
        CHECK(mass >= prev_mass);
        prev_mass = mass;
    }
}

TEST_CASE("render: determinism and shape coverage") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);
    for (int shape = 0; shape < 3; ++shape) {
        const ConceptVector c{{0, shape, 4, 7, 10, 20}};
        const Image a = render(s, c, 64);
        const Image b = render(s, c, 64);
        CHECK(a.pixels == b.pixels);
        CHECK(pixel_mass(a) > 0.0);
    }
}

TEST_CASE("render: shapes3d floor hue only touches the floor band") {
    const ConceptSchema s = build_schema(DatasetId::shapes3d_proxy);
    ConceptVector c{{0, 3, 5, 4, 0, 7}};
    ConceptVector c2 = c;
    c2.indices[0] = 6;  // floor hue only
    const Image a = render(s, c, 64);
    const Image b = render(s, c2, 64);
    REQUIRE(a.channels == 3);
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            bool differs = false;
            for (int ch = 0; ch < 3; ++ch) {
                if (a.at(y, x, ch) != b.at(y, x, ch)) differs = true;
            }
            if (differs) CHECK(y >= a.height / 2);
        }
    }
    // All four object silhouettes rasterize distinctly.
    for (int shape = 0; shape < 4; ++shape) {
        ConceptVector cs = c;
        cs.indices[4] = shape;
        CHECK(pixel_mass(render(s, cs, 64)) > 0.0);
    }
}

TEST_CASE("generate_dataset: determinism, shuffling, memory guard") {
    const ConceptSchema full = build_schema(DatasetId::dsprites);
    SubsetSpec spec;
    spec.retained = {{0}, {0, 1, 2}, {0, 5}, {0, 20}, {4, 12, 20}, {8, 16}};
    const ConceptSchema small = apply_subset(full, spec);
    REQUIRE(small.total_count() == 72);

    GenerateOptions opts;
    opts.resolution = 32;
    const Dataset a = generate_dataset(small, opts);
    const Dataset b = generate_dataset(small, opts);
    REQUIRE(a.size() == 72);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].image.pixels == b.samples[i].image.pixels);
        CHECK(concepts_to_index(small, a.samples[i].concepts) == i);
    }

    GenerateOptions shuffled = opts;
    shuffled.shuffle = true;
    shuffled.seed = 3;
    Dataset c = generate_dataset(small, shuffled);
    std::vector<std::uint64_t> seen;
    for (const auto& sample : c.samples) seen.push_back(concepts_to_index(small, sample.concepts));
    std::vector<std::uint64_t> sorted = seen;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted != seen);  // the permutation actually shuffled
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    GenerateOptions guard = opts;
    guard.max_samples = 10;
    CHECK_THROWS_AS(generate_dataset(small, guard), std::length_error);
}

TEST_CASE("sample_pair: hamming distance equals k, colour never differs") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        auto [c1, c2] = sample_pair_concepts(s, 1, rng);
        CHECK(hamming(c1, c2) == 1);
        CHECK(c1.indices[0] == c2.indices[0]);  // cardinality-1 concept cannot differ
    }
    for (int trial = 0; trial < 1000; ++trial) {
        auto [c1, c2] = sample_pair_concepts(s, 2, rng);
        CHECK(hamming(c1, c2) == 2);
    }
    CHECK_THROWS(sample_pair_concepts(s, 6, rng));  // only 5 non-degenerate concepts

    PairSample p = sample_pair(s, 1, rng, 32);
    CHECK(p.k == 1);
    CHECK(hamming(p.first.concepts, p.second.concepts) == 1);
}

TEST_CASE("sample_pair: differing concept is uniform over the non-degenerate set") {
    const ConceptSchema s = build_schema(DatasetId::dsprites);
    Rng rng(5);
    std::vector<int> counts(6, 0);
    const int draws = 10000;
    for (int trial = 0; trial < draws; ++trial) {
        auto [c1, c2] = sample_pair_concepts(s, 1, rng);
        for (int i = 0; i < 6; ++i) {
            if (c1.indices[i] != c2.indices[i]) ++counts[std::size_t(i)];
        }
    }
    CHECK(counts[0] == 0);
    const double expected = draws / 5.0;
    double chi2 = 0.0;
    for (int i = 1; i < 6; ++i) {
        const double d = counts[std::size_t(i)] - expected;
        chi2 += d * d / expected;
    }
    // dof 4, p > 0.01  <=>  chi2 < 13.277
    CHECK(chi2 < 13.277);
}

TEST_CASE("export/import round trip") {
    const ConceptSchema full = build_schema(DatasetId::shapes3d_proxy);
    SubsetSpec spec;
    spec.retained = {{0, 5}, {2}, {4, 9}, {3}, {0, 2}, {7}};
    const ConceptSchema small = apply_subset(full, spec);
    GenerateOptions opts;
    opts.resolution = 32;
    const Dataset ds = generate_dataset(small, opts);

    const auto dir = std::filesystem::temp_directory_path() / "cbx_export_test";
    std::filesystem::remove_all(dir);
    export_dataset(ds, dir.string());
    const Dataset back = import_dataset(dir.string());

    REQUIRE(back.size() == ds.size());
    CHECK(back.schema.hash() == ds.schema.hash());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.samples[i].concepts == ds.samples[i].concepts);
        REQUIRE(back.samples[i].image.size() == ds.samples[i].image.size());
        float max_err = 0.0f;
        for (std::size_t p = 0; p < ds.samples[i].image.pixels.size(); ++p) {
            max_err = std::max(max_err, std::abs(back.samples[i].image.pixels[p] - ds.samples[i].image.pixels[p]));
        }
        CHECK(max_err <= 1.0f / 255.0f);
    }
    std::filesystem::remove_all(dir);
}
