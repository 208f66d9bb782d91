#include "cbx/schema.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cbx {

std::string dataset_id_name(DatasetId id) {
    switch (id) {
        case DatasetId::dsprites: return "dsprites";
        case DatasetId::dsprites_colour: return "dsprites_colour";
        case DatasetId::shapes3d_proxy: return "shapes3d_proxy";
    }
    throw std::logic_error("unreachable dataset id");
}

std::optional<DatasetId> parse_dataset_id(const std::string& s) {
    if (s == "dsprites") return DatasetId::dsprites;
    if (s == "dsprites_colour") return DatasetId::dsprites_colour;
    if (s == "shapes3d_proxy" || s == "shapes3d") return DatasetId::shapes3d_proxy;
    return std::nullopt;
}

std::uint64_t ConceptSchema::total_count() const {
    std::uint64_t n = 1;
    for (const auto& c : concepts) n *= static_cast<std::uint64_t>(c.cardinality());
    return n;
}

bool ConceptSchema::valid_vector(const ConceptVector& c) const {
    if (static_cast<int>(c.indices.size()) != num_concepts()) return false;
    for (int i = 0; i < num_concepts(); ++i) {
        if (c.indices[i] < 0 || c.indices[i] >= cardinality(i)) return false;
    }
    return true;
}

std::vector<int> ConceptSchema::non_degenerate_concepts() const {
    std::vector<int> out;
    for (int i = 0; i < num_concepts(); ++i) {
        if (cardinality(i) >= 2) out.push_back(i);
    }
    return out;
}

std::uint64_t ConceptSchema::hash() const {
    std::ostringstream ss;
    ss << dataset_id_name(dataset_id);
    for (const auto& c : concepts) {
        ss << '|' << c.name << ':';
        for (double v : c.values) ss << v << ',';
        for (const auto& rgb : c.rgb) ss << rgb[0] << ';' << rgb[1] << ';' << rgb[2] << ',';
    }
    const std::string s = ss.str();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * double(i) / double(n - 1);
    return v;
}

std::vector<double> iota_values(int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = double(i);
    return v;
}

ConceptSchema dsprites_base() {
    ConceptSchema s;
    s.dataset_id = DatasetId::dsprites;
    s.concepts.push_back({"color", {1.0}, {}});
    s.concepts.push_back({"shape", iota_values(3), {}});   // square, ellipse, heart
    s.concepts.push_back({"scale", linspace(0.5, 1.0, 6), {}});
    s.concepts.push_back({"rotation", linspace(0.0, 2.0 * M_PI, 40), {}});
    s.concepts.push_back({"pos_x", linspace(0.0, 1.0, 32), {}});
    s.concepts.push_back({"pos_y", linspace(0.0, 1.0, 32), {}});
    return s;
}

ConceptSchema shapes3d_proxy_schema() {
    ConceptSchema s;
    s.dataset_id = DatasetId::shapes3d_proxy;
    // Hue grids exclude 1.0: hue is periodic, so i/10 keeps the ten values
    // perceptually distinct.
    std::vector<double> hue10(10);
    for (int i = 0; i < 10; ++i) hue10[i] = double(i) / 10.0;
    s.concepts.push_back({"floor_hue", hue10, {}});
    s.concepts.push_back({"wall_hue", hue10, {}});
    s.concepts.push_back({"object_hue", hue10, {}});
    s.concepts.push_back({"scale", linspace(0.0, 1.0, 8), {}});
    s.concepts.push_back({"shape", iota_values(4), {}});   // cube, cylinder, sphere, capsule
    s.concepts.push_back({"orientation", linspace(-30.0, 30.0, 15), {}});
    return s;
}

}  // namespace

ConceptSchema build_schema(DatasetId id, std::optional<std::pair<Rgb, Rgb>> colour_pair) {
    if (id == DatasetId::dsprites_colour) {
        if (!colour_pair) throw std::invalid_argument("build_schema: dsprites_colour requires a colour_pair");
        ConceptSchema s = dsprites_base();
        s.dataset_id = DatasetId::dsprites_colour;
        ConceptDef colour;
        colour.name = "colour";
        colour.values = {0.0, 1.0};
        colour.rgb = {colour_pair->first, colour_pair->second};
        s.concepts.push_back(colour);
        return s;
    }
    if (colour_pair) throw std::invalid_argument("build_schema: colour_pair only valid for dsprites_colour");
    switch (id) {
        case DatasetId::dsprites: return dsprites_base();
        case DatasetId::shapes3d_proxy: return shapes3d_proxy_schema();
        default: throw std::invalid_argument("build_schema: unknown dataset id");
    }
}

ConceptSchema apply_subset(const ConceptSchema& schema, const SubsetSpec& spec) {
    if (spec.retained.size() != static_cast<std::size_t>(schema.num_concepts())) {
        throw std::invalid_argument("apply_subset: spec must list retained indices for every concept");
    }
    ConceptSchema out;
    out.dataset_id = schema.dataset_id;
    for (int i = 0; i < schema.num_concepts(); ++i) {
        const auto& keep = spec.retained[i];
        if (keep.empty()) throw std::invalid_argument("apply_subset: empty retained list for concept " + schema.concepts[i].name);
        ConceptDef def;
        def.name = schema.concepts[i].name;
        for (int idx : keep) {
            if (idx < 0 || idx >= schema.cardinality(i)) {
                throw std::out_of_range("apply_subset: retained index out of range for concept " + schema.concepts[i].name);
            }
            def.values.push_back(schema.concepts[i].values[idx]);
            if (!schema.concepts[i].rgb.empty()) def.rgb.push_back(schema.concepts[i].rgb[idx]);
        }
        out.concepts.push_back(std::move(def));
    }
    return out;
}

ConceptVector index_to_concepts(const ConceptSchema& schema, std::uint64_t index) {
    if (index >= schema.total_count()) throw std::out_of_range("index_to_concepts: index out of range");
    ConceptVector c;
    c.indices.resize(schema.num_concepts());
    for (int i = schema.num_concepts() - 1; i >= 0; --i) {
        const std::uint64_t card = static_cast<std::uint64_t>(schema.cardinality(i));
        c.indices[i] = static_cast<int>(index % card);
        index /= card;
    }
    return c;
}

std::uint64_t concepts_to_index(const ConceptSchema& schema, const ConceptVector& c) {
    if (!schema.valid_vector(c)) throw std::out_of_range("concepts_to_index: invalid concept vector");
    std::uint64_t index = 0;
    for (int i = 0; i < schema.num_concepts(); ++i) {
        index = index * static_cast<std::uint64_t>(schema.cardinality(i)) + static_cast<std::uint64_t>(c.indices[i]);
    }
    return index;
}

}  // namespace cbx
