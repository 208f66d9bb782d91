#include "cbx/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cbx/png_io.hpp"
#include "cbx/schema_json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cbx {

nlohmann::json schema_to_json(const ConceptSchema& schema) {
    json j;
    j["dataset_id"] = dataset_id_name(schema.dataset_id);
    json cs = json::array();
    for (const auto& c : schema.concepts) {
        json jc;
        jc["name"] = c.name;
        jc["values"] = c.values;
        if (!c.rgb.empty()) {
            json rgbs = json::array();
            for (const auto& rgb : c.rgb) rgbs.push_back({rgb[0], rgb[1], rgb[2]});
            jc["rgb"] = rgbs;
        }
        cs.push_back(jc);
    }
    j["concepts"] = cs;
    return j;
}

ConceptSchema schema_from_json(const nlohmann::json& j) {
    ConceptSchema s;
    const auto id = parse_dataset_id(j.at("dataset_id").get<std::string>());
    if (!id) throw std::runtime_error("schema_from_json: unknown dataset_id");
    s.dataset_id = *id;
    for (const auto& jc : j.at("concepts")) {
        ConceptDef def;
        def.name = jc.at("name").get<std::string>();
        def.values = jc.at("values").get<std::vector<double>>();
        if (jc.contains("rgb")) {
            for (const auto& r : jc.at("rgb")) {
                def.rgb.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()});
            }
        }
        if (def.values.empty()) throw std::runtime_error("schema_from_json: concept with no values");
        s.concepts.push_back(std::move(def));
    }
    return s;
}

Dataset generate_dataset(const ConceptSchema& schema, const GenerateOptions& opts) {
    const std::uint64_t total = schema.total_count();
    if (total > opts.max_samples) {
        std::ostringstream msg;
        msg << "generate_dataset: product " << total << " exceeds cap " << opts.max_samples
            << "; use generate_subset or raise max_samples";
        throw std::length_error(msg.str());
    }
    std::vector<std::uint64_t> order(total);
    for (std::uint64_t i = 0; i < total; ++i) order[i] = i;
    if (opts.shuffle) {
        Rng rng(opts.seed);
        rng.shuffle(order);
    }
    return generate_subset(schema, order, opts.resolution);
}

Dataset generate_subset(const ConceptSchema& schema, const std::vector<std::uint64_t>& indices,
                        int resolution) {
    Dataset ds;
    ds.schema = schema;
    ds.resolution = resolution;
    ds.samples.reserve(indices.size());
    for (std::uint64_t idx : indices) {
        Sample s;
        s.concepts = index_to_concepts(schema, idx);
        s.image = render(schema, s.concepts, resolution);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

ConceptVector resample_concepts(const ConceptSchema& schema, const ConceptVector& base, int k, Rng& rng) {
    const auto eligible = schema.non_degenerate_concepts();
    if (k < 1 || k > static_cast<int>(eligible.size())) {
        throw std::invalid_argument("sample_pair: k must be in [1, #concepts with >=2 values]");
    }
    // Choose k distinct eligible concepts by partial Fisher-Yates.
    std::vector<int> pool = eligible;
    ConceptVector second = base;
    for (int chosen = 0; chosen < k; ++chosen) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(pool.size()));
        const int concept_idx = pool[j];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
        const int card = schema.cardinality(concept_idx);
        // Resample to a strictly different value.
        int offset = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(card - 1)));
        second.indices[concept_idx] = (base.indices[concept_idx] + offset) % card;
    }
    return second;
}

std::pair<ConceptVector, ConceptVector> sample_pair_concepts(const ConceptSchema& schema, int k, Rng& rng) {
    ConceptVector first = index_to_concepts(schema, rng.uniform_int(schema.total_count()));
    ConceptVector second = resample_concepts(schema, first, k, rng);
    return {first, second};
}

PairSample sample_pair(const ConceptSchema& schema, int k, Rng& rng, int resolution) {
    auto [c1, c2] = sample_pair_concepts(schema, k, rng);
    PairSample pair;
    pair.k = k;
    pair.first.concepts = c1;
    pair.first.image = render(schema, c1, resolution);
    pair.second.concepts = c2;
    pair.second.image = render(schema, c2, resolution);
    return pair;
}

namespace {

std::string image_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu.png", i);
    return buf;
}

}  // namespace

void export_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");

    {
        std::ofstream out(fs::path(dir) / "schema.json");
        json j = schema_to_json(ds.schema);
        j["resolution"] = ds.resolution;
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "concepts.csv");
        for (int i = 0; i < ds.schema.num_concepts(); ++i) {
            out << (i ? "," : "") << ds.schema.concepts[i].name;
        }
        out << "\n";
        for (const auto& s : ds.samples) {
            for (std::size_t i = 0; i < s.concepts.indices.size(); ++i) {
                out << (i ? "," : "") << s.concepts.indices[i];
            }
            out << "\n";
        }
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        write_png((fs::path(dir) / "images" / image_name(i)).string(), ds.samples[i].image);
    }
}

Dataset import_dataset(const std::string& dir) {
    Dataset ds;
    {
        std::ifstream in(fs::path(dir) / "schema.json");
        if (!in) throw std::runtime_error("import_dataset: missing schema.json in " + dir);
        json j = json::parse(in);
        ds.schema = schema_from_json(j);
        ds.resolution = j.value("resolution", 64);
    }
    std::ifstream in(fs::path(dir) / "concepts.csv");
    if (!in) throw std::runtime_error("import_dataset: missing concepts.csv in " + dir);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("import_dataset: empty concepts.csv");
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Sample s;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) s.concepts.indices.push_back(std::stoi(cell));
        if (!ds.schema.valid_vector(s.concepts)) {
            throw std::runtime_error("import_dataset: row " + std::to_string(row) + " invalid for schema");
        }
        s.image = read_png((fs::path(dir) / "images" / image_name(row)).string());
        ds.samples.push_back(std::move(s));
        ++row;
    }
    return ds;
}

}  // namespace cbx
