#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cbx/batch.hpp"
#include "cbx/cbm.hpp"
#include "cbx/cme.hpp"
#include "cbx/dataset.hpp"
#include "cbx/gaussian.hpp"
#include "cbx/gbt.hpp"
#include "cbx/metrics.hpp"
#include "cbx/render.hpp"
#include "cbx/tasks.hpp"
#include "cbx/vae.hpp"

namespace py = pybind11;
using namespace cbx;

namespace {

DatasetId dataset_id_from_string(const std::string& s) {
    const auto id = parse_dataset_id(s);
    if (!id) throw std::invalid_argument("unknown dataset id '" + s + "'");
    return *id;
}

py::array_t<float> image_to_array(const Image& img) {
    py::array_t<float> out({img.height, img.width, img.channels});
    std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
    return out;
}

Mat array_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Mat m(a.shape(0), a.shape(1));
    for (py::ssize_t r = 0; r < a.shape(0); ++r) {
        for (py::ssize_t c = 0; c < a.shape(1); ++c) m(r, c) = a.at(r, c);
    }
    return m;
}

py::array_t<double> mat_to_array(const Mat& m) {
    py::array_t<double> out({py::ssize_t(m.rows()), py::ssize_t(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.mutable_at(r, c) = m(r, c);
    }
    return out;
}

GaussianPosterior posterior_from(const std::vector<double>& mean, const std::vector<double>& log_var) {
    if (mean.size() != log_var.size()) throw std::invalid_argument("mean/log_variance length mismatch");
    GaussianPosterior g;
    g.mean = Eigen::Map<const Vec>(mean.data(), Eigen::Index(mean.size()));
    g.log_variance = Eigen::Map<const Vec>(log_var.data(), Eigen::Index(log_var.size()));
    return g;
}

ConceptVector vector_from(const std::vector<int>& indices) {
    return ConceptVector{indices};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Concept-annotated synthetic image benchmarks: dataset generation, "
              "concept bottleneck / extraction models, and (weakly supervised) VAEs";

    py::class_<ConceptSchema>(m, "ConceptSchema")
        .def_property_readonly("dataset_id", [](const ConceptSchema& s) { return dataset_id_name(s.dataset_id); })
        .def_property_readonly("concept_names", [](const ConceptSchema& s) {
            std::vector<std::string> names;
            for (const auto& c : s.concepts) names.push_back(c.name);
            return names;
        })
        .def_property_readonly("cardinalities", [](const ConceptSchema& s) {
            std::vector<int> cards;
            for (int i = 0; i < s.num_concepts(); ++i) cards.push_back(s.cardinality(i));
            return cards;
        })
        .def("values", [](const ConceptSchema& s, int concept_idx) { return s.concepts.at(std::size_t(concept_idx)).values; })
        .def("total_count", &ConceptSchema::total_count)
        .def("hash", &ConceptSchema::hash)
        .def("__repr__", [](const ConceptSchema& s) {
            return "<ConceptSchema " + dataset_id_name(s.dataset_id) + ", " +
                   std::to_string(s.num_concepts()) + " concepts, " +
                   std::to_string(s.total_count()) + " combinations>";
        });

    m.def("build_schema",
          [](const std::string& dataset, std::optional<std::pair<Rgb, Rgb>> colour_pair) {
              return build_schema(dataset_id_from_string(dataset), colour_pair);
          },
          py::arg("dataset"), py::arg("colour_pair") = std::nullopt);
    m.def("make_reduced_schema",
          [](const std::string& dataset) { return make_reduced_schema(dataset_id_from_string(dataset)); },
          py::arg("dataset"));
    m.def("apply_subset", [](const ConceptSchema& s, const std::vector<std::vector<int>>& retained) {
        return apply_subset(s, SubsetSpec{retained});
    });

    m.def("index_to_concepts",
          [](const ConceptSchema& s, std::uint64_t i) { return index_to_concepts(s, i).indices; });
    m.def("concepts_to_index",
          [](const ConceptSchema& s, const std::vector<int>& c) { return concepts_to_index(s, vector_from(c)); });

    m.def("render",
          [](const ConceptSchema& s, const std::vector<int>& c, int resolution) {
              return image_to_array(render(s, vector_from(c), resolution));
          },
          py::arg("schema"), py::arg("concepts"), py::arg("resolution") = 64);

    m.def("generate_dataset",
          [](const ConceptSchema& s, int resolution, std::uint64_t seed, bool shuffle,
             std::uint64_t max_samples) {
              GenerateOptions opts;
              opts.resolution = resolution;
              opts.seed = seed;
              opts.shuffle = shuffle;
              opts.max_samples = max_samples;
              const Dataset ds = generate_dataset(s, opts);
              py::array_t<float> images({py::ssize_t(ds.size()), py::ssize_t(resolution),
                                         py::ssize_t(resolution), py::ssize_t(s.channels())});
              py::array_t<int> concepts({py::ssize_t(ds.size()), py::ssize_t(s.num_concepts())});
              for (std::size_t i = 0; i < ds.size(); ++i) {
                  const auto& img = ds.samples[i].image;
                  std::copy(img.pixels.begin(), img.pixels.end(),
                            images.mutable_data(py::ssize_t(i), 0, 0, 0));
                  for (int c = 0; c < s.num_concepts(); ++c) {
                      concepts.mutable_at(py::ssize_t(i), c) = ds.samples[i].concepts.indices[std::size_t(c)];
                  }
              }
              return py::make_tuple(images, concepts);
          },
          py::arg("schema"), py::arg("resolution") = 64, py::arg("seed") = 0,
          py::arg("shuffle") = false, py::arg("max_samples") = 1000000);

    m.def("sample_pair",
          [](const ConceptSchema& s, int k, std::uint64_t seed) {
              Rng rng(seed);
              auto [c1, c2] = sample_pair_concepts(s, k, rng);
              return py::make_tuple(c1.indices, c2.indices);
          },
          py::arg("schema"), py::arg("k"), py::arg("seed") = 0);

    py::class_<TaskSpec>(m, "TaskSpec")
        .def_readonly("name", &TaskSpec::name)
        .def_readonly("num_classes", &TaskSpec::num_classes)
        .def("label", [](const TaskSpec& t, const std::vector<int>& c) { return t.label(vector_from(c)); });
    m.def("make_task", [](const std::string& dataset, const std::string& task) {
        return make_task(dataset_id_from_string(dataset), task);
    });

    m.def("kl_gaussian",
          [](const std::vector<double>& mu_q, const std::vector<double>& lv_q,
             std::optional<std::vector<double>> mu_p, std::optional<std::vector<double>> lv_p) {
              const GaussianPosterior q = posterior_from(mu_q, lv_q);
              const GaussianPosterior p = mu_p && lv_p
                                              ? posterior_from(*mu_p, *lv_p)
                                              : GaussianPosterior::standard_normal(q.dim());
              const KlResult r = kl_gaussian(q, p);
              std::vector<double> per(r.per_dim.data(), r.per_dim.data() + r.per_dim.size());
              return py::make_tuple(per, r.total);
          },
          py::arg("mean_q"), py::arg("log_variance_q"), py::arg("mean_p") = std::nullopt,
          py::arg("log_variance_p") = std::nullopt);

    m.def("product_of_experts", [](double mu1, double var1, double mu2, double var2) {
        double mu, var;
        product_of_experts(mu1, var1, mu2, var2, &mu, &var);
        return py::make_tuple(mu, var);
    });

    m.def("select_shared_set",
          [](const std::vector<double>& mu1, const std::vector<double>& lv1,
             const std::vector<double>& mu2, const std::vector<double>& lv2) {
              const SharedSet s = select_shared_set(posterior_from(mu1, lv1), posterior_from(mu2, lv2));
              return py::make_tuple(s.dims, s.threshold);
          });

    m.def("adaptive_average",
          [](const std::vector<double>& mu1, const std::vector<double>& lv1,
             const std::vector<double>& mu2, const std::vector<double>& lv2,
             const std::vector<int>& dims, const std::string& averaging) {
              SharedSet s;
              s.dims = dims;
              const Averaging avg = averaging == "arithmetic" ? Averaging::arithmetic
                                                              : Averaging::product_of_experts;
              const auto [a, b] = adaptive_average(posterior_from(mu1, lv1), posterior_from(mu2, lv2), s, avg);
              auto unpack = [](const GaussianPosterior& g) {
                  std::vector<double> mean(g.mean.data(), g.mean.data() + g.mean.size());
                  std::vector<double> lv(g.log_variance.data(), g.log_variance.data() + g.log_variance.size());
                  return py::make_tuple(mean, lv);
              };
              return py::make_tuple(unpack(a), unpack(b));
          },
          py::arg("mean1"), py::arg("log_variance1"), py::arg("mean2"), py::arg("log_variance2"),
          py::arg("dims"), py::arg("averaging") = "product_of_experts");

    py::class_<TreeEnsemble>(m, "TreeEnsemble")
        .def_readonly("num_classes", &TreeEnsemble::num_classes)
        .def("predict_proba",
             [](const TreeEnsemble& e, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 return mat_to_array(e.predict_proba(array_to_mat(x)));
             })
        .def("predict",
             [](const TreeEnsemble& e, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 return e.predict(array_to_mat(x));
             });

    m.def("fit_tree_ensemble",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
             const std::vector<int>& labels, int max_depth, int n_rounds, double learning_rate,
             int num_classes) {
              GbtOptions opts;
              opts.max_depth = max_depth;
              opts.n_rounds = n_rounds;
              opts.learning_rate = learning_rate;
              opts.num_classes = num_classes;
              return fit_tree_ensemble(array_to_mat(x), labels, opts);
          },
          py::arg("features"), py::arg("labels"), py::arg("max_depth") = 4, py::arg("n_rounds") = 100,
          py::arg("learning_rate") = 0.1, py::arg("num_classes") = 0);

    m.def("concept_accuracy",
          [](const std::vector<std::vector<int>>& pred, const std::vector<std::vector<int>>& truth) {
              std::vector<ConceptVector> p, t;
              for (const auto& v : pred) p.push_back(vector_from(v));
              for (const auto& v : truth) t.push_back(vector_from(v));
              const auto acc = concept_accuracy(p, t);
              return py::make_tuple(acc.per_concept, acc.average);
          });

    // Compact training entry points; heavier protocol runs live in the CLI.
    py::class_<CBModel>(m, "CBModel")
        .def("predict_concepts",
             [](CBModel& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 std::vector<std::vector<int>> out;
                 for (const auto& cv : model.predict_concepts(array_to_mat(x))) out.push_back(cv.indices);
                 return out;
             })
        .def("predict_label_probs",
             [](CBModel& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 return mat_to_array(model.predict_label_probs(array_to_mat(x)));
             });

    m.def("train_cbm",
          [](const ConceptSchema& schema, int resolution, const std::vector<std::uint64_t>& indices,
             const std::string& task, const std::string& regime, double lambda, int feature_dim,
             int epochs, int batch_size, double learning_rate, std::uint64_t seed) {
              const Dataset ds = generate_subset(schema, indices, resolution);
              CbmTrainOptions opts;
              opts.regime = parse_regime(regime);
              opts.lambda = lambda;
              opts.feature_dim = feature_dim;
              opts.train.epochs = epochs;
              opts.train.batch_size = batch_size;
              opts.train.learning_rate = learning_rate;
              opts.train.seed = seed;
              opts.train.eval_every = 1 << 30;
              auto [model, series] = train_cbm(ds, make_task(schema.dataset_id, task), opts);
              return model;
          },
          py::arg("schema"), py::arg("resolution"), py::arg("indices"), py::arg("task"),
          py::arg("regime") = "joint", py::arg("lambda") = 1.0, py::arg("feature_dim") = 64,
          py::arg("epochs") = 5, py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3,
          py::arg("seed") = 0);

    py::class_<VAEModel>(m, "VAEModel")
        .def_readonly("latent_dim", &VAEModel::latent_dim)
        .def("encode_means",
             [](VAEModel& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
                 return mat_to_array(model.encode_means(array_to_mat(x)));
             })
        .def("decode_means",
             [](VAEModel& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& z) {
                 return mat_to_array(model.decode_means(array_to_mat(z)));
             });

    m.def("train_vae",
          [](const ConceptSchema& schema, int resolution, const std::vector<std::uint64_t>& indices,
             int latent_dim, double beta, int epochs, int batch_size, double learning_rate,
             std::uint64_t seed) {
              const Dataset ds = generate_subset(schema, indices, resolution);
              VaeTrainOptions opts;
              opts.model.latent_dim = latent_dim;
              opts.model.beta = beta;
              opts.model.hidden = 64;
              opts.train.epochs = epochs;
              opts.train.batch_size = batch_size;
              opts.train.learning_rate = learning_rate;
              opts.train.seed = seed;
              opts.train.eval_every = 1 << 30;
              auto [model, series] = train_vae(ds, opts);
              return model;
          },
          py::arg("schema"), py::arg("resolution"), py::arg("indices"), py::arg("latent_dim") = 10,
          py::arg("beta") = 1.0, py::arg("epochs") = 5, py::arg("batch_size") = 32,
          py::arg("learning_rate") = 1e-3, py::arg("seed") = 0);

    m.def("train_wvae",
          [](const ConceptSchema& schema, int resolution, int k, int latent_dim, double beta,
             const std::string& averaging, int steps, int batch_size, double learning_rate,
             std::uint64_t seed) {
              PairSampler pairs(schema, k, resolution);
              VaeTrainOptions opts;
              opts.model.latent_dim = latent_dim;
              opts.model.beta = beta;
              opts.model.hidden = 64;
              opts.model.averaging = averaging == "arithmetic" ? Averaging::arithmetic
                                                               : Averaging::product_of_experts;
              opts.train.epochs = 1;
              opts.train.batch_size = batch_size;
              opts.train.learning_rate = learning_rate;
              opts.train.seed = seed;
              opts.train.eval_every = 1 << 30;
              auto [model, series] = train_wvae(pairs, opts, steps);
              return model;
          },
          py::arg("schema"), py::arg("resolution"), py::arg("k") = 1, py::arg("latent_dim") = 10,
          py::arg("beta") = 1.0, py::arg("averaging") = "product_of_experts", py::arg("steps") = 200,
          py::arg("batch_size") = 32, py::arg("learning_rate") = 1e-3, py::arg("seed") = 0);
}
