#include "doctest.h"

#include <cmath>
#include <numeric>

#include "cbx/cbm.hpp"
#include "cbx/cme.hpp"
#include "cbx/metrics.hpp"
#include "cbx/vae.hpp"

using namespace cbx;

namespace {

// Small grids keep the model tests fast: render at 32x32 and take a strided
// slice of the reduced dsprites grid.
Dataset small_dsprites(std::size_t count, std::uint64_t seed) {
    const ConceptSchema schema = make_reduced_schema(DatasetId::dsprites);
    Rng rng(seed);
    std::vector<std::uint64_t> indices(count);
    for (auto& i : indices) i = rng.uniform_int(schema.total_count());
    return generate_subset(schema, indices, 32);
}

double label_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    double c = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) c += pred[i] == truth[i];
    return c / double(pred.size());
}

}  // namespace

TEST_CASE("cbm: head normalization and prediction ranges") {
    const Dataset data = small_dsprites(96, 1);
    const TaskSpec task = make_task(DatasetId::dsprites, "shape");
    CbmTrainOptions opts;
    opts.regime = CbmRegime::joint;
    opts.feature_dim = 32;
    opts.train.epochs = 2;
    opts.train.batch_size = 32;
    opts.train.eval_every = 100;
    opts.train.seed = 0;

    auto [model, series] = train_cbm(data, task, opts);
    const Mat x = dataset_to_matrix(data).topRows(8);
    const auto probs = model.predict_concept_probs(x);
    REQUIRE(int(probs.size()) == data.schema.num_concepts());
    for (std::size_t c = 0; c < probs.size(); ++c) {
        CHECK(probs[c].cols() == data.schema.cardinality(int(c)));
        for (Eigen::Index r = 0; r < probs[c].rows(); ++r) {
            CHECK(std::abs(probs[c].row(r).sum() - 1.0) < 1e-6);
        }
    }
    const auto concepts = model.predict_concepts(x);
    for (const auto& cv : concepts) CHECK(data.schema.valid_vector(cv));
    const Mat yp = model.predict_label_probs(x);
    for (Eigen::Index r = 0; r < yp.rows(); ++r) CHECK(std::abs(yp.row(r).sum() - 1.0) < 1e-6);

    CHECK_THROWS(train_cbm(data, task, [&] {
        CbmTrainOptions bad = opts;
        bad.lambda = -1.0;
        return bad;
    }()));
}

TEST_CASE("cbm: lambda=0 joint training ignores the concept annotations") {
    Dataset data = small_dsprites(64, 2);
    const TaskSpec task = make_task(DatasetId::dsprites, "bin_shape");
    CbmTrainOptions opts;
    opts.regime = CbmRegime::joint;
    opts.lambda = 0.0;
    opts.feature_dim = 16;
    opts.train.epochs = 1;
    opts.train.batch_size = 16;
    opts.train.eval_every = 100;
    opts.train.seed = 5;

    auto [m1, s1] = train_cbm(data, task, opts);

    // Scramble every concept annotation; with lambda = 0 the optimization
    // trajectory must be identical.
    Dataset scrambled = data;
    Rng rng(99);
    for (auto& sample : scrambled.samples) {
        for (int c = 0; c < scrambled.schema.num_concepts(); ++c) {
            sample.concepts.indices[c] = int(rng.uniform_int(std::uint64_t(scrambled.schema.cardinality(c))));
        }
    }
    // bin_shape depends only on the shape concept; keep labels identical by
    // restoring it.
    for (std::size_t i = 0; i < scrambled.samples.size(); ++i) {
        scrambled.samples[i].concepts.indices[1] = data.samples[i].concepts.indices[1];
    }
    auto [m2, s2] = train_cbm(scrambled, task, opts);

    const Mat x = dataset_to_matrix(data).topRows(12);
    const Mat y1 = m1.predict_label_probs(x);
    const Mat y2 = m2.predict_label_probs(x);
    CHECK((y1 - y2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cbm: independent regime reaches 100% from ground-truth concepts") {
    const Dataset data = small_dsprites(384, 3);
    const TaskSpec task = make_task(DatasetId::dsprites, "shape");
    CbmTrainOptions opts;
    opts.regime = CbmRegime::independent;
    opts.feature_dim = 32;
    opts.train.epochs = 1;
    opts.train.max_steps = 30;  // the concept stage is irrelevant here
    opts.train.batch_size = 32;
    opts.train.eval_every = 1000;
    opts.train.seed = 1;
    opts.flp_steps = 1200;

    auto [model, series] = train_cbm(data, task, opts);
    const auto truth = dataset_concepts(data);
    const Mat yp = model.predict_label_probs_from_concepts(truth);
    const auto labels = task_labels(data, task);
    std::vector<int> pred(std::size_t(yp.rows()));
    for (Eigen::Index r = 0; r < yp.rows(); ++r) {
        Eigen::Index arg;
        yp.row(r).maxCoeff(&arg);
        pred[std::size_t(r)] = int(arg);
    }
    CHECK(label_accuracy(pred, labels) == doctest::Approx(1.0));
}

TEST_CASE("cbm: the label predictor consumes every head") {
    const Dataset data = small_dsprites(128, 4);
    const TaskSpec task = make_task(DatasetId::dsprites, "bin_scale_xor_bin_shape");
    CbmTrainOptions opts;
    opts.regime = CbmRegime::joint;
    opts.feature_dim = 32;
    opts.train.epochs = 3;
    opts.train.batch_size = 32;
    opts.train.eval_every = 1000;
    opts.train.seed = 2;

    auto [model, series] = train_cbm(data, task, opts);
    const Mat x = dataset_to_matrix(data).topRows(16);
    const auto probs = model.predict_concept_probs(x);

    Mat concat(x.rows(), model.concat_dim());
    int offset = 0;
    for (const auto& p : probs) {
        concat.block(0, offset, x.rows(), p.cols()) = p;
        offset += int(p.cols());
    }
    const Mat base = model.flp.forward(concat);

    // Swap the shape and scale blocks (cardinalities 3 and 6 on the reduced
    // grid): a label predictor that reads all heads must change its output.
    Mat permuted = concat;
    permuted.block(0, 1, x.rows(), 6) = concat.block(0, 4, x.rows(), 6);
    permuted.block(0, 7, x.rows(), 3) = concat.block(0, 1, x.rows(), 3);
    const Mat swapped = model.flp.forward(permuted);
    CHECK((base - swapped).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("task model features: deterministic, sized by the tapped layer") {
    const Dataset data = small_dsprites(96, 5);
    const TaskSpec task = make_task(DatasetId::dsprites, "shape");
    TaskModelOptions opts;
    opts.feature_dim = 24;
    opts.train.epochs = 2;
    opts.train.batch_size = 32;
    opts.train.eval_every = 1000;
    opts.train.seed = 3;
    TaskModel model = train_task_model(data, task, opts);

    const Mat x = dataset_to_matrix(data).topRows(6);
    const Mat f1 = extract_features(model, -1, x);
    const Mat f2 = extract_features(model, -1, x);
    CHECK(f1 == f2);
    CHECK(f1.cols() == 24);

    const Mat logits = extract_features(model, model.net.num_layers() - 1, x);
    CHECK(logits.cols() == task.num_classes);
    CHECK_THROWS(extract_features(model, 999, x));
}

TEST_CASE("cme: constant concept in the labelled set is flagged") {
    Dataset data = small_dsprites(64, 6);
    for (auto& s : data.samples) s.concepts.indices[2] = 0;  // pin scale
    const TaskSpec task = make_task(DatasetId::dsprites, "shape");
    TaskModelOptions topts;
    topts.feature_dim = 16;
    topts.train.epochs = 1;
    topts.train.batch_size = 32;
    topts.train.eval_every = 1000;
    TaskModel source = train_task_model(data, task, topts);

    CmeTrainOptions copts;
    copts.gbt.n_rounds = 10;
    CMEModel cme = train_cme(source, data, task, copts);
    CHECK(cme.constant_concept[2]);
    CHECK(!cme.constant_concept[1]);
    CHECK(cme.labelled_count == 64);

    const Mat x = dataset_to_matrix(data).topRows(4);
    const auto concepts = cme.predict_concepts(source, x);
    for (const auto& cv : concepts) {
        CHECK(data.schema.valid_vector(cv));
        CHECK(cv.indices[2] == 0);
    }
    const auto labels = cme.predict_labels(source, x);
    for (int y : labels) {
        CHECK(y >= 0);
        CHECK(y < task.num_classes);
    }
}

TEST_CASE("elbo: beta=0 reduces to the reconstruction term") {
    VaeOptions vo;
    vo.latent_dim = 4;
    vo.resolution = 32;
    vo.hidden = 32;
    vo.beta = 0.0;
    VAEModel m = make_vae(vo, 11);
    Rng rng(7);
    Mat x(3, 32 * 32);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() < 0.8 ? 0.0 : 1.0;
    const ElboTerms t = elbo(m, x, rng);
    CHECK(t.total == doctest::Approx(t.reconstruction));
    CHECK(t.kl >= 0.0);
}

TEST_CASE("wvae pair objective with empty shared set equals two elbos") {
    VaeOptions vo;
    vo.latent_dim = 3;
    vo.resolution = 32;
    vo.hidden = 16;
    VAEModel m = make_vae(vo, 13);
    Rng rng(9);
    Mat x1(2, 32 * 32), x2(2, 32 * 32);
    for (Eigen::Index i = 0; i < x1.size(); ++i) x1.data()[i] = rng.uniform();
    for (Eigen::Index i = 0; i < x2.size(); ++i) x2.data()[i] = rng.uniform();
    Mat eps(4, 3);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();

    const double pair_loss = wvae_pair_loss(m, x1, x2, eps, false, /*force_empty_shared=*/true);
    const double l1 = vae_batch_loss(m, x1, eps.topRows(2), false);
    const double l2 = vae_batch_loss(m, x2, eps.bottomRows(2), false);
    CHECK(std::abs(pair_loss - 0.5 * (l1 + l2)) < 1e-6);
}

TEST_CASE("wvae shared-set behaviour on identical and fully differing pairs") {
    // Identical inputs give identical posteriors: everything is shared.
    VaeOptions vo;
    vo.latent_dim = 4;
    vo.resolution = 32;
    vo.hidden = 16;
    VAEModel m = make_vae(vo, 17);
    Rng rng(3);
    Mat x(1, 32 * 32);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    const GaussianPosterior q = m.encode(row_to_image(x.row(0).data(), 32, 32, 1));
    const SharedSet all = select_shared_set(q, q);
    CHECK(int(all.dims.size()) == 4);

    // Distinct inputs: the selection rule still returns a non-empty set.
    Mat x2(1, 32 * 32);
    for (Eigen::Index i = 0; i < x2.size(); ++i) x2.data()[i] = rng.uniform();
    const GaussianPosterior q2 = m.encode(row_to_image(x2.row(0).data(), 32, 32, 1));
    const SharedSet some = select_shared_set(q, q2);
    CHECK(!some.dims.empty());
}

TEST_CASE("vae training improves reconstruction; latent probes behave") {
    const ConceptSchema schema = make_reduced_schema(DatasetId::dsprites);
    Rng pick(31);
    std::vector<std::uint64_t> indices(256);
    for (auto& i : indices) i = pick.uniform_int(schema.total_count());
    const Dataset data = generate_subset(schema, indices, 32);

    VaeTrainOptions opts;
    opts.model.latent_dim = 8;
    opts.model.hidden = 64;
    opts.train.epochs = 60;
    opts.train.max_steps = 420;
    opts.train.batch_size = 32;
    opts.train.eval_every = 420;
    opts.train.seed = 0;

    // Reconstruction error at initialization vs after training.
    VAEModel init_model = make_vae([&] {
        VaeOptions vo = opts.model;
        vo.resolution = 32;
        vo.channels = 1;
        return vo;
    }(), opts.train.seed);
    const Mat x = dataset_to_matrix(data);
    auto recon_mae = [&](VAEModel& m) {
        const Mat mu = m.encode_means(x);
        const Mat mean = m.decode_means(mu);
        return (mean - x).cwiseAbs().sum() / double(x.size());
    };
    const double before = recon_mae(init_model);

    auto [model, series] = train_vae(data, opts);
    const double after = recon_mae(model);
    CHECK(after < 0.5 * before);
    CHECK(after < 0.1);  // mostly-black sprites reconstruct tightly

    // decode() emits pixels in [0,1] with the right shape.
    const Image img = model.decode(Vec::Zero(8));
    CHECK(img.height == 32);
    for (float v : img.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }

    // Probes memorize a tiny set through deep trees.
    Rng lat_rng(5);
    Mat latents(100, 6);
    for (Eigen::Index i = 0; i < latents.size(); ++i) latents.data()[i] = lat_rng.normal();
    std::vector<ConceptVector> cvs(100);
    for (auto& cv : cvs) cv = index_to_concepts(schema, lat_rng.uniform_int(schema.total_count()));
    GbtOptions deep;
    deep.max_depth = 8;
    deep.n_rounds = 120;
    deep.learning_rate = 0.3;
    const auto probes = fit_latent_probe(latents, cvs, schema, deep);
    const auto pred = probe_predict(probes, latents);
    const auto acc = concept_accuracy(pred, cvs);
    CHECK(acc.average >= 0.99);

    // On random latents, held-out accuracy stays near chance.
    Mat big(3000, 6);
    for (Eigen::Index i = 0; i < big.size(); ++i) big.data()[i] = lat_rng.normal();
    std::vector<ConceptVector> big_cvs(3000);
    for (auto& cv : big_cvs) cv = index_to_concepts(schema, lat_rng.uniform_int(schema.total_count()));
    GbtOptions shallow;
    shallow.n_rounds = 40;
    const auto chance_probes = fit_latent_probe(big.topRows(1500), {big_cvs.begin(), big_cvs.begin() + 1500},
                                                schema, shallow);
    const auto chance_pred = probe_predict(chance_probes, big.bottomRows(1500));
    const auto chance_acc = concept_accuracy(chance_pred, {big_cvs.begin() + 1500, big_cvs.end()});
    for (int c = 0; c < schema.num_concepts(); ++c) {
        const double chance = 1.0 / schema.cardinality(c);
        CHECK(std::abs(chance_acc.per_concept[std::size_t(c)] - chance) <= 0.05);
    }
}

TEST_CASE("elbo is bounded by an importance-sampling likelihood estimate") {
    // Two-pixel toy model with a 1-D latent.
    VAEModel m;
    m.latent_dim = 1;
    m.beta = 1.0;
    m.recon = ReconLikelihood::bernoulli;
    m.image_h = 1;
    m.image_w = 2;
    m.image_c = 1;
    Rng r(41);
    Sequential enc;
    enc.add(std::make_unique<Dense>(2, 4, r));
    enc.add(std::make_unique<ActivationLayer>(Activation::tanh_act, 4));
    m.encoder = std::move(enc);
    Sequential mu;
    mu.add(std::make_unique<Dense>(4, 1, r));
    m.enc_mu = std::move(mu);
    Sequential lv;
    lv.add(std::make_unique<Dense>(4, 1, r));
    m.enc_logvar = std::move(lv);
    Sequential dec;
    dec.add(std::make_unique<Dense>(1, 2, r));
    m.decoder = std::move(dec);

    Mat x(1, 2);
    x << 1.0, 0.0;

    Mat mu_m, lv_m;
    m.encode_batch(x, mu_m, lv_m);
    const double q_mean = mu_m(0, 0);
    const double q_sd = std::exp(0.5 * lv_m(0, 0));

    Rng rng(43);
    const int draws = 100000;
    double elbo_acc = 0.0;
    std::vector<double> log_weights(static_cast<std::size_t>(draws));
    auto bernoulli_ll = [&](double z) {
        Mat zz(1, 1);
        zz << z;
        const Mat logits = m.decoder.forward(zz);
        double ll = 0.0;
        for (int d = 0; d < 2; ++d) {
            const double l = logits(0, d);
            ll += x(0, d) * l - (std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l))));
        }
        return ll;
    };
    auto log_normal = [](double z, double mean, double sd) {
        const double d = (z - mean) / sd;
        return -0.5 * d * d - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
    };
    for (int i = 0; i < draws; ++i) {
        const double z = q_mean + q_sd * rng.normal();
        const double ll = bernoulli_ll(z);
        elbo_acc += ll;
        log_weights[std::size_t(i)] = ll + log_normal(z, 0.0, 1.0) - log_normal(z, q_mean, q_sd);
    }
    const double kl = kl_gaussian_to_standard(GaussianPosterior{mu_m.row(0).transpose(), lv_m.row(0).transpose()}).total;
    const double elbo_est = elbo_acc / draws - kl;

    const double max_w = *std::max_element(log_weights.begin(), log_weights.end());
    double sum = 0.0;
    for (double w : log_weights) sum += std::exp(w - max_w);
    const double log_px = max_w + std::log(sum / draws);

    CHECK(elbo_est <= log_px + 0.02);
}

TEST_CASE("metric series and concept accuracy basics") {
    std::vector<ConceptVector> truth = {{{0, 1}}, {{1, 0}}, {{2, 1}}, {{0, 0}}};
    const auto perfect = concept_accuracy(truth, truth);
    CHECK(perfect.average == doctest::Approx(1.0));

    std::vector<ConceptVector> half = truth;
    for (auto& cv : half) cv.indices[1] ^= 1;  // second concept always wrong
    const auto acc = concept_accuracy(half, truth);
    CHECK(acc.per_concept[0] == doctest::Approx(1.0));
    CHECK(acc.per_concept[1] == doctest::Approx(0.0));
    CHECK(acc.average == doctest::Approx(0.5));

    CHECK_THROWS(concept_accuracy(half, {truth.begin(), truth.begin() + 2}));

    MetricSeries series;
    series.add({1.0, {0.5}, 0.5, 0.5, 1.0});
    CHECK_THROWS(series.add({1.0, {}, 0, 0, 0}));
    CHECK_THROWS(series.add({2.0, {1.5}, 0, 0, 0}));
    series.add({2.0, {0.6}, 0.6, 0.6, 0.9});
    CHECK(series.records.size() == 2);
}

TEST_CASE("uniform random predictions on a 4-way concept hit 25% +- 2pts") {
    ConceptSchema schema;
    schema.dataset_id = DatasetId::dsprites;
    schema.concepts.push_back({"c4", {0, 1, 2, 3}, {}});
    Rng rng(55);
    const int n = 10000;
    std::vector<ConceptVector> truth(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        truth[std::size_t(i)].indices = {int(rng.uniform_int(4))};
        pred[std::size_t(i)].indices = {int(rng.uniform_int(4))};
    }
    const auto acc = concept_accuracy(pred, truth);
    CHECK(std::abs(acc.per_concept[0] - 0.25) < 0.02);
}
