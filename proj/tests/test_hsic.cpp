#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kanlab/kanlab.hpp"
#include "test_util.hpp"

using namespace kanlab;
using Catch::Approx;

TEST_CASE("gaussian kernel basics", "[hsic]") {
    std::mt19937_64 rng(301);
    const Tensor x = testutil::random_tensor({6, 3}, rng);
    const KernelMatrix k = gaussian_kernel_matrix(x, 0.7);
    for (std::size_t i = 0; i < 6; ++i) REQUIRE(k.values.at(i, i) == 1.0);

    Tensor dup({2, 3});
    for (std::size_t j = 0; j < 3; ++j) {
        dup.at(0, j) = 0.4 * static_cast<double>(j);
        dup.at(1, j) = 0.4 * static_cast<double>(j);
    }
    const KernelMatrix kd = gaussian_kernel_matrix(dup, 1.3);
    REQUIRE(kd.values.at(0, 1) == 1.0);

    // squared distance of exactly 2 sigma^2 gives exp(-1)
    const double sigma = 0.9;
    Tensor pair({2, 1});
    pair.at(0, 0) = 0.0;
    pair.at(1, 0) = std::sqrt(2.0) * sigma;
    const KernelMatrix kp = gaussian_kernel_matrix(pair, sigma);
    REQUIRE(kp.values.at(0, 1) == Approx(std::exp(-1.0)).margin(1e-14));

    REQUIRE_THROWS_AS(gaussian_kernel_matrix(pair, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_kernel_matrix(pair, -1.0), std::invalid_argument);
}

TEST_CASE("median heuristic on hand cases", "[hsic]") {
    Tensor two({2, 2});
    two.at(0, 0) = 0.0;
    two.at(0, 1) = 0.0;
    two.at(1, 0) = 3.0;
    two.at(1, 1) = 0.0;
    REQUIRE(median_heuristic(two) == Approx(3.0).margin(1e-14));

    Tensor line({3, 1});
    line.at(0, 0) = 0.0;
    line.at(1, 0) = 1.0;
    line.at(2, 0) = 2.0;
    REQUIRE(median_heuristic(line) == Approx(1.0).margin(1e-14));  // median of {1,1,2}

    const Tensor same = Tensor::full({4, 2}, 0.5);
    REQUIRE(median_heuristic(same) == 1.0);  // all-identical fallback
}

TEST_CASE("median heuristic matches a brute-force recount", "[hsic][property]") {
    std::mt19937_64 rng(302);
    const Tensor x = testutil::random_tensor({100, 5}, rng);
    std::vector<double> dists;
    for (std::size_t i = 0; i < 100; ++i) {
        for (std::size_t j = i + 1; j < 100; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < 5; ++t) {
                const double d = x.at(i, t) - x.at(j, t);
                acc += d * d;
            }
            if (acc > 0.0) dists.push_back(std::sqrt(acc));
        }
    }
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    const double expected =
        n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
    REQUIRE(median_heuristic(x) == Approx(expected).margin(1e-12));
}

TEST_CASE("hsic of a constant variable is zero", "[hsic]") {
    std::mt19937_64 rng(303);
    const Tensor x = testutil::random_tensor({10, 4}, rng);
    const KernelMatrix k = gaussian_kernel_matrix(x, 1.0);
    const Tensor ones = Tensor::full({10, 10}, 1.0);
    REQUIRE(std::abs(hsic_estimate(k.values, ones)) < 1e-12);
}

TEST_CASE("hsic of a variable with itself is positive on structure", "[hsic]") {
    // two well-separated clusters
    Tensor x({8, 2});
    for (std::size_t i = 0; i < 8; ++i) {
        const double base = i < 4 ? 0.0 : 10.0;
        x.at(i, 0) = base + 0.1 * static_cast<double>(i);
        x.at(i, 1) = base - 0.05 * static_cast<double>(i);
    }
    const KernelMatrix k = gaussian_kernel_matrix(x, 2.0);
    REQUIRE(hsic_estimate(k.values, k.values) > 0.01);
}

TEST_CASE("hsic matrix form equals the naive expanded oracle", "[hsic][property]") {
    std::mt19937_64 rng(304);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 4 + rng() % 5;  // 4..8
        const Tensor a = testutil::random_tensor({m, 3}, rng);
        const Tensor b = testutil::random_tensor({m, 2}, rng);
        const KernelMatrix ka = gaussian_kernel_matrix(a, 0.8);
        const KernelMatrix kb = gaussian_kernel_matrix(b, 1.1);
        const double fast = hsic_estimate(ka.values, kb.values);
        const double slow = testutil::naive_hsic(ka.values, kb.values);
        REQUIRE(fast == Approx(slow).margin(1e-10));
    }
}

TEST_CASE("hsic is exactly symmetric and nearly non-negative on Gram matrices",
          "[hsic][property]") {
    std::mt19937_64 rng(305);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor a = testutil::random_tensor({12, 3}, rng);
        const Tensor b = testutil::random_tensor({12, 4}, rng);
        const KernelMatrix ka = gaussian_kernel_matrix(a, 0.9);
        const KernelMatrix kb = gaussian_kernel_matrix(b, 1.4);
        REQUIRE(hsic_estimate(ka.values, kb.values) == hsic_estimate(kb.values, ka.values));
        REQUIRE(hsic_estimate(ka.values, kb.values) >= -1e-12);
    }
}

TEST_CASE("constant input shifts leave hsic unchanged", "[hsic][property]") {
    std::mt19937_64 rng(306);
    const Tensor a = testutil::random_tensor({10, 3}, rng);
    Tensor shifted = a;
    for (std::size_t i = 0; i < shifted.rows(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) shifted.at(i, j) += 7.25;
    }
    const Tensor b = testutil::random_tensor({10, 2}, rng);
    const KernelMatrix kb = gaussian_kernel_matrix(b, 1.0);
    const double before = hsic_estimate(gaussian_kernel_matrix(a, 0.8).values, kb.values);
    const double after = hsic_estimate(gaussian_kernel_matrix(shifted, 0.8).values, kb.values);
    REQUIRE(after == Approx(before).margin(1e-12));
}

TEST_CASE("hsic size mismatch is a contract error", "[hsic]") {
    const Tensor a({4, 4});
    const Tensor b({5, 5});
    REQUIRE_THROWS_AS(hsic_estimate(a, b), std::invalid_argument);
}

namespace {

HsicConfig fixed_sigma_config(double beta) {
    HsicConfig cfg;
    cfg.beta = beta;
    cfg.sigma_strategy = SigmaStrategy::fixed;
    cfg.fixed_sigma = 1.0;
    return cfg;
}

double bottleneck_loss_value(const Tensor& z, const Tensor& x, const Tensor& y_onehot,
                             const HsicConfig& cfg) {
    Tape tape;
    const NodeId loss = hsic_bottleneck_loss(tape, tape.constant(z), x, y_onehot, cfg);
    return tape.value(loss)[0];
}

}  // namespace

TEST_CASE("bottleneck loss is null for independent noise", "[hsic][property]") {
    std::mt19937_64 rng(307);
    const std::size_t m = 64;
    const Tensor z = testutil::random_tensor({m, 6}, rng);
    const Tensor x = testutil::random_tensor({m, 10}, rng);
    std::vector<int> labels(m);
    for (int& y : labels) y = static_cast<int>(rng() % 3);
    const Tensor y_onehot = one_hot(labels, 3);
    const HsicConfig cfg = fixed_sigma_config(2.0);

    const double observed = bottleneck_loss_value(z, x, y_onehot, cfg);

    // permutation null: shuffle z rows relative to (x, y)
    std::vector<double> null_losses;
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (int p = 0; p < 100; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor zp({m, 6});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < 6; ++j) zp.at(i, j) = z.at(perm[i], j);
        }
        null_losses.push_back(bottleneck_loss_value(zp, x, y_onehot, cfg));
    }
    double mean = 0.0;
    for (double v : null_losses) mean += v;
    mean /= static_cast<double>(null_losses.size());
    double var = 0.0;
    for (double v : null_losses) var += (v - mean) * (v - mean);
    var /= static_cast<double>(null_losses.size());
    const double sd = std::sqrt(var);
    REQUIRE(std::abs(observed - mean) < 5.0 * sd);
}

TEST_CASE("bottleneck loss is strongly negative when Z encodes the labels", "[hsic]") {
    std::mt19937_64 rng(308);
    const std::size_t m = 32;
    std::vector<int> labels(m);
    for (std::size_t i = 0; i < m; ++i) labels[i] = static_cast<int>(i % 4);
    const Tensor y_onehot = one_hot(labels, 4);
    const Tensor z = y_onehot;  // activations identical to the one-hot embedding
    const Tensor x = testutil::random_tensor({m, 5}, rng);
    const HsicConfig cfg = fixed_sigma_config(100.0);

    const double loss = bottleneck_loss_value(z, x, y_onehot, cfg);
    // direct evaluation of both terms through the estimator
    const KernelMatrix kz = gaussian_kernel_matrix(z, 1.0);
    const KernelMatrix kx = gaussian_kernel_matrix(x, 1.0);
    const KernelMatrix ky = linear_label_kernel(y_onehot);
    const double expected =
        hsic_estimate(kz.values, kx.values) - 100.0 * hsic_estimate(kz.values, ky.values);
    REQUIRE(loss == Approx(expected).margin(1e-12));
    REQUIRE(loss < -1.0);
}

TEST_CASE("bottleneck loss with beta=0 and Z=X reduces to self-HSIC", "[hsic]") {
    std::mt19937_64 rng(309);
    const Tensor x = testutil::random_tensor({16, 4}, rng);
    std::vector<int> labels(16);
    for (std::size_t i = 0; i < 16; ++i) labels[i] = static_cast<int>(i % 2);
    HsicConfig cfg = fixed_sigma_config(0.0);
    const double loss = bottleneck_loss_value(x, x, one_hot(labels, 2), cfg);
    const KernelMatrix kx = gaussian_kernel_matrix(x, 1.0);
    REQUIRE(loss == Approx(hsic_estimate(kx.values, kx.values)).margin(1e-15));
    REQUIRE(loss > 0.0);
}

TEST_CASE("bottleneck loss gradient passes finite differences", "[hsic][autograd]") {
    std::mt19937_64 rng(310);
    const Tensor x = testutil::random_tensor({8, 4}, rng);
    std::vector<int> labels(8);
    for (std::size_t i = 0; i < 8; ++i) labels[i] = static_cast<int>(i % 2);
    const Tensor y_onehot = one_hot(labels, 2);
    const HsicConfig cfg = fixed_sigma_config(3.0);
    const Tensor z0 = testutil::random_tensor({8, 3}, rng);
    const double err = grad_check(
        [&](Tape& t, NodeId in) { return hsic_bottleneck_loss(t, in, x, y_onehot, cfg); }, z0);
    REQUIRE(err < 1e-6);
}

TEST_CASE("bottleneck loss rejects tiny batches", "[hsic]") {
    std::mt19937_64 rng(311);
    const Tensor z = testutil::random_tensor({3, 2}, rng);
    const Tensor x = testutil::random_tensor({3, 2}, rng);
    const Tensor y = one_hot(std::vector<int>{0, 1, 0}, 2);
    Tape tape;
    REQUIRE_THROWS_AS(hsic_bottleneck_loss(tape, tape.constant(z), x, y, HsicConfig{}),
                      std::invalid_argument);
}

TEST_CASE("hsic training separates easy blobs", "[hsic][train][slow]") {
    Dataset train = make_blobs(600, 8, 2, 9.0, 71);
    Dataset test = make_blobs(300, 8, 2, 9.0, 72);
    normalize(train, {&test}, NormMode::minmax);

    // the fixture really is linearly separable
    REQUIRE(testutil::LinearProbe::train(train).accuracy(train) == 1.0);

    ModelConfig cfg;
    cfg.family = ModelFamily::mlp;
    cfg.in_dim = 8;
    cfg.out_dim = 2;
    cfg.widths = {16};
    Model model = build_model(cfg, InitScheme::kaiming_normal, 73);

    TrainingScheme scheme;
    scheme.optimizer = OptimizerKind::adam;
    scheme.lr = 5e-3;
    scheme.batch_size = 64;
    scheme.stopping.max_epochs = 18;
    scheme.trainer = TrainerKind::hsic;

    HsicConfig hsic_cfg;
    hsic_cfg.layer_epochs = 6;
    const RunRecord rec = train_hsic(model, train, test, scheme, hsic_cfg, 74);
    REQUIRE_FALSE(rec.diverged);
    REQUIRE(rec.best_test_acc >= 0.95);
}

TEST_CASE("hsic head-only training equals plain cross-entropy training", "[hsic][train]") {
    Dataset train = make_blobs(400, 6, 3, 5.0, 81);
    Dataset test = make_blobs(200, 6, 3, 5.0, 82);
    normalize(train, {&test}, NormMode::minmax);

    // single linear layer: no hidden layers to train, head phase only
    auto make_linear = [&] {
        Model m;
        m.config.family = ModelFamily::mlp;
        m.config.in_dim = 6;
        m.config.out_dim = 3;
        m.config.widths = {1};  // informational only; layers built by hand
        m.config.dropout = 0.0;
        Rng rng(83);
        m.layers.emplace_back(
            detail::make_dense(6, 3, Activation::identity, 0.0, InitScheme::kaiming_normal, rng));
        return m;
    };
    Model a = make_linear();
    Model b = make_linear();

    TrainingScheme scheme;
    scheme.optimizer = OptimizerKind::sgd;
    scheme.lr = 0.1;
    scheme.batch_size = 50;
    scheme.stopping.max_epochs = 8;

    const RunRecord hsic_rec = train_hsic(a, train, test, scheme, HsicConfig{}, 84);
    const RunRecord bp_rec = train_backprop(b, train, test, scheme, 84);
    REQUIRE(hsic_rec.test_acc.size() == bp_rec.test_acc.size());
    for (std::size_t e = 0; e < hsic_rec.test_acc.size(); ++e) {
        REQUIRE(hsic_rec.test_acc[e] == bp_rec.test_acc[e]);
        REQUIRE(hsic_rec.train_acc[e] == bp_rec.train_acc[e]);
    }
}

TEST_CASE("layer-wise phase leaves other layers bitwise untouched", "[hsic][train]") {
    Dataset train = make_blobs(200, 5, 2, 6.0, 91);
    normalize(train, {}, NormMode::minmax);

    ModelConfig cfg;
    cfg.family = ModelFamily::mlp;
    cfg.in_dim = 5;
    cfg.out_dim = 2;
    cfg.widths = {8, 6};
    Model model = build_model(cfg, InitScheme::kaiming_normal, 92);

    std::vector<std::vector<double>> before;
    for (Param* p : model.params()) {
        before.emplace_back(p->value.data().begin(), p->value.data().end());
    }

    // one bottleneck step on hidden layer 0 only
    const auto idx = batch_indices(train.size(), BatchPlan{64, 1, false}, 0);
    Batch batch = make_batch(train, idx.front());
    Tensor feats = detail::prefix_forward(model, batch.x, 0);
    Tape tape;
    const NodeId z = detail::traced_layer_forward(model, tape, tape.constant(feats), 0);
    const NodeId loss = hsic_bottleneck_loss(tape, z, batch.x, batch.y_onehot, HsicConfig{});
    std::vector<Param*> layer0 = model.layer_params(0);
    Optimizer::zero_grads(layer0);
    tape.backward(loss);
    Optimizer opt(OptimizerKind::sgd, 0.05);
    opt.step(layer0);

    const std::vector<Param*> all = model.params();
    bool layer0_changed = false;
    for (std::size_t p = 0; p < all.size(); ++p) {
        const bool is_layer0 = p < layer0.size();
        for (std::size_t i = 0; i < all[p]->size(); ++i) {
            if (is_layer0) {
                layer0_changed = layer0_changed || all[p]->value[i] != before[p][i];
            } else {
                REQUIRE(all[p]->value[i] == before[p][i]);  // frozen layers: bitwise equal
            }
        }
    }
    REQUIRE(layer0_changed);
}

TEST_CASE("hsic KAN lands near backprop KAN on the digit fixture", "[hsic][train][slow]") {
    Dataset train = testutil::make_digit_dataset(1500, 14, 95);
    Dataset test = testutil::make_digit_dataset(500, 14, 96);
    normalize(train, {&test}, NormMode::minmax);

    ModelConfig cfg;
    cfg.family = ModelFamily::kan;
    cfg.in_dim = 14 * 14;
    cfg.out_dim = 10;
    cfg.widths = {16};
    cfg.grid = 5;
    cfg.degree = 3;

    TrainingScheme scheme;
    scheme.optimizer = OptimizerKind::adam;
    scheme.lr = 1e-3;
    scheme.batch_size = 128;
    scheme.stopping.max_epochs = 12;

    Model bp_model = build_model(cfg, InitScheme::kaiming_normal, 97);
    const RunRecord bp = train_backprop(bp_model, train, test, scheme, 98);

    HsicConfig hsic_cfg;
    hsic_cfg.layer_epochs = 6;
    Model hs_model = build_model(cfg, InitScheme::kaiming_normal, 97);
    const RunRecord hs = train_hsic(hs_model, train, test, scheme, hsic_cfg, 98);

    REQUIRE_FALSE(bp.diverged);
    REQUIRE_FALSE(hs.diverged);
    // backprop-free training may trail, but stays within ten points
    REQUIRE(hs.best_test_acc >= bp.best_test_acc - 0.10);
}
