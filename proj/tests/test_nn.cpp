#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "kanlab/kanlab.hpp"
#include "test_util.hpp"

using namespace kanlab;
using Catch::Approx;

namespace {

KanLayer make_test_kan_layer(int in, int out, std::uint64_t seed, int grid = 5, int degree = 3) {
    ModelConfig cfg;
    cfg.family = ModelFamily::kan;
    cfg.grid = grid;
    cfg.degree = degree;
    Rng rng(seed);
    return detail::make_kan(in, out, cfg, Activation::gelu, InitScheme::kaiming_normal, rng);
}

}  // namespace

TEST_CASE("KA unit: base branch only", "[nn]") {
    const SplineSpec spec = make_uniform_knots(-1.0, 1.0, 5, 3);
    const std::vector<double> coeffs(spec.basis_count(), 0.37);
    REQUIRE(ka_unit_forward(2.0, 1.0, 0.0, coeffs, Activation::relu, spec) == 2.0);
}

TEST_CASE("KA unit: spline branch on the partition of unity", "[nn]") {
    const SplineSpec spec = make_uniform_knots(-1.0, 1.0, 5, 3);
    const std::vector<double> ones(spec.basis_count(), 1.0);
    REQUIRE(ka_unit_forward(0.25, 0.0, 1.0, ones, Activation::gelu, spec) ==
            Approx(1.0).margin(1e-12));
}

TEST_CASE("KA unit: silu(0) vanishes, spline term scales", "[nn]") {
    std::mt19937_64 rng(201);
    const SplineSpec spec = make_uniform_knots(-1.0, 1.0, 5, 3);
    std::vector<double> coeffs(spec.basis_count());
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& c : coeffs) c = dist(rng);
    const double s0 = spline_eval(0.0, spec, coeffs);
    REQUIRE(ka_unit_forward(0.0, 0.5, 2.0, coeffs, Activation::silu, spec) ==
            Approx(2.0 * s0).margin(1e-12));
}

TEST_CASE("KAN layer with one edge equals the scalar unit", "[nn]") {
    KanLayer layer = make_test_kan_layer(1, 1, 42);
    const Tensor x = Tensor::matrix(4, 1, {-0.8, -0.1, 0.33, 0.9});
    const Tensor out = layer.forward_plain(x);
    for (std::size_t r = 0; r < 4; ++r) {
        const double expected = ka_unit_forward(
            x.at(r, 0), layer.w_base.value[0], layer.w_spline.value[0],
            layer.coeffs.value.data(), layer.base_act, layer.spec);
        REQUIRE(out.at(r, 0) == Approx(expected).margin(1e-12));
    }
}

TEST_CASE("KAN layer with zeroed weights outputs zeros", "[nn]") {
    KanLayer layer = make_test_kan_layer(3, 2, 43);
    layer.w_base.value.fill(0.0);
    layer.w_spline.value.fill(0.0);
    std::mt19937_64 rng(44);
    const Tensor x = testutil::random_tensor({5, 3}, rng);
    const Tensor out = layer.forward_plain(x);
    REQUIRE(out.rows() == 5);
    REQUIRE(out.cols() == 2);
    for (double v : out.data()) REQUIRE(v == 0.0);
}

TEST_CASE("KAN layer matches the per-edge scalar loop", "[nn][property]") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 10; ++trial) {
        const int in = 1 + static_cast<int>(rng() % 8);
        const int out = 1 + static_cast<int>(rng() % 8);
        KanLayer layer = make_test_kan_layer(in, out, rng());
        const Tensor x = testutil::random_tensor({3, static_cast<std::size_t>(in)}, rng, -1.3, 1.3);
        const Tensor fast = layer.forward_plain(x);
        const std::size_t nb = layer.spec.basis_count();
        for (std::size_t r = 0; r < 3; ++r) {
            for (int j = 0; j < out; ++j) {
                double acc = 0.0;
                for (int i = 0; i < in; ++i) {
                    const std::span<const double> edge_coeffs(
                        layer.coeffs.value.raw() + (static_cast<std::size_t>(j) * in + i) * nb, nb);
                    acc += ka_unit_forward(x.at(r, static_cast<std::size_t>(i)),
                                           layer.w_base.value.at(static_cast<std::size_t>(j),
                                                                 static_cast<std::size_t>(i)),
                                           layer.w_spline.value.at(static_cast<std::size_t>(j),
                                                                   static_cast<std::size_t>(i)),
                                           edge_coeffs, layer.base_act, layer.spec);
                }
                REQUIRE(fast.at(r, static_cast<std::size_t>(j)) == Approx(acc).margin(1e-12));
            }
        }
    }
}

TEST_CASE("KAN layer rejects wrong input widths", "[nn]") {
    KanLayer layer = make_test_kan_layer(3, 2, 46);
    const Tensor x({4, 5});
    REQUIRE_THROWS_AS(layer.forward_plain(x), std::invalid_argument);
}

TEST_CASE("dense layer: identity weights pass the input through", "[nn]") {
    DenseLayer layer;
    layer.weight = Param(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    layer.bias = Param(Tensor({3}));
    layer.act = Activation::identity;
    std::mt19937_64 rng(47);
    const Tensor x = testutil::random_tensor({4, 3}, rng);
    const Tensor out = layer.forward_plain(x);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(out[i] == x[i]);
}

TEST_CASE("dense layer: relu of negative pre-activations is zero", "[nn]") {
    DenseLayer layer;
    layer.weight = Param(Tensor::full({2, 3}, 1.0));
    layer.bias = Param(Tensor::vector({-100.0, -100.0}));
    layer.act = Activation::relu;
    std::mt19937_64 rng(48);
    const Tensor x = testutil::random_tensor({5, 3}, rng);  // values in [-1,1]
    const Tensor out = layer.forward_plain(x);
    for (double v : out.data()) REQUIRE(v == 0.0);
}

TEST_CASE("dropout: eval output equals the mask expectation", "[nn][slow]") {
    DenseLayer layer;
    std::mt19937_64 init_rng(49);
    layer.weight = Param(testutil::random_tensor({3, 2}, init_rng));
    layer.bias = Param(Tensor::vector({0.3, -0.2, 0.5}));
    layer.act = Activation::gelu;
    layer.dropout_p = 0.2;

    const Tensor x = Tensor::matrix(1, 2, {0.7, -0.4});
    const Tensor eval_out = layer.forward_plain(x);

    Rng rng(50);
    Tensor mean({1, 3});
    const int n_masks = 100000;
    for (int s = 0; s < n_masks; ++s) {
        Tape tape;
        const NodeId out = layer.forward(tape, tape.constant(x), /*training=*/true, &rng);
        for (std::size_t i = 0; i < 3; ++i) mean[i] += tape.value(out)[i];
    }
    for (std::size_t i = 0; i < 3; ++i) {
        mean[i] /= n_masks;
        REQUIRE(std::abs(mean[i] - eval_out[i]) / std::abs(eval_out[i]) < 0.02);
    }
}

TEST_CASE("dropout is the identity in eval mode", "[nn]") {
    DenseLayer layer;
    std::mt19937_64 init_rng(51);
    layer.weight = Param(testutil::random_tensor({3, 2}, init_rng));
    layer.bias = Param(testutil::random_tensor({3}, init_rng));
    layer.act = Activation::silu;
    layer.dropout_p = 0.5;
    const Tensor x = testutil::random_tensor({4, 2}, init_rng);
    Tape tape;
    const NodeId out = tape.constant(x);
    const NodeId eval_node = layer.forward(tape, out, /*training=*/false, nullptr);
    const Tensor plain = layer.forward_plain(x);
    for (std::size_t i = 0; i < plain.size(); ++i) REQUIRE(tape.value(eval_node)[i] == plain[i]);
}

TEST_CASE("build_model: MLP small parameter count", "[nn]") {
    ModelConfig cfg = ModelConfig::preset(ModelFamily::mlp, SizeClass::small, 784, 10);
    REQUIRE(cfg.widths == std::vector<int>{128});
    Model model = build_model(cfg);
    REQUIRE(model.param_count() == 784 * 128 + 128 + 128 * 10 + 10);
    REQUIRE(model.param_count() == 101770);
}

TEST_CASE("build_model: small KAN parameter count", "[nn]") {
    ModelConfig cfg;
    cfg.family = ModelFamily::kan;
    cfg.in_dim = 4;
    cfg.out_dim = 3;
    cfg.widths = {8};
    cfg.grid = 5;
    cfg.degree = 3;
    Model model = build_model(cfg);
    REQUIRE(model.param_count() == (4 * 8 + 8 * 3) * (5 + 3 + 2));
    REQUIRE(model.param_count() == 560);
}

TEST_CASE("build_model: wide MLP doubles every hidden width", "[nn]") {
    for (SizeClass size : {SizeClass::small, SizeClass::medium, SizeClass::large}) {
        const std::vector<int> narrow = ModelConfig::default_widths(ModelFamily::mlp, size);
        const std::vector<int> wide = ModelConfig::default_widths(ModelFamily::mlp_wide, size);
        REQUIRE(narrow.size() == wide.size());
        for (std::size_t i = 0; i < narrow.size(); ++i) REQUIRE(wide[i] == 2 * narrow[i]);
    }
}

TEST_CASE("build_model rejects empty widths and bad dims", "[nn]") {
    ModelConfig cfg;
    cfg.family = ModelFamily::mlp;
    cfg.in_dim = 4;
    cfg.out_dim = 2;
    REQUIRE_THROWS_AS(build_model(cfg), std::invalid_argument);
    cfg.widths = {16};
    cfg.in_dim = 0;
    REQUIRE_THROWS_AS(build_model(cfg), std::invalid_argument);
}

TEST_CASE("param_count: single layers and additivity", "[nn]") {
    REQUIRE(dense_param_count(2, 3) == 9);
    REQUIRE(kan_param_count(2, 3, 5, 3) == 60);

    ModelConfig cfg;
    cfg.family = ModelFamily::mlp;
    cfg.in_dim = 7;
    cfg.out_dim = 4;
    cfg.widths = {5, 6};
    Model model = build_model(cfg);
    long sum = 0;
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
        for (Param* p : model.layer_params(i)) sum += static_cast<long>(p->size());
    }
    REQUIRE(model.param_count() == sum);
    REQUIRE(model.param_count() == dense_param_count(7, 5) + dense_param_count(5, 6) +
                                       dense_param_count(6, 4));
}

TEST_CASE("param_count formula holds for random KAN layers", "[nn][property]") {
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 1 + static_cast<int>(rng() % 12);
        const int out = 1 + static_cast<int>(rng() % 12);
        const int grid = 2 + static_cast<int>(rng() % 9);
        const int degree = 1 + static_cast<int>(rng() % 4);
        KanLayer layer = make_test_kan_layer(in, out, rng(), grid, degree);
        REQUIRE(layer.param_count() == static_cast<long>(out) * in * (grid + degree + 2));
    }
}

TEST_CASE("KANs out-parameter MLPs at fixed width and depth", "[nn]") {
    for (SizeClass size : {SizeClass::small, SizeClass::medium, SizeClass::large}) {
        const Model kan = build_model(ModelConfig::preset(ModelFamily::kan, size, 784, 10));
        const Model mlp = build_model(ModelConfig::preset(ModelFamily::mlp, size, 784, 10));
        REQUIRE(kan.param_count() > mlp.param_count());
    }
}

TEST_CASE("kaiming normal: moments and determinism", "[nn][init]") {
    Rng rng(53);
    const Tensor sample = kaiming_normal({100000}, 2, rng);
    double mean = 0.0;
    for (double v : sample.data()) mean += v;
    mean /= static_cast<double>(sample.size());
    double var = 0.0;
    for (double v : sample.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(sample.size());
    REQUIRE(std::abs(std::sqrt(var) - 1.0) < 0.05);               // std = sqrt(2/2) = 1
    REQUIRE(std::abs(mean) < 3.0 / std::sqrt(100000.0));          // 3 sigma / sqrt(N)

    Rng a(99), b(99);
    const Tensor t1 = kaiming_normal({64}, 9, a);
    const Tensor t2 = kaiming_normal({64}, 9, b);
    for (std::size_t i = 0; i < t1.size(); ++i) REQUIRE(t1[i] == t2[i]);  // bitwise
}

TEST_CASE("kaiming uniform stays within its bound", "[nn][init]") {
    Rng rng(54);
    const double bound = std::sqrt(6.0 / 5.0);
    const Tensor sample = kaiming_uniform({20000}, 5, rng);
    for (double v : sample.data()) {
        REQUIRE(v <= bound);
        REQUIRE(v >= -bound);
    }
}

TEST_CASE("orthogonal init produces orthonormal frames", "[nn][init]") {
    Rng rng(55);
    // wide: orthonormal rows
    const Tensor wide = orthogonal(3, 7, rng);
    const Tensor wwt = matmul_plain(wide, false, wide, true);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(wwt.at(i, j) == Approx(i == j ? 1.0 : 0.0).margin(1e-10));
        }
    }
    // tall: orthonormal columns
    const Tensor tall = orthogonal(7, 3, rng);
    const Tensor ttt = matmul_plain(tall, true, tall, false);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(ttt.at(i, j) == Approx(i == j ? 1.0 : 0.0).margin(1e-10));
        }
    }
    // square: |det| = 1
    const Tensor square = orthogonal(5, 5, rng);
    REQUIRE(testutil::abs_determinant(square) == Approx(1.0).margin(1e-10));

    REQUIRE_THROWS_AS(orthogonal(0, 3, rng), std::invalid_argument);
}

TEST_CASE("every layer type passes parameter gradient checks", "[nn][autograd]") {
    std::mt19937_64 rng(56);
    const std::vector<int> labels = {1, 0, 2, 1};

    ModelConfig dense_cfg;
    dense_cfg.family = ModelFamily::mlp;
    dense_cfg.in_dim = 5;
    dense_cfg.out_dim = 3;
    dense_cfg.widths = {6};
    dense_cfg.activation = Activation::gelu;
    Model dense_model = build_model(dense_cfg, InitScheme::kaiming_normal, 57);
    const Tensor x1 = testutil::random_tensor({4, 5}, rng, -0.9, 0.9);
    REQUIRE(testutil::model_param_fd_max_rel_err(dense_model, x1, labels) < 1e-5);

    ModelConfig kan_cfg;
    kan_cfg.family = ModelFamily::kan;
    kan_cfg.in_dim = 5;
    kan_cfg.out_dim = 3;
    kan_cfg.widths = {6};
    Model kan_model = build_model(kan_cfg, InitScheme::kaiming_normal, 58);
    const Tensor x2 = testutil::random_tensor({4, 5}, rng, -0.9, 0.9);
    REQUIRE(testutil::model_param_fd_max_rel_err(kan_model, x2, labels) < 1e-5);
}

TEST_CASE("traced and untraced model forwards agree bitwise", "[nn]") {
    std::mt19937_64 rng(59);
    for (ModelFamily family : {ModelFamily::mlp, ModelFamily::kan}) {
        ModelConfig cfg;
        cfg.family = family;
        cfg.in_dim = 6;
        cfg.out_dim = 4;
        cfg.widths = {8, 5};
        Model model = build_model(cfg, InitScheme::kaiming_uniform, 60);
        const Tensor x = testutil::random_tensor({7, 6}, rng, -1.2, 1.2);
        const Tensor plain = model.predict(x);
        Tape tape;
        const NodeId traced = model.forward(tape, tape.constant(x), /*training=*/false, nullptr);
        for (std::size_t i = 0; i < plain.size(); ++i) REQUIRE(tape.value(traced)[i] == plain[i]);
    }
}

TEST_CASE("checkpoint round trip is bit-exact", "[nn]") {
    ModelConfig cfg;
    cfg.family = ModelFamily::kan;
    cfg.in_dim = 6;
    cfg.out_dim = 3;
    cfg.widths = {9};
    cfg.grid = 4;
    cfg.degree = 2;
    cfg.activation = Activation::silu;
    cfg.dropout = 0.1;
    Model model = build_model(cfg, InitScheme::orthogonal, 61);

    const std::string path = (std::filesystem::temp_directory_path() / "kanlab_ck_test.bin").string();
    save_model(model, path);
    Model loaded = load_model(path);
    std::filesystem::remove(path);

    REQUIRE(loaded.config.family == cfg.family);
    REQUIRE(loaded.config.widths == cfg.widths);
    REQUIRE(loaded.config.grid == cfg.grid);
    REQUIRE(loaded.config.degree == cfg.degree);
    REQUIRE(loaded.config.activation == cfg.activation);
    REQUIRE(loaded.param_count() == model.param_count());

    std::vector<Param*> a = model.params();
    std::vector<Param*> b = loaded.params();
    REQUIRE(a.size() == b.size());
    for (std::size_t p = 0; p < a.size(); ++p) {
        REQUIRE(a[p]->size() == b[p]->size());
        for (std::size_t i = 0; i < a[p]->size(); ++i) {
            REQUIRE(a[p]->value[i] == b[p]->value[i]);  // bitwise
        }
    }

    std::mt19937_64 rng(62);
    const Tensor x = testutil::random_tensor({3, 6}, rng);
    const Tensor y1 = model.predict(x);
    const Tensor y2 = loaded.predict(x);
    for (std::size_t i = 0; i < y1.size(); ++i) REQUIRE(y1[i] == y2[i]);
}

TEST_CASE("corrupt checkpoints are rejected", "[nn]") {
    const std::string path = (std::filesystem::temp_directory_path() / "kanlab_ck_bad.bin").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint";
    }
    REQUIRE_THROWS_AS(load_model(path), std::runtime_error);
    std::filesystem::remove(path);
}
