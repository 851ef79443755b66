#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kanlab/dataset.hpp"
#include "kanlab/layers.hpp"
#include "kanlab/loaders.hpp"
#include "kanlab/metrics.hpp"
#include "kanlab/synthetic.hpp"
#include "kanlab/train.hpp"

namespace kanlab {

/// Invalid or inconsistent experiment configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dataset specification
// ---------------------------------------------------------------------------

/// Declarative description of where a train/test pair comes from.
struct DatasetSpec {
    std::string kind;  // "blobs" | "spirals" | "cube" | "idx" | "csv"
    std::string name;  // display name; defaults to kind

    // synthetic
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    std::size_t dim = 16;
    int classes = 3;
    double separation = 6.0;
    double noise = 0.1;
    std::uint64_t seed = 7;

    // idx
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t train_limit = 0;  // 0 = all
    std::size_t test_limit = 0;

    // csv
    std::string train_path, test_path, label_column;
    double test_fraction = 0.25;  // used when test_path is empty
};

struct DataBundle {
    Dataset train;
    Dataset test;
};

namespace detail {

inline DataBundle split_fraction(Dataset ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("dataset: test_fraction must lie in (0,1)");
    }
    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(seed, 0x5B117ULL));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                            std::floor(ds.size() * test_fraction)));
    auto gather = [&](std::size_t from, std::size_t count) {
        Dataset out;
        out.features = Tensor({count, ds.dim()});
        out.labels.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = perm[from + i];
            std::copy(ds.features.raw() + src * ds.dim(), ds.features.raw() + (src + 1) * ds.dim(),
                      out.features.raw() + i * ds.dim());
            out.labels.push_back(ds.labels[src]);
        }
        out.class_count = ds.class_count;
        out.name = ds.name;
        return out;
    };
    DataBundle b{gather(n_test, ds.size() - n_test), gather(0, n_test)};
    b.train.split = "train";
    b.test.split = "test";
    return b;
}

}  // namespace detail

/// Materialize the raw (unnormalized) train/test pair.
inline DataBundle load_dataset(const DatasetSpec& spec) {
    DataBundle b;
    const std::size_t n_total = spec.n_train + spec.n_test;
    // Synthetic kinds draw one pooled sample and cut it, so both splits share
    // the generator's random structure (e.g. blob centers).
    if (spec.kind == "blobs") {
        std::tie(b.train, b.test) = split_train_test(
            make_blobs(n_total, spec.dim, spec.classes, spec.separation, spec.seed), spec.n_train);
    } else if (spec.kind == "spirals") {
        std::tie(b.train, b.test) =
            split_train_test(make_two_spirals(n_total, spec.noise, spec.seed), spec.n_train);
    } else if (spec.kind == "cube") {
        std::tie(b.train, b.test) =
            split_train_test(make_uniform_cube(n_total, spec.dim, spec.seed), spec.n_train);
    } else if (spec.kind == "idx") {
        b.train = load_idx(spec.train_images, spec.train_labels);
        b.test = load_idx(spec.test_images, spec.test_labels);
        if (spec.train_limit > 0) b.train = take_prefix(b.train, spec.train_limit);
        if (spec.test_limit > 0) b.test = take_prefix(b.test, spec.test_limit);
    } else if (spec.kind == "csv") {
        if (spec.test_path.empty()) {
            Dataset all = load_csv(spec.train_path, spec.label_column);
            DataBundle split = detail::split_fraction(std::move(all), spec.test_fraction, spec.seed);
            b = std::move(split);
        } else {
            b.train = load_csv(spec.train_path, spec.label_column);
            b.test = load_csv(spec.test_path, spec.label_column);
        }
    } else {
        throw ConfigError("dataset: unknown kind '" + spec.kind + "'");
    }
    const std::string name = spec.name.empty() ? spec.kind : spec.name;
    b.train.name = name;
    b.test.name = name;
    b.train.split = "train";
    b.test.split = "test";
    const int classes = std::max(b.train.class_count, b.test.class_count);
    b.train.class_count = classes;
    b.test.class_count = classes;
    b.train.validate();
    b.test.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

inline std::string model_label(const ModelConfig& cfg) {
    return std::string(to_string(cfg.family)) + "-" + to_string(cfg.size_class);
}

struct ExperimentConfig {
    int version = 1;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int epochs = 30;
    std::size_t batch_size = 128;
    int workers = 1;
    TrainerKind trainer = TrainerKind::backprop;
    HsicConfig hsic;
    NormMode normalization = NormMode::minmax;
    std::size_t id_sample_cap = 2000;

    DatasetSpec dataset;
    std::vector<ModelConfig> models;
    std::vector<InitScheme> inits{InitScheme::kaiming_normal, InitScheme::kaiming_uniform,
                                  InitScheme::orthogonal};
    std::vector<OptimizerKind> optimizers{OptimizerKind::sgd, OptimizerKind::sgd_momentum,
                                          OptimizerKind::adam};
    std::vector<double> learning_rates{0.05, 0.005, 0.0005};
};

/// One executable unit of a grid or sweep.
struct RunSpec {
    std::size_t index = 0;
    ModelConfig model;
    std::string label;
    TrainingScheme scheme;
    std::uint64_t seed = 0;
    std::string swept_axis;
    double swept_value = 0.0;
};

/// Cartesian product of the scheme axes in deterministic lexicographic order
/// (model, initialization, optimizer, learning rate).
inline std::vector<RunSpec> expand_grid(const ExperimentConfig& cfg) {
    if (cfg.models.empty()) throw ConfigError("grid: no models configured");
    if (cfg.inits.empty()) throw ConfigError("grid: initialization axis is empty");
    if (cfg.optimizers.empty()) throw ConfigError("grid: optimizer axis is empty");
    if (cfg.learning_rates.empty()) throw ConfigError("grid: learning-rate axis is empty");
    std::vector<RunSpec> specs;
    std::size_t index = 0;
    for (const ModelConfig& model : cfg.models) {
        for (InitScheme init : cfg.inits) {
            for (OptimizerKind opt : cfg.optimizers) {
                for (double lr : cfg.learning_rates) {
                    RunSpec spec;
                    spec.index = index++;
                    spec.model = model;
                    spec.label = model_label(model);
                    spec.scheme.init = init;
                    spec.scheme.optimizer = opt;
                    spec.scheme.lr = lr;
                    spec.scheme.batch_size = cfg.batch_size;
                    spec.scheme.stopping.max_epochs = cfg.epochs;
                    spec.scheme.trainer = cfg.trainer;
                    spec.seed = mix_seed(cfg.seed, spec.index);
                    specs.push_back(std::move(spec));
                }
            }
        }
    }
    return specs;
}

/// Intrinsic dimension of the (normalized) test split, subsampled to at most
/// `cap` points to keep the pairwise scan affordable on large splits.
inline double dataset_id_estimate(const Dataset& test, std::size_t cap = 2000) {
    const std::size_t n = std::min(cap, test.size());
    Tensor sub({n, test.dim()});
    std::copy(test.features.raw(), test.features.raw() + n * test.dim(), sub.raw());
    return twonn_intrinsic_dimension(sub);
}

/// Build, initialize and train one run; failures are captured in the record
/// instead of propagating so sibling runs always complete.
inline RunRecord execute_run(const RunSpec& spec, const Dataset& train, const Dataset& test,
                             double id_estimate, const HsicConfig& hsic_cfg = HsicConfig{}) {
    RunRecord rec;
    try {
        Rng rng(mix_seed(spec.seed, 0x1417ULL));
        Model model = build_model(spec.model, spec.scheme.init, rng);
        rec = spec.scheme.trainer == TrainerKind::backprop
                  ? train_backprop(model, train, test, spec.scheme, spec.seed)
                  : train_hsic(model, train, test, spec.scheme, hsic_cfg, spec.seed);
    } catch (const std::exception& ex) {
        rec.scheme = spec.scheme;
        rec.seed = spec.seed;
        rec.diverged = true;
        rec.error = ex.what();
    }
    rec.dataset = train.name;
    rec.model_label = spec.label;
    rec.family = spec.model.family;
    rec.size_class = spec.model.size_class;
    rec.swept_axis = spec.swept_axis;
    rec.swept_value = spec.swept_value;
    rec.activation = to_string(spec.model.resolved_activation());
    rec.id_estimate = id_estimate;
    if (!rec.diverged && rec.best_epoch >= 0 &&
        static_cast<double>(rec.param_count) >= id_estimate) {
        rec.ef = efficiency({rec.best_test_acc, rec.best_epoch,
                             static_cast<double>(rec.param_count), id_estimate});
    }
    return rec;
}

/// Execute a batch of runs, optionally across worker threads. Results land at
/// their spec's index, so the output order never depends on scheduling.
inline std::vector<RunRecord> execute_all(const std::vector<RunSpec>& specs, const Dataset& train,
                                          const Dataset& test, double id_estimate,
                                          const HsicConfig& hsic_cfg, int workers = 1) {
    std::vector<RunRecord> records(specs.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            records[i] = execute_run(specs[i], train, test, id_estimate, hsic_cfg);
        }
        return records;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1)) {
            records[i] = execute_run(specs[i], train, test, id_estimate, hsic_cfg);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    return records;
}

/// Load data, normalize on the training split, estimate ID, run the full grid.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    DataBundle data = load_dataset(cfg.dataset);
    normalize(data.train, {&data.test}, cfg.normalization);
    const double id = dataset_id_estimate(data.test, cfg.id_sample_cap);
    const std::vector<RunSpec> specs = expand_grid(cfg);
    return execute_all(specs, data.train, data.test, id, cfg.hsic, cfg.workers);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Degree-vs-width sweep on a single-hidden-layer KAN: one run per degree
/// (width fixed) and one per width (degree fixed), everything else identical,
/// every run sharing the same init seed.
inline std::vector<RunSpec> degree_width_specs(const ModelConfig& base,
                                               const std::vector<int>& degrees,
                                               const std::vector<int>& widths,
                                               const TrainingScheme& scheme, std::uint64_t seed) {
    if (base.family != ModelFamily::kan || base.widths.size() != 1) {
        throw ConfigError("degree-width sweep: base model must be a single-hidden-layer KAN");
    }
    for (int d : degrees) {
        if (d < 1) throw ConfigError("degree-width sweep: degree must be >= 1");
    }
    for (int w : widths) {
        if (w < 1) throw ConfigError("degree-width sweep: width must be >= 1");
    }
    std::vector<RunSpec> specs;
    std::size_t index = 0;
    for (int d : degrees) {
        RunSpec spec;
        spec.index = index++;
        spec.model = base;
        spec.model.degree = d;
        spec.label = model_label(base) + "-deg" + std::to_string(d);
        spec.scheme = scheme;
        spec.seed = seed;
        spec.swept_axis = "degree";
        spec.swept_value = d;
        specs.push_back(std::move(spec));
    }
    for (int w : widths) {
        RunSpec spec;
        spec.index = index++;
        spec.model = base;
        spec.model.widths = {w};
        spec.label = model_label(base) + "-w" + std::to_string(w);
        spec.scheme = scheme;
        spec.seed = seed;
        spec.swept_axis = "width";
        spec.swept_value = w;
        specs.push_back(std::move(spec));
    }
    return specs;
}

/// Matched-parameter pairs between the degree-swept and width-swept runs:
/// for each degree run, the width run with the closest parameter count.
inline std::vector<std::pair<std::size_t, std::size_t>> matched_parameter_pairs(
    const std::vector<RunRecord>& records) {
    std::vector<std::size_t> degree_runs, width_runs;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].swept_axis == "degree") degree_runs.push_back(i);
        if (records[i].swept_axis == "width") width_runs.push_back(i);
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t di : degree_runs) {
        if (width_runs.empty()) break;
        std::size_t best = width_runs[0];
        long best_diff = std::abs(records[best].param_count - records[di].param_count);
        for (std::size_t wi : width_runs) {
            const long diff = std::abs(records[wi].param_count - records[di].param_count);
            if (diff < best_diff) {
                best = wi;
                best_diff = diff;
            }
        }
        pairs.emplace_back(di, best);
    }
    return pairs;
}

enum class SchemeSelectionRule { max_accuracy, min_gap };

/// Pick the best scheme from prior records; defaults to max best-test-accuracy.
inline TrainingScheme select_best_scheme(const std::vector<RunRecord>& records,
                                         SchemeSelectionRule rule = SchemeSelectionRule::max_accuracy) {
    const RunRecord* best = nullptr;
    for (const RunRecord& rec : records) {
        if (rec.diverged || rec.best_epoch < 0) continue;
        if (best == nullptr) {
            best = &rec;
            continue;
        }
        if (rule == SchemeSelectionRule::max_accuracy) {
            if (rec.best_test_acc > best->best_test_acc) best = &rec;
        } else {
            if (rec.gap_at_best < best->gap_at_best) best = &rec;
        }
    }
    if (best == nullptr) throw ConfigError("select_best_scheme: no completed runs to choose from");
    return best->scheme;
}

/// One run per activation, identical seeds so the activation is the only
/// moving part.
inline std::vector<RunSpec> activation_sweep_specs(const ModelConfig& base,
                                                   const TrainingScheme& scheme,
                                                   const std::vector<Activation>& activations,
                                                   std::uint64_t seed) {
    if (activations.empty()) throw ConfigError("activation sweep: no activations given");
    std::vector<RunSpec> specs;
    std::size_t index = 0;
    for (Activation act : activations) {
        RunSpec spec;
        spec.index = index++;
        spec.model = base;
        spec.model.activation = act;
        spec.label = model_label(base) + "-" + to_string(act);
        spec.scheme = scheme;
        spec.seed = seed;
        spec.swept_axis = "activation";
        spec.swept_value = static_cast<double>(index - 1);
        specs.push_back(std::move(spec));
    }
    return specs;
}

// ---------------------------------------------------------------------------
// JSON configuration (schema version 1)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("config: bad value for '" + key + "': " + ex.what());
    }
}

}  // namespace detail

inline ModelConfig model_config_from_json(const nlohmann::json& j, int in_dim, int out_dim) {
    ModelConfig cfg;
    if (!j.contains("family")) throw ConfigError("model: missing 'family'");
    cfg.family = family_from_string(j.at("family").get<std::string>());
    cfg.size_class = size_class_from_string(detail::get_or<std::string>(j, "size", "small"));
    cfg.in_dim = in_dim;
    cfg.out_dim = out_dim;
    if (j.contains("widths")) {
        cfg.widths = j.at("widths").get<std::vector<int>>();
    } else {
        cfg.widths = ModelConfig::default_widths(cfg.family, cfg.size_class);
    }
    cfg.grid = detail::get_or<int>(j, "grid", 5);
    cfg.degree = detail::get_or<int>(j, "degree", 3);
    if (j.contains("activation")) {
        cfg.activation = activation_from_string(j.at("activation").get<std::string>());
    }
    cfg.dropout = detail::get_or<double>(j, "dropout", 0.2);
    return cfg;
}

inline DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
    DatasetSpec spec;
    if (!j.contains("kind")) throw ConfigError("dataset: missing 'kind'");
    spec.kind = j.at("kind").get<std::string>();
    spec.name = detail::get_or<std::string>(j, "name", "");
    spec.n_train = detail::get_or<std::size_t>(j, "n_train", spec.n_train);
    spec.n_test = detail::get_or<std::size_t>(j, "n_test", spec.n_test);
    spec.dim = detail::get_or<std::size_t>(j, "dim", spec.dim);
    spec.classes = detail::get_or<int>(j, "classes", spec.classes);
    spec.separation = detail::get_or<double>(j, "separation", spec.separation);
    spec.noise = detail::get_or<double>(j, "noise", spec.noise);
    spec.seed = detail::get_or<std::uint64_t>(j, "seed", spec.seed);
    spec.train_images = detail::get_or<std::string>(j, "train_images", "");
    spec.train_labels = detail::get_or<std::string>(j, "train_labels", "");
    spec.test_images = detail::get_or<std::string>(j, "test_images", "");
    spec.test_labels = detail::get_or<std::string>(j, "test_labels", "");
    spec.train_limit = detail::get_or<std::size_t>(j, "train_limit", 0);
    spec.test_limit = detail::get_or<std::size_t>(j, "test_limit", 0);
    spec.train_path = detail::get_or<std::string>(j, "train_path", "");
    spec.test_path = detail::get_or<std::string>(j, "test_path", "");
    spec.label_column = detail::get_or<std::string>(j, "label_column", "");
    spec.test_fraction = detail::get_or<double>(j, "test_fraction", spec.test_fraction);
    return spec;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const int version = detail::get_or<int>(j, "version", 0);
    if (version != 1) throw ConfigError("config: unsupported or missing version (expected 1)");
    cfg.version = version;
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.output_dir = detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
    cfg.epochs = detail::get_or<int>(j, "epochs", cfg.epochs);
    cfg.batch_size = detail::get_or<std::size_t>(j, "batch_size", cfg.batch_size);
    cfg.workers = detail::get_or<int>(j, "workers", cfg.workers);
    if (j.contains("trainer")) cfg.trainer = trainer_from_string(j.at("trainer").get<std::string>());
    if (j.contains("normalization")) {
        cfg.normalization = norm_mode_from_string(j.at("normalization").get<std::string>());
    }
    cfg.id_sample_cap = detail::get_or<std::size_t>(j, "id_sample_cap", cfg.id_sample_cap);
    if (j.contains("hsic")) {
        const auto& h = j.at("hsic");
        cfg.hsic.beta = detail::get_or<double>(h, "beta", cfg.hsic.beta);
        if (h.contains("sigma")) {
            const auto& s = h.at("sigma");
            if (s.is_number()) {
                cfg.hsic.sigma_strategy = SigmaStrategy::fixed;
                cfg.hsic.fixed_sigma = s.get<double>();
            } else if (s.get<std::string>() != "median") {
                throw ConfigError("config: hsic.sigma must be 'median' or a number");
            }
        }
        cfg.hsic.layer_epochs = detail::get_or<int>(h, "layer_epochs", cfg.hsic.layer_epochs);
    }
    if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset'");
    cfg.dataset = dataset_spec_from_json(j.at("dataset"));

    if (!j.contains("in_dim") || !j.contains("out_dim")) {
        // dimensions can be inferred from synthetic specs
        if (cfg.dataset.kind == "blobs" || cfg.dataset.kind == "cube") {
            // handled below
        } else if (cfg.dataset.kind != "spirals" && !j.contains("in_dim")) {
            throw ConfigError("config: in_dim/out_dim required for file-backed datasets");
        }
    }
    int in_dim = detail::get_or<int>(j, "in_dim", 0);
    int out_dim = detail::get_or<int>(j, "out_dim", 0);
    if (in_dim == 0) {
        if (cfg.dataset.kind == "blobs" || cfg.dataset.kind == "cube") {
            in_dim = static_cast<int>(cfg.dataset.dim);
        } else if (cfg.dataset.kind == "spirals") {
            in_dim = 2;
        }
    }
    if (out_dim == 0) {
        if (cfg.dataset.kind == "blobs") {
            out_dim = cfg.dataset.classes;
        } else if (cfg.dataset.kind == "spirals" || cfg.dataset.kind == "cube") {
            out_dim = 2;
        }
    }
    if (in_dim < 1 || out_dim < 1) {
        throw ConfigError("config: could not determine in_dim/out_dim; set them explicitly");
    }

    if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty()) {
        throw ConfigError("config: 'models' must be a non-empty array");
    }
    for (const auto& m : j.at("models")) {
        cfg.models.push_back(model_config_from_json(m, in_dim, out_dim));
    }

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("initializations")) {
            cfg.inits.clear();
            for (const auto& s : g.at("initializations")) {
                cfg.inits.push_back(init_scheme_from_string(s.get<std::string>()));
            }
        }
        if (g.contains("optimizers")) {
            cfg.optimizers.clear();
            for (const auto& s : g.at("optimizers")) {
                cfg.optimizers.push_back(optimizer_from_string(s.get<std::string>()));
            }
        }
        if (g.contains("learning_rates")) {
            cfg.learning_rates = g.at("learning_rates").get<std::vector<double>>();
        }
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("config: invalid JSON in '" + path + "': " + ex.what());
    }
    return experiment_config_from_json(j);
}

}  // namespace kanlab
