// kanlab command-line front end: grid runs, sweeps, reports, ID estimates.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kanlab/kanlab.hpp"

namespace {

using namespace kanlab;

int finish(const std::vector<RunRecord>& records, const std::string& out_dir) {
    write_results(records, out_dir);
    std::size_t failed = 0;
    for (const RunRecord& r : records) {
        if (r.diverged) ++failed;
    }
    std::cout << records.size() << " runs -> " << out_dir << "/records.jsonl";
    if (failed > 0) std::cout << " (" << failed << " flagged)";
    std::cout << "\n";
    return failed > 0 ? 2 : 0;
}

int cmd_grid(const std::string& config_path, const std::string& out_override) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    std::vector<RunRecord> records = run_experiment(cfg);
    return finish(records, cfg.output_dir);
}

int cmd_sweep_degree(const std::string& config_path, const std::string& out_override,
                     std::vector<int> degrees, std::vector<int> widths, const std::string& init,
                     const std::string& optimizer, double lr) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;

    const ModelConfig* base = nullptr;
    for (const ModelConfig& m : cfg.models) {
        if (m.family == ModelFamily::kan) {
            base = &m;
            break;
        }
    }
    if (base == nullptr) throw ConfigError("sweep-degree: config has no KAN model");

    TrainingScheme scheme;
    scheme.init = init_scheme_from_string(init);
    scheme.optimizer = optimizer_from_string(optimizer);
    scheme.lr = lr;
    scheme.batch_size = cfg.batch_size;
    scheme.stopping.max_epochs = cfg.epochs;
    scheme.trainer = cfg.trainer;

    DataBundle data = load_dataset(cfg.dataset);
    normalize(data.train, {&data.test}, cfg.normalization);
    const double id = dataset_id_estimate(data.test, cfg.id_sample_cap);
    const std::vector<RunSpec> specs = degree_width_specs(*base, degrees, widths, scheme, cfg.seed);
    std::vector<RunRecord> records =
        execute_all(specs, data.train, data.test, id, cfg.hsic, cfg.workers);
    return finish(records, cfg.output_dir);
}

int cmd_sweep_activation(const std::string& config_path, const std::string& out_override,
                         const std::string& records_path, const std::string& rule,
                         std::vector<std::string> activation_names) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;

    const ModelConfig* base = nullptr;
    for (const ModelConfig& m : cfg.models) {
        if (m.family == ModelFamily::kan) {
            base = &m;
            break;
        }
    }
    if (base == nullptr) throw ConfigError("sweep-activation: config has no KAN model");

    TrainingScheme scheme;
    scheme.batch_size = cfg.batch_size;
    scheme.stopping.max_epochs = cfg.epochs;
    scheme.trainer = cfg.trainer;
    if (!records_path.empty()) {
        std::vector<RunRecord> prior = read_jsonl(records_path);
        std::vector<RunRecord> kan_runs;
        for (const RunRecord& r : prior) {
            if (r.family == ModelFamily::kan) kan_runs.push_back(r);
        }
        const SchemeSelectionRule selection = rule == "min-gap" ? SchemeSelectionRule::min_gap
                                                                : SchemeSelectionRule::max_accuracy;
        scheme = select_best_scheme(kan_runs.empty() ? prior : kan_runs, selection);
        std::cout << "best scheme: " << to_string(scheme.init) << " + "
                  << to_string(scheme.optimizer) << " @ lr " << scheme.lr << "\n";
    }

    std::vector<Activation> activations;
    for (const std::string& name : activation_names) {
        activations.push_back(activation_from_string(name));
    }

    DataBundle data = load_dataset(cfg.dataset);
    normalize(data.train, {&data.test}, cfg.normalization);
    const double id = dataset_id_estimate(data.test, cfg.id_sample_cap);
    const std::vector<RunSpec> specs = activation_sweep_specs(*base, scheme, activations, cfg.seed);
    std::vector<RunRecord> records =
        execute_all(specs, data.train, data.test, id, cfg.hsic, cfg.workers);
    return finish(records, cfg.output_dir);
}

int cmd_report(const std::string& records_path, const std::string& out_dir) {
    std::vector<RunRecord> records = read_jsonl(records_path);
    if (records.empty()) throw ConfigError("report: no records in " + records_path);
    std::filesystem::create_directories(out_dir);
    write_summary_csv(records, out_dir + "/summary.csv");
    emit_plots(records, out_dir);
    const auto pairs = matched_parameter_pairs(records);
    if (!pairs.empty()) write_matched_pairs_csv(records, pairs, out_dir + "/matched_pairs.csv");
    std::cout << "report for " << records.size() << " records -> " << out_dir << "\n";
    return 0;
}

int cmd_id_estimate(const std::string& config_path, std::size_t cap) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    DataBundle data = load_dataset(cfg.dataset);
    normalize(data.train, {&data.test}, cfg.normalization);
    const double id = dataset_id_estimate(data.test, cap > 0 ? cap : cfg.id_sample_cap);
    std::cout << data.test.name << " test split: N=" << data.test.size() << " d=" << data.test.dim()
              << " intrinsic dimension = " << id << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kanlab: training-dynamics workbench for KAN and MLP architectures"};
    app.require_subcommand(1);

    std::string config_path, out_override, records_path, rule = "max-acc";
    std::vector<int> degrees{2, 3, 4, 5, 6};
    std::vector<int> widths{8, 16, 32, 64};
    std::string init = "kaiming-normal", optimizer = "adam";
    double lr = 1e-4;
    std::vector<std::string> activations{"gelu", "silu", "elu"};
    std::size_t id_cap = 0;

    CLI::App* grid = app.add_subcommand("grid", "run the full training-scheme grid from a config");
    grid->add_option("config", config_path, "experiment config (JSON, version 1)")->required();
    grid->add_option("--out", out_override, "override the config's output directory");

    CLI::App* sweep_deg =
        app.add_subcommand("sweep-degree", "degree-vs-width sweep on a single-hidden-layer KAN");
    sweep_deg->add_option("config", config_path)->required();
    sweep_deg->add_option("--out", out_override);
    sweep_deg->add_option("--degrees", degrees, "spline degrees to sweep")->delimiter(',');
    sweep_deg->add_option("--widths", widths, "hidden widths to sweep")->delimiter(',');
    sweep_deg->add_option("--init", init, "initialization scheme (default kaiming-normal)");
    sweep_deg->add_option("--optimizer", optimizer, "optimizer (default adam)");
    sweep_deg->add_option("--lr", lr, "learning rate (default 1e-4)");

    CLI::App* sweep_act =
        app.add_subcommand("sweep-activation", "vary the KAN base activation under the best scheme");
    sweep_act->add_option("config", config_path)->required();
    sweep_act->add_option("--out", out_override);
    sweep_act->add_option("--records", records_path,
                          "prior grid records to extract the best scheme from");
    sweep_act->add_option("--rule", rule, "selection rule: max-acc (default) or min-gap");
    sweep_act->add_option("--activations", activations)->delimiter(',');

    CLI::App* report = app.add_subcommand("report", "summary CSV and SVG plots from a JSONL file");
    std::string report_out = "report";
    report->add_option("records", records_path, "records.jsonl from a previous run")->required();
    report->add_option("--out", report_out, "output directory (default ./report)");

    CLI::App* id_cmd =
        app.add_subcommand("id-estimate", "print the intrinsic dimension of a dataset's test split");
    id_cmd->add_option("config", config_path)->required();
    id_cmd->add_option("--sample-cap", id_cap, "subsample cap for the pairwise scan");

    CLI11_PARSE(app, argc, argv);

    try {
        if (grid->parsed()) return cmd_grid(config_path, out_override);
        if (sweep_deg->parsed())
            return cmd_sweep_degree(config_path, out_override, degrees, widths, init, optimizer, lr);
        if (sweep_act->parsed())
            return cmd_sweep_activation(config_path, out_override, records_path, rule, activations);
        if (report->parsed()) return cmd_report(records_path, report_out);
        if (id_cmd->parsed()) return cmd_id_estimate(config_path, id_cap);
    } catch (const kanlab::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
