#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kanlab/grid.hpp"
#include "kanlab/svg.hpp"
#include "kanlab/train.hpp"

namespace kanlab {

// ---------------------------------------------------------------------------
// Record serialization (JSONL, one record per line, keys sorted)
// ---------------------------------------------------------------------------

inline nlohmann::json record_to_json(const RunRecord& rec) {
    nlohmann::json j;
    j["dataset"] = rec.dataset;
    j["model"] = rec.model_label;
    j["family"] = to_string(rec.family);
    j["size_class"] = to_string(rec.size_class);
    j["init"] = to_string(rec.scheme.init);
    j["optimizer"] = to_string(rec.scheme.optimizer);
    j["lr"] = rec.scheme.lr;
    j["batch_size"] = rec.scheme.batch_size;
    j["max_epochs"] = rec.scheme.stopping.max_epochs;
    j["trainer"] = to_string(rec.scheme.trainer);
    j["swept_axis"] = rec.swept_axis;
    j["swept_value"] = rec.swept_value;
    j["activation"] = rec.activation;
    j["seed"] = rec.seed;
    j["train_acc"] = rec.train_acc;
    j["test_acc"] = rec.test_acc;
    j["best_test_acc"] = rec.best_test_acc;
    j["best_epoch"] = rec.best_epoch;
    j["gap_at_best"] = rec.gap_at_best;
    j["param_count"] = rec.param_count;
    j["wall_seconds"] = rec.wall_seconds;
    j["id_estimate"] = rec.id_estimate;
    if (rec.ef) {
        j["ef"] = *rec.ef;
    } else {
        j["ef"] = nullptr;
    }
    j["diverged"] = rec.diverged;
    j["error"] = rec.error;
    return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
    RunRecord rec;
    rec.dataset = j.at("dataset").get<std::string>();
    rec.model_label = j.at("model").get<std::string>();
    rec.family = family_from_string(j.at("family").get<std::string>());
    rec.size_class = size_class_from_string(j.at("size_class").get<std::string>());
    rec.scheme.init = init_scheme_from_string(j.at("init").get<std::string>());
    rec.scheme.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    rec.scheme.lr = j.at("lr").get<double>();
    rec.scheme.batch_size = j.at("batch_size").get<std::size_t>();
    rec.scheme.stopping.max_epochs = j.at("max_epochs").get<int>();
    rec.scheme.trainer = trainer_from_string(j.at("trainer").get<std::string>());
    rec.swept_axis = j.at("swept_axis").get<std::string>();
    rec.swept_value = j.at("swept_value").get<double>();
    rec.activation = j.at("activation").get<std::string>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.train_acc = j.at("train_acc").get<std::vector<double>>();
    rec.test_acc = j.at("test_acc").get<std::vector<double>>();
    rec.best_test_acc = j.at("best_test_acc").get<double>();
    rec.best_epoch = j.at("best_epoch").get<int>();
    rec.gap_at_best = j.at("gap_at_best").get<double>();
    rec.param_count = j.at("param_count").get<long>();
    rec.wall_seconds = j.at("wall_seconds").get<double>();
    rec.id_estimate = j.at("id_estimate").get<double>();
    if (!j.at("ef").is_null()) rec.ef = j.at("ef").get<double>();
    rec.diverged = j.at("diverged").get<bool>();
    rec.error = j.at("error").get<std::string>();
    return rec;
}

/// Copy of a record line with timing removed; re-runs of the same experiment
/// agree byte for byte on this form.
inline std::string record_line_without_timing(const nlohmann::json& j) {
    nlohmann::json copy = j;
    copy.erase("wall_seconds");
    return copy.dump();
}

inline void write_jsonl(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_jsonl: cannot write '" + path + "'");
    for (const RunRecord& rec : records) {
        out << record_to_json(rec).dump() << "\n";
    }
}

inline std::vector<RunRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_jsonl: cannot open '" + path + "'");
    std::vector<RunRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// CSV summary
// ---------------------------------------------------------------------------

namespace detail {

/// Shortest round-trip decimal form (reuses the JSON number printer).
inline std::string fmt_double(double v) { return nlohmann::json(v).dump(); }

}  // namespace detail

inline void write_summary_csv(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_csv: cannot write '" + path + "'");
    out << "dataset,model,family,size_class,init,optimizer,lr,trainer,swept_axis,swept_value,"
           "activation,seed,param_count,best_test_acc,best_epoch,ef,gap_at_best,diverged,"
           "wall_seconds\n";
    for (const RunRecord& r : records) {
        out << r.dataset << ',' << r.model_label << ',' << to_string(r.family) << ','
            << to_string(r.size_class) << ',' << to_string(r.scheme.init) << ','
            << to_string(r.scheme.optimizer) << ',' << detail::fmt_double(r.scheme.lr) << ','
            << to_string(r.scheme.trainer) << ',' << r.swept_axis << ','
            << detail::fmt_double(r.swept_value) << ',' << r.activation << ',' << r.seed << ','
            << r.param_count << ',' << detail::fmt_double(r.best_test_acc) << ',' << r.best_epoch
            << ',' << (r.ef ? detail::fmt_double(*r.ef) : std::string()) << ','
            << detail::fmt_double(r.gap_at_best) << ',' << (r.diverged ? "true" : "false") << ','
            << detail::fmt_double(r.wall_seconds) << "\n";
    }
}

/// Matched-parameter pairing table for the degree-vs-width comparison.
inline void write_matched_pairs_csv(const std::vector<RunRecord>& records,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_matched_pairs_csv: cannot write '" + path + "'");
    out << "degree_run,degree_value,degree_params,degree_best_acc,"
           "width_run,width_value,width_params,width_best_acc\n";
    for (const auto& [di, wi] : pairs) {
        const RunRecord& d = records[di];
        const RunRecord& w = records[wi];
        out << d.model_label << ',' << detail::fmt_double(d.swept_value) << ',' << d.param_count
            << ',' << detail::fmt_double(d.best_test_acc) << ',' << w.model_label << ','
            << detail::fmt_double(w.swept_value) << ',' << w.param_count << ','
            << detail::fmt_double(w.best_test_acc) << "\n";
    }
}

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

namespace detail {

struct BoxStats {
    double lo, q1, med, q3, hi;
};

inline BoxStats box_stats(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * (static_cast<double>(v.size()) - 1.0);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
    };
    return BoxStats{v.front(), quantile(0.25), quantile(0.5), quantile(0.75), v.back()};
}

}  // namespace detail

/// Best test accuracy per (dataset, model), grouped bars.
inline void plot_accuracy_bars(const std::vector<RunRecord>& records, const std::string& path) {
    std::map<std::string, std::map<std::string, double>> best;  // dataset -> model -> A*
    for (const RunRecord& r : records) {
        if (r.diverged || r.best_epoch < 0) continue;
        auto& slot = best[r.dataset][r.model_label];
        slot = std::max(slot, r.best_test_acc);
    }
    std::vector<std::string> models;
    for (const auto& [ds, per_model] : best) {
        for (const auto& [m, _] : per_model) {
            if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
        }
    }
    const double bar_w = 34.0, group_gap = 40.0;
    const double plot_h = 260.0, margin_l = 60.0, margin_t = 40.0, margin_b = 70.0;
    const double group_w = bar_w * static_cast<double>(models.size());
    const double width =
        margin_l + (group_w + group_gap) * static_cast<double>(std::max<std::size_t>(1, best.size())) + 40.0;
    SvgCanvas svg(width, margin_t + plot_h + margin_b);
    svg.text(margin_l, 20, "best test accuracy by training scheme group", 13);
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const double y = margin_t + plot_h * (1.0 - frac);
        svg.line(margin_l - 4, y, width - 20, y, "#ddd");
        svg.text(margin_l - 8, y + 4, SvgCanvas::num(frac), 10, "end");
    }
    double x = margin_l + 10.0;
    for (const auto& [ds, per_model] : best) {
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            auto it = per_model.find(models[mi]);
            if (it == per_model.end()) continue;
            const double h = plot_h * it->second;
            svg.rect(x + bar_w * static_cast<double>(mi), margin_t + plot_h - h, bar_w - 4.0, h,
                     plot_color(mi));
        }
        svg.text(x + group_w / 2.0, margin_t + plot_h + 16, ds, 11, "middle");
        x += group_w + group_gap;
    }
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const double lx = margin_l + static_cast<double>(mi) * 150.0;
        svg.rect(lx, margin_t + plot_h + 34, 12, 12, plot_color(mi));
        svg.text(lx + 18, margin_t + plot_h + 44, models[mi], 11);
    }
    svg.save(path);
}

/// Distribution of best test accuracy over all schemes, one box per
/// (dataset, model): the paper-style scheme-variance view.
inline void plot_scheme_boxplots(const std::vector<RunRecord>& records, const std::string& path) {
    std::map<std::string, std::map<std::string, std::vector<double>>> groups;
    for (const RunRecord& r : records) {
        if (r.diverged || r.best_epoch < 0) continue;
        groups[r.dataset][r.model_label].push_back(r.best_test_acc);
    }
    std::size_t n_boxes = 0;
    for (const auto& [ds, per_model] : groups) n_boxes += per_model.size();
    const double box_w = 46.0, gap = 26.0, group_gap = 50.0;
    const double plot_h = 260.0, margin_l = 60.0, margin_t = 40.0, margin_b = 80.0;
    const double width = margin_l + static_cast<double>(n_boxes) * (box_w + gap) +
                         static_cast<double>(groups.size()) * group_gap + 60.0;
    SvgCanvas svg(width, margin_t + plot_h + margin_b);
    svg.text(margin_l, 20, "test accuracy across all training schemes", 13);
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const double y = margin_t + plot_h * (1.0 - frac);
        svg.line(margin_l - 4, y, width - 20, y, "#ddd");
        svg.text(margin_l - 8, y + 4, SvgCanvas::num(frac), 10, "end");
    }
    auto ypos = [&](double acc) { return margin_t + plot_h * (1.0 - acc); };
    double x = margin_l + 20.0;
    std::size_t color = 0;
    for (const auto& [ds, per_model] : groups) {
        const double group_start = x;
        for (const auto& [model, accs] : per_model) {
            const detail::BoxStats s = detail::box_stats(accs);
            const double cx = x + box_w / 2.0;
            svg.line(cx, ypos(s.lo), cx, ypos(s.q1), "#555");
            svg.line(cx, ypos(s.q3), cx, ypos(s.hi), "#555");
            svg.rect(x, ypos(s.q3), box_w, std::max(1.0, ypos(s.q1) - ypos(s.q3)),
                     plot_color(color), "#333");
            svg.line(x, ypos(s.med), x + box_w, ypos(s.med), "#111", 2.0);
            svg.text(cx, margin_t + plot_h + 16, model, 10, "middle");
            x += box_w + gap;
            ++color;
        }
        svg.text((group_start + x - gap) / 2.0, margin_t + plot_h + 34, ds, 11, "middle");
        x += group_gap;
    }
    svg.save(path);
}

/// EF and generalization gap against parameter count (log10 x-axis).
inline void plot_efficiency_scatter(const std::vector<RunRecord>& records, const std::string& path) {
    std::vector<const RunRecord*> ok;
    for (const RunRecord& r : records) {
        if (!r.diverged && r.best_epoch >= 0 && r.param_count > 0) ok.push_back(&r);
    }
    const double panel_w = 360.0, panel_h = 240.0, margin = 60.0, gap = 70.0;
    SvgCanvas svg(margin * 2 + panel_w * 2 + gap, margin * 2 + panel_h + 20);
    double lo = 1e300, hi = -1e300;
    double ef_hi = 0.0, gap_lo = 0.0, gap_hi = 0.0;
    for (const RunRecord* r : ok) {
        lo = std::min(lo, std::log10(static_cast<double>(r->param_count)));
        hi = std::max(hi, std::log10(static_cast<double>(r->param_count)));
        if (r->ef) ef_hi = std::max(ef_hi, *r->ef);
        gap_lo = std::min(gap_lo, r->gap_at_best);
        gap_hi = std::max(gap_hi, r->gap_at_best);
    }
    if (ok.empty()) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi <= lo) hi = lo + 1.0;
    if (ef_hi <= 0.0) ef_hi = 1.0;
    if (gap_hi <= gap_lo) gap_hi = gap_lo + 1.0;

    auto draw_panel = [&](double x0, const std::string& title) {
        svg.rect(x0, margin, panel_w, panel_h, "none", "#999");
        svg.text(x0, margin - 10, title, 12);
        svg.text(x0 + panel_w / 2.0, margin + panel_h + 28, "parameter count (log10)", 10, "middle");
    };
    draw_panel(margin, "efficiency vs model size");
    draw_panel(margin + panel_w + gap, "generalization gap vs model size");

    std::map<std::string, std::size_t> model_color;
    for (const RunRecord* r : ok) {
        if (!model_color.count(r->model_label)) {
            const std::size_t c = model_color.size();
            model_color[r->model_label] = c;
        }
    }
    for (const RunRecord* r : ok) {
        const double fx = (std::log10(static_cast<double>(r->param_count)) - lo) / (hi - lo);
        const std::size_t c = model_color[r->model_label];
        if (r->ef) {
            const double fy = *r->ef / ef_hi;
            svg.circle(margin + fx * panel_w, margin + panel_h * (1.0 - fy), 3.5, plot_color(c));
        }
        const double gy = (r->gap_at_best - gap_lo) / (gap_hi - gap_lo);
        svg.circle(margin + panel_w + gap + fx * panel_w, margin + panel_h * (1.0 - gy), 3.5,
                   plot_color(c));
    }
    double ly = margin + 12;
    for (const auto& [model, c] : model_color) {
        svg.circle(margin * 2 + panel_w * 2 + gap - 90, ly, 4, plot_color(c));
        svg.text(margin * 2 + panel_w * 2 + gap - 80, ly + 4, model, 10);
        ly += 16;
    }
    svg.save(path);
}

/// Write every report artifact for a set of records into `dir`.
inline void emit_plots(const std::vector<RunRecord>& records, const std::string& dir) {
    if (records.empty()) throw std::invalid_argument("emit_plots: no records");
    std::filesystem::create_directories(dir);
    plot_accuracy_bars(records, dir + "/accuracy_bars.svg");
    plot_scheme_boxplots(records, dir + "/scheme_boxplots.svg");
    plot_efficiency_scatter(records, dir + "/efficiency_scatter.svg");
}

/// JSONL + CSV + plots; the standard output bundle of a grid run.
inline void write_results(const std::vector<RunRecord>& records, const std::string& dir) {
    if (records.empty()) throw std::invalid_argument("write_results: no records");
    std::filesystem::create_directories(dir);
    write_jsonl(records, dir + "/records.jsonl");
    write_summary_csv(records, dir + "/summary.csv");
    emit_plots(records, dir);
    const std::vector<std::pair<std::size_t, std::size_t>> pairs = matched_parameter_pairs(records);
    if (!pairs.empty()) {
        write_matched_pairs_csv(records, pairs, dir + "/matched_pairs.csv");
    }
}

}  // namespace kanlab
