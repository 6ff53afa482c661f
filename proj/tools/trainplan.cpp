#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "trainplan/json_io.hpp"
#include "trainplan/metrics.hpp"
#include "trainplan/perf.hpp"
#include "trainplan/pipesim.hpp"
#include "trainplan/util.hpp"

namespace tp = trainplan;
using tp::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitError = 2;

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + out_path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::uint64_t seed_or_env(std::optional<std::uint64_t> seed) {
    if (seed) return *seed;
    if (const char* env = std::getenv("TRAINPLAN_SEED")) {
        return std::stoull(env);
    }
    return 0;
}

// Shared --model/--cluster/--parallel wiring for plan and sweep.
// Precedence: presets, then config file, then flags.
struct PlanOptions {
    std::string config_path;
    std::string model = "22B";
    std::string cluster;
    std::string preset;
    std::optional<int> nodes, tpar, ppar, dpar, mbs, gbs, zero, interleave;
    std::optional<std::string> precision, grad_accum;
    std::optional<bool> checkpoint, flash;
    bool no_activations = false;
    std::optional<std::uint64_t> overhead_bytes;
    std::optional<double> kernel_efficiency, flash_multiplier;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "plan config JSON file");
        cmd->add_option("--model", model, "model preset name or spec JSON file");
        cmd->add_option("--cluster", cluster, "cluster spec JSON file");
        cmd->add_option("--preset", preset, "cluster preset name (frontier)");
        cmd->add_option("--nodes", nodes, "number of nodes");
        cmd->add_option("--tp", tpar, "tensor parallel size");
        cmd->add_option("--pp", ppar, "pipeline parallel size");
        cmd->add_option("--dp", dpar, "data parallel size (derived when omitted)");
        cmd->add_option("--mbs", mbs, "micro batch size");
        cmd->add_option("--gbs", gbs, "global batch size");
        cmd->add_option("--zero", zero, "ZeRO stage 0..3");
        cmd->add_option("--interleave", interleave, "interleaved pipeline chunks per device");
        cmd->add_option("--precision", precision, "fp16|bf16|fp32");
        cmd->add_option("--grad-accum-dtype", grad_accum, "fp16|fp32");
        cmd->add_flag("--checkpoint-activations,!--no-checkpoint-activations", checkpoint,
                      "activation checkpointing");
        cmd->add_flag("--flash-attention,!--no-flash-attention", flash, "flash attention");
        cmd->add_flag("--no-activations", no_activations,
                      "exclude the activation estimate from the memory model");
        cmd->add_option("--overhead-bytes", overhead_bytes, "framework overhead per GPU");
        cmd->add_option("--kernel-efficiency", kernel_efficiency, "fraction of peak");
        cmd->add_option("--flash-multiplier", flash_multiplier, "flash attention speedup");
    }

    struct Resolved {
        tp::ModelSpec model;
        tp::ClusterSpec cluster;
        tp::ParallelConfig parallel;
        tp::EfficiencyKnobs knobs;
        tp::MemoryOptions mem;
    };

    Resolved resolve() const {
        Resolved r;
        r.cluster = tp::frontier_preset();
        json cfg = json::object();
        if (!config_path.empty()) cfg = json::parse(read_file(config_path));

        if (cfg.contains("model")) {
            r.model = tp::model_from_json(cfg["model"]);
        } else if (auto preset = tp::model_preset(model)) {
            r.model = *preset;
        } else {
            r.model = json::parse(read_file(model)).get<tp::ModelSpec>();
        }
        if (cfg.contains("cluster")) r.cluster = tp::cluster_from_json(cfg["cluster"]);
        if (!cluster.empty()) r.cluster = tp::cluster_from_json(json::parse(read_file(cluster)));
        if (!preset.empty()) {
            const auto named = tp::cluster_preset(preset);
            if (!named) throw std::runtime_error("unknown cluster preset: " + preset);
            r.cluster = *named;
        }
        if (cfg.contains("parallel")) r.parallel = cfg["parallel"].get<tp::ParallelConfig>();
        if (cfg.contains("knobs")) r.knobs = cfg["knobs"].get<tp::EfficiencyKnobs>();
        if (cfg.contains("memory_options")) r.mem = cfg["memory_options"].get<tp::MemoryOptions>();

        if (nodes) r.cluster.num_nodes = *nodes;
        if (tpar) r.parallel.tp = *tpar;
        if (ppar) r.parallel.pp = *ppar;
        if (dpar) r.parallel.dp = *dpar;
        if (mbs) r.parallel.mbs = *mbs;
        if (gbs) r.parallel.gbs = *gbs;
        if (zero) r.parallel.zero_stage = *zero;
        if (interleave) r.parallel.interleave_v = *interleave;
        if (precision) r.parallel.precision = tp::precision_from(*precision);
        if (grad_accum) {
            r.parallel.grad_accum_dtype = *grad_accum == "fp32" ? tp::GradAccumDtype::FP32
                                                                : tp::GradAccumDtype::FP16;
        }
        if (checkpoint) r.parallel.checkpoint_activations = *checkpoint;
        if (flash) r.parallel.flash_attention = *flash;
        if (no_activations) r.mem.include_activations = false;
        if (overhead_bytes) r.mem.framework_overhead_bytes = *overhead_bytes;
        if (kernel_efficiency) r.knobs.kernel_efficiency = *kernel_efficiency;
        if (flash_multiplier) r.knobs.flash_attention_multiplier = *flash_multiplier;
        return r;
    }
};

int run_plan(const PlanOptions& opts, const std::string& out_path) {
    auto r = opts.resolve();
    const tp::ValidationResult val = tp::validate(r.model, r.parallel, r.cluster);

    json report;
    report["model"] = r.model;
    report["cluster"] = r.cluster;
    report["parallel"] = val.resolved;
    report["num_microbatches"] = val.num_microbatches;
    report["violations"] = val.violations;

    if (!val.ok) {
        for (const auto& v : val.hard_violations()) {
            std::cerr << "validation failure [" << v.field << "]: " << v.message << "\n";
        }
        write_output(report.dump(2) + "\n", out_path);
        return kExitValidation;
    }

    report["memory"] = tp::memory_per_gpu(r.model, val.resolved, r.cluster, r.mem);
    report["throughput"] = tp::estimate(r.model, val.resolved, r.cluster, r.knobs, r.mem);
    if (auto warning = tp::saturation_check(val.resolved)) {
        report["saturation_warning"] = *warning;
        std::cerr << "warning: " << *warning << "\n";
    }
    write_output(report.dump(2) + "\n", out_path);
    return kExitOk;
}

int run_simulate(const std::string& kind_name, int p, int m, int v, double t_fwd, double t_bwd,
                 double t_comm, const std::string& out_path) {
    tp::ScheduleKind kind;
    if (kind_name == "gpipe") {
        kind = tp::ScheduleKind::GPipe;
    } else if (kind_name == "1f1b") {
        kind = tp::ScheduleKind::OneF1B;
    } else if (kind_name == "interleaved") {
        kind = tp::ScheduleKind::Interleaved1F1B;
    } else {
        throw std::runtime_error("unknown schedule kind: " + kind_name);
    }
    auto timeline = tp::simulate(kind, p, m, v, {t_fwd, t_bwd, t_comm});
    write_output(tp::render_timeline(timeline), out_path);
    std::cerr << "makespan " << tp::format_double(timeline.makespan) << " bubble_ratio "
              << tp::format_double(timeline.bubble_ratio) << " bubble_fraction "
              << tp::format_double(timeline.bubble_fraction) << "\n";
    return kExitOk;
}

// --vary key=lo..hi[:step]; doubling when no step is given.
struct SweepRange {
    std::string key;
    long lo = 0, hi = 0, step = 0;  // step 0 = geometric doubling
};

SweepRange parse_vary(const std::string& text) {
    SweepRange range;
    const auto eq = text.find('=');
    const auto dots = text.find("..");
    if (eq == std::string::npos || dots == std::string::npos || dots < eq) {
        throw std::runtime_error("--vary expects key=lo..hi[:step]");
    }
    range.key = text.substr(0, eq);
    range.lo = std::stol(text.substr(eq + 1, dots - eq - 1));
    const auto colon = text.find(':', dots);
    if (colon == std::string::npos) {
        range.hi = std::stol(text.substr(dots + 2));
    } else {
        range.hi = std::stol(text.substr(dots + 2, colon - dots - 2));
        range.step = std::stol(text.substr(colon + 1));
    }
    if (range.lo < 1 || range.hi < range.lo) throw std::runtime_error("bad --vary range");
    return range;
}

int run_sweep(const PlanOptions& opts, const std::string& vary, const std::string& out_path) {
    const SweepRange range = parse_vary(vary);
    std::string csv = range.key + ",iter_time,tflops_per_gpu,peak_fraction,bubble,oom\n";
    for (long value = range.lo; value <= range.hi;
         value = range.step > 0 ? value + range.step : value * 2) {
        auto r = opts.resolve();
        if (range.key == "gbs") {
            r.parallel.gbs = static_cast<int>(value);
        } else if (range.key == "mbs") {
            r.parallel.mbs = static_cast<int>(value);
        } else if (range.key == "tp") {
            r.parallel.tp = static_cast<int>(value);
        } else if (range.key == "pp") {
            r.parallel.pp = static_cast<int>(value);
        } else if (range.key == "nodes") {
            r.cluster.num_nodes = static_cast<int>(value);
        } else {
            throw std::runtime_error("cannot vary: " + range.key);
        }
        const auto val = tp::validate(r.model, r.parallel, r.cluster);
        if (!val.ok) continue;  // skip infeasible grid points
        const auto est = tp::estimate(r.model, val.resolved, r.cluster, r.knobs, r.mem);
        csv += std::to_string(value) + ',' + tp::format_double(est.iter_time) + ',' +
               tp::format_double(est.flops_per_gpu / 1e12) + ',' +
               tp::format_double(est.peak_fraction) + ',' +
               tp::format_double(est.breakdown.bubble) + ',' + (est.oom ? "1" : "0") + '\n';
    }
    write_output(csv, out_path);
    return kExitOk;
}

std::string trials_csv(const std::vector<tp::TrialRecord>& history) {
    std::string csv = "trial,pp,tp,mbs,gas,zero1,nodes,objective,failure_kind\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& t = history[i];
        csv += std::to_string(i) + ',' + std::to_string(t.point.pp) + ',' +
               std::to_string(t.point.tp) + ',' + std::to_string(t.point.mbs) + ',' +
               std::to_string(t.point.gas) + ',' + (t.point.zero1 ? "1" : "0") + ',' +
               std::to_string(t.point.nodes) + ',' +
               (t.failed() ? "F" : tp::format_double(t.objective)) + ',' +
               tp::failure_kind_name(t.failure_kind) + '\n';
    }
    return csv;
}

int run_search_cmd(const PlanOptions& opts, const std::string& space_path, int budget,
                   std::optional<std::uint64_t> seed, const std::string& out_path,
                   const std::string& best_path) {
    auto r = opts.resolve();
    const auto space = json::parse(read_file(space_path)).get<tp::SearchSpace>();
    const auto evaluator = tp::make_estimate_evaluator(r.model, r.cluster, r.knobs, r.mem);
    const auto validator = tp::make_point_validator(r.model, r.cluster);
    const auto result = tp::run_search(space, budget, evaluator, seed_or_env(seed), validator);

    write_output(trials_csv(result.history), out_path);

    json best;
    best["trials"] = result.history.size();
    best["best"] = result.best ? json(*result.best) : json(nullptr);
    best["sensitivity"] = result.sensitivity;
    if (!result.diagnostic.empty()) best["diagnostic"] = result.diagnostic;
    if (result.best) {
        if (auto cfg = tp::config_from_point(result.best->point, r.cluster)) {
            best["best_config"] = *cfg;
        }
    }
    const std::string text = best.dump(2) + "\n";
    if (best_path.empty()) {
        std::cerr << text;
    } else {
        write_output(text, best_path);
    }
    return kExitOk;
}

int run_flops(const std::string& counters_path, const std::string& log_path,
              const std::string& coeff_mode, std::optional<double> hw_tflops,
              std::optional<double> model_tflops, std::optional<int> cfg_mbs,
              std::optional<int> ds_mbs, const std::string& out_path) {
    json report;
    const tp::MfmaCoeffMode mode = coeff_mode == "frontier-guide"
                                       ? tp::MfmaCoeffMode::FrontierGuide
                                       : tp::MfmaCoeffMode::Measured512;
    if (!counters_path.empty()) {
        std::ifstream in(counters_path);
        if (!in) throw std::runtime_error("cannot open file: " + counters_path);
        const auto parsed = tp::parse_counter_csv(in);
        for (const auto& warning : parsed.warnings) std::cerr << "warning: " << warning << "\n";
        report["counters"] = {{"rows", parsed.rows},
                              {"coeff_mode", coeff_mode},
                              {"total_flops", tp::hw_flops(parsed.totals, mode)},
                              {"warnings", parsed.warnings}};
    }
    if (!log_path.empty()) {
        std::ifstream in(log_path);
        if (!in) throw std::runtime_error("cannot open file: " + log_path);
        const auto entries = tp::parse_training_log(in);
        report["model_flops"] = {{"iterations", entries.size()},
                                 {"tflops_time_weighted", tp::aggregate_model_flops(entries)}};
        if (!model_tflops) model_tflops = tp::aggregate_model_flops(entries);
    }
    if (hw_tflops && model_tflops && cfg_mbs && ds_mbs) {
        report["mbs_diagnosis"] =
            tp::diagnose_mbs_mismatch(*model_tflops, *hw_tflops, *cfg_mbs, *ds_mbs);
    }
    if (report.empty()) throw std::runtime_error("flops: nothing to do; pass --counters or --log");
    write_output(report.dump(2) + "\n", out_path);
    return kExitOk;
}

int run_scaling(const std::string& mode, const std::string& series_path,
                const std::string& out_path) {
    std::vector<tp::ScalingPoint> series;
    std::istringstream in(read_file(series_path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (tp::trim(line).empty()) continue;
        const auto fields = tp::split_csv_line(line);
        if (fields.size() < 2) throw std::runtime_error("series rows need gpus,value");
        if (first) {
            first = false;
            // Tolerate a header row.
            try {
                std::stod(tp::trim(fields[0]));
            } catch (const std::exception&) {
                continue;
            }
        }
        series.push_back({std::stod(tp::trim(fields[0])), std::stod(tp::trim(fields[1]))});
    }
    const auto efficiency = mode == "weak" ? tp::weak_scaling(series) : tp::strong_scaling(series);
    json report;
    report["mode"] = mode;
    json points = json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
        points.push_back({{"gpus", series[i].gpus},
                          {"value", series[i].value},
                          {"efficiency", efficiency[i]}});
    }
    report["points"] = points;
    write_output(report.dump(2) + "\n", out_path);
    return kExitOk;
}

int run_topology(const PlanOptions& opts, const std::string& out_path) {
    auto r = opts.resolve();
    const auto& c = r.cluster;
    const int world = c.world_size();
    std::string csv = "gpu";
    auto name = [&](int rank) {
        return "n" + std::to_string(rank / c.gpus_per_node) + "g" +
               std::to_string(rank % c.gpus_per_node);
    };
    for (int i = 0; i < world; ++i) csv += "," + name(i);
    csv += '\n';
    for (int i = 0; i < world; ++i) {
        csv += name(i);
        for (int j = 0; j < world; ++j) {
            tp::GpuId a{i / c.gpus_per_node, i % c.gpus_per_node};
            tp::GpuId b{j / c.gpus_per_node, j % c.gpus_per_node};
            csv += ',';
            csv += i == j ? "0" : tp::format_double(tp::pair_bandwidth(c, a, b));
        }
        csv += '\n';
    }
    write_output(csv, out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trainplan: distributed LLM training planner and simulator"};
    app.require_subcommand(1);

    PlanOptions plan_opts;
    std::string out_path;
    auto* plan = app.add_subcommand("plan", "memory footprint and throughput estimate");
    plan_opts.attach(plan);
    plan->add_option("--out", out_path, "write JSON here instead of stdout");

    std::string sim_kind = "1f1b";
    int sim_p = 1, sim_m = 1, sim_v = 1;
    double sim_tf = 1.0, sim_tb = 2.0, sim_tc = 0.0;
    std::string sim_out;
    auto* sim = app.add_subcommand("simulate", "pipeline schedule timeline CSV");
    sim->add_option("--kind", sim_kind, "gpipe|1f1b|interleaved");
    sim->add_option("-p,--stages", sim_p, "pipeline stages")->required();
    sim->add_option("-m,--microbatches", sim_m, "microbatches")->required();
    sim->add_option("-v,--chunks", sim_v, "interleaved chunks per device");
    sim->add_option("--t-fwd", sim_tf, "forward seconds per microbatch per stage");
    sim->add_option("--t-bwd", sim_tb, "backward seconds per microbatch per stage");
    sim->add_option("--t-comm", sim_tc, "stage boundary transfer seconds");
    sim->add_option("--out", sim_out, "write CSV here instead of stdout");

    PlanOptions sweep_opts;
    std::string sweep_vary, sweep_out;
    auto* sweep = app.add_subcommand("sweep", "estimate over a parameter range, CSV");
    sweep_opts.attach(sweep);
    sweep->add_option("--vary", sweep_vary, "key=lo..hi[:step], e.g. gbs=64..2048")->required();
    sweep->add_option("--out", sweep_out, "write CSV here instead of stdout");

    PlanOptions search_opts;
    std::string space_path, search_out, best_out;
    int budget = 100;
    std::optional<std::uint64_t> seed;
    auto* search = app.add_subcommand("search", "sequential model-based configuration search");
    search_opts.attach(search);
    search->add_option("--space", space_path, "search space JSON")->required();
    search->add_option("--budget", budget, "trial budget");
    search->add_option("--seed", seed, "search seed (or TRAINPLAN_SEED)");
    search->add_option("--out", search_out, "trials CSV path");
    search->add_option("--best", best_out, "best-result JSON path (stderr when omitted)");

    std::string counters_path, log_path, coeff_mode = "measured", flops_out;
    std::optional<double> hw_tflops, model_tflops;
    std::optional<int> cfg_mbs, ds_mbs;
    auto* flops = app.add_subcommand("flops", "hardware and model FLOPS accounting");
    flops->add_option("--counters", counters_path, "hardware counter CSV");
    flops->add_option("--log", log_path, "training log for time-weighted model FLOPS");
    flops->add_option("--coeff-mode", coeff_mode, "measured|frontier-guide");
    flops->add_option("--hw-tflops", hw_tflops, "hardware TFLOPS rate for the diagnosis");
    flops->add_option("--model-tflops", model_tflops, "model TFLOPS rate for the diagnosis");
    flops->add_option("--cfg-mbs", cfg_mbs, "micro_batch_size launch parameter");
    flops->add_option("--ds-mbs", ds_mbs, "train_micro_batch_size_per_gpu config value");
    flops->add_option("--out", flops_out, "write JSON here instead of stdout");

    std::string scaling_mode, series_path, scaling_out;
    auto* scaling = app.add_subcommand("scaling", "weak/strong scaling efficiency");
    scaling->add_option("--mode", scaling_mode, "weak|strong")
        ->required()
        ->check(CLI::IsMember({"weak", "strong"}));
    scaling->add_option("--series", series_path, "CSV of gpus,value rows")->required();
    scaling->add_option("--out", scaling_out, "write JSON here instead of stdout");

    PlanOptions topo_opts;
    std::string topo_out;
    auto* topo = app.add_subcommand("topology", "pairwise bandwidth matrix CSV");
    topo_opts.attach(topo);
    topo->add_option("--out", topo_out, "write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        if (plan->parsed()) return run_plan(plan_opts, out_path);
        if (sim->parsed()) {
            return run_simulate(sim_kind, sim_p, sim_m, sim_v, sim_tf, sim_tb, sim_tc, sim_out);
        }
        if (sweep->parsed()) return run_sweep(sweep_opts, sweep_vary, sweep_out);
        if (search->parsed()) {
            return run_search_cmd(search_opts, space_path, budget, seed, search_out, best_out);
        }
        if (flops->parsed()) {
            return run_flops(counters_path, log_path, coeff_mode, hw_tflops, model_tflops,
                             cfg_mbs, ds_mbs, flops_out);
        }
        if (scaling->parsed()) return run_scaling(scaling_mode, series_path, scaling_out);
        if (topo->parsed()) return run_topology(topo_opts, topo_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
