#include "trainplan/json_io.hpp"

#include <stdexcept>

namespace trainplan {

std::optional<ModelSpec> model_preset(const std::string& name) {
    // Table-derived shapes; the 1.4B hidden size follows the primary
    // table (2114) even though a companion table says 2064.
    if (name == "1.4B") return ModelSpec{24, 2114, 24, 51200, 2048};
    if (name == "22B") return ModelSpec{48, 6144, 48, 51200, 2048};
    if (name == "175B") return ModelSpec{96, 12288, 96, 51200, 2048};
    if (name == "1T") return ModelSpec{128, 25600, 128, 51200, 2048};
    return std::nullopt;
}

std::optional<ClusterSpec> cluster_preset(const std::string& name) {
    if (name == "frontier") return frontier_preset();
    return std::nullopt;
}

void to_json(json& j, const ModelSpec& spec) {
    j = json{{"num_layers", spec.num_layers},
             {"hidden_size", spec.hidden_size},
             {"num_heads", spec.num_heads},
             {"vocab_size", spec.vocab_size},
             {"seq_length", spec.seq_length}};
}

void from_json(const json& j, ModelSpec& spec) {
    j.at("num_layers").get_to(spec.num_layers);
    j.at("hidden_size").get_to(spec.hidden_size);
    j.at("num_heads").get_to(spec.num_heads);
    spec.vocab_size = j.value("vocab_size", 51200);
    spec.seq_length = j.value("seq_length", 2048);
}

void to_json(json& j, const ClusterSpec& spec) {
    j = json{{"num_nodes", spec.num_nodes},
             {"gpus_per_node", spec.gpus_per_node},
             {"mem_per_gpu", spec.mem_per_gpu},
             {"peak_flops_per_gpu", spec.peak_flops_per_gpu},
             {"bw_same_card", spec.bw_same_card},
             {"bw_intra_node", spec.bw_intra_node},
             {"bw_inter_node", spec.bw_inter_node},
             {"link_latency_intra", spec.link_latency_intra},
             {"link_latency_inter", spec.link_latency_inter},
             {"hbm_bandwidth", spec.hbm_bandwidth}};
}

void from_json(const json& j, ClusterSpec& spec) {
    spec = ClusterSpec{};
    spec.num_nodes = j.value("num_nodes", 1);
    spec.gpus_per_node = j.value("gpus_per_node", 8);
    j.at("mem_per_gpu").get_to(spec.mem_per_gpu);
    j.at("peak_flops_per_gpu").get_to(spec.peak_flops_per_gpu);
    j.at("bw_same_card").get_to(spec.bw_same_card);
    j.at("bw_intra_node").get_to(spec.bw_intra_node);
    j.at("bw_inter_node").get_to(spec.bw_inter_node);
    spec.link_latency_intra = j.value("link_latency_intra", 1e-6);
    spec.link_latency_inter = j.value("link_latency_inter", 5e-6);
    spec.hbm_bandwidth = j.value("hbm_bandwidth", 1.6e12);
}

std::string precision_name(Precision precision) {
    switch (precision) {
        case Precision::FP16: return "fp16";
        case Precision::BF16: return "bf16";
        case Precision::FP32: return "fp32";
    }
    throw std::invalid_argument("unknown precision");
}

Precision precision_from(const std::string& name) {
    if (name == "fp16") return Precision::FP16;
    if (name == "bf16") return Precision::BF16;
    if (name == "fp32") return Precision::FP32;
    throw std::invalid_argument("unknown precision: " + name);
}

void to_json(json& j, const ParallelConfig& cfg) {
    j = json{{"tp", cfg.tp},
             {"pp", cfg.pp},
             {"dp", cfg.dp},
             {"mbs", cfg.mbs},
             {"gbs", cfg.gbs},
             {"zero_stage", cfg.zero_stage},
             {"interleave_v", cfg.interleave_v},
             {"precision", precision_name(cfg.precision)},
             {"grad_accum_dtype",
              cfg.grad_accum_dtype == GradAccumDtype::FP32 ? "fp32" : "fp16"},
             {"checkpoint_activations", cfg.checkpoint_activations},
             {"flash_attention", cfg.flash_attention}};
}

void from_json(const json& j, ParallelConfig& cfg) {
    cfg = ParallelConfig{};
    cfg.tp = j.value("tp", 1);
    cfg.pp = j.value("pp", 1);
    cfg.dp = j.value("dp", 0);
    cfg.mbs = j.value("mbs", 1);
    cfg.gbs = j.value("gbs", 1);
    cfg.zero_stage = j.value("zero_stage", 0);
    cfg.interleave_v = j.value("interleave_v", 1);
    cfg.precision = precision_from(j.value("precision", "fp16"));
    cfg.grad_accum_dtype = j.value("grad_accum_dtype", "fp16") == std::string("fp32")
                               ? GradAccumDtype::FP32
                               : GradAccumDtype::FP16;
    cfg.checkpoint_activations = j.value("checkpoint_activations", false);
    cfg.flash_attention = j.value("flash_attention", false);
}

void to_json(json& j, const EfficiencyKnobs& knobs) {
    j = json{{"kernel_efficiency", knobs.kernel_efficiency},
             {"flash_attention_multiplier", knobs.flash_attention_multiplier},
             {"checkpoint_compute_factor", knobs.checkpoint_compute_factor}};
}

void from_json(const json& j, EfficiencyKnobs& knobs) {
    knobs = EfficiencyKnobs{};
    knobs.kernel_efficiency = j.value("kernel_efficiency", 0.5);
    knobs.flash_attention_multiplier = j.value("flash_attention_multiplier", 1.3);
    knobs.checkpoint_compute_factor = j.value("checkpoint_compute_factor", 4);
}

void to_json(json& j, const MemoryOptions& opts) {
    j = json{{"include_activations", opts.include_activations},
             {"framework_overhead_bytes", opts.framework_overhead_bytes},
             {"optimizer_bytes_per_param", opts.optimizer_bytes_per_param}};
}

void from_json(const json& j, MemoryOptions& opts) {
    opts = MemoryOptions{};
    opts.include_activations = j.value("include_activations", true);
    opts.framework_overhead_bytes = j.value("framework_overhead_bytes", 2ull << 30);
    opts.optimizer_bytes_per_param = j.value("optimizer_bytes_per_param", 0);
}

void to_json(json& j, const MemoryReport& report) {
    j = json{{"params_bytes", report.params_bytes},
             {"gradient_bytes", report.gradient_bytes},
             {"optimizer_bytes", report.optimizer_bytes},
             {"activation_bytes", report.activation_bytes},
             {"overhead_bytes", report.overhead_bytes},
             {"total_bytes", report.total_bytes},
             {"fits", report.fits}};
}

void from_json(const json& j, MemoryReport& report) {
    j.at("params_bytes").get_to(report.params_bytes);
    j.at("gradient_bytes").get_to(report.gradient_bytes);
    j.at("optimizer_bytes").get_to(report.optimizer_bytes);
    j.at("activation_bytes").get_to(report.activation_bytes);
    j.at("overhead_bytes").get_to(report.overhead_bytes);
    j.at("total_bytes").get_to(report.total_bytes);
    j.at("fits").get_to(report.fits);
}

void to_json(json& j, const ThroughputEstimate& est) {
    j = json{{"iter_time", est.iter_time},
             {"flops_per_gpu", est.flops_per_gpu},
             {"tflops_per_gpu", est.flops_per_gpu / 1e12},
             {"peak_fraction", est.peak_fraction},
             {"oom", est.oom},
             {"breakdown",
              json{{"compute", est.breakdown.compute},
                   {"tp_comm", est.breakdown.tp_comm},
                   {"pp_comm", est.breakdown.pp_comm},
                   {"dp_comm", est.breakdown.dp_comm},
                   {"bubble", est.breakdown.bubble}}}};
}

void from_json(const json& j, ThroughputEstimate& est) {
    est = ThroughputEstimate{};
    j.at("iter_time").get_to(est.iter_time);
    j.at("flops_per_gpu").get_to(est.flops_per_gpu);
    j.at("peak_fraction").get_to(est.peak_fraction);
    j.at("oom").get_to(est.oom);
    const json& b = j.at("breakdown");
    b.at("compute").get_to(est.breakdown.compute);
    b.at("tp_comm").get_to(est.breakdown.tp_comm);
    b.at("pp_comm").get_to(est.breakdown.pp_comm);
    b.at("dp_comm").get_to(est.breakdown.dp_comm);
    b.at("bubble").get_to(est.breakdown.bubble);
}

void to_json(json& j, const Violation& violation) {
    j = json{{"field", violation.field},
             {"message", violation.message},
             {"hard", violation.hard}};
}

void from_json(const json& j, Violation& violation) {
    j.at("field").get_to(violation.field);
    j.at("message").get_to(violation.message);
    violation.hard = j.value("hard", true);
}

void to_json(json& j, const SearchSpace& space) {
    j = json{{"pp", space.pp},
             {"tp", space.tp},
             {"mbs", json{{"min", space.mbs_min}, {"max", space.mbs_max}}},
             {"gas", space.gas},
             {"zero1", space.zero1},
             {"num_nodes", space.num_nodes}};
}

void from_json(const json& j, SearchSpace& space) {
    space = SearchSpace{};
    j.at("pp").get_to(space.pp);
    j.at("tp").get_to(space.tp);
    if (j.at("mbs").is_object()) {
        space.mbs_min = j.at("mbs").at("min").get<int>();
        space.mbs_max = j.at("mbs").at("max").get<int>();
    } else {
        // Also accept a [min, max] pair.
        space.mbs_min = j.at("mbs").at(0).get<int>();
        space.mbs_max = j.at("mbs").at(1).get<int>();
    }
    j.at("gas").get_to(space.gas);
    if (j.contains("zero1")) {
        space.zero1.clear();
        for (const auto& v : j.at("zero1")) {
            space.zero1.push_back(v.is_boolean() ? (v.get<bool>() ? 1 : 0) : v.get<int>());
        }
    }
    j.at("num_nodes").get_to(space.num_nodes);
}

std::string failure_kind_name(FailureKind kind) {
    switch (kind) {
        case FailureKind::None: return "NONE";
        case FailureKind::Oom: return "OOM";
        case FailureKind::Invalid: return "INVALID";
        case FailureKind::Timeout: return "TIMEOUT";
    }
    throw std::invalid_argument("unknown failure kind");
}

FailureKind failure_kind_from(const std::string& name) {
    if (name == "NONE") return FailureKind::None;
    if (name == "OOM") return FailureKind::Oom;
    if (name == "INVALID") return FailureKind::Invalid;
    if (name == "TIMEOUT") return FailureKind::Timeout;
    throw std::invalid_argument("unknown failure kind: " + name);
}

void to_json(json& j, const TrialRecord& record) {
    j = json{{"pp", record.point.pp},
             {"tp", record.point.tp},
             {"mbs", record.point.mbs},
             {"gas", record.point.gas},
             {"zero1", record.point.zero1},
             {"nodes", record.point.nodes},
             {"failure_kind", failure_kind_name(record.failure_kind)}};
    if (record.failed()) {
        j["objective"] = "F";
    } else {
        j["objective"] = record.objective;
    }
}

void from_json(const json& j, TrialRecord& record) {
    record = TrialRecord{};
    j.at("pp").get_to(record.point.pp);
    j.at("tp").get_to(record.point.tp);
    j.at("mbs").get_to(record.point.mbs);
    j.at("gas").get_to(record.point.gas);
    j.at("zero1").get_to(record.point.zero1);
    j.at("nodes").get_to(record.point.nodes);
    record.failure_kind = failure_kind_from(j.at("failure_kind").get<std::string>());
    if (!record.failed()) {
        j.at("objective").get_to(record.objective);
    }
}

void to_json(json& j, const RooflineReport& report) {
    j = json{{"total_flops", report.total_flops},
             {"total_bytes", report.total_bytes},
             {"arithmetic_intensity", report.arithmetic_intensity},
             {"ridge_intensity", report.ridge_intensity},
             {"bound",
              report.bound == RooflineBound::ComputeBound ? "compute_bound" : "memory_bound"}};
}

void from_json(const json& j, RooflineReport& report) {
    j.at("total_flops").get_to(report.total_flops);
    j.at("total_bytes").get_to(report.total_bytes);
    j.at("arithmetic_intensity").get_to(report.arithmetic_intensity);
    j.at("ridge_intensity").get_to(report.ridge_intensity);
    report.bound = j.at("bound").get<std::string>() == "compute_bound"
                       ? RooflineBound::ComputeBound
                       : RooflineBound::MemoryBound;
}

void to_json(json& j, const MbsDiagnosis& diag) {
    const char* kind = "consistent";
    if (diag.kind == MbsDiagnosisKind::MbsMismatch) kind = "mbs_mismatch";
    if (diag.kind == MbsDiagnosisKind::UnexplainedDivergence) kind = "unexplained_divergence";
    j = json{{"kind", kind},
             {"flops_ratio", diag.flops_ratio},
             {"mbs_ratio", diag.mbs_ratio},
             {"message", diag.message}};
}

void from_json(const json& j, MbsDiagnosis& diag) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "consistent") {
        diag.kind = MbsDiagnosisKind::Consistent;
    } else if (kind == "mbs_mismatch") {
        diag.kind = MbsDiagnosisKind::MbsMismatch;
    } else {
        diag.kind = MbsDiagnosisKind::UnexplainedDivergence;
    }
    j.at("flops_ratio").get_to(diag.flops_ratio);
    j.at("mbs_ratio").get_to(diag.mbs_ratio);
    j.at("message").get_to(diag.message);
}

ModelSpec model_from_json(const json& value) {
    if (value.is_string()) {
        const auto preset = model_preset(value.get<std::string>());
        if (!preset) {
            throw std::invalid_argument("unknown model preset: " + value.get<std::string>());
        }
        return *preset;
    }
    return value.get<ModelSpec>();
}

ClusterSpec cluster_from_json(const json& value) {
    if (value.is_string()) {
        const auto preset = cluster_preset(value.get<std::string>());
        if (!preset) {
            throw std::invalid_argument("unknown cluster preset: " + value.get<std::string>());
        }
        return *preset;
    }
    return value.get<ClusterSpec>();
}

}  // namespace trainplan
