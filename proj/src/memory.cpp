#include "trainplan/memory.hpp"

#include <stdexcept>

namespace trainplan {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void require_shape(const ParallelConfig& cfg) {
    if (cfg.tp < 1 || cfg.pp < 1 || cfg.dp < 1 || cfg.mbs < 0 || cfg.gbs < 1 ||
        cfg.interleave_v < 1 || cfg.zero_stage < 0 || cfg.zero_stage > 3) {
        throw std::invalid_argument("unvalidated configuration");
    }
}

}  // namespace

int ParallelConfig::num_microbatches() const {
    if (dp < 1) {
        throw std::invalid_argument("dp not bound; run validate first");
    }
    if (mbs < 1) {
        throw std::invalid_argument("mbs must be >= 1");
    }
    return gbs / (mbs * dp);
}

BytesPerParam bytes_per_param(Precision precision) {
    switch (precision) {
        case Precision::FP16:
        case Precision::BF16:
            return {6, 4, 4};
        case Precision::FP32:
            return {4, 4, 4};
    }
    throw std::invalid_argument("unknown precision");
}

std::uint64_t activation_bytes(const ModelSpec& model, const ParallelConfig& cfg) {
    if (cfg.tp < 1 || cfg.pp < 1 || cfg.mbs < 0) {
        throw std::invalid_argument("unvalidated configuration");
    }
    if (cfg.mbs == 0) return 0;
    const auto s = static_cast<std::uint64_t>(model.seq_length);
    const auto d = static_cast<std::uint64_t>(model.hidden_size);
    const auto a = static_cast<std::uint64_t>(model.num_heads);
    const auto b = static_cast<std::uint64_t>(cfg.mbs);
    const auto tp = static_cast<std::uint64_t>(cfg.tp);
    const std::uint64_t layers_per_stage =
        ceil_div(static_cast<std::uint64_t>(model.num_layers), static_cast<std::uint64_t>(cfg.pp));

    const std::uint64_t per_layer = 34 * s * b * d + 5 * a * s * s * b;
    if (cfg.checkpoint_activations) {
        const std::uint64_t boundary = 2 * s * b * d * layers_per_stage;
        return ceil_div(boundary + per_layer, tp);
    }
    return ceil_div(per_layer * layers_per_stage, tp);
}

MemoryReport memory_per_gpu_for_params(std::uint64_t total_params, const ModelSpec& model,
                                       const ParallelConfig& cfg, const ClusterSpec& cluster,
                                       const MemoryOptions& opts) {
    require_shape(cfg);
    BytesPerParam per = bytes_per_param(cfg.precision);
    if (opts.optimizer_bytes_per_param > 0) {
        per.optim_b = opts.optimizer_bytes_per_param;
    }
    int grad_b = per.grad_b;
    // The explicit fp32 gradient accumulation buffer used to combine
    // ZeRO-1 with bf16 training adds one fp32 value per parameter.
    if (cfg.grad_accum_dtype == GradAccumDtype::FP32 && cfg.precision != Precision::FP32) {
        grad_b += 4;
    }

    const auto shards = static_cast<std::uint64_t>(cfg.tp) * static_cast<std::uint64_t>(cfg.pp);
    const auto dp = static_cast<std::uint64_t>(cfg.dp);

    MemoryReport rep;
    rep.params_bytes = ceil_div(total_params * per.param_b, shards);
    rep.gradient_bytes = ceil_div(total_params * grad_b, shards);
    rep.optimizer_bytes = ceil_div(total_params * per.optim_b, shards);
    if (cfg.zero_stage >= 1) rep.optimizer_bytes = ceil_div(rep.optimizer_bytes, dp);
    if (cfg.zero_stage >= 2) rep.gradient_bytes = ceil_div(rep.gradient_bytes, dp);
    if (cfg.zero_stage >= 3) rep.params_bytes = ceil_div(rep.params_bytes, dp);
    rep.activation_bytes = opts.include_activations ? activation_bytes(model, cfg) : 0;
    rep.overhead_bytes = opts.framework_overhead_bytes;
    rep.total_bytes = rep.params_bytes + rep.gradient_bytes + rep.optimizer_bytes +
                      rep.activation_bytes + rep.overhead_bytes;
    rep.fits = rep.total_bytes <= cluster.mem_per_gpu;
    return rep;
}

MemoryReport memory_per_gpu(const ModelSpec& model, const ParallelConfig& cfg,
                            const ClusterSpec& cluster, const MemoryOptions& opts) {
    return memory_per_gpu_for_params(param_count(model).total_exact, model, cfg, cluster, opts);
}

}  // namespace trainplan
