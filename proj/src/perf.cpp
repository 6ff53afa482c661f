#include "trainplan/perf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trainplan/arch.hpp"
#include "trainplan/cluster.hpp"
#include "trainplan/pipesim.hpp"

namespace trainplan {

namespace {

// Rank layout: tp fastest, then pp, then dp; rank r lives on
// node r / gpus_per_node, slot r % gpus_per_node.
GpuId gpu_of_rank(const ClusterSpec& cluster, long long rank) {
    return {static_cast<int>(rank / cluster.gpus_per_node),
            static_cast<int>(rank % cluster.gpus_per_node)};
}

void require_knobs(const EfficiencyKnobs& knobs) {
    if (knobs.kernel_efficiency <= 0 || knobs.kernel_efficiency > 1) {
        throw std::invalid_argument("kernel_efficiency must be in (0, 1]");
    }
    if (knobs.flash_attention_multiplier < 1) {
        throw std::invalid_argument("flash_attention_multiplier must be >= 1");
    }
    if (knobs.checkpoint_compute_factor != 3 && knobs.checkpoint_compute_factor != 4) {
        throw std::invalid_argument("checkpoint_compute_factor must be 3 or 4");
    }
}

}  // namespace

ThroughputEstimate estimate(const ModelSpec& model, const ParallelConfig& cfg,
                            const ClusterSpec& cluster, const EfficiencyKnobs& knobs,
                            const MemoryOptions& mem_opts) {
    require_knobs(knobs);
    const ValidationResult val = validate(model, cfg, cluster);
    if (!val.ok) {
        throw std::invalid_argument("unvalidated configuration: " +
                                    val.hard_violations().front().message);
    }
    const ParallelConfig rc = val.resolved;
    const int m = val.num_microbatches;

    ThroughputEstimate est;
    const MemoryReport mem = memory_per_gpu(model, rc, cluster, mem_opts);
    if (!mem.fits) {
        est.oom = true;
        return est;
    }

    const double peak = cluster.peak_flops_per_gpu;
    const double flash = rc.flash_attention ? knobs.flash_attention_multiplier : 1.0;
    const double group_rate = rc.tp * knobs.kernel_efficiency * peak * flash;
    const double flops_microbatch = model_flops_per_iteration(
        model, rc.mbs, rc.checkpoint_activations, knobs.checkpoint_compute_factor);
    const double t_microbatch = flops_microbatch / (rc.pp * group_rate);

    // Four TP allreduces per layer per microbatch (two forward, two
    // backward), each moving the 2*mbs*s*d-byte activation tensor.
    const double activation_volume =
        2.0 * rc.mbs * model.seq_length * static_cast<double>(model.hidden_size);
    double tp_time_per_microbatch = 0.0;
    if (rc.tp > 1) {
        ProcessGroup tp_group{{}, GroupKind::TP};
        for (int t = 0; t < rc.tp; ++t) tp_group.members.push_back(gpu_of_rank(cluster, t));
        const double t_allreduce = allreduce_time(cluster, tp_group, activation_volume);
        tp_time_per_microbatch = 4.0 * (model.num_layers / rc.pp) * t_allreduce;
    }

    StageTiming timing;
    timing.t_fwd = t_microbatch / 3.0 + tp_time_per_microbatch / 2.0;
    timing.t_bwd = 2.0 * t_microbatch / 3.0 + tp_time_per_microbatch / 2.0;
    timing.t_comm = 0.0;
    for (int stage = 0; stage + 1 < rc.pp; ++stage) {
        const GpuId a = gpu_of_rank(cluster, static_cast<long long>(stage) * rc.tp);
        const GpuId b = gpu_of_rank(cluster, static_cast<long long>(stage + 1) * rc.tp);
        timing.t_comm = std::max(timing.t_comm, p2p_time(cluster, a, b, activation_volume));
    }

    const ScheduleKind kind =
        rc.interleave_v > 1 ? ScheduleKind::Interleaved1F1B : ScheduleKind::OneF1B;
    const IterationTimeline timeline = simulate(kind, rc.pp, m, rc.interleave_v, timing);

    double dp_time = 0.0;
    if (rc.dp > 1) {
        const double shard_grads =
            2.0 * static_cast<double>(param_count(model).total_exact) /
            (static_cast<double>(rc.tp) * rc.pp);
        ProcessGroup dp_group{{}, GroupKind::DP};
        const long long stride = static_cast<long long>(rc.tp) * rc.pp;
        for (int j = 0; j < rc.dp; ++j) {
            dp_group.members.push_back(gpu_of_rank(cluster, j * stride));
        }
        dp_time = rc.zero_stage >= 1
                      ? reduce_scatter_time(cluster, dp_group, shard_grads) +
                            allgather_time(cluster, dp_group, shard_grads)
                      : allreduce_time(cluster, dp_group, shard_grads);
    }

    est.iter_time = timeline.makespan + dp_time;
    const double flops_iteration = model_flops_per_iteration(
        model, rc.gbs, rc.checkpoint_activations, knobs.checkpoint_compute_factor);
    est.flops_per_gpu = flops_iteration / (est.iter_time * cluster.world_size());
    est.peak_fraction = est.flops_per_gpu / peak;

    double recv_total = 0.0;
    for (const auto& ev : timeline.events) {
        if (ev.kind == EventKind::Recv) recv_total += ev.end - ev.start;
    }
    est.breakdown.compute = m * t_microbatch;
    est.breakdown.tp_comm = m * tp_time_per_microbatch;
    est.breakdown.pp_comm = recv_total / rc.pp;
    est.breakdown.dp_comm = dp_time;
    est.breakdown.bubble =
        std::max(0.0, timeline.makespan - est.breakdown.compute - est.breakdown.tp_comm -
                          est.breakdown.pp_comm);
    return est;
}

EfficiencyKnobs calibrate(const EfficiencyKnobs& knobs,
                          const std::vector<ThroughputObservation>& observed) {
    if (observed.empty()) {
        throw std::invalid_argument("calibration needs at least one observation");
    }
    EfficiencyKnobs best = knobs;
    double best_error = 1e300;
    for (int step = 0; step <= 190; ++step) {
        EfficiencyKnobs trial = knobs;
        trial.kernel_efficiency = 0.05 + 0.005 * step;
        double error = 0.0;
        for (const auto& obs : observed) {
            const double predicted =
                estimate(obs.model, obs.cfg, obs.cluster, trial).flops_per_gpu / 1e12;
            const double rel = (predicted - obs.measured_tflops_per_gpu) /
                               obs.measured_tflops_per_gpu;
            error += rel * rel;
        }
        error /= static_cast<double>(observed.size());
        if (error < best_error) {
            best_error = error;
            best = trial;
        }
    }
    return best;
}

std::optional<std::string> saturation_check(const ParallelConfig& cfg) {
    if (cfg.pp <= 1) return std::nullopt;
    const int m = cfg.num_microbatches();
    if (m < cfg.pp) {
        return "pipeline unsaturated: " + std::to_string(m) + " microbatches for " +
               std::to_string(cfg.pp) + " stages; increase gbs or gradient accumulation";
    }
    return std::nullopt;
}

std::optional<ParallelConfig> config_from_point(const SearchPoint& point,
                                                const ClusterSpec& base_cluster) {
    ClusterSpec cluster = base_cluster;
    cluster.num_nodes = point.nodes;
    const long long world = cluster.world_size();
    const long long shards = static_cast<long long>(point.tp) * point.pp;
    if (point.tp < 1 || point.pp < 1 || point.mbs < 1 || point.gas < 1 || world % shards != 0) {
        return std::nullopt;
    }
    ParallelConfig cfg;
    cfg.tp = point.tp;
    cfg.pp = point.pp;
    cfg.dp = static_cast<int>(world / shards);
    cfg.mbs = point.mbs;
    cfg.gbs = point.mbs * point.gas * cfg.dp;
    cfg.zero_stage = point.zero1 ? 1 : 0;
    cfg.precision = Precision::FP16;
    cfg.checkpoint_activations = true;
    cfg.flash_attention = true;
    return cfg;
}

Evaluator make_estimate_evaluator(const ModelSpec& model, const ClusterSpec& base_cluster,
                                  const EfficiencyKnobs& knobs, const MemoryOptions& mem_opts) {
    return [model, base_cluster, knobs, mem_opts](const SearchPoint& point) {
        TrialRecord rec;
        rec.point = point;
        const auto cfg = config_from_point(point, base_cluster);
        if (!cfg) {
            rec.failure_kind = FailureKind::Invalid;
            return rec;
        }
        ClusterSpec cluster = base_cluster;
        cluster.num_nodes = point.nodes;
        if (!validate(model, *cfg, cluster).ok) {
            rec.failure_kind = FailureKind::Invalid;
            return rec;
        }
        const ThroughputEstimate est = estimate(model, *cfg, cluster, knobs, mem_opts);
        if (est.oom) {
            rec.failure_kind = FailureKind::Oom;
            return rec;
        }
        rec.objective = est.flops_per_gpu / 1e12;
        return rec;
    };
}

PointValidator make_point_validator(const ModelSpec& model, const ClusterSpec& base_cluster) {
    return [model, base_cluster](const SearchPoint& point) {
        const auto cfg = config_from_point(point, base_cluster);
        if (!cfg) return false;
        ClusterSpec cluster = base_cluster;
        cluster.num_nodes = point.nodes;
        return validate(model, *cfg, cluster).ok;
    };
}

}  // namespace trainplan
