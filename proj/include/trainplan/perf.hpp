#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trainplan/memory.hpp"
#include "trainplan/search.hpp"

namespace trainplan {

struct EfficiencyKnobs {
    double kernel_efficiency = 0.5;          // fraction of peak the kernels reach
    double flash_attention_multiplier = 1.3; // applied when flash_attention is on
    int checkpoint_compute_factor = 4;       // forward+backward factor with checkpointing
};

struct ThroughputBreakdown {
    double compute = 0.0;  // seconds per iteration, per device
    double tp_comm = 0.0;
    double pp_comm = 0.0;
    double dp_comm = 0.0;
    double bubble = 0.0;
};

struct ThroughputEstimate {
    double iter_time = 0.0;      // seconds
    double flops_per_gpu = 0.0;  // FLOP/s, model-FLOPS accounting
    double peak_fraction = 0.0;
    ThroughputBreakdown breakdown;
    bool oom = false;
};

// End-to-end throughput model: per-microbatch stage compute from the FLOP
// count and an effective kernel rate, Megatron-style TP allreduces (4 per
// layer per microbatch of 2*mbs*s*d bytes) folded into stage time, the
// pipeline simulated for bubble and boundary-transfer effects, and the DP
// gradient traffic (reduce-scatter + allgather under ZeRO, one allreduce
// otherwise) appended once per iteration. An out-of-memory configuration
// is a reported state, not an error. Throws only on an unvalidatable
// configuration.
ThroughputEstimate estimate(const ModelSpec& model, const ParallelConfig& cfg,
                            const ClusterSpec& cluster, const EfficiencyKnobs& knobs = {},
                            const MemoryOptions& mem_opts = {});

struct ThroughputObservation {
    ModelSpec model;
    ParallelConfig cfg;
    ClusterSpec cluster;
    double measured_tflops_per_gpu = 0.0;
};

// Fits kernel_efficiency on a [0.05, 1.0] grid (step 0.005) by minimizing
// mean squared relative error against the measurements.
EfficiencyKnobs calibrate(const EfficiencyKnobs& knobs,
                          const std::vector<ThroughputObservation>& observed);

// Warns when the microbatch count cannot saturate the pipeline (m < pp).
std::optional<std::string> saturation_check(const ParallelConfig& cfg);

// Search plumbing: evaluate a hyperparameter point with the estimator
// (gbs = mbs * gas * dp, fp16, checkpointing and flash attention on), and
// pre-screen points so the search never spends evaluator calls on
// configurations that fail validation.
Evaluator make_estimate_evaluator(const ModelSpec& model, const ClusterSpec& base_cluster,
                                  const EfficiencyKnobs& knobs = {},
                                  const MemoryOptions& mem_opts = {});
PointValidator make_point_validator(const ModelSpec& model, const ClusterSpec& base_cluster);

// The full configuration a search point denotes on the given cluster;
// nullopt when the world size does not factor.
std::optional<ParallelConfig> config_from_point(const SearchPoint& point,
                                                const ClusterSpec& base_cluster);

}  // namespace trainplan
