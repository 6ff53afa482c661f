#pragma once

#include <cstdint>
#include <string>

#include "trainplan/arch.hpp"
#include "trainplan/cluster.hpp"

namespace trainplan {

enum class Precision { FP16, BF16, FP32 };
enum class GradAccumDtype { FP16, FP32 };

// One training configuration: the 3D-parallel layout plus the knobs that
// change memory or compute behavior. dp == 0 means "derive from the
// cluster" (see validate()).
struct ParallelConfig {
    int tp = 1;
    int pp = 1;
    int dp = 0;
    int mbs = 1;   // micro-batch size per model replica
    int gbs = 1;   // global batch size
    int zero_stage = 0;
    int interleave_v = 1;
    Precision precision = Precision::FP16;
    GradAccumDtype grad_accum_dtype = GradAccumDtype::FP16;
    bool checkpoint_activations = false;
    bool flash_attention = false;

    // gbs / (mbs * dp); requires dp bound.
    int num_microbatches() const;
};

// Per-parameter byte costs (param copies, gradients, optimizer state).
struct BytesPerParam {
    int param_b = 0;
    int grad_b = 0;
    int optim_b = 0;
};

// Mixed precision: 6 (fp32 master + fp16 compute copy) + 4 + 4 = 14 bytes
// per parameter. fp32: 4 + 4 + 4. The 4-byte optimizer figure counts the
// fp32 momentum only; override via MemoryOptions when modeling a full
// Adam state (momentum + variance).
BytesPerParam bytes_per_param(Precision precision);

struct MemoryOptions {
    bool include_activations = true;
    std::uint64_t framework_overhead_bytes = 2ull << 30;  // per GPU
    int optimizer_bytes_per_param = 0;                    // 0 = precision default
};

struct MemoryReport {
    std::uint64_t params_bytes = 0;
    std::uint64_t gradient_bytes = 0;
    std::uint64_t optimizer_bytes = 0;
    std::uint64_t activation_bytes = 0;
    std::uint64_t overhead_bytes = 0;
    std::uint64_t total_bytes = 0;  // sum of the five categories
    bool fits = false;              // total_bytes <= mem_per_gpu
};

// Activation footprint of one pipeline stage on one GPU, 2-byte
// activations. Without checkpointing: (34*s*b*d + 5*a*s^2*b) per layer,
// times layers-per-stage, divided by tp. With checkpointing only the
// stage-boundary tensors (2*s*b*d per layer) survive, plus one layer's
// working set for recomputation.
std::uint64_t activation_bytes(const ModelSpec& model, const ParallelConfig& cfg);

// Per-GPU footprint under the TP*PP shard plus ZeRO sharding over DP:
// stage >= 1 shards optimizer state, >= 2 also gradients, == 3 also
// parameters. Throws for an unvalidated config (dp unbound or
// non-positive shape).
MemoryReport memory_per_gpu(const ModelSpec& model, const ParallelConfig& cfg,
                            const ClusterSpec& cluster, const MemoryOptions& opts = {});

// Same footprint from an explicit (e.g. nominal) parameter count.
MemoryReport memory_per_gpu_for_params(std::uint64_t total_params, const ModelSpec& model,
                                       const ParallelConfig& cfg, const ClusterSpec& cluster,
                                       const MemoryOptions& opts = {});

}  // namespace trainplan
