#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "trainplan/memory.hpp"

using namespace trainplan;

namespace {

const ModelSpec k22B{48, 6144, 48, 51200, 2048};

MemoryOptions bare_options() {
    MemoryOptions opts;
    opts.include_activations = false;
    opts.framework_overhead_bytes = 0;
    return opts;
}

ParallelConfig serial_config() {
    ParallelConfig cfg;
    cfg.tp = cfg.pp = cfg.dp = 1;
    cfg.mbs = 1;
    cfg.gbs = 1;
    return cfg;
}

}  // namespace

TEST_CASE("mixed precision costs 14 bytes per parameter") {
    auto fp16 = bytes_per_param(Precision::FP16);
    CHECK(fp16.param_b == 6);
    CHECK(fp16.grad_b == 4);
    CHECK(fp16.optim_b == 4);
    auto bf16 = bytes_per_param(Precision::BF16);
    CHECK(bf16.param_b == 6);
    CHECK(bf16.grad_b == 4);
    CHECK(bf16.optim_b == 4);
    auto fp32 = bytes_per_param(Precision::FP32);
    CHECK(fp32.param_b + fp32.grad_b + fp32.optim_b == 12);
}

TEST_CASE("unsharded totals reproduce the published memory table") {
    ClusterSpec cluster = frontier_preset();
    auto cfg = serial_config();
    auto opts = bare_options();

    auto r22 = memory_per_gpu_for_params(22'000'000'000ull, k22B, cfg, cluster, opts);
    CHECK(r22.total_bytes == 308'000'000'000ull);
    CHECK(r22.params_bytes == 132'000'000'000ull);
    CHECK(r22.gradient_bytes == 88'000'000'000ull);
    CHECK(r22.optimizer_bytes == 88'000'000'000ull);
    CHECK_FALSE(r22.fits);

    auto r175 = memory_per_gpu_for_params(175'000'000'000ull, k22B, cfg, cluster, opts);
    CHECK(r175.total_bytes == 2'450'000'000'000ull);

    auto r1t = memory_per_gpu_for_params(1'000'000'000'000ull, k22B, cfg, cluster, opts);
    CHECK(r1t.total_bytes == 14'000'000'000'000ull);
}

TEST_CASE("report total always equals the category sum") {
    ClusterSpec cluster = frontier_preset();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        ParallelConfig cfg = serial_config();
        cfg.tp = 1 << (rng() % 4);
        cfg.pp = 1 << (rng() % 4);
        cfg.dp = 1 << (rng() % 4);
        cfg.mbs = 1 + static_cast<int>(rng() % 8);
        cfg.zero_stage = static_cast<int>(rng() % 3);
        cfg.checkpoint_activations = rng() % 2 == 0;
        auto rep = memory_per_gpu(k22B, cfg, cluster);
        CHECK(rep.total_bytes == rep.params_bytes + rep.gradient_bytes + rep.optimizer_bytes +
                                     rep.activation_bytes + rep.overhead_bytes);
        CHECK(rep.fits == (rep.total_bytes <= cluster.mem_per_gpu));
    }
}

TEST_CASE("ZeRO-1 shards only optimizer state") {
    ClusterSpec cluster = frontier_preset();
    auto opts = bare_options();
    ParallelConfig base = serial_config();
    base.dp = 8;
    ParallelConfig z1 = base;
    z1.zero_stage = 1;
    auto plain = memory_per_gpu_for_params(8'000'000'000ull, k22B, base, cluster, opts);
    auto sharded = memory_per_gpu_for_params(8'000'000'000ull, k22B, z1, cluster, opts);
    CHECK(sharded.params_bytes == plain.params_bytes);
    CHECK(sharded.gradient_bytes == plain.gradient_bytes);
    CHECK(sharded.optimizer_bytes * 8 == plain.optimizer_bytes);
}

TEST_CASE("sum over GPUs conserves every category") {
    ClusterSpec cluster = frontier_preset();
    auto opts = bare_options();
    const std::uint64_t n = 1ull << 36;  // divisible by every shard product below
    std::mt19937_64 rng(23);
    for (int i = 0; i < 40; ++i) {
        ParallelConfig cfg = serial_config();
        cfg.tp = 1 << (rng() % 4);
        cfg.pp = 1 << (rng() % 4);
        cfg.dp = 1 << (rng() % 4);
        cfg.zero_stage = static_cast<int>(rng() % 4);
        if (cfg.zero_stage == 3) cfg.pp = 1;
        auto rep = memory_per_gpu_for_params(n, k22B, cfg, cluster, opts);
        std::uint64_t shards = std::uint64_t(cfg.tp) * cfg.pp;
        auto per = bytes_per_param(cfg.precision);
        CHECK(rep.params_bytes * shards * (cfg.zero_stage >= 3 ? cfg.dp : 1) == n * per.param_b);
        CHECK(rep.gradient_bytes * shards * (cfg.zero_stage >= 2 ? cfg.dp : 1) == n * per.grad_b);
        CHECK(rep.optimizer_bytes * shards * (cfg.zero_stage >= 1 ? cfg.dp : 1) ==
              n * per.optim_b);
    }
}

TEST_CASE("higher ZeRO stages never increase the footprint") {
    ClusterSpec cluster = frontier_preset();
    std::mt19937_64 rng(29);
    for (int i = 0; i < 30; ++i) {
        ParallelConfig cfg = serial_config();
        cfg.tp = 1 << (rng() % 3);
        cfg.pp = 1;  // ZeRO-3 requires pp == 1
        cfg.dp = 2 << (rng() % 3);
        cfg.mbs = 1 + static_cast<int>(rng() % 4);
        std::uint64_t prev = ~0ull;
        for (int stage = 0; stage <= 3; ++stage) {
            cfg.zero_stage = stage;
            auto rep = memory_per_gpu(k22B, cfg, cluster);
            CHECK(rep.total_bytes <= prev);
            prev = rep.total_bytes;
        }
    }
}

TEST_CASE("footprint is non-increasing in tp and pp") {
    ClusterSpec cluster = frontier_preset();
    ParallelConfig cfg = serial_config();
    cfg.mbs = 2;
    std::uint64_t prev = ~0ull;
    for (int tp : {1, 2, 4, 8}) {
        cfg.tp = tp;
        auto rep = memory_per_gpu(k22B, cfg, cluster);
        CHECK(rep.total_bytes <= prev);
        prev = rep.total_bytes;
    }
    cfg.tp = 1;
    prev = ~0ull;
    for (int pp : {1, 2, 4, 8, 16}) {
        cfg.pp = pp;
        auto rep = memory_per_gpu(k22B, cfg, cluster);
        CHECK(rep.total_bytes <= prev);
        prev = rep.total_bytes;
    }
}

TEST_CASE("activation footprint golden value for the 22B spec") {
    // (34*s*b*d + 5*a*s^2*b) per layer, 48 layers, tp = pp = 1.
    ParallelConfig cfg = serial_config();
    CHECK(activation_bytes(k22B, cfg) == 68'853'694'464ull);
    cfg.checkpoint_activations = true;
    CHECK(activation_bytes(k22B, cfg) == 2'642'411'520ull);
}

TEST_CASE("zero micro-batch needs no activation memory") {
    ParallelConfig cfg = serial_config();
    cfg.mbs = 0;
    CHECK(activation_bytes(k22B, cfg) == 0);
}

TEST_CASE("checkpointing strictly shrinks activations with two or more layers per stage") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 30; ++i) {
        ParallelConfig cfg = serial_config();
        cfg.pp = 1 << (rng() % 3);
        cfg.tp = 1 << (rng() % 3);
        cfg.mbs = 1 + static_cast<int>(rng() % 16);
        if (k22B.num_layers / cfg.pp < 2) continue;
        ParallelConfig ckpt = cfg;
        ckpt.checkpoint_activations = true;
        CHECK(activation_bytes(k22B, ckpt) < activation_bytes(k22B, cfg));
    }
}

TEST_CASE("fp32 gradient accumulation adds four bytes per parameter") {
    ClusterSpec cluster = frontier_preset();
    auto opts = bare_options();
    ParallelConfig cfg = serial_config();
    cfg.precision = Precision::BF16;
    auto plain = memory_per_gpu_for_params(1'000'000'000ull, k22B, cfg, cluster, opts);
    cfg.grad_accum_dtype = GradAccumDtype::FP32;
    auto accum = memory_per_gpu_for_params(1'000'000'000ull, k22B, cfg, cluster, opts);
    CHECK(accum.gradient_bytes == plain.gradient_bytes + 4'000'000'000ull);
}

TEST_CASE("unbound dp is rejected") {
    ClusterSpec cluster = frontier_preset();
    ParallelConfig cfg;  // dp defaults to 0
    CHECK_THROWS_AS(memory_per_gpu(k22B, cfg, cluster), std::invalid_argument);
}
