#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "trainplan/perf.hpp"

using namespace trainplan;

namespace {

const ModelSpec k22B{48, 6144, 48, 51200, 2048};
const ModelSpec k1T{128, 25600, 128, 51200, 2048};
// A 1.4B-class shape whose width divides every swept TP value.
const ModelSpec kSmall{24, 2048, 16, 51200, 2048};

ParallelConfig config(int tp, int pp, int mbs, int gbs, int zero = 0) {
    ParallelConfig cfg;
    cfg.tp = tp;
    cfg.pp = pp;
    cfg.mbs = mbs;
    cfg.gbs = gbs;
    cfg.zero_stage = zero;
    return cfg;
}

}  // namespace

TEST_CASE("a model that cannot fit reports OOM, not an error") {
    ClusterSpec cluster = frontier_preset(1);
    auto est = estimate(k1T, config(1, 1, 1, 8), cluster);
    CHECK(est.oom);
    CHECK(est.flops_per_gpu == 0.0);
    CHECK(est.peak_fraction == 0.0);
}

TEST_CASE("throughput decreases with TP and collapses past one node") {
    ClusterSpec cluster = frontier_preset(2);  // 16 GPUs
    std::vector<double> throughput;
    for (int tp : {1, 2, 4, 8, 16}) {
        auto est = estimate(kSmall, config(tp, 1, 1, 64), cluster);
        REQUIRE_FALSE(est.oom);
        throughput.push_back(est.peak_fraction);
    }
    // Strictly decreasing from 2 GPUs up; the node boundary is the cliff.
    for (std::size_t i = 2; i < throughput.size(); ++i) {
        CHECK(throughput[i] < throughput[i - 1]);
    }
    const double cross_node = throughput.back();
    for (std::size_t i = 0; i + 1 < throughput.size(); ++i) {
        CHECK(cross_node < throughput[i]);
    }
}

TEST_CASE("throughput never drops as the global batch grows") {
    ClusterSpec cluster = frontier_preset(4);  // 32 GPUs
    double prev = -1.0;
    for (int gbs : {16, 32, 64, 128, 256}) {
        ParallelConfig cfg = config(2, 4, 1, gbs);
        cfg.dp = 4;
        auto est = estimate(k22B, cfg, cluster);
        REQUIRE_FALSE(est.oom);
        CHECK(est.peak_fraction >= prev);
        prev = est.peak_fraction;
    }
}

TEST_CASE("deeper pipelines hurt at a fixed global batch") {
    double prev = 1e300;
    for (int pp : {4, 8, 16, 48}) {
        ClusterSpec cluster = frontier_preset(2 * pp / 8);
        ParallelConfig cfg = config(2, pp, 1, 128);
        cfg.dp = 1;
        auto est = estimate(k22B, cfg, cluster);
        REQUIRE_FALSE(est.oom);
        CHECK(est.peak_fraction < prev);
        prev = est.peak_fraction;
    }
}

TEST_CASE("doubling stages and batch together roughly preserves throughput") {
    ParallelConfig a = config(2, 4, 1, 64);
    a.dp = 2;
    ParallelConfig b = config(2, 8, 1, 128);
    b.dp = 2;
    auto ea = estimate(k22B, a, frontier_preset(2));
    auto eb = estimate(k22B, b, frontier_preset(4));
    REQUIRE_FALSE(ea.oom);
    REQUIRE_FALSE(eb.oom);
    CHECK(std::abs(ea.peak_fraction - eb.peak_fraction) / ea.peak_fraction <= 0.05);
}

TEST_CASE("a TP group inside one node beats the same group spanning nodes") {
    ClusterSpec packed = frontier_preset(2);  // 8 GPUs per node
    ClusterSpec spread = frontier_preset(2);
    spread.num_nodes = 4;
    spread.gpus_per_node = 4;  // same world size, TP=8 now crosses nodes
    auto cfg = config(8, 1, 1, 16);
    auto inside = estimate(kSmall, cfg, packed);
    auto across = estimate(kSmall, cfg, spread);
    CHECK(inside.peak_fraction > across.peak_fraction);
}

TEST_CASE("peak fraction stays below the kernel ceiling") {
    std::mt19937_64 rng(47);
    ClusterSpec cluster = frontier_preset(4);
    EfficiencyKnobs knobs;
    for (int i = 0; i < 30; ++i) {
        ParallelConfig cfg;
        cfg.tp = 1 << (rng() % 4);
        cfg.pp = 1 << (rng() % 3);
        cfg.mbs = 1 + static_cast<int>(rng() % 4);
        cfg.flash_attention = rng() % 2 == 0;
        cfg.checkpoint_activations = rng() % 2 == 0;
        const int world = cluster.world_size();
        if (world % (cfg.tp * cfg.pp) != 0) continue;
        cfg.dp = world / (cfg.tp * cfg.pp);
        cfg.gbs = cfg.mbs * cfg.dp * (1 + static_cast<int>(rng() % 16));
        if (k22B.num_layers % cfg.pp != 0) continue;
        auto est = estimate(k22B, cfg, cluster, knobs);
        if (est.oom) continue;
        const double ceiling = knobs.kernel_efficiency *
                               (cfg.flash_attention ? knobs.flash_attention_multiplier : 1.0);
        CHECK(est.peak_fraction <= ceiling + 1e-12);
        CHECK(est.peak_fraction >= 0.0);
    }
}

TEST_CASE("breakdown accounts for the whole iteration") {
    ClusterSpec cluster = frontier_preset(4);
    ParallelConfig cfg = config(2, 4, 2, 64, 1);
    cfg.dp = 4;
    auto est = estimate(k22B, cfg, cluster);
    REQUIRE_FALSE(est.oom);
    const auto& b = est.breakdown;
    const double parts = b.compute + b.tp_comm + b.pp_comm + b.dp_comm + b.bubble;
    CHECK(est.iter_time <= parts + 1e-9 * parts);
    CHECK(est.iter_time >= b.compute);
    CHECK(est.iter_time >= b.tp_comm);
    CHECK(est.iter_time >= b.pp_comm);
    CHECK(est.iter_time >= b.dp_comm);
    CHECK(b.bubble >= 0.0);
}

TEST_CASE("interleaving shrinks the bubble and raises throughput") {
    ClusterSpec cluster = frontier_preset(2);
    ParallelConfig flat = config(2, 8, 1, 16);
    flat.dp = 1;
    ParallelConfig chunked = flat;
    chunked.interleave_v = 2;
    auto plain = estimate(k22B, flat, cluster);
    auto interleaved = estimate(k22B, chunked, cluster);
    REQUIRE_FALSE(plain.oom);
    REQUIRE_FALSE(interleaved.oom);
    CHECK(interleaved.breakdown.bubble < plain.breakdown.bubble);
    CHECK(interleaved.peak_fraction > plain.peak_fraction);
}

TEST_CASE("estimate rejects configurations that fail validation") {
    ClusterSpec cluster = frontier_preset(2);
    CHECK_THROWS_AS(estimate(k22B, config(1, 13, 1, 16), cluster), std::invalid_argument);
    CHECK_THROWS_AS(estimate(k22B, config(3, 1, 1, 16), cluster), std::invalid_argument);
}

TEST_CASE("calibrate recovers a known kernel efficiency") {
    ClusterSpec cluster = frontier_preset(1);
    ParallelConfig cfg = config(1, 1, 1, 8);
    EfficiencyKnobs truth;
    truth.kernel_efficiency = 0.5;
    ThroughputObservation obs{kSmall, cfg, cluster,
                              estimate(kSmall, cfg, cluster, truth).flops_per_gpu / 1e12};
    auto fitted = calibrate(EfficiencyKnobs{}, {obs});
    CHECK(std::abs(fitted.kernel_efficiency - 0.5) < 0.0026);
}

TEST_CASE("calibration only sees ratios") {
    // One GPU, so the estimate is pure compute and exactly proportional
    // to efficiency times peak.
    ParallelConfig cfg = config(1, 1, 2, 16);
    ClusterSpec base = frontier_preset(1);
    base.gpus_per_node = 1;
    EfficiencyKnobs truth;
    truth.kernel_efficiency = 0.335;
    const double measured = estimate(kSmall, cfg, base, truth).flops_per_gpu / 1e12;
    auto fit_base = calibrate(EfficiencyKnobs{}, {{kSmall, cfg, base, measured}});

    ClusterSpec scaled = base;
    scaled.peak_flops_per_gpu *= 3.0;
    auto fit_scaled = calibrate(EfficiencyKnobs{}, {{kSmall, cfg, scaled, measured * 3.0}});
    CHECK(fit_base.kernel_efficiency == fit_scaled.kernel_efficiency);
}

TEST_CASE("calibrate against the published per-GPU throughputs") {
    // 22B, 175B, 1T measurements: 73.5, 69.2, 61.2 TFLOPS per GPU. Only
    // determinism and grid membership are promised, not accuracy.
    const ModelSpec k175B{96, 12288, 96, 51200, 2048};
    std::vector<ThroughputObservation> observed;
    ParallelConfig recipe22 = config(8, 2, 1, 320, 1);
    recipe22.checkpoint_activations = true;
    recipe22.flash_attention = true;
    observed.push_back({k22B, recipe22, frontier_preset(16), 73.5});
    ParallelConfig recipe175 = config(4, 16, 1, 640, 1);
    recipe175.checkpoint_activations = true;
    recipe175.flash_attention = true;
    observed.push_back({k175B, recipe175, frontier_preset(128), 69.2});
    ParallelConfig recipe1t = config(8, 64, 1, 1600, 1);
    recipe1t.checkpoint_activations = true;
    recipe1t.flash_attention = true;
    observed.push_back({k1T, recipe1t, frontier_preset(128), 61.2});

    auto fitted = calibrate(EfficiencyKnobs{}, observed);
    CHECK(fitted.kernel_efficiency >= 0.05);
    CHECK(fitted.kernel_efficiency <= 1.0);
    auto again = calibrate(EfficiencyKnobs{}, observed);
    CHECK(fitted.kernel_efficiency == again.kernel_efficiency);
}

TEST_CASE("empty calibration input is rejected") {
    CHECK_THROWS_AS(calibrate(EfficiencyKnobs{}, {}), std::invalid_argument);
}

TEST_CASE("saturation advisory") {
    ParallelConfig starved = config(1, 16, 1, 8);
    starved.dp = 1;
    CHECK(saturation_check(starved).has_value());
    ParallelConfig exact = config(1, 16, 1, 16);
    exact.dp = 1;
    CHECK_FALSE(saturation_check(exact).has_value());
    ParallelConfig flat = config(1, 1, 1, 1);
    flat.dp = 1;
    CHECK_FALSE(saturation_check(flat).has_value());
}

TEST_CASE("search plumbing evaluates and screens points") {
    ClusterSpec base = frontier_preset(1);
    auto evaluator = make_estimate_evaluator(k22B, base);
    auto validator = make_point_validator(k22B, base);

    SearchPoint good{8, 1, 1, 4, true, 2};  // tp=8 within a node, 16 GPUs
    CHECK(validator(good));
    auto rec = evaluator(good);
    CHECK_FALSE(rec.failed());
    CHECK(rec.objective > 0.0);

    SearchPoint unfactorable{3, 8, 1, 4, false, 2};  // 24 does not divide 16
    CHECK_FALSE(validator(unfactorable));
    CHECK(evaluator(unfactorable).failure_kind == FailureKind::Invalid);

    SearchPoint oom_point{1, 1, 1, 4, false, 2};  // 22B on single-GPU shards
    CHECK(validator(oom_point));
    CHECK(evaluator(oom_point).failure_kind == FailureKind::Oom);
}
