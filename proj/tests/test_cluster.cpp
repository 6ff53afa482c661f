#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "trainplan/cluster.hpp"

using namespace trainplan;

namespace {

ProcessGroup group_of(std::vector<GpuId> members, GroupKind kind = GroupKind::TP) {
    return ProcessGroup{std::move(members), kind};
}

ClusterSpec zero_latency_frontier(int nodes) {
    ClusterSpec spec = frontier_preset(nodes);
    spec.link_latency_intra = 0.0;
    spec.link_latency_inter = 0.0;
    return spec;
}

}  // namespace

TEST_CASE("frontier preset carries the published node figures") {
    ClusterSpec spec = frontier_preset();
    CHECK(spec.gpus_per_node == 8);
    CHECK(spec.peak_flops_per_gpu == 191.5e12);
    CHECK(spec.bw_inter_node == 25e9);
    CHECK(spec.mem_per_gpu == (64ull << 30));
    CHECK(spec.bw_same_card == 200e9);
    CHECK(spec.bw_intra_node == 100e9);
    CHECK(spec.bw_same_card >= spec.bw_intra_node);
    CHECK(spec.bw_intra_node >= spec.bw_inter_node);
}

TEST_CASE("pair bandwidth tiers") {
    ClusterSpec spec = frontier_preset(2);
    CHECK(pair_bandwidth(spec, {0, 0}, {0, 1}) == 200e9);
    CHECK(pair_bandwidth(spec, {0, 0}, {0, 2}) == 100e9);
    CHECK(pair_bandwidth(spec, {0, 0}, {1, 0}) == 25e9);
    CHECK(pair_bandwidth(spec, {0, 6}, {0, 7}) == 200e9);
    CHECK(pair_bandwidth(spec, {0, 5}, {0, 6}) == 100e9);
    CHECK_THROWS_AS(pair_bandwidth(spec, {0, 3}, {0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(pair_bandwidth(spec, {0, 0}, {3, 0}), std::invalid_argument);
}

TEST_CASE("pair bandwidth is symmetric") {
    ClusterSpec spec = frontier_preset(3);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        GpuId a{static_cast<int>(rng() % 3), static_cast<int>(rng() % 8)};
        GpuId b{static_cast<int>(rng() % 3), static_cast<int>(rng() % 8)};
        if (a == b) continue;
        CHECK(pair_bandwidth(spec, a, b) == pair_bandwidth(spec, b, a));
    }
}

TEST_CASE("allreduce over one GPU is free") {
    ClusterSpec spec = frontier_preset();
    CHECK(allreduce_time(spec, group_of({{0, 0}}), 1e12) == 0.0);
}

TEST_CASE("two-GPU same-card allreduce hand value") {
    ClusterSpec spec = zero_latency_frontier(1);
    // 2 * (1/2) * 200e9 / 200e9
    CHECK(allreduce_time(spec, group_of({{0, 0}, {0, 1}}), 200e9) == 1.0);
}

TEST_CASE("four-GPU intra-node allgather hand value") {
    ClusterSpec spec = zero_latency_frontier(1);
    auto g = group_of({{0, 0}, {0, 1}, {0, 2}, {0, 3}});
    // (3/4) * 400e9 / 100e9: the (1,2) link crosses cards.
    CHECK(allgather_time(spec, g, 400e9) == 3.0);
    CHECK(reduce_scatter_time(spec, g, 400e9) == 3.0);
}

TEST_CASE("allgather plus reduce_scatter equals allreduce") {
    ClusterSpec spec = frontier_preset(4);
    std::mt19937_64 rng(17);
    for (int i = 0; i < 50; ++i) {
        int n = 2 + static_cast<int>(rng() % 7);
        std::vector<GpuId> members;
        for (int k = 0; k < n; ++k) {
            members.push_back({static_cast<int>(rng() % 4), static_cast<int>(rng() % 8)});
        }
        // Dedup while keeping order; a ring needs distinct members.
        std::vector<GpuId> uniq;
        for (auto m : members) {
            bool seen = false;
            for (auto u : uniq) seen = seen || u == m;
            if (!seen) uniq.push_back(m);
        }
        if (uniq.size() < 2) continue;
        double volume = static_cast<double>(rng() % 1'000'000'000);
        auto g = group_of(uniq, GroupKind::DP);
        CHECK(allreduce_time(spec, g, volume) ==
              allgather_time(spec, g, volume) + reduce_scatter_time(spec, g, volume));
    }
}

TEST_CASE("cross-node groups are strictly slower than intra-node ones") {
    ClusterSpec spec = frontier_preset(2);
    auto intra = group_of({{0, 0}, {0, 2}, {0, 4}, {0, 6}});
    auto cross = group_of({{0, 0}, {0, 2}, {1, 0}, {1, 2}});
    for (double volume : {0.0, 1e6, 1e9, 1e12}) {
        CHECK(allreduce_time(spec, cross, volume) > allreduce_time(spec, intra, volume));
    }
    // Tier ordering: card <= node <= spanning, at equal size and volume.
    auto card = group_of({{0, 0}, {0, 1}});
    auto node = group_of({{0, 0}, {0, 2}});
    auto span = group_of({{0, 0}, {1, 0}});
    for (double volume : {1e6, 1e9}) {
        CHECK(allreduce_time(spec, card, volume) <= allreduce_time(spec, node, volume));
        CHECK(allreduce_time(spec, node, volume) <= allreduce_time(spec, span, volume));
    }
}

TEST_CASE("allreduce time is monotone in volume") {
    ClusterSpec spec = frontier_preset(2);
    auto g = group_of({{0, 0}, {0, 3}, {1, 1}});
    double prev = -1.0;
    for (double volume : {0.0, 1e3, 1e6, 1e9, 1e12}) {
        double t = allreduce_time(spec, g, volume);
        CHECK(t >= prev);
        prev = t;
    }
}

TEST_CASE("p2p time") {
    ClusterSpec spec = zero_latency_frontier(2);
    CHECK(p2p_time(spec, {0, 0}, {1, 0}, 25e9) == 1.0);
    CHECK(p2p_time(spec, {0, 0}, {0, 0}, 1e12) == 0.0);
    ClusterSpec with_lat = frontier_preset(2);
    CHECK(p2p_time(with_lat, {0, 0}, {1, 0}, 0.0) == with_lat.link_latency_inter);
    CHECK(p2p_time(with_lat, {0, 0}, {0, 5}, 0.0) == with_lat.link_latency_intra);
}
