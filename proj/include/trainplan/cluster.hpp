#pragma once

#include <cstdint>
#include <vector>

namespace trainplan {

// GPU cluster with three bandwidth tiers, modeled after a Frontier-style
// node: GCD pairs on one card, cards within a node, nodes over the fabric.
// Bandwidths are effective one-way bytes/s.
struct ClusterSpec {
    int num_nodes = 1;
    int gpus_per_node = 8;
    std::uint64_t mem_per_gpu = 0;     // bytes of HBM per GPU
    double peak_flops_per_gpu = 0.0;   // half-precision peak, FLOP/s
    double bw_same_card = 0.0;         // B/s between GCDs on one card
    double bw_intra_node = 0.0;        // B/s between cards in a node
    double bw_inter_node = 0.0;        // B/s between nodes
    double link_latency_intra = 0.0;   // s, any same-node link
    double link_latency_inter = 0.0;   // s, cross-node link
    double hbm_bandwidth = 0.0;        // B/s, roofline ridge denominator

    int world_size() const { return num_nodes * gpus_per_node; }
};

struct GpuId {
    int node = 0;
    int local = 0;

    friend bool operator==(const GpuId&, const GpuId&) = default;
};

enum class GroupKind { TP, PP, DP };

// Ordered communicator membership; ring order is the member order.
struct ProcessGroup {
    std::vector<GpuId> members;
    GroupKind kind = GroupKind::DP;
};

// MI250X-based Frontier node: 8 GCDs, 64 GiB each, 191.5 TFLOPS fp16 peak.
// Same-card pairs see 200 GB/s one way, cross-card 100 GB/s, cross-node
// 25 GB/s (one direction of the 25+25 links).
ClusterSpec frontier_preset(int num_nodes = 1);

// Bandwidth tier for a pair. Same-card pairs are local indices {2k, 2k+1}.
// Throws for a == b (self-link undefined).
double pair_bandwidth(const ClusterSpec& spec, GpuId a, GpuId b);
double pair_latency(const ClusterSpec& spec, GpuId a, GpuId b);

// Ring allreduce over the group: 2*(n-1)/n * volume / bottleneck_bw plus
// 2*(n-1) hops of the worst adjacent latency (reduce-scatter phase then
// allgather phase). Zero for a singleton group.
double allreduce_time(const ClusterSpec& spec, const ProcessGroup& group, double volume_bytes);

// Each phase of an allreduce: (n-1)/n * volume / bottleneck_bw plus (n-1)
// latency hops; allgather + reduce_scatter == allreduce exactly.
double allgather_time(const ClusterSpec& spec, const ProcessGroup& group, double volume_bytes);
double reduce_scatter_time(const ClusterSpec& spec, const ProcessGroup& group, double volume_bytes);

// Point-to-point transfer; a == b costs nothing (co-located stages).
double p2p_time(const ClusterSpec& spec, GpuId a, GpuId b, double volume_bytes);

}  // namespace trainplan
