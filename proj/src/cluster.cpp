#include "trainplan/cluster.hpp"

#include <algorithm>
#include <stdexcept>

namespace trainplan {

namespace {

void require_valid(const ClusterSpec& spec, GpuId id) {
    if (id.node < 0 || id.node >= spec.num_nodes || id.local < 0 ||
        id.local >= spec.gpus_per_node) {
        throw std::invalid_argument("GpuId out of cluster bounds");
    }
}

// Bottleneck bandwidth and worst latency over adjacent ring members,
// wrap-around included.
struct RingLinks {
    double min_bandwidth;
    double max_latency;
};

RingLinks ring_links(const ClusterSpec& spec, const ProcessGroup& group) {
    RingLinks links{0.0, 0.0};
    bool first = true;
    const std::size_t n = group.members.size();
    for (std::size_t i = 0; i < n; ++i) {
        GpuId a = group.members[i];
        GpuId b = group.members[(i + 1) % n];
        if (a == b) continue;
        double bw = pair_bandwidth(spec, a, b);
        double lat = pair_latency(spec, a, b);
        if (first || bw < links.min_bandwidth) links.min_bandwidth = bw;
        links.max_latency = std::max(links.max_latency, lat);
        first = false;
    }
    if (first) {
        throw std::invalid_argument("process group has no distinct member pair");
    }
    return links;
}

}  // namespace

ClusterSpec frontier_preset(int num_nodes) {
    if (num_nodes < 1) {
        throw std::invalid_argument("num_nodes must be >= 1");
    }
    ClusterSpec spec;
    spec.num_nodes = num_nodes;
    spec.gpus_per_node = 8;
    spec.mem_per_gpu = 64ull << 30;  // 64 GiB HBM per GCD
    spec.peak_flops_per_gpu = 191.5e12;
    spec.bw_same_card = 200e9;
    spec.bw_intra_node = 100e9;
    spec.bw_inter_node = 25e9;
    spec.link_latency_intra = 1e-6;
    spec.link_latency_inter = 5e-6;
    spec.hbm_bandwidth = 1.6e12;
    return spec;
}

double pair_bandwidth(const ClusterSpec& spec, GpuId a, GpuId b) {
    require_valid(spec, a);
    require_valid(spec, b);
    if (a == b) {
        throw std::invalid_argument("pair_bandwidth undefined for identical GPUs");
    }
    if (a.node != b.node) return spec.bw_inter_node;
    if (a.local / 2 == b.local / 2) return spec.bw_same_card;
    return spec.bw_intra_node;
}

double pair_latency(const ClusterSpec& spec, GpuId a, GpuId b) {
    require_valid(spec, a);
    require_valid(spec, b);
    return a.node == b.node ? spec.link_latency_intra : spec.link_latency_inter;
}

double allreduce_time(const ClusterSpec& spec, const ProcessGroup& group, double volume_bytes) {
    // Reduce-scatter phase followed by an allgather phase, so the identity
    // allreduce == reduce_scatter + allgather is exact, latency included.
    return reduce_scatter_time(spec, group, volume_bytes) +
           allgather_time(spec, group, volume_bytes);
}

double allgather_time(const ClusterSpec& spec, const ProcessGroup& group, double volume_bytes) {
    if (volume_bytes < 0) {
        throw std::invalid_argument("volume must be non-negative");
    }
    const auto n = static_cast<double>(group.members.size());
    if (group.members.size() <= 1) return 0.0;
    RingLinks links = ring_links(spec, group);
    return (n - 1.0) / n * volume_bytes / links.min_bandwidth +
           (n - 1.0) * links.max_latency;
}

double reduce_scatter_time(const ClusterSpec& spec, const ProcessGroup& group,
                           double volume_bytes) {
    return allgather_time(spec, group, volume_bytes);
}

double p2p_time(const ClusterSpec& spec, GpuId a, GpuId b, double volume_bytes) {
    if (volume_bytes < 0) {
        throw std::invalid_argument("volume must be non-negative");
    }
    if (a == b) return 0.0;
    return volume_bytes / pair_bandwidth(spec, a, b) + pair_latency(spec, a, b);
}

}  // namespace trainplan
