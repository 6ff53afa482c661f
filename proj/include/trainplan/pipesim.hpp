#pragma once

#include <string>
#include <vector>

namespace trainplan {

enum class ScheduleKind { GPipe, OneF1B, Interleaved1F1B };

// Per-microbatch, per-stage compute and boundary-transfer times.
// For interleaved schedules each of the v chunks on a device costs
// t_fwd/v and t_bwd/v, so per-device work per microbatch is invariant.
struct StageTiming {
    double t_fwd = 1.0;
    double t_bwd = 2.0;
    double t_comm = 0.0;
};

enum class EventKind { Fwd, Bwd, Send, Recv, Idle };

struct TimelineEvent {
    int device = 0;
    EventKind kind = EventKind::Fwd;
    int microbatch = 0;
    int chunk = 0;
    double start = 0.0;
    double end = 0.0;

    friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

struct IterationTimeline {
    int num_devices = 0;
    std::vector<TimelineEvent> events;  // per device in execution order
    double makespan = 0.0;
    // Idle share of total device-time: 1 - busy_compute / (p * makespan).
    double bubble_fraction = 0.0;
    // Idle over compute, in units where one microbatch's fwd+bwd on one
    // stage is the quantum; this is the quantity the closed-form bubble
    // expressions describe.
    double bubble_ratio = 0.0;
};

// Deterministic discrete-event simulation of one training iteration.
// p pipeline stages, m microbatches, v chunks per device (v > 1 only for
// Interleaved1F1B). Receives block the receiving device for t_comm;
// sends are fire-and-forget.
IterationTimeline simulate(ScheduleKind kind, int p, int m, int v, const StageTiming& timing);

// Closed-form bubble/compute ratios: GPipe (p-1)/m, 1F1B roughly p/m,
// interleaved (p-1)/(m*v). Zero when p == 1.
double analytic_bubble(ScheduleKind kind, int p, int m, int v);

// CSV with header device,kind,microbatch,chunk,start,end.
std::string render_timeline(const IterationTimeline& timeline);

// Inverse of render_timeline; derived quantities are recomputed from the
// parsed events.
IterationTimeline parse_timeline(const std::string& csv);

}  // namespace trainplan
