#include "trainplan/pipesim.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "trainplan/util.hpp"

namespace trainplan {

namespace {

struct Task {
    bool bwd = false;
    int mb = 0;
    int chunk = 0;
};

void validate_args(ScheduleKind kind, int p, int m, int v, const StageTiming& timing) {
    if (p < 1) throw std::invalid_argument("p must be >= 1");
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (v < 1) throw std::invalid_argument("v must be >= 1");
    if (v > 1 && kind != ScheduleKind::Interleaved1F1B) {
        throw std::invalid_argument("v > 1 requires the interleaved schedule");
    }
    if (timing.t_fwd < 0 || timing.t_bwd < 0 || timing.t_comm < 0) {
        throw std::invalid_argument("timings must be non-negative");
    }
}

std::vector<Task> gpipe_order(int m) {
    std::vector<Task> order;
    order.reserve(2 * m);
    for (int mb = 0; mb < m; ++mb) order.push_back({false, mb, 0});
    for (int mb = 0; mb < m; ++mb) order.push_back({true, mb, 0});
    return order;
}

// PipeDream flush schedule: warm-up forwards, steady one-forward
// one-backward, cool-down backwards.
std::vector<Task> one_f1b_order(int p, int m, int device) {
    const int warmup = std::min(p - 1 - device, m);
    std::vector<Task> order;
    order.reserve(2 * m);
    for (int mb = 0; mb < warmup; ++mb) order.push_back({false, mb, 0});
    for (int k = 0; k < m - warmup; ++k) {
        order.push_back({false, warmup + k, 0});
        order.push_back({true, k, 0});
    }
    for (int mb = m - warmup; mb < m; ++mb) order.push_back({true, mb, 0});
    return order;
}

// Interleaved 1F1B: microbatches advance in rounds of up to p, cycling
// through the v chunks; backwards visit chunks in reverse. Every device
// walks the same (chunk, microbatch) sequence on its own stage chunks.
std::vector<Task> interleaved_order(int p, int m, int v, int device) {
    std::vector<Task> fwd_list;
    std::vector<Task> bwd_list;
    fwd_list.reserve(static_cast<std::size_t>(m) * v);
    bwd_list.reserve(static_cast<std::size_t>(m) * v);
    for (int start = 0; start < m; start += p) {
        const int round = std::min(p, m - start);
        for (int c = 0; c < v; ++c) {
            for (int off = 0; off < round; ++off) fwd_list.push_back({false, start + off, c});
        }
        for (int c = v - 1; c >= 0; --c) {
            for (int off = 0; off < round; ++off) bwd_list.push_back({true, start + off, c});
        }
    }

    const int total = m * v;
    int warmup;
    if (m % p != 0 || m == p) {
        // Flush variant: provably deadlock-free for ragged rounds, and the
        // standard choice when exactly one round exists.
        warmup = total;
    } else {
        warmup = std::min((p - 1 - device) * 2 + (v - 1) * p, total);
    }

    std::vector<Task> order;
    order.reserve(2 * static_cast<std::size_t>(total));
    for (int k = 0; k < warmup; ++k) order.push_back(fwd_list[k]);
    for (int k = 0; k < total - warmup; ++k) {
        order.push_back(fwd_list[warmup + k]);
        order.push_back(bwd_list[k]);
    }
    for (int k = total - warmup; k < total; ++k) order.push_back(bwd_list[k]);
    return order;
}

void derive_stats(IterationTimeline& timeline) {
    double makespan = 0.0;
    double busy = 0.0;
    int max_device = -1;
    for (const auto& ev : timeline.events) {
        makespan = std::max(makespan, ev.end);
        max_device = std::max(max_device, ev.device);
        if (ev.kind == EventKind::Fwd || ev.kind == EventKind::Bwd) {
            busy += ev.end - ev.start;
        }
    }
    if (timeline.num_devices == 0) timeline.num_devices = max_device + 1;
    timeline.makespan = makespan;
    const double device_time = timeline.num_devices * makespan;
    timeline.bubble_fraction = device_time > 0 ? 1.0 - busy / device_time : 0.0;
    timeline.bubble_ratio = busy > 0 ? (device_time - busy) / busy : 0.0;
}

}  // namespace

IterationTimeline simulate(ScheduleKind kind, int p, int m, int v, const StageTiming& timing) {
    validate_args(kind, p, m, v, timing);

    const int stages = p * v;  // virtual stages; device of stage k is k % p
    const double chunk_fwd = timing.t_fwd / v;
    const double chunk_bwd = timing.t_bwd / v;

    std::vector<std::vector<Task>> order(p);
    for (int d = 0; d < p; ++d) {
        switch (kind) {
            case ScheduleKind::GPipe:
                order[d] = gpipe_order(m);
                break;
            case ScheduleKind::OneF1B:
                order[d] = one_f1b_order(p, m, d);
                break;
            case ScheduleKind::Interleaved1F1B:
                order[d] = v == 1 ? one_f1b_order(p, m, d) : interleaved_order(p, m, v, d);
                break;
        }
    }

    const auto task_key = [&](bool bwd, int mb, int vs) {
        return ((bwd ? 1 : 0) * m + mb) * stages + vs;
    };
    std::vector<double> end_time(2ull * m * stages, -1.0);
    std::vector<std::size_t> next(p, 0);
    std::vector<double> device_time(p, 0.0);
    std::vector<std::vector<TimelineEvent>> per_device(p);

    long remaining = static_cast<long>(p) * 2 * m * v;

    // Runs the device's next task if its dependencies are complete.
    const auto try_run = [&](int d) -> bool {
        if (next[d] >= order[d].size()) return false;
        const Task t = order[d][next[d]];
        const int vs = t.chunk * p + d;

        double pred_end = -1.0;
        bool cross_device = false;
        if (!t.bwd) {
            if (vs > 0) {
                const double e = end_time[task_key(false, t.mb, vs - 1)];
                if (e < 0) return false;
                pred_end = e;
                cross_device = (vs - 1) % p != d;
            }
        } else {
            if (vs < stages - 1) {
                const double e = end_time[task_key(true, t.mb, vs + 1)];
                if (e < 0) return false;
                pred_end = e;
                cross_device = (vs + 1) % p != d;
            }
            if (end_time[task_key(false, t.mb, vs)] < 0) return false;
        }

        double start = device_time[d];
        if (pred_end >= 0) {
            if (cross_device && timing.t_comm > 0) {
                const double recv_start = std::max(device_time[d], pred_end);
                const double recv_end = recv_start + timing.t_comm;
                per_device[d].push_back(
                    {d, EventKind::Recv, t.mb, t.chunk, recv_start, recv_end});
                start = recv_end;
            } else {
                start = std::max(start, pred_end);
            }
        }
        const double end = start + (t.bwd ? chunk_bwd : chunk_fwd);
        per_device[d].push_back(
            {d, t.bwd ? EventKind::Bwd : EventKind::Fwd, t.mb, t.chunk, start, end});
        device_time[d] = end;
        end_time[task_key(t.bwd, t.mb, vs)] = end;
        ++next[d];
        --remaining;
        return true;
    };

    while (remaining > 0) {
        bool progressed = false;
        for (int d = 0; d < p; ++d) {
            while (try_run(d)) progressed = true;
        }
        if (!progressed) {
            throw std::logic_error("pipeline schedule deadlocked; order construction bug");
        }
    }

    IterationTimeline timeline;
    timeline.num_devices = p;
    for (int d = 0; d < p; ++d) {
        timeline.events.insert(timeline.events.end(), per_device[d].begin(),
                               per_device[d].end());
    }
    derive_stats(timeline);
    return timeline;
}

double analytic_bubble(ScheduleKind kind, int p, int m, int v) {
    validate_args(kind, p, m, v, StageTiming{});
    if (p == 1) return 0.0;
    switch (kind) {
        case ScheduleKind::GPipe:
            return static_cast<double>(p - 1) / m;
        case ScheduleKind::OneF1B:
            return static_cast<double>(p) / m;
        case ScheduleKind::Interleaved1F1B:
            return static_cast<double>(p - 1) / (static_cast<double>(m) * v);
    }
    throw std::invalid_argument("unknown schedule kind");
}

namespace {

const char* kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::Fwd: return "FWD";
        case EventKind::Bwd: return "BWD";
        case EventKind::Send: return "SEND";
        case EventKind::Recv: return "RECV";
        case EventKind::Idle: return "IDLE";
    }
    return "?";
}

EventKind kind_from_name(const std::string& name) {
    if (name == "FWD") return EventKind::Fwd;
    if (name == "BWD") return EventKind::Bwd;
    if (name == "SEND") return EventKind::Send;
    if (name == "RECV") return EventKind::Recv;
    if (name == "IDLE") return EventKind::Idle;
    throw std::invalid_argument("unknown event kind: " + name);
}

}  // namespace

std::string render_timeline(const IterationTimeline& timeline) {
    std::string out = "device,kind,microbatch,chunk,start,end\n";
    for (const auto& ev : timeline.events) {
        out += std::to_string(ev.device);
        out += ',';
        out += kind_name(ev.kind);
        out += ',';
        out += std::to_string(ev.microbatch);
        out += ',';
        out += std::to_string(ev.chunk);
        out += ',';
        out += format_double(ev.start);
        out += ',';
        out += format_double(ev.end);
        out += '\n';
    }
    return out;
}

IterationTimeline parse_timeline(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "device,kind,microbatch,chunk,start,end") {
        throw std::invalid_argument("timeline CSV missing header");
    }
    IterationTimeline timeline;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 6) {
            throw std::invalid_argument("timeline CSV row must have 6 fields");
        }
        TimelineEvent ev;
        ev.device = std::stoi(fields[0]);
        ev.kind = kind_from_name(fields[1]);
        ev.microbatch = std::stoi(fields[2]);
        ev.chunk = std::stoi(fields[3]);
        ev.start = std::stod(fields[4]);
        ev.end = std::stod(fields[5]);
        timeline.events.push_back(ev);
    }
    derive_stats(timeline);
    return timeline;
}

}  // namespace trainplan
