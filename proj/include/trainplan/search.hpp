#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trainplan/memory.hpp"

namespace trainplan {

struct Violation {
    std::string field;
    std::string message;
    bool hard = true;
};

struct ValidationResult {
    std::vector<Violation> violations;
    ParallelConfig resolved;   // dp bound when derivable
    int num_microbatches = 0;  // 0 when not derivable
    bool ok = false;           // no hard violations

    std::vector<Violation> hard_violations() const;
};

// Checks a configuration against the model and cluster shapes:
// world-size factorization, layer/width divisibility, batch divisibility,
// ZeRO-3/pipeline exclusivity, microbatch count. Oversized TP (spanning
// nodes) is reported as a warning, not an error. Never throws; dp == 0 in
// the input means "derive from the cluster".
ValidationResult validate(const ModelSpec& model, const ParallelConfig& cfg,
                          const ClusterSpec& cluster);

// Hyperparameter domains, one entry per tunable.
struct SearchSpace {
    std::vector<int> pp{1};
    std::vector<int> tp{1};
    int mbs_min = 1;
    int mbs_max = 1;
    std::vector<int> gas{1};
    std::vector<int> zero1{0, 1};  // 0 = off, 1 = ZeRO-1
    std::vector<int> num_nodes{1};
};

struct SearchPoint {
    int pp = 1;
    int tp = 1;
    int mbs = 1;
    int gas = 1;
    bool zero1 = false;
    int nodes = 1;

    friend bool operator==(const SearchPoint&, const SearchPoint&) = default;
};

enum class FailureKind { None, Oom, Invalid, Timeout };

struct TrialRecord {
    SearchPoint point;
    double objective = 0.0;  // TFLOPS/GPU; ignore when failed
    FailureKind failure_kind = FailureKind::None;
    double wall_time = 0.0;  // external evaluators only; 0 in-process

    bool failed() const { return failure_kind != FailureKind::None; }
};

struct SearchResult {
    std::optional<TrialRecord> best;
    std::vector<TrialRecord> history;
    std::map<std::string, double> sensitivity;  // sums to 1 when non-empty
    std::string diagnostic;
};

using Evaluator = std::function<TrialRecord(const SearchPoint&)>;
using PointValidator = std::function<bool(const SearchPoint&)>;

// Sequential model-based search. A short random phase (min(budget, 16)
// trials) seeds a distance-weighted k-NN surrogate; afterwards each round
// evaluates the best-predicted of 256 untried random candidates. Failed
// trials enter the surrogate below the worst observed success so the
// search steers away from them. Points rejected by the validator are
// recorded INVALID without an evaluator call. workers > 1 evaluates each
// round's candidates concurrently (the evaluator must be pure); results
// fold back in proposal order, so runs are deterministic per seed at any
// worker count.
SearchResult run_search(const SearchSpace& space, int budget, const Evaluator& evaluator,
                        std::uint64_t seed, const PointValidator& validator = nullptr,
                        int workers = 1);

// Permutation importance over the same k-NN surrogate: mean absolute
// prediction change when one hyperparameter column is shuffled,
// normalized to sum 1. Needs at least 8 non-failed trials.
std::map<std::string, double> sensitivity(const std::vector<TrialRecord>& history,
                                          int permutations = 100, std::uint64_t seed = 0);

}  // namespace trainplan
