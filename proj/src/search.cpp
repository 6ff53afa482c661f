#include "trainplan/search.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace trainplan {

std::vector<Violation> ValidationResult::hard_violations() const {
    std::vector<Violation> out;
    for (const auto& v : violations) {
        if (v.hard) out.push_back(v);
    }
    return out;
}

ValidationResult validate(const ModelSpec& model, const ParallelConfig& cfg,
                          const ClusterSpec& cluster) {
    ValidationResult res;
    res.resolved = cfg;
    auto add = [&](const std::string& field, const std::string& message, bool hard = true) {
        res.violations.push_back({field, message, hard});
    };

    if (cfg.tp < 1) add("tp", "tp must be >= 1");
    if (cfg.pp < 1) add("pp", "pp must be >= 1");
    if (cfg.mbs < 1) add("mbs", "mbs must be >= 1");
    if (cfg.gbs < 1) add("gbs", "gbs must be >= 1");
    if (cfg.interleave_v < 1) add("interleave_v", "interleave_v must be >= 1");
    if (cfg.zero_stage < 0 || cfg.zero_stage > 3) add("zero_stage", "zero_stage must be 0..3");
    if (!res.violations.empty()) {
        res.ok = false;
        return res;
    }

    const long long world = cluster.world_size();
    const long long model_shards = static_cast<long long>(cfg.tp) * cfg.pp;
    if (cfg.dp == 0) {
        if (world % model_shards == 0) {
            res.resolved.dp = static_cast<int>(world / model_shards);
        } else {
            add("dp", "world size " + std::to_string(world) + " not divisible by tp*pp");
        }
    } else if (model_shards * cfg.dp != world) {
        add("dp", "tp*pp*dp != num_nodes*gpus_per_node (" + std::to_string(world) + " GPUs)");
    }

    if (model.num_layers % cfg.pp != 0) {
        add("pp", "num_layers " + std::to_string(model.num_layers) +
                      " not divisible by pp " + std::to_string(cfg.pp));
    }
    if (model.hidden_size % cfg.tp != 0) {
        add("tp", "hidden_size not divisible by tp");
    }
    if (model.num_heads % cfg.tp != 0) {
        add("tp", "num_heads not divisible by tp");
    }
    if (cfg.zero_stage == 3 && cfg.pp > 1) {
        add("zero_stage", "ZeRO-3 cannot be combined with pipeline parallelism");
    }
    if (cfg.tp > cluster.gpus_per_node) {
        add("tp", "tp " + std::to_string(cfg.tp) + " spans nodes; keep TP within one node",
            /*hard=*/false);
    }

    if (res.resolved.dp >= 1) {
        const long long denom = static_cast<long long>(cfg.mbs) * res.resolved.dp;
        if (cfg.gbs % denom != 0) {
            add("gbs", "gbs not divisible by mbs*dp (" + std::to_string(denom) + ")");
        } else {
            res.num_microbatches = static_cast<int>(cfg.gbs / denom);
            if (res.num_microbatches < 1) add("gbs", "configuration yields no microbatches");
        }
    }

    res.ok = res.hard_violations().empty();
    return res;
}

namespace {

using Encoded = std::array<double, 6>;
constexpr std::array<const char*, 6> kDimNames = {"pp", "tp", "mbs", "gas", "zero1", "nodes"};

Encoded encode(const SearchPoint& p) {
    return {std::log2(static_cast<double>(p.pp)), std::log2(static_cast<double>(p.tp)),
            static_cast<double>(p.mbs),           static_cast<double>(p.gas),
            p.zero1 ? 1.0 : 0.0,                  static_cast<double>(p.nodes)};
}

// Min-max scaling derived from the rows themselves; constant columns
// encode to zero.
struct Scaler {
    Encoded lo{};
    Encoded hi{};

    explicit Scaler(const std::vector<Encoded>& rows) {
        lo.fill(1e300);
        hi.fill(-1e300);
        for (const auto& row : rows) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                lo[j] = std::min(lo[j], row[j]);
                hi[j] = std::max(hi[j], row[j]);
            }
        }
    }

    Encoded apply(const Encoded& row) const {
        Encoded out{};
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double range = hi[j] - lo[j];
            out[j] = range > 0 ? (row[j] - lo[j]) / range : 0.0;
        }
        return out;
    }
};

// Distance-weighted k-nearest-neighbor regressor, k = 5. Ties broken by
// row index for determinism.
class KnnSurrogate {
public:
    KnnSurrogate(std::vector<Encoded> rows, std::vector<double> targets)
        : scaler_(rows), targets_(std::move(targets)) {
        scaled_.reserve(rows.size());
        for (const auto& row : rows) scaled_.push_back(scaler_.apply(row));
    }

    double predict(const Encoded& raw) const {
        const Encoded x = scaler_.apply(raw);
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(scaled_.size());
        for (std::size_t i = 0; i < scaled_.size(); ++i) {
            double d2 = 0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double diff = x[j] - scaled_[i][j];
                d2 += diff * diff;
            }
            dist.emplace_back(std::sqrt(d2), i);
        }
        const std::size_t k = std::min<std::size_t>(5, dist.size());
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double weight_sum = 0, value_sum = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const double w = 1.0 / (dist[i].first + 1e-9);
            weight_sum += w;
            value_sum += w * targets_[dist[i].second];
        }
        return value_sum / weight_sum;
    }

private:
    Scaler scaler_;
    std::vector<Encoded> scaled_;
    std::vector<double> targets_;
};

// Failed trials are mapped below the worst success so the surrogate
// learns to avoid their neighborhoods.
std::vector<double> surrogate_targets(const std::vector<TrialRecord>& history) {
    double lo = 1e300, hi = -1e300;
    bool any = false;
    for (const auto& t : history) {
        if (t.failed()) continue;
        any = true;
        lo = std::min(lo, t.objective);
        hi = std::max(hi, t.objective);
    }
    double penalized;
    if (!any) {
        penalized = -1.0;
    } else {
        const double range = hi - lo;
        penalized = lo - (range > 0 ? 0.1 * range : 1.0);
    }
    std::vector<double> out;
    out.reserve(history.size());
    for (const auto& t : history) out.push_back(t.failed() ? penalized : t.objective);
    return out;
}

using PointKey = std::tuple<int, int, int, int, int, int>;

PointKey key_of(const SearchPoint& p) {
    return {p.pp, p.tp, p.mbs, p.gas, p.zero1 ? 1 : 0, p.nodes};
}

struct Sampler {
    const SearchSpace& space;
    std::mt19937_64& rng;

    SearchPoint draw() {
        SearchPoint p;
        p.pp = space.pp[rng() % space.pp.size()];
        p.tp = space.tp[rng() % space.tp.size()];
        p.mbs = space.mbs_min +
                static_cast<int>(rng() % (space.mbs_max - space.mbs_min + 1));
        p.gas = space.gas[rng() % space.gas.size()];
        p.zero1 = space.zero1[rng() % space.zero1.size()] != 0;
        p.nodes = space.num_nodes[rng() % space.num_nodes.size()];
        return p;
    }
};

void require_space(const SearchSpace& space) {
    if (space.pp.empty() || space.tp.empty() || space.gas.empty() || space.zero1.empty() ||
        space.num_nodes.empty() || space.mbs_min < 1 || space.mbs_max < space.mbs_min) {
        throw std::invalid_argument("search space has an empty domain");
    }
}

}  // namespace

SearchResult run_search(const SearchSpace& space, int budget, const Evaluator& evaluator,
                        std::uint64_t seed, const PointValidator& validator, int workers) {
    require_space(space);
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (!evaluator) throw std::invalid_argument("evaluator required");

    std::mt19937_64 rng(seed);
    Sampler sampler{space, rng};
    std::set<PointKey> tried;
    SearchResult result;

    const int random_phase = std::min(budget, 16);
    while (static_cast<int>(result.history.size()) < budget) {
        const int done = static_cast<int>(result.history.size());
        int round = std::min(workers, budget - done);
        if (done < random_phase) round = std::min(round, random_phase - done);

        // Propose a round of untried candidates before evaluating any of
        // them; results fold back in proposal order, so the trajectory is
        // deterministic at every worker count.
        std::vector<SearchPoint> candidates;
        if (done < random_phase) {
            for (int c = 0; c < round; ++c) {
                for (int attempt = 0; attempt < 256; ++attempt) {
                    const SearchPoint p = sampler.draw();
                    if (tried.insert(key_of(p)).second) {
                        candidates.push_back(p);
                        break;
                    }
                }
            }
        } else {
            std::vector<Encoded> rows;
            rows.reserve(result.history.size());
            for (const auto& t : result.history) rows.push_back(encode(t.point));
            KnnSurrogate surrogate(rows, surrogate_targets(result.history));

            std::vector<std::pair<double, SearchPoint>> ranked;  // by prediction
            std::set<PointKey> batch;
            for (int draw = 0; draw < 256; ++draw) {
                const SearchPoint p = sampler.draw();
                const PointKey k = key_of(p);
                if (tried.count(k) || batch.count(k)) continue;
                batch.insert(k);
                ranked.emplace_back(surrogate.predict(encode(p)), p);
            }
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });
            for (int c = 0; c < round && c < static_cast<int>(ranked.size()); ++c) {
                candidates.push_back(ranked[c].second);
                tried.insert(key_of(ranked[c].second));
            }
        }
        if (candidates.empty()) break;  // space exhausted

        std::vector<std::optional<std::future<TrialRecord>>> futures(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (validator && !validator(candidates[i])) continue;  // recorded INVALID below
            if (workers > 1) {
                futures[i] = std::async(std::launch::async, evaluator, candidates[i]);
            }
        }
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            TrialRecord rec;
            if (validator && !validator(candidates[i])) {
                rec.failure_kind = FailureKind::Invalid;
            } else if (futures[i]) {
                rec = futures[i]->get();
            } else {
                rec = evaluator(candidates[i]);
            }
            rec.point = candidates[i];
            result.history.push_back(rec);
        }
    }

    int non_failed = 0;
    for (const auto& t : result.history) {
        if (t.failed()) continue;
        ++non_failed;
        if (!result.best || t.objective > result.best->objective) result.best = t;
    }
    if (!result.best) {
        result.diagnostic = "no valid configuration found in " +
                            std::to_string(result.history.size()) + " trials";
    }
    if (non_failed >= 8) {
        result.sensitivity = sensitivity(result.history, 100, seed);
    } else if (non_failed >= 1) {
        for (const char* name : kDimNames) result.sensitivity[name] = 1.0 / kDimNames.size();
    }
    return result;
}

std::map<std::string, double> sensitivity(const std::vector<TrialRecord>& history,
                                          int permutations, std::uint64_t seed) {
    int non_failed = 0;
    for (const auto& t : history) non_failed += t.failed() ? 0 : 1;
    if (non_failed < 8) {
        throw std::runtime_error("insufficient history: need >= 8 non-failed trials");
    }
    if (permutations < 1) throw std::invalid_argument("permutations must be >= 1");

    std::vector<Encoded> rows;
    rows.reserve(history.size());
    for (const auto& t : history) rows.push_back(encode(t.point));
    const std::vector<double> targets = surrogate_targets(history);

    // No variation in the objective means no attributable signal.
    const auto [lo_it, hi_it] = std::minmax_element(targets.begin(), targets.end());
    if (*lo_it == *hi_it) {
        std::map<std::string, double> uniform;
        for (const char* name : kDimNames) uniform[name] = 1.0 / kDimNames.size();
        return uniform;
    }
    KnnSurrogate surrogate(rows, targets);

    const std::size_t n = rows.size();
    std::vector<double> baseline(n);
    for (std::size_t i = 0; i < n; ++i) baseline[i] = surrogate.predict(rows[i]);

    std::mt19937_64 rng(seed);
    std::array<double, 6> scores{};
    std::vector<std::size_t> perm(n);
    for (std::size_t j = 0; j < scores.size(); ++j) {
        double delta_sum = 0;
        for (int rep = 0; rep < permutations; ++rep) {
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            for (std::size_t i = n - 1; i > 0; --i) {
                std::swap(perm[i], perm[rng() % (i + 1)]);
            }
            for (std::size_t i = 0; i < n; ++i) {
                Encoded shuffled = rows[i];
                shuffled[j] = rows[perm[i]][j];
                delta_sum += std::abs(surrogate.predict(shuffled) - baseline[i]);
            }
        }
        scores[j] = delta_sum / (static_cast<double>(permutations) * n);
    }

    double total = 0;
    for (double s : scores) total += s;
    std::map<std::string, double> out;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        out[kDimNames[j]] = total > 0 ? scores[j] / total : 1.0 / scores.size();
    }
    return out;
}

}  // namespace trainplan
