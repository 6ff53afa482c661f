#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trainplan {

// GPT-style decoder-only architecture description.
struct ModelSpec {
    int num_layers = 1;   // L
    int hidden_size = 1;  // d
    int num_heads = 1;    // a
    int vocab_size = 1;   // V (padded)
    int seq_length = 1;   // s

    // Soft checks (head divisibility); positivity is enforced on use.
    // Returns human-readable violations, empty when clean.
    std::vector<std::string> validate() const;
};

// Parameter count split. attention + ffn == 11*L*d^2 by construction:
// K,Q,V projections (3d^2) plus the two FFN matrices (8d^2) per layer.
// The attention output projection is what the approximate 12*L*d^2
// absorbs together with the embeddings; it is deliberately not part of
// the exact per-layer count.
struct ParamBreakdown {
    std::uint64_t attention_params = 0;  // 3*L*d^2
    std::uint64_t ffn_params = 0;        // 8*L*d^2
    std::uint64_t embedding_params = 0;  // V*d + s*d
    std::uint64_t total_exact = 0;       // 11*L*d^2 + V*d + s*d
    std::uint64_t total_approx = 0;      // 12*L*d^2
};

ParamBreakdown param_count(const ModelSpec& spec);

// Per-iteration model FLOPs:
//   24*c*B*s*L*d^2 * (1 + s/(6d) + V/(16*L*d))
// with c = checkpoint_factor when checkpoint_activations is set, else 3.
// Evaluated exactly in 128-bit integer arithmetic; throws
// std::overflow_error instead of wrapping.
double model_flops_per_iteration(const ModelSpec& spec, std::int64_t batch_size,
                                 bool checkpoint_activations,
                                 int checkpoint_factor = 4);

// Training compute budget, the 6*N*D rule. N defaults to total_approx.
double training_budget(std::uint64_t params, std::uint64_t tokens);
double training_budget(const ModelSpec& spec, std::uint64_t tokens);

}  // namespace trainplan
