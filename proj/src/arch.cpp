#include "trainplan/arch.hpp"

#include <stdexcept>

namespace trainplan {

namespace {

using u128 = unsigned __int128;

// Checked multiply on 128-bit unsigned; throws rather than wrapping.
u128 mul_checked(u128 a, u128 b) {
    if (a != 0 && b > ~u128{0} / a) {
        throw std::overflow_error("FLOP count overflows 128-bit accumulator");
    }
    return a * b;
}

u128 add_checked(u128 a, u128 b) {
    if (b > ~u128{0} - a) {
        throw std::overflow_error("FLOP count overflows 128-bit accumulator");
    }
    return a + b;
}

void require_positive(const ModelSpec& spec) {
    if (spec.num_layers < 1 || spec.hidden_size < 1 || spec.num_heads < 1 ||
        spec.vocab_size < 1 || spec.seq_length < 1) {
        throw std::invalid_argument("ModelSpec fields must be strictly positive");
    }
}

}  // namespace

std::vector<std::string> ModelSpec::validate() const {
    std::vector<std::string> violations;
    if (num_layers < 1) violations.push_back("num_layers must be >= 1");
    if (hidden_size < 1) violations.push_back("hidden_size must be >= 1");
    if (num_heads < 1) violations.push_back("num_heads must be >= 1");
    if (vocab_size < 1) violations.push_back("vocab_size must be >= 1");
    if (seq_length < 1) violations.push_back("seq_length must be >= 1");
    if (num_heads >= 1 && hidden_size >= 1 && hidden_size % num_heads != 0) {
        violations.push_back("hidden_size must be divisible by num_heads");
    }
    return violations;
}

ParamBreakdown param_count(const ModelSpec& spec) {
    require_positive(spec);
    const auto L = static_cast<std::uint64_t>(spec.num_layers);
    const auto d = static_cast<std::uint64_t>(spec.hidden_size);
    const auto V = static_cast<std::uint64_t>(spec.vocab_size);
    const auto s = static_cast<std::uint64_t>(spec.seq_length);

    ParamBreakdown out;
    out.attention_params = 3 * L * d * d;
    out.ffn_params = 8 * L * d * d;
    out.embedding_params = V * d + s * d;
    out.total_exact = out.attention_params + out.ffn_params + out.embedding_params;
    out.total_approx = 12 * L * d * d;
    return out;
}

double model_flops_per_iteration(const ModelSpec& spec, std::int64_t batch_size,
                                 bool checkpoint_activations, int checkpoint_factor) {
    require_positive(spec);
    if (batch_size < 0) {
        throw std::invalid_argument("batch_size must be non-negative");
    }
    if (checkpoint_factor != 3 && checkpoint_factor != 4) {
        throw std::invalid_argument("checkpoint_factor must be 3 or 4");
    }
    if (batch_size == 0) return 0.0;

    const double c = checkpoint_activations ? checkpoint_factor : 3;
    const u128 B = static_cast<std::uint64_t>(batch_size);
    const u128 L = spec.num_layers;
    const u128 d = spec.hidden_size;
    const u128 V = spec.vocab_size;
    const u128 s = spec.seq_length;

    // 24*c*B*s*L*d^2 * (1 + s/(6d) + V/(16Ld)) with the correction factor
    // brought over a common denominator of 48*L*d:
    //   = c * [B*s*d * (48*L*d + 8*L*s + 3*V)] / 2
    // The bracketed base is evaluated exactly in 128 bits; c stays outside
    // so the on/off checkpointing ratio is exactly 4/3.
    u128 inner = add_checked(add_checked(mul_checked(mul_checked(48, L), d),
                                         mul_checked(mul_checked(8, L), s)),
                             mul_checked(3, V));
    u128 base = mul_checked(mul_checked(mul_checked(B, s), d), inner);
    return c * (static_cast<double>(base) * 0.5);
}

double training_budget(std::uint64_t params, std::uint64_t tokens) {
    u128 total = mul_checked(mul_checked(u128{6}, u128{params}), u128{tokens});
    return static_cast<double>(total);
}

double training_budget(const ModelSpec& spec, std::uint64_t tokens) {
    return training_budget(param_count(spec).total_approx, tokens);
}

}  // namespace trainplan
