#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "trainplan/cluster.hpp"

namespace trainplan {

// Summed SQ_INSTS_VALU_* hardware counters from a profiler run.
struct CounterRecord {
    std::uint64_t add_f16 = 0, mul_f16 = 0, fma_f16 = 0, trans_f16 = 0, mfma_mops_f16 = 0;
    std::uint64_t add_f32 = 0, mul_f32 = 0, fma_f32 = 0, trans_f32 = 0, mfma_mops_f32 = 0;
    std::uint64_t add_f64 = 0, mul_f64 = 0, fma_f64 = 0, trans_f64 = 0, mfma_mops_f64 = 0;
    std::uint64_t mfma_bf16 = 0, mfma_mops_bf16 = 0;

    CounterRecord& operator+=(const CounterRecord& other);
    friend CounterRecord operator+(CounterRecord a, const CounterRecord& b) { return a += b; }
};

// MFMA MOPS-to-FLOPs coefficient sets. GEMM measurements put all four at
// 512; the Frontier user guide lists 1024/1024/256/256 for
// f16/bf16/f32/f64 instead.
enum class MfmaCoeffMode { Measured512, FrontierGuide };

// 64*(MUL + ADD + 2*FMA + TRANS) per VALU precision plus the MFMA term.
double hw_flops(const CounterRecord& rec, MfmaCoeffMode mode = MfmaCoeffMode::Measured512);

struct CounterParseResult {
    CounterRecord totals;
    std::size_t rows = 0;
    std::vector<std::string> warnings;  // one per unknown column
};

// Header row of counter names, one row per kernel dispatch, rows summed.
// Unknown columns warn and are skipped; negative counts are an error.
CounterParseResult parse_counter_csv(std::istream& in);

struct IterationLogEntry {
    long iteration = 0;
    double iter_time = 0.0;        // seconds
    double reported_tflops = 0.0;  // per GPU
};

// Extracts "elapsed time per iteration (ms): <x>" and "TFLOPs: <y>" pairs
// from a training log; lines without both fields are skipped.
std::vector<IterationLogEntry> parse_training_log(std::istream& in);

// Time-weighted mean of the per-iteration TFLOPs figures.
double aggregate_model_flops(const std::vector<IterationLogEntry>& log);

enum class MbsDiagnosisKind { Consistent, MbsMismatch, UnexplainedDivergence };

struct MbsDiagnosis {
    MbsDiagnosisKind kind = MbsDiagnosisKind::Consistent;
    double flops_ratio = 0.0;  // model / hardware
    double mbs_ratio = 0.0;    // ds_mbs / cfg_mbs
    std::string message;
};

// A model-vs-hardware FLOPS gap that tracks the ratio of the two
// micro-batch-size settings points at over-reporting from the config
// mismatch; a ratio near 1 is consistent; anything else is unexplained.
MbsDiagnosis diagnose_mbs_mismatch(double model_tflops, double hw_tflops, int cfg_mbs,
                                   int ds_mbs);

enum class RooflineBound { MemoryBound, ComputeBound };

struct RooflineReport {
    double total_flops = 0.0;
    double total_bytes = 0.0;
    double arithmetic_intensity = 0.0;  // FLOP/byte
    double ridge_intensity = 0.0;       // peak / hbm_bandwidth
    RooflineBound bound = RooflineBound::MemoryBound;
};

RooflineReport roofline(double flops, double bytes, const ClusterSpec& cluster);

struct ScalingPoint {
    double gpus = 0.0;
    double value = 0.0;  // per-GPU throughput (weak) or iteration time (strong)
};

// Weak: per-GPU throughput retention vs the first (baseline) point.
// Strong: speedup retention, (t0/ti) / (gi/g0). Series must be sorted by
// GPU count with the baseline first.
std::vector<double> weak_scaling(const std::vector<ScalingPoint>& series);
std::vector<double> strong_scaling(const std::vector<ScalingPoint>& series);

}  // namespace trainplan
