#include "trainplan/metrics.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <regex>
#include <stdexcept>

#include "trainplan/util.hpp"

namespace trainplan {

namespace {

using Field = std::uint64_t CounterRecord::*;

constexpr std::array<std::pair<const char*, Field>, 17> kCounterFields = {{
    {"SQ_INSTS_VALU_ADD_F16", &CounterRecord::add_f16},
    {"SQ_INSTS_VALU_MUL_F16", &CounterRecord::mul_f16},
    {"SQ_INSTS_VALU_FMA_F16", &CounterRecord::fma_f16},
    {"SQ_INSTS_VALU_TRANS_F16", &CounterRecord::trans_f16},
    {"SQ_INSTS_VALU_MFMA_MOPS_F16", &CounterRecord::mfma_mops_f16},
    {"SQ_INSTS_VALU_ADD_F32", &CounterRecord::add_f32},
    {"SQ_INSTS_VALU_MUL_F32", &CounterRecord::mul_f32},
    {"SQ_INSTS_VALU_FMA_F32", &CounterRecord::fma_f32},
    {"SQ_INSTS_VALU_TRANS_F32", &CounterRecord::trans_f32},
    {"SQ_INSTS_VALU_MFMA_MOPS_F32", &CounterRecord::mfma_mops_f32},
    {"SQ_INSTS_VALU_ADD_F64", &CounterRecord::add_f64},
    {"SQ_INSTS_VALU_MUL_F64", &CounterRecord::mul_f64},
    {"SQ_INSTS_VALU_FMA_F64", &CounterRecord::fma_f64},
    {"SQ_INSTS_VALU_TRANS_F64", &CounterRecord::trans_f64},
    {"SQ_INSTS_VALU_MFMA_MOPS_F64", &CounterRecord::mfma_mops_f64},
    {"SQ_INSTS_VALU_MFMA_BF16", &CounterRecord::mfma_bf16},
    {"SQ_INSTS_VALU_MFMA_MOPS_BF16", &CounterRecord::mfma_mops_bf16},
}};

Field field_for(const std::string& name) {
    for (const auto& [key, field] : kCounterFields) {
        if (name == key) return field;
    }
    return nullptr;
}

std::uint64_t parse_count(const std::string& raw) {
    const std::string text = trim(raw);
    if (text.empty()) return 0;
    // Plain integers parse exactly; scientific notation goes through double.
    if (text.find_first_not_of("0123456789") == std::string::npos) {
        return std::stoull(text);
    }
    double value = std::stod(text);
    if (value < 0) {
        throw std::invalid_argument("negative counter value: " + text);
    }
    return static_cast<std::uint64_t>(std::llround(value));
}

}  // namespace

CounterRecord& CounterRecord::operator+=(const CounterRecord& other) {
    for (const auto& [name, field] : kCounterFields) {
        this->*field += other.*field;
    }
    return *this;
}

double hw_flops(const CounterRecord& rec, MfmaCoeffMode mode) {
    using u128 = unsigned __int128;
    const auto valu = [](std::uint64_t mul, std::uint64_t add, std::uint64_t fma,
                         std::uint64_t trans) {
        return u128{64} * (u128{mul} + add + u128{2} * fma + trans);
    };
    u128 total = valu(rec.mul_f16, rec.add_f16, rec.fma_f16, rec.trans_f16) +
                 valu(rec.mul_f32, rec.add_f32, rec.fma_f32, rec.trans_f32) +
                 valu(rec.mul_f64, rec.add_f64, rec.fma_f64, rec.trans_f64);
    if (mode == MfmaCoeffMode::Measured512) {
        total += u128{512} * (u128{rec.mfma_mops_f16} + rec.mfma_mops_bf16 +
                              rec.mfma_mops_f32 + rec.mfma_mops_f64);
    } else {
        total += u128{1024} * rec.mfma_mops_f16 + u128{1024} * rec.mfma_mops_bf16 +
                 u128{256} * rec.mfma_mops_f32 + u128{256} * rec.mfma_mops_f64;
    }
    return static_cast<double>(total);
}

CounterParseResult parse_counter_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("counter CSV is empty");
    }
    const auto header = split_csv_line(line);
    std::vector<Field> columns;
    CounterParseResult result;
    for (const auto& raw : header) {
        const std::string name = trim(raw);
        Field field = field_for(name);
        columns.push_back(field);
        if (!field) {
            result.warnings.push_back("ignoring unknown column: " + name);
        }
    }

    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != columns.size()) {
            throw std::invalid_argument("counter CSV row has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(columns.size()));
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (columns[i]) result.totals.*columns[i] += parse_count(fields[i]);
        }
        ++result.rows;
    }
    return result;
}

std::vector<IterationLogEntry> parse_training_log(std::istream& in) {
    static const std::regex time_re(
        R"(elapsed time per iteration \(ms\)\s*:\s*([0-9][0-9eE.+-]*))");
    static const std::regex tflops_re(R"(TFLOPs\s*:\s*([0-9][0-9eE.+-]*))");
    static const std::regex iter_re(R"(iteration\s+(\d+))");

    std::vector<IterationLogEntry> entries;
    std::string line;
    long fallback_index = 0;
    while (std::getline(in, line)) {
        std::smatch time_match, tflops_match, iter_match;
        if (!std::regex_search(line, time_match, time_re) ||
            !std::regex_search(line, tflops_match, tflops_re)) {
            continue;
        }
        IterationLogEntry entry;
        entry.iter_time = std::stod(time_match[1].str()) / 1000.0;
        entry.reported_tflops = std::stod(tflops_match[1].str());
        entry.iteration = std::regex_search(line, iter_match, iter_re)
                              ? std::stol(iter_match[1].str())
                              : fallback_index;
        ++fallback_index;
        if (entry.iter_time <= 0) {
            throw std::invalid_argument("iteration time must be positive");
        }
        entries.push_back(entry);
    }
    return entries;
}

double aggregate_model_flops(const std::vector<IterationLogEntry>& log) {
    if (log.empty()) {
        throw std::invalid_argument("empty iteration log");
    }
    double weighted = 0.0, total_time = 0.0;
    for (const auto& entry : log) {
        if (entry.iter_time <= 0) {
            throw std::invalid_argument("iteration time must be positive");
        }
        weighted += entry.iter_time * entry.reported_tflops;
        total_time += entry.iter_time;
    }
    return weighted / total_time;
}

MbsDiagnosis diagnose_mbs_mismatch(double model_tflops, double hw_tflops, int cfg_mbs,
                                   int ds_mbs) {
    if (hw_tflops <= 0) throw std::invalid_argument("hardware FLOPS rate must be positive");
    if (cfg_mbs < 1 || ds_mbs < 1) throw std::invalid_argument("micro-batch sizes must be >= 1");

    MbsDiagnosis diag;
    diag.flops_ratio = model_tflops / hw_tflops;
    diag.mbs_ratio = static_cast<double>(ds_mbs) / cfg_mbs;
    if (ds_mbs != cfg_mbs && std::abs(diag.flops_ratio / diag.mbs_ratio - 1.0) <= 0.10) {
        diag.kind = MbsDiagnosisKind::MbsMismatch;
        diag.message = "model FLOPS over-reported by factor " + format_double(diag.mbs_ratio) +
                       " due to micro-batch-size mismatch (train_micro_batch_size_per_gpu=" +
                       std::to_string(ds_mbs) + " vs micro_batch_size=" +
                       std::to_string(cfg_mbs) + ")";
    } else if (std::abs(diag.flops_ratio - 1.0) <= 0.10) {
        diag.kind = MbsDiagnosisKind::Consistent;
        diag.message = "model and hardware FLOPS agree";
    } else {
        diag.kind = MbsDiagnosisKind::UnexplainedDivergence;
        diag.message = "model/hardware FLOPS ratio " + format_double(diag.flops_ratio) +
                       " not explained by the micro-batch settings";
    }
    return diag;
}

RooflineReport roofline(double flops, double bytes, const ClusterSpec& cluster) {
    if (bytes <= 0) throw std::invalid_argument("bytes must be positive");
    if (flops < 0) throw std::invalid_argument("flops must be non-negative");
    if (cluster.hbm_bandwidth <= 0 || cluster.peak_flops_per_gpu <= 0) {
        throw std::invalid_argument("cluster needs positive peak and hbm_bandwidth");
    }
    RooflineReport rep;
    rep.total_flops = flops;
    rep.total_bytes = bytes;
    rep.arithmetic_intensity = flops / bytes;
    rep.ridge_intensity = cluster.peak_flops_per_gpu / cluster.hbm_bandwidth;
    rep.bound = rep.arithmetic_intensity >= rep.ridge_intensity ? RooflineBound::ComputeBound
                                                                : RooflineBound::MemoryBound;
    return rep;
}

namespace {

void require_series(const std::vector<ScalingPoint>& series) {
    if (series.empty()) throw std::invalid_argument("empty scaling series");
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].gpus <= 0 || series[i].value <= 0) {
            throw std::invalid_argument("scaling points must be positive");
        }
        if (i > 0 && series[i].gpus < series[i - 1].gpus) {
            throw std::invalid_argument(
                "series must be sorted by GPU count with the baseline first");
        }
    }
}

}  // namespace

std::vector<double> weak_scaling(const std::vector<ScalingPoint>& series) {
    require_series(series);
    std::vector<double> efficiency;
    efficiency.reserve(series.size());
    for (const auto& point : series) {
        efficiency.push_back(point.value / series.front().value);
    }
    return efficiency;
}

std::vector<double> strong_scaling(const std::vector<ScalingPoint>& series) {
    require_series(series);
    std::vector<double> efficiency;
    efficiency.reserve(series.size());
    for (const auto& point : series) {
        const double speedup = series.front().value / point.value;
        const double ideal = point.gpus / series.front().gpus;
        efficiency.push_back(speedup / ideal);
    }
    return efficiency;
}

}  // namespace trainplan
