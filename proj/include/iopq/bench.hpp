#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "iopq/block_store.hpp"

namespace iopq::bench {

/// One measured run of a structure workload; amortized figures are exact
/// quotients of the totals.
struct BenchRecord {
    std::string structure;
    std::string workload;
    std::uint64_t n = 0;
    std::size_t block_size = 0;
    std::size_t memory_size = 0;
    double lambda = 0;
    double alpha = 0;
    std::uint64_t updates = 0;
    std::uint64_t extractions = 0;
    std::uint64_t deletions = 0;
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t update_reads = 0;   // reads charged during update calls
    std::uint64_t extract_reads = 0;  // reads charged during extract calls
    double wall_seconds = 0;

    double reads_per_update() const {
        return updates ? static_cast<double>(update_reads) / static_cast<double>(updates) : 0.0;
    }
    double reads_per_extract() const {
        return extractions ? static_cast<double>(extract_reads) / static_cast<double>(extractions)
                           : 0.0;
    }

    static const char* csv_header();
    std::string csv_row() const;
};

enum class Workload { InsertHeavy, Mixed, Sawtooth, DecreaseHeavy };

/// Parses the CLI workload names; throws std::invalid_argument otherwise.
Workload parse_workload(const std::string& name);
const char* workload_name(Workload w);

BenchRecord run_pq_workload(const StoreConfig& config, double alpha, double lambda, Workload w,
                            std::uint64_t n, std::uint64_t seed);
BenchRecord run_brt_workload(const StoreConfig& config, double alpha, double lambda, Workload w,
                             std::uint64_t n, std::uint64_t seed);

}  // namespace iopq::bench
