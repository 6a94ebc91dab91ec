#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idss/common.hpp"

namespace idss::trace {

enum class Op : std::uint8_t { Read, Write };

struct Request {
    std::uint64_t seq = 0;
    std::uint64_t block = 0;
    Op op = Op::Read;
    std::uint32_t size_blocks = 1;

    bool operator==(const Request&) const = default;
};

struct AccessTrace {
    std::vector<Request> requests;
    std::string label;                  // trace identity for reports, e.g. "B(seed=3)" or a file stem
    std::optional<std::uint64_t> seed;  // set for synthetic traces

    std::size_t size() const { return requests.size(); }
    bool operator==(const AccessTrace& o) const { return requests == o.requests; }
};

struct TraceStats {
    std::size_t length = 0;
    std::size_t unique_blocks = 0;
    double read_fraction = 0.0;
    std::uint64_t max_block = 0;
};

/* Synthetic workload families.
 *   A: preload phase (distinct blocks once each) followed by uniform random accesses
 *   B: hot/cold mix, hot set is blocks [0, hot_blocks)
 *   C: pure cyclic scan
 *   D: epochs of sequential access over disjoint contiguous windows
 */
enum class Kind { A, B, C, D };

Kind parse_kind(std::string_view s);
std::string to_string(Kind k);

struct GeneratorParams {
    // A
    std::uint64_t preload_blocks = 1000;
    std::uint64_t random_accesses = 5000;
    std::uint64_t universe_blocks = 10000;
    // B
    std::uint64_t total_requests = 10000;
    std::uint64_t hot_blocks = 100;
    double hot_fraction = 0.8;
    std::uint64_t cold_lo = 1000;
    std::uint64_t cold_hi = 100999;
    // C
    std::uint64_t cycle_len = 1000;
    std::uint64_t cycles = 10;
    std::uint64_t base_block = 0;
    // D
    std::uint64_t epochs = 5;
    std::uint64_t epoch_accesses = 2000;
    std::uint64_t window_blocks = 2000;
};

AccessTrace gen_synthetic(Kind kind, const GeneratorParams& params, std::uint64_t seed);
inline AccessTrace gen_synthetic(Kind kind, std::uint64_t seed) {
    return gen_synthetic(kind, GeneratorParams{}, seed);
}

/* Column mapping for delimited trace files.  Defaults match the native
 * CSV layout `seq,op,block,size`.  `plain()` reads one block id per line
 * (implied read, size 1). */
struct FormatSpec {
    char delimiter = ',';
    int col_block = 2;
    std::optional<int> col_op = 1;
    std::optional<int> col_ts = 0;    // parsed for validation only; seq is assigned by row order
    std::optional<int> col_size = 3;
    bool skip_header = false;
    double max_bad_fraction = 0.05;   // malformed-row tolerance before load fails

    static FormatSpec native();
    static FormatSpec plain();
    static FormatSpec from_json_text(const std::string& text);
};

struct LoadStats {
    std::size_t rows_total = 0;
    std::size_t rows_loaded = 0;
    std::size_t rows_skipped = 0;
    std::size_t first_bad_lineno = 0;  // 1-based; 0 = none
    std::string first_bad_line;
};

/* Loads a delimited trace file.  Malformed rows are skipped (with a
 * warning on stderr) while their fraction stays within
 * format.max_bad_fraction; beyond that the load fails, citing the first
 * offending line. */
AccessTrace load_trace(const std::filesystem::path& path, const FormatSpec& format,
                       LoadStats* stats = nullptr);

/* Writes the native CSV form (`seq,op,block,size` header). */
void save_trace(const AccessTrace& t, const std::filesystem::path& path);

TraceStats trace_stats(const AccessTrace& t);

/* First n requests (n must be >= 1 and <= length); order preserved. */
AccessTrace prefix(const AccessTrace& t, std::size_t n);

}  // namespace idss::trace
