#include "idss/trace.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace idss::trace {

Kind parse_kind(std::string_view s) {
    std::string k = lower(s);
    if (k == "a") return Kind::A;
    if (k == "b") return Kind::B;
    if (k == "c") return Kind::C;
    if (k == "d") return Kind::D;
    throw Error("unknown trace kind: " + std::string(s));
}

std::string to_string(Kind k) {
    switch (k) {
        case Kind::A: return "A";
        case Kind::B: return "B";
        case Kind::C: return "C";
        case Kind::D: return "D";
    }
    throw Error("bad trace kind");
}

namespace {

void validate(Kind kind, const GeneratorParams& p) {
    switch (kind) {
        case Kind::A:
            if (p.universe_blocks == 0) throw Error("trace A: universe_blocks must be positive");
            if (p.preload_blocks > p.universe_blocks)
                throw Error("trace A: preload_blocks exceeds universe_blocks");
            break;
        case Kind::B:
            if (p.hot_blocks == 0) throw Error("trace B: hot_blocks must be positive");
            if (p.hot_fraction < 0.0 || p.hot_fraction > 1.0)
                throw Error("trace B: hot_fraction must be in [0,1]");
            if (p.cold_lo > p.cold_hi) throw Error("trace B: empty cold range");
            if (p.cold_lo < p.hot_blocks)
                throw Error("trace B: cold range overlaps hot set");
            if (p.total_requests == 0) throw Error("trace B: total_requests must be positive");
            break;
        case Kind::C:
            if (p.cycle_len == 0 || p.cycles == 0)
                throw Error("trace C: cycle_len and cycles must be positive");
            break;
        case Kind::D:
            if (p.epochs == 0 || p.epoch_accesses == 0 || p.window_blocks == 0)
                throw Error("trace D: epochs, epoch_accesses and window_blocks must be positive");
            break;
    }
}

Request read_req(std::uint64_t seq, std::uint64_t block) {
    return Request{seq, block, Op::Read, 1};
}

}  // namespace

AccessTrace gen_synthetic(Kind kind, const GeneratorParams& p, std::uint64_t seed) {
    validate(kind, p);
    Rng rng(seed);
    AccessTrace t;
    t.seed = seed;
    t.label = to_string(kind) + "(seed=" + std::to_string(seed) + ")";
    std::uint64_t seq = 0;

    switch (kind) {
        case Kind::A: {
            t.requests.reserve(p.preload_blocks + p.random_accesses);
            for (std::uint64_t b = 0; b < p.preload_blocks; ++b)
                t.requests.push_back(read_req(seq++, b));
            for (std::uint64_t i = 0; i < p.random_accesses; ++i)
                t.requests.push_back(read_req(seq++, rng.below(p.universe_blocks)));
            break;
        }
        case Kind::B: {
            t.requests.reserve(p.total_requests);
            const std::uint64_t cold_span = p.cold_hi - p.cold_lo + 1;
            for (std::uint64_t i = 0; i < p.total_requests; ++i) {
                std::uint64_t block = rng.chance(p.hot_fraction)
                                          ? rng.below(p.hot_blocks)
                                          : p.cold_lo + rng.below(cold_span);
                t.requests.push_back(read_req(seq++, block));
            }
            break;
        }
        case Kind::C: {
            t.requests.reserve(p.cycle_len * p.cycles);
            for (std::uint64_t i = 0; i < p.cycle_len * p.cycles; ++i)
                t.requests.push_back(read_req(seq++, p.base_block + i % p.cycle_len));
            break;
        }
        case Kind::D: {
            t.requests.reserve(p.epochs * p.epoch_accesses);
            for (std::uint64_t e = 0; e < p.epochs; ++e) {
                const std::uint64_t base = e * p.window_blocks;
                for (std::uint64_t i = 0; i < p.epoch_accesses; ++i)
                    t.requests.push_back(read_req(seq++, base + i % p.window_blocks));
            }
            break;
        }
    }
    return t;
}

FormatSpec FormatSpec::native() {
    FormatSpec f;
    f.skip_header = true;
    return f;
}

FormatSpec FormatSpec::plain() {
    FormatSpec f;
    f.col_block = 0;
    f.col_op.reset();
    f.col_ts.reset();
    f.col_size.reset();
    return f;
}

FormatSpec FormatSpec::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("bad format spec: ") + e.what());
    }
    FormatSpec f = FormatSpec::plain();  // optional columns default to absent
    if (j.contains("delimiter")) {
        std::string d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw Error("bad format spec: delimiter must be one character");
        f.delimiter = d[0];
    }
    f.col_block = j.at("col_block").get<int>();
    if (j.contains("col_op")) f.col_op = j.at("col_op").get<int>();
    if (j.contains("col_ts")) f.col_ts = j.at("col_ts").get<int>();
    if (j.contains("col_size")) f.col_size = j.at("col_size").get<int>();
    if (j.contains("skip_header")) f.skip_header = j.at("skip_header").get<bool>();
    if (j.contains("max_bad_fraction")) f.max_bad_fraction = j.at("max_bad_fraction").get<double>();
    return f;
}

namespace {

bool parse_u64(std::string_view s, std::uint64_t& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e && !s.empty();
}

/* Returns false if the row is malformed. */
bool parse_row(const std::string& line, const FormatSpec& f, Request& out) {
    std::vector<std::string> cols = split(line, f.delimiter);
    auto need = [&](int idx) -> const std::string* {
        if (idx < 0 || static_cast<std::size_t>(idx) >= cols.size()) return nullptr;
        return &cols[static_cast<std::size_t>(idx)];
    };

    const std::string* bc = need(f.col_block);
    if (!bc || !parse_u64(trim(*bc), out.block)) return false;

    out.op = Op::Read;
    if (f.col_op) {
        const std::string* oc = need(*f.col_op);
        if (!oc) return false;
        std::string op = lower(trim(*oc));
        if (op == "r" || op == "read") out.op = Op::Read;
        else if (op == "w" || op == "write") out.op = Op::Write;
        else return false;
    }

    out.size_blocks = 1;
    if (f.col_size) {
        const std::string* sc = need(*f.col_size);
        if (!sc) return false;
        std::uint64_t sz = 0;
        if (!parse_u64(trim(*sc), sz) || sz == 0 || sz > UINT32_MAX) return false;
        out.size_blocks = static_cast<std::uint32_t>(sz);
    }

    if (f.col_ts) {
        const std::string* tc = need(*f.col_ts);
        std::uint64_t ts = 0;
        if (!tc || !parse_u64(trim(*tc), ts)) return false;
    }
    return true;
}

}  // namespace

AccessTrace load_trace(const std::filesystem::path& path, const FormatSpec& format,
                       LoadStats* stats) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trace file: " + path.string());

    AccessTrace t;
    t.label = path.stem().string();
    LoadStats ls;

    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && format.skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (trim(line).empty()) continue;
        ++ls.rows_total;
        Request r;
        if (parse_row(line, format, r)) {
            r.seq = ls.rows_loaded;
            t.requests.push_back(r);
            ++ls.rows_loaded;
        } else {
            ++ls.rows_skipped;
            if (ls.first_bad_lineno == 0) {
                ls.first_bad_lineno = ls.rows_total + (format.skip_header ? 1 : 0);
                ls.first_bad_line = line;
            }
        }
    }

    if (ls.rows_total > 0 &&
        static_cast<double>(ls.rows_skipped) >
            format.max_bad_fraction * static_cast<double>(ls.rows_total)) {
        throw Error("trace load failed: " + std::to_string(ls.rows_skipped) + " of " +
                    std::to_string(ls.rows_total) + " rows malformed (line " +
                    std::to_string(ls.first_bad_lineno) + ": \"" + ls.first_bad_line + "\")");
    }
    if (ls.rows_skipped > 0) {
        std::cerr << "warning: skipped " << ls.rows_skipped << " malformed row(s) in "
                  << path.string() << " (first at line " << ls.first_bad_lineno << ")\n";
    }
    if (stats) *stats = ls;
    return t;
}

void save_trace(const AccessTrace& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trace file: " + path.string());
    out << "seq,op,block,size\n";
    for (const Request& r : t.requests) {
        out << r.seq << ',' << (r.op == Op::Read ? 'R' : 'W') << ',' << r.block << ','
            << r.size_blocks << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

TraceStats trace_stats(const AccessTrace& t) {
    if (t.requests.empty()) throw Error("trace_stats: empty trace");
    TraceStats s;
    s.length = t.requests.size();
    std::unordered_set<std::uint64_t> uniq;
    std::uint64_t reads = 0;
    for (const Request& r : t.requests) {
        uniq.insert(r.block);
        if (r.op == Op::Read) ++reads;
        if (r.block > s.max_block) s.max_block = r.block;
    }
    s.unique_blocks = uniq.size();
    s.read_fraction = static_cast<double>(reads) / static_cast<double>(s.length);
    return s;
}

AccessTrace prefix(const AccessTrace& t, std::size_t n) {
    if (n == 0) throw Error("prefix: n must be >= 1");
    if (n > t.requests.size())
        throw Error("prefix: n (" + std::to_string(n) + ") exceeds trace length (" +
                    std::to_string(t.requests.size()) + ")");
    AccessTrace out;
    out.requests.assign(t.requests.begin(), t.requests.begin() + static_cast<std::ptrdiff_t>(n));
    out.label = t.label;
    out.seed = t.seed;
    return out;
}

}  // namespace idss::trace
