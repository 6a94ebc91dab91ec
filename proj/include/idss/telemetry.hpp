#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "idss/trace.hpp"

namespace idss::telem {

struct ClientTelemetry {
    std::string client_id;
    std::string proc_name;
    double read_bps = 0.0;
    double write_bps = 0.0;
    std::optional<double> cache_hit_rate;
    std::map<std::string, double> extra;  // unrecognized numeric metrics

    bool operator==(const ClientTelemetry&) const = default;
};

/* key=value fixture format; client_id, read_bps and write_bps are mandatory. */
ClientTelemetry parse_telemetry(const std::string& text);

/* Column mapping for whitespace/char-delimited monitor dumps. */
struct ColumnMap {
    int col_client = 0;
    std::optional<int> col_proc;
    int col_read_bps = 1;
    int col_write_bps = 2;
    char delimiter = ' ';
    bool skip_header = false;
};

ClientTelemetry parse_telemetry(const std::string& text, const ColumnMap& map);

struct WorkloadProfile {
    double skew = 0.0;           // fraction of accesses to the top 5% most-frequent blocks
    double sequentiality = 0.0;  // fraction of +1 deltas between consecutive requests
    bool cyclicity = false;      // first block recurs and the early order repeats
    double novelty = 0.0;        // unique blocks / length
    std::size_t prefix_len = 0;

    bool operator==(const WorkloadProfile&) const = default;
};

/* Features computed from a trace prefix (>= 10 requests). */
WorkloadProfile extract_profile(const trace::AccessTrace& prefix);

struct ServerState {
    std::string cache_policy = "LRU";
    std::uint64_t cache_size_bytes = 0;
    std::map<std::string, std::uint64_t> link_bps;  // link name -> capacity (bytes/s)
    std::vector<std::string> tiers;

    bool operator==(const ServerState&) const = default;
};

struct ClientEntry {
    std::string client_id;
    ClientTelemetry telemetry;
    WorkloadProfile profile;
    std::string intent;

    bool operator==(const ClientEntry&) const = default;
};

struct SystemStateDoc {
    std::vector<ClientEntry> clients;  // sorted by client_id
    ServerState server;
    std::vector<std::string> constraints;

    bool operator==(const SystemStateDoc&) const = default;
};

struct ClientInput {
    ClientTelemetry telemetry;
    WorkloadProfile profile;
    std::string intent;
};

extern const std::set<std::string> kDefaultMetricWhitelist;
std::set<std::string> load_metric_whitelist(const std::string& path);

/* Builds the canonical system doc: clients sorted by id, duplicate ids
 * rejected, extra metrics filtered by the whitelist. */
SystemStateDoc organize(const std::vector<ClientInput>& clients, const ServerState& server,
                        const std::vector<std::string>& constraints,
                        const std::set<std::string>& whitelist = kDefaultMetricWhitelist);

/* Canonical JSON: sorted keys, UTF-8, LF only.  Equal docs serialize to
 * identical bytes. */
std::string doc_canonical_json(const SystemStateDoc& doc);
SystemStateDoc doc_from_json_text(const std::string& text);
std::string doc_hash(const SystemStateDoc& doc);

}  // namespace idss::telem
