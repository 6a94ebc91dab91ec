#include "idss/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace idss::telem {

using nlohmann::json;

namespace {

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw Error("telemetry: non-numeric value for '" + key + "': " + value);
    }
}

void check_rates(const ClientTelemetry& t) {
    if (t.read_bps < 0 || t.write_bps < 0)
        throw Error("telemetry: negative rate for client " + t.client_id);
    if (t.cache_hit_rate && (*t.cache_hit_rate < 0.0 || *t.cache_hit_rate > 1.0))
        throw Error("telemetry: cache_hit_rate out of [0,1] for client " + t.client_id);
}

}  // namespace

ClientTelemetry parse_telemetry(const std::string& text) {
    ClientTelemetry t;
    bool have_id = false, have_read = false, have_write = false;
    for (const std::string& raw : split(text, '\n')) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("telemetry: expected key=value, got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "client_id") {
            t.client_id = value;
            have_id = true;
        } else if (key == "proc") {
            t.proc_name = value;
        } else if (key == "read_bps") {
            t.read_bps = parse_double(key, value);
            have_read = true;
        } else if (key == "write_bps") {
            t.write_bps = parse_double(key, value);
            have_write = true;
        } else if (key == "cache_hit_rate") {
            t.cache_hit_rate = parse_double(key, value);
        } else {
            t.extra[key] = parse_double(key, value);
        }
    }
    if (!have_id) throw Error("telemetry: missing mandatory key client_id");
    if (!have_read) throw Error("telemetry: missing mandatory key read_bps");
    if (!have_write) throw Error("telemetry: missing mandatory key write_bps");
    check_rates(t);
    return t;
}

ClientTelemetry parse_telemetry(const std::string& text, const ColumnMap& map) {
    std::vector<std::string> rows;
    for (const std::string& raw : split(text, '\n'))
        if (!trim(raw).empty()) rows.push_back(raw);
    if (map.skip_header && !rows.empty()) rows.erase(rows.begin());
    if (rows.size() != 1)
        throw Error("telemetry: column-mapped input must contain exactly one data row, got " +
                    std::to_string(rows.size()));

    std::vector<std::string> cols;
    if (map.delimiter == ' ') {  // any-whitespace split
        std::string cur;
        for (char ch : rows[0]) {
            if (ch == ' ' || ch == '\t' || ch == '\r') {
                if (!cur.empty()) cols.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        if (!cur.empty()) cols.push_back(cur);
    } else {
        cols = split(rows[0], map.delimiter);
    }
    auto col = [&](int idx, const char* what) -> std::string {
        if (idx < 0 || static_cast<std::size_t>(idx) >= cols.size())
            throw Error(std::string("telemetry: missing column for ") + what);
        return trim(cols[static_cast<std::size_t>(idx)]);
    };

    ClientTelemetry t;
    t.client_id = col(map.col_client, "client_id");
    if (t.client_id.empty()) throw Error("telemetry: empty client_id column");
    if (map.col_proc) t.proc_name = col(*map.col_proc, "proc");
    t.read_bps = parse_double("read_bps", col(map.col_read_bps, "read_bps"));
    t.write_bps = parse_double("write_bps", col(map.col_write_bps, "write_bps"));
    check_rates(t);
    return t;
}

WorkloadProfile extract_profile(const trace::AccessTrace& prefix) {
    const auto& reqs = prefix.requests;
    if (reqs.size() < 10)
        throw Error("extract_profile: prefix too short (" + std::to_string(reqs.size()) +
                    " < 10 requests)");

    WorkloadProfile p;
    p.prefix_len = reqs.size();

    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    std::uint64_t seq_pairs = 0;
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        ++counts[reqs[i].block];
        if (i > 0 && reqs[i].block == reqs[i - 1].block + 1) ++seq_pairs;
    }
    p.sequentiality = static_cast<double>(seq_pairs) / static_cast<double>(reqs.size() - 1);
    p.novelty = static_cast<double>(counts.size()) / static_cast<double>(reqs.size());

    // skew: share of accesses landing on the top 5% most-frequent blocks
    std::vector<std::pair<std::uint64_t, std::uint64_t>> freq(counts.begin(), counts.end());
    std::sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    const std::size_t top = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(0.05 * static_cast<double>(counts.size()))));
    std::uint64_t top_accesses = 0;
    for (std::size_t i = 0; i < top && i < freq.size(); ++i) top_accesses += freq[i].second;
    p.skew = static_cast<double>(top_accesses) / static_cast<double>(reqs.size());

    // cyclicity: the first block recurs at period q and the next
    // min(64, q) blocks repeat the opening order
    for (std::size_t q = 1; q < reqs.size(); ++q) {
        if (reqs[q].block != reqs[0].block) continue;
        bool repeats = true;
        const std::size_t span = std::min<std::size_t>(64, q);
        for (std::size_t j = 1; j <= span && q + j < reqs.size(); ++j) {
            if (reqs[q + j].block != reqs[j].block) {
                repeats = false;
                break;
            }
        }
        p.cyclicity = repeats;
        break;
    }
    return p;
}

const std::set<std::string> kDefaultMetricWhitelist = {
    "read_bps", "write_bps", "cache_hit_rate", "iops", "latency_p99"};

std::set<std::string> load_metric_whitelist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open metric whitelist: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("bad metric whitelist: " + std::string(e.what()));
    }
    if (!j.is_array()) throw Error("metric whitelist must be a JSON array of strings");
    std::set<std::string> out;
    for (const auto& v : j) out.insert(v.get<std::string>());
    return out;
}

SystemStateDoc organize(const std::vector<ClientInput>& clients, const ServerState& server,
                        const std::vector<std::string>& constraints,
                        const std::set<std::string>& whitelist) {
    SystemStateDoc doc;
    doc.server = server;
    doc.constraints = constraints;
    for (const ClientInput& in : clients) {
        ClientEntry e;
        e.client_id = in.telemetry.client_id;
        if (e.client_id.empty()) throw Error("organize: client with empty id");
        e.telemetry = in.telemetry;
        e.profile = in.profile;
        e.intent = in.intent;
        // drop non-whitelisted extras
        for (auto it = e.telemetry.extra.begin(); it != e.telemetry.extra.end();) {
            if (!whitelist.count(it->first)) it = e.telemetry.extra.erase(it);
            else ++it;
        }
        doc.clients.push_back(std::move(e));
    }
    std::sort(doc.clients.begin(), doc.clients.end(),
              [](const ClientEntry& a, const ClientEntry& b) { return a.client_id < b.client_id; });
    for (std::size_t i = 1; i < doc.clients.size(); ++i) {
        if (doc.clients[i].client_id == doc.clients[i - 1].client_id)
            throw Error("organize: duplicate client id: " + doc.clients[i].client_id);
    }
    return doc;
}

namespace {

json profile_to_json(const WorkloadProfile& p) {
    return json{{"cyclicity", p.cyclicity},
                {"novelty", p.novelty},
                {"prefix_len", p.prefix_len},
                {"sequentiality", p.sequentiality},
                {"skew", p.skew}};
}

WorkloadProfile profile_from_json(const json& j) {
    WorkloadProfile p;
    p.cyclicity = j.at("cyclicity").get<bool>();
    p.novelty = j.at("novelty").get<double>();
    p.prefix_len = j.at("prefix_len").get<std::size_t>();
    p.sequentiality = j.at("sequentiality").get<double>();
    p.skew = j.at("skew").get<double>();
    return p;
}

json telemetry_to_json(const ClientTelemetry& t) {
    json j{{"client_id", t.client_id},
           {"extra", json::object()},
           {"proc", t.proc_name},
           {"read_bps", t.read_bps},
           {"write_bps", t.write_bps}};
    for (const auto& [k, v] : t.extra) j["extra"][k] = v;
    if (t.cache_hit_rate) j["cache_hit_rate"] = *t.cache_hit_rate;
    return j;
}

ClientTelemetry telemetry_from_json(const json& j) {
    ClientTelemetry t;
    t.client_id = j.at("client_id").get<std::string>();
    t.proc_name = j.value("proc", "");
    t.read_bps = j.at("read_bps").get<double>();
    t.write_bps = j.at("write_bps").get<double>();
    if (j.contains("cache_hit_rate")) t.cache_hit_rate = j.at("cache_hit_rate").get<double>();
    if (j.contains("extra"))
        for (const auto& [k, v] : j.at("extra").items()) t.extra[k] = v.get<double>();
    return t;
}

}  // namespace

std::string doc_canonical_json(const SystemStateDoc& doc) {
    json clients = json::array();
    for (const ClientEntry& c : doc.clients) {
        clients.push_back(json{{"client_id", c.client_id},
                               {"intent", c.intent},
                               {"profile", profile_to_json(c.profile)},
                               {"telemetry", telemetry_to_json(c.telemetry)}});
    }
    json links = json::object();
    for (const auto& [name, bps] : doc.server.link_bps) links[name] = bps;
    json j{{"clients", clients},
           {"constraints", doc.constraints},
           {"server", json{{"cache_policy", doc.server.cache_policy},
                           {"cache_size_bytes", doc.server.cache_size_bytes},
                           {"links", links},
                           {"tiers", doc.server.tiers}}}};
    // nlohmann::json objects keep keys sorted, so dump() is canonical
    return j.dump();
}

SystemStateDoc doc_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error("bad system state doc: " + std::string(e.what()));
    }
    SystemStateDoc doc;
    for (const auto& c : j.at("clients")) {
        ClientEntry e;
        e.client_id = c.at("client_id").get<std::string>();
        e.intent = c.value("intent", "");
        e.profile = profile_from_json(c.at("profile"));
        e.telemetry = telemetry_from_json(c.at("telemetry"));
        doc.clients.push_back(std::move(e));
    }
    for (const auto& s : j.value("constraints", json::array()))
        doc.constraints.push_back(s.get<std::string>());
    const json& srv = j.at("server");
    doc.server.cache_policy = srv.value("cache_policy", "LRU");
    doc.server.cache_size_bytes = srv.value("cache_size_bytes", std::uint64_t{0});
    if (srv.contains("links"))
        for (const auto& [name, bps] : srv.at("links").items())
            doc.server.link_bps[name] = bps.get<std::uint64_t>();
    for (const auto& t : srv.value("tiers", json::array()))
        doc.server.tiers.push_back(t.get<std::string>());
    return doc;
}

std::string doc_hash(const SystemStateDoc& doc) {
    return to_hex(fnv1a(doc_canonical_json(doc)));
}

}  // namespace idss::telem
