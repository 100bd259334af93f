#include "chroma/study.hpp"

#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chroma/error.hpp"

namespace chroma::study {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string public_id_for(const std::string& image_id) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : "chroma-study:" + image_id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "img-%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

bool is_known_method(const std::string& m) {
    if (m == "real" || m == "chromagan" || m == "no_class" || m == "chromanet") return true;
    const std::string prefix = "external-";
    if (m.rfind(prefix, 0) != 0 || m.size() == prefix.size()) return false;
    return m.find_first_not_of("0123456789", prefix.size()) == std::string::npos;
}

StudyPool::StudyPool(std::vector<PoolEntry> entries, bool check_paths) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        auto& e = entries_[i];
        if (e.image_id.empty()) throw ConfigError("pool entry " + std::to_string(i) + " has an empty image_id");
        if (!is_known_method(e.method_id)) {
            throw ConfigError("pool entry '" + e.image_id + "' has unknown method '" + e.method_id + "'");
        }
        if (check_paths) {
            std::ifstream probe(e.path, std::ios::binary);
            if (!probe) throw ConfigError("pool entry '" + e.image_id + "' is unreadable: " + e.path.string());
        }
        if (!by_id_.emplace(e.image_id, i).second) throw ConfigError("duplicate image_id '" + e.image_id + "'");
        e.public_id = public_id_for(e.image_id);
        if (!by_public_.emplace(e.public_id, i).second) {
            throw ConfigError("public id collision for '" + e.image_id + "'");
        }
    }
}

StudyPool StudyPool::load(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw ConfigError("cannot read pool manifest " + manifest.string());
    std::vector<PoolEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        PoolEntry e;
        std::string path;
        if (!(fields >> e.image_id)) continue;
        if (!(fields >> e.method_id >> path)) {
            throw ConfigError(manifest.string() + ":" + std::to_string(lineno) + ": expected image_id method_id path");
        }
        fs::path p(path);
        e.path = p.is_absolute() ? p : manifest.parent_path() / p;
        entries.push_back(std::move(e));
    }
    return StudyPool(std::move(entries));
}

const PoolEntry* StudyPool::find(const std::string& image_id) const {
    auto it = by_id_.find(image_id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const PoolEntry* StudyPool::find_public(const std::string& public_id) const {
    auto it = by_public_.find(public_id);
    return it == by_public_.end() ? nullptr : &entries_[it->second];
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::realistic: return "realistic";
        case Outcome::not_realistic: return "not_realistic";
        case Outcome::skipped: return "skipped";
    }
    return "skipped";
}

Outcome parse_outcome(const std::string& s) {
    if (s == "realistic") return Outcome::realistic;
    if (s == "not_realistic") return Outcome::not_realistic;
    if (s == "skipped") return Outcome::skipped;
    throw FormatError("unknown judgment outcome '" + s + "'");
}

StudySession create_session(const StudyPool& pool, std::size_t k, std::uint64_t seed, std::string session_id) {
    if (k == 0) throw ConfigError("session size must be >= 1");
    if (k > pool.size()) {
        throw ConfigError("session size " + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()));
    }
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first k slots are a uniform draw without replacement.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    StudySession s;
    s.session_id = std::move(session_id);
    for (std::size_t i = 0; i < k; ++i) s.image_ids.push_back(pool.at(idx[i]).image_id);
    return s;
}

// ---------------------------------------------------------------------------

std::string StoreRecord::to_line() const {
    json j;
    j["v"] = kPayloadVersion;
    j["session"] = session_id;
    if (kind == Kind::session) {
        j["type"] = "session";
        j["k"] = k;
    } else {
        j["type"] = "judgment";
        j["image_id"] = image_id;
        j["outcome"] = to_string(outcome);
        j["position"] = position;
    }
    return j.dump();
}

StoreRecord StoreRecord::from_line(const std::string& line) {
    try {
        const json j = json::parse(line);
        if (j.at("v").get<int>() != kPayloadVersion) throw FormatError("unsupported store record version");
        StoreRecord r;
        r.session_id = j.at("session").get<std::string>();
        const auto type = j.at("type").get<std::string>();
        if (type == "session") {
            r.kind = Kind::session;
            r.k = j.at("k").get<std::size_t>();
        } else if (type == "judgment") {
            r.kind = Kind::judgment;
            r.image_id = j.at("image_id").get<std::string>();
            r.outcome = parse_outcome(j.at("outcome").get<std::string>());
            r.position = j.at("position").get<std::size_t>();
        } else {
            throw FormatError("unknown store record type '" + type + "'");
        }
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad store record: ") + e.what());
    }
}

JudgmentStore::JudgmentStore(fs::path path) : path_(std::move(path)), out_(path_, std::ios::app) {
    if (!out_) throw ConfigError("cannot open judgment store " + path_.string());
}

void JudgmentStore::append(const StoreRecord& record) {
    const std::string line = record.to_line() + "\n";
    std::lock_guard lock(mutex_);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw Error("write to judgment store failed: " + path_.string());
}

std::vector<StoreRecord> JudgmentStore::read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read judgment store " + path.string());
    std::vector<StoreRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        records.push_back(StoreRecord::from_line(line));
    }
    return records;
}

// ---------------------------------------------------------------------------

JudgmentSet judgments_from(const StudyPool& pool, const std::vector<StoreRecord>& records) {
    JudgmentSet out;
    for (const auto& r : records) {
        if (r.kind != StoreRecord::Kind::judgment || r.outcome == Outcome::skipped) continue;
        const PoolEntry* e = pool.find(r.image_id);
        if (!e) throw ConfigError("judged image '" + r.image_id + "' is not in the pool");
        out.push_back({r.image_id, e->method_id, r.outcome == Outcome::realistic, r.session_id});
    }
    return out;
}

ResultsTable session_results(const StudyPool& pool, const std::vector<StoreRecord>& records) {
    ResultsTable t;
    std::map<std::string, std::size_t> declared;
    std::map<std::string, std::size_t> judged;
    for (const auto& r : records) {
        if (r.kind == StoreRecord::Kind::session) {
            declared[r.session_id] = r.k;
        } else {
            ++judged[r.session_id];
            if (r.outcome == Outcome::skipped) ++t.skipped;
        }
    }
    std::set<std::string> sessions;
    for (const auto& [id, k] : declared) sessions.insert(id);
    for (const auto& [id, n] : judged) sessions.insert(id);
    t.sessions = sessions.size();
    for (const auto& id : sessions) {
        const auto k = declared.find(id);
        const std::size_t n = judged.count(id) ? judged.at(id) : 0;
        // Sessions without a declaration record count as complete.
        if (k == declared.end() || n >= k->second) ++t.completed_sessions;
        else ++t.abandoned_sessions;
    }
    const JudgmentSet judgments = judgments_from(pool, records);
    if (judgments.empty()) throw StatisticError("judgment store holds no completed judgments");
    t.methods = naturalness_table(judgments);
    return t;
}

std::string ResultsTable::to_text() const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %10s %8s %12s\n", "method", "realistic", "total", "naturalness");
    os << buf;
    for (const auto& [method, row] : methods) {
        std::snprintf(buf, sizeof(buf), "%-16s %10zu %8zu %11.2f%%\n", method.c_str(), row.realistic, row.total,
                      row.percent);
        os << buf;
    }
    os << "\nsessions: " << sessions << " (completed " << completed_sessions << ", abandoned "
       << abandoned_sessions << "), skipped items: " << skipped << "\n";
    return os.str();
}

std::string ResultsTable::to_json() const {
    json j;
    j["version"] = kPayloadVersion;
    j["methods"] = json::object();
    for (const auto& [method, row] : methods) {
        j["methods"][method] = {{"realistic", row.realistic}, {"total", row.total}, {"naturalness", row.percent}};
    }
    j["sessions"] = sessions;
    j["completed_sessions"] = completed_sessions;
    j["abandoned_sessions"] = abandoned_sessions;
    j["skipped"] = skipped;
    return j.dump();
}

// ---------------------------------------------------------------------------

StudyService::StudyService(StudyPool pool, fs::path store_path, ServiceOptions options)
    : pool_(std::move(pool)), options_(options), store_(std::move(store_path)) {
    if (options_.k == 0 || options_.k > pool_.size()) {
        throw ConfigError("session size " + std::to_string(options_.k) + " must be in [1, pool size " +
                          std::to_string(pool_.size()) + "]");
    }
    base_seed_ = options_.seed ? *options_.seed : std::random_device{}() ^ (std::uint64_t{std::random_device{}()} << 32);
}

StudyService::Slot& StudyService::slot(const std::string& session_id) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + session_id + "'");
    return *it->second;
}

CurrentItem StudyService::create_session() {
    std::uint64_t seed;
    std::string id;
    {
        std::lock_guard lock(sessions_mutex_);
        const std::uint64_t n = counter_++;
        seed = mix(base_seed_ + n);
        char buf[40];
        std::snprintf(buf, sizeof(buf), "s%06llu-%08llx", static_cast<unsigned long long>(n),
                      static_cast<unsigned long long>(mix(seed) & 0xffffffffull));
        id = buf;
    }
    auto s = std::make_unique<Slot>();
    s->session = study::create_session(pool_, options_.k, seed, id);
    StoreRecord rec;
    rec.kind = StoreRecord::Kind::session;
    rec.session_id = id;
    rec.k = options_.k;
    store_.append(rec);
    {
        std::lock_guard lock(sessions_mutex_);
        sessions_.emplace(id, std::move(s));
    }
    return current(id);
}

CurrentItem StudyService::current(const std::string& session_id) const {
    Slot& s = slot(session_id);
    std::lock_guard lock(s.mutex);
    CurrentItem item;
    item.session_id = session_id;
    item.k = s.session.k();
    item.cursor = s.session.cursor;
    item.done = s.session.done();
    if (!item.done) item.public_image_id = pool_.find(s.session.image_ids[s.session.cursor])->public_id;
    return item;
}

Ack StudyService::record_judgment(const std::string& session_id, const std::string& public_image_id,
                                  Outcome outcome) {
    Slot& s = slot(session_id);
    std::lock_guard lock(s.mutex);
    StudySession& session = s.session;
    const PoolEntry* entry = pool_.find_public(public_image_id);
    for (std::size_t i = 0; entry && i < session.cursor; ++i) {
        if (session.image_ids[i] == entry->image_id) {
            throw ProtocolError("duplicate judgment for image '" + public_image_id + "'");
        }
    }
    if (session.done()) throw ProtocolError("session '" + session_id + "' is complete");
    const std::string& expected = session.image_ids[session.cursor];
    if (!entry || entry->image_id != expected) {
        throw ProtocolError("judgment for '" + public_image_id + "' out of order; expected '" +
                            pool_.find(expected)->public_id + "'");
    }
    StoreRecord rec;
    rec.kind = StoreRecord::Kind::judgment;
    rec.session_id = session_id;
    rec.image_id = expected;
    rec.outcome = outcome;
    rec.position = session.cursor;
    store_.append(rec);
    session.outcomes.push_back(outcome);
    ++session.cursor;
    return {session.cursor, session.done()};
}

fs::path StudyService::current_image_path(const std::string& session_id, const std::string& public_image_id) const {
    Slot& s = slot(session_id);
    std::lock_guard lock(s.mutex);
    if (s.session.done()) throw ProtocolError("session '" + session_id + "' is complete");
    const PoolEntry* current = pool_.find(s.session.image_ids[s.session.cursor]);
    if (current->public_id != public_image_id) {
        throw ProtocolError("image '" + public_image_id + "' is not the current item; expected '" +
                            current->public_id + "'");
    }
    return current->path;
}

ResultsTable StudyService::results() const { return session_results(pool_, JudgmentStore::read(store_.path())); }

}  // namespace chroma::study
