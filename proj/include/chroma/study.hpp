#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "chroma/eval.hpp"

namespace chroma::study {

inline constexpr int kPayloadVersion = 1;
inline constexpr int kDefaultSessionSize = 50;

struct PoolEntry {
    std::string image_id;
    std::string method_id;
    std::filesystem::path path;
    /// Opaque id shown to participants; never reveals image_id or method_id.
    std::string public_id;
};

/// Methods are real, chromagan, no_class, chromanet or external-<k>.
bool is_known_method(const std::string& method_id);

/// Images a study draws from. Manifest lines: `image_id method_id path`
/// (whitespace separated, path relative to the manifest, '#' comments).
class StudyPool {
public:
    StudyPool() = default;
    /// Throws ConfigError on duplicate ids, unknown methods or unreadable paths.
    explicit StudyPool(std::vector<PoolEntry> entries, bool check_paths = true);
    static StudyPool load(const std::filesystem::path& manifest);

    std::size_t size() const { return entries_.size(); }
    const PoolEntry& at(std::size_t i) const { return entries_.at(i); }
    const std::vector<PoolEntry>& entries() const { return entries_; }
    const PoolEntry* find(const std::string& image_id) const;
    const PoolEntry* find_public(const std::string& public_id) const;

private:
    std::vector<PoolEntry> entries_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::string, std::size_t> by_public_;
};

enum class Outcome { realistic, not_realistic, skipped };
std::string to_string(Outcome o);
Outcome parse_outcome(const std::string& s);

struct StudySession {
    std::string session_id;
    std::vector<std::string> image_ids;  // pool image ids, in presentation order
    std::size_t cursor = 0;
    std::vector<Outcome> outcomes;       // one per judged item, outcomes.size() == cursor

    std::size_t k() const { return image_ids.size(); }
    bool done() const { return cursor >= image_ids.size(); }
};

/// k distinct pool entries drawn uniformly without replacement.
/// Throws ConfigError when k exceeds the pool size or is zero.
StudySession create_session(const StudyPool& pool, std::size_t k, std::uint64_t seed, std::string session_id);

/// One line of the append-only store.
struct StoreRecord {
    enum class Kind { session, judgment } kind = Kind::judgment;
    std::string session_id;
    std::size_t k = 0;                  // session records
    std::string image_id;               // judgment records
    Outcome outcome = Outcome::skipped;  // judgment records
    std::size_t position = 0;           // judgment records: cursor at submission

    std::string to_line() const;
    static StoreRecord from_line(const std::string& line);
};

/// Append-only JSON-lines file. Appends from any thread are serialized.
class JudgmentStore {
public:
    explicit JudgmentStore(std::filesystem::path path);
    void append(const StoreRecord& record);
    const std::filesystem::path& path() const { return path_; }

    static std::vector<StoreRecord> read(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::ofstream out_;
};

struct ResultsTable {
    std::map<std::string, NaturalnessRow> methods;
    std::size_t sessions = 0;
    std::size_t completed_sessions = 0;
    std::size_t abandoned_sessions = 0;
    std::size_t skipped = 0;

    std::string to_text() const;
    std::string to_json() const;
};

/// Joins judgments with hidden method labels. Skipped items are counted but
/// excluded from naturalness. Throws StatisticError when there are no
/// realistic/not-realistic judgments.
ResultsTable session_results(const StudyPool& pool, const std::vector<StoreRecord>& records);
JudgmentSet judgments_from(const StudyPool& pool, const std::vector<StoreRecord>& records);

/// Participant-facing view of the current item. Never carries method labels.
struct CurrentItem {
    std::string session_id;
    std::size_t k = 0;
    std::size_t cursor = 0;
    bool done = false;
    std::string public_image_id;  // empty when done
};

struct Ack {
    std::size_t cursor = 0;
    bool done = false;
};

struct ServiceOptions {
    std::size_t k = kDefaultSessionSize;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> time_limit_ms;
};

/// Thread-safe session backend. Each session is serialized on its own lock.
class StudyService {
public:
    StudyService(StudyPool pool, std::filesystem::path store_path, ServiceOptions options = {});

    CurrentItem create_session();
    /// Throws NotFoundError.
    CurrentItem current(const std::string& session_id) const;
    /// Throws NotFoundError for unknown sessions and ProtocolError for
    /// duplicate, out-of-order or post-completion submissions.
    Ack record_judgment(const std::string& session_id, const std::string& public_image_id, Outcome outcome);
    /// Path of the current item's image. Throws NotFoundError / ProtocolError.
    std::filesystem::path current_image_path(const std::string& session_id,
                                             const std::string& public_image_id) const;

    ResultsTable results() const;

    const StudyPool& pool() const { return pool_; }
    const ServiceOptions& options() const { return options_; }
    std::filesystem::path store_path() const { return store_.path(); }

private:
    struct Slot {
        mutable std::mutex mutex;
        StudySession session;
    };
    Slot& slot(const std::string& session_id) const;

    StudyPool pool_;
    ServiceOptions options_;
    mutable JudgmentStore store_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<Slot>> sessions_;
    std::uint64_t counter_ = 0;
    std::uint64_t base_seed_;
};

}  // namespace chroma::study
