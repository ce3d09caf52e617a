#include "gridbox/file_catalogue.hpp"

#include "gridbox/error.hpp"
#include "gridbox/random_id.hpp"

#include <sqlite3.h>

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <fstream>

namespace gridbox {

namespace {

bool segment_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
           c == '-';
}

std::vector<std::string_view> split(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t start = 1;
    for (;;) {
        auto slash = path.find('/', start);
        out.push_back(path.substr(start, slash - start));
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    return out;
}

void check_segment(std::string_view s, std::string_view what) {
    if (s.empty() || s == "." || s == ".." ||
        std::find_if_not(s.begin(), s.end(), segment_char) != s.end()) {
        throw error(error_code::bad_lfn, "invalid " + std::string(what) + " '" + std::string(s) + "' in LFN");
    }
}

std::string new_guid() { return to_hex(random_id128()); }

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void fsync_path(const std::filesystem::path& p, int flags) {
    int fd = ::open(p.c_str(), flags);
    if (fd < 0) throw error(error_code::io_error, "cannot open " + p.string() + " for sync");
    int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw error(error_code::io_error, "fsync failed for " + p.string());
}

class stmt {
public:
    stmt(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &s_, nullptr) != SQLITE_OK) fail("prepare");
    }
    ~stmt() { sqlite3_finalize(s_); }
    stmt(const stmt&) = delete;
    stmt& operator=(const stmt&) = delete;

    stmt& bind(int i, std::string_view text) {
        sqlite3_bind_text(s_, i, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
        return *this;
    }
    stmt& bind(int i, std::int64_t v) {
        sqlite3_bind_int64(s_, i, v);
        return *this;
    }
    bool step() {
        int rc = sqlite3_step(s_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        fail("step");
    }
    std::string text(int i) const {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(s_, i));
        return p == nullptr ? std::string() : std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(s_, i)));
    }
    std::int64_t integer(int i) const { return sqlite3_column_int64(s_, i); }

    catalogue_entry entry() const {
        return {text(0), text(1), text(2), text(3), static_cast<std::uint64_t>(integer(4)), integer(5)};
    }

private:
    [[noreturn]] void fail(const char* what) const {
        int code = sqlite3_extended_errcode(db_) & 0xFF;
        std::string msg = std::string("catalogue ") + what + ": " + sqlite3_errmsg(db_);
        throw error(code == SQLITE_CONSTRAINT ? error_code::lfn_exists : error_code::io_error, msg);
    }

    sqlite3* db_;
    sqlite3_stmt* s_ = nullptr;
};

constexpr const char* entry_columns = "SELECT lfn, guid, site_id, physical_path, size_bytes, created_at FROM entry ";

}  // namespace

std::string make_lfn(std::string_view site_id, std::string_view pseudonym, std::string_view study_uid,
                     std::string_view sop_uid) {
    std::string lfn = "/mg/" + std::string(site_id) + "/" + std::string(pseudonym) + "/" + std::string(study_uid) +
                      "/" + std::string(sop_uid) + ".dcm";
    check_lfn(lfn);
    return lfn;
}

void check_lfn(std::string_view lfn) {
    if (lfn.empty() || lfn.front() != '/') throw error(error_code::bad_lfn, "LFN must be absolute: '" + std::string(lfn) + "'");
    auto parts = split(lfn);
    if (parts.size() != 5 || parts[0] != "mg") {
        throw error(error_code::bad_lfn, "LFN must be /mg/<site>/<patient>/<study>/<sop>.dcm: '" + std::string(lfn) + "'");
    }
    check_segment(parts[1], "site");
    check_segment(parts[2], "patient");
    check_segment(parts[3], "study");
    check_segment(parts[4], "file name");
    if (parts[4].size() <= 4 || !parts[4].ends_with(".dcm")) {
        throw error(error_code::bad_lfn, "LFN file name must end in .dcm: '" + std::string(lfn) + "'");
    }
}

std::string lfn_site(std::string_view lfn) {
    check_lfn(lfn);
    return std::string(split(lfn)[1]);
}

void check_glob(std::string_view pattern) {
    if (pattern.empty() || pattern.front() != '/') {
        throw error(error_code::bad_pattern, "pattern must be absolute: '" + std::string(pattern) + "'");
    }
    if (pattern.find("***") != std::string_view::npos) {
        throw error(error_code::bad_pattern, "'***' is not a valid wildcard");
    }
    for (auto seg : split(pattern)) {
        if (seg.empty()) throw error(error_code::bad_pattern, "empty path segment in '" + std::string(pattern) + "'");
        for (char c : seg) {
            if (c != '*' && !segment_char(c)) {
                throw error(error_code::bad_pattern, std::string("invalid character '") + c + "' in pattern");
            }
        }
    }
}

bool glob_match(std::string_view pattern, std::string_view lfn) {
    check_glob(pattern);
    // can[j] == true when pattern[i..] can match lfn[j..]; filled from the end.
    const std::size_t n = lfn.size();
    std::vector<char> next(n + 1, 0), cur(n + 1, 0);
    next[n] = 1;
    for (std::size_t i = pattern.size(); i-- > 0;) {
        bool dstar = pattern[i] == '*' && i > 0 && pattern[i - 1] == '*';
        if (pattern[i] == '*' && dstar) {
            // Second star of "**": handled together with the first one.
            --i;
            cur[n] = next[n];
            for (std::size_t j = n; j-- > 0;) cur[j] = next[j] || cur[j + 1];
        } else if (pattern[i] == '*') {
            cur[n] = next[n];
            for (std::size_t j = n; j-- > 0;) cur[j] = next[j] || (lfn[j] != '/' && cur[j + 1]);
        } else {
            cur[n] = 0;
            for (std::size_t j = 0; j < n; ++j) cur[j] = lfn[j] == pattern[i] && next[j + 1];
        }
        std::swap(cur, next);
    }
    return next[0] != 0;
}

void write_file_durably(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    const auto dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    std::filesystem::create_directories(dir);
    auto temp = path;
    temp += ".tmp";
    int fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw error(error_code::io_error, "cannot create " + temp.string());
    std::size_t done = 0;
    while (done < bytes.size()) {
        auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw error(error_code::io_error, "write failed for " + temp.string());
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw error(error_code::io_error, "fsync failed for " + temp.string());
    }
    ::close(fd);
    std::filesystem::rename(temp, path);
    fsync_path(dir, O_RDONLY | O_DIRECTORY);
}

struct file_catalogue::database {
    sqlite3* db = nullptr;
    ~database() {
        if (db != nullptr) sqlite3_close_v2(db);
    }
};

file_catalogue::file_catalogue(const std::filesystem::path& data_dir, std::string local_site_id)
    : files_root_(data_dir / "files"), site_id_(std::move(local_site_id)), db_(std::make_unique<database>()) {
    check_segment(site_id_, "site");
    std::filesystem::create_directories(files_root_);
    auto path = data_dir / "catalogue.db";
    if (sqlite3_open_v2(path.c_str(), &db_->db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                        nullptr) != SQLITE_OK) {
        throw error(error_code::io_error, "cannot open " + path.string());
    }
    sqlite3_busy_timeout(db_->db, 10000);
    char* message = nullptr;
    int rc = sqlite3_exec(db_->db,
                          "PRAGMA journal_mode=WAL; PRAGMA synchronous=FULL;"
                          "CREATE TABLE IF NOT EXISTS entry ("
                          " lfn TEXT PRIMARY KEY NOT NULL, guid TEXT NOT NULL UNIQUE, site_id TEXT NOT NULL,"
                          " physical_path TEXT NOT NULL, size_bytes INTEGER NOT NULL, created_at INTEGER NOT NULL);",
                          nullptr, nullptr, &message);
    if (rc != SQLITE_OK) {
        std::string text = message != nullptr ? message : "?";
        sqlite3_free(message);
        throw error(error_code::io_error, "catalogue schema: " + text);
    }
}

file_catalogue::~file_catalogue() = default;

std::filesystem::path file_catalogue::physical_path(std::string_view lfn) const {
    return files_root_ / std::filesystem::path(std::string(lfn.substr(1)));
}

catalogue_entry file_catalogue::add_file(std::span<const std::uint8_t> bytes, const std::string& lfn,
                                         const std::string& site_id) {
    check_lfn(lfn);
    if (lfn_site(lfn) != site_id) {
        throw error(error_code::bad_lfn, "LFN " + lfn + " does not belong to site " + site_id);
    }
    std::lock_guard lock(mutex_);
    {
        stmt existing(db_->db, "SELECT 1 FROM entry WHERE lfn = ?");
        if (existing.bind(1, lfn).step()) throw error(error_code::lfn_exists, "LFN already catalogued: " + lfn);
    }
    catalogue_entry e{lfn, new_guid(), site_id, {}, bytes.size(), now_ms()};
    bool local = site_id == site_id_;
    if (local) {
        auto path = physical_path(lfn);
        write_file_durably(path, bytes);
        e.physical_path = path.string();
    }
    try {
        stmt insert(db_->db,
                    "INSERT INTO entry (lfn, guid, site_id, physical_path, size_bytes, created_at) "
                    "VALUES (?, ?, ?, ?, ?, ?)");
        insert.bind(1, e.lfn).bind(2, e.guid).bind(3, e.site_id).bind(4, e.physical_path);
        insert.bind(5, static_cast<std::int64_t>(e.size_bytes)).bind(6, e.created_at);
        insert.step();
    } catch (...) {
        if (local) std::filesystem::remove(e.physical_path);
        throw;
    }
    return e;
}

std::vector<std::string> file_catalogue::find(std::string_view glob) {
    check_glob(glob);
    // Narrow the scan to the literal prefix before the first wildcard.
    std::string prefix(glob.substr(0, glob.find('*')));
    std::string upper = prefix + "\xff";
    std::lock_guard lock(mutex_);
    stmt s(db_->db, "SELECT lfn FROM entry WHERE lfn >= ? AND lfn < ? ORDER BY lfn");
    s.bind(1, prefix).bind(2, upper);
    std::vector<std::string> out;
    while (s.step()) {
        auto lfn = s.text(0);
        if (glob_match(glob, lfn)) out.push_back(std::move(lfn));
    }
    return out;
}

std::optional<catalogue_entry> file_catalogue::lookup(const std::string& lfn) {
    std::lock_guard lock(mutex_);
    stmt s(db_->db, (std::string(entry_columns) + "WHERE lfn = ?").c_str());
    if (!s.bind(1, lfn).step()) return std::nullopt;
    return s.entry();
}

std::vector<std::uint8_t> file_catalogue::get_file(const std::string& lfn) {
    auto e = lookup(lfn);
    if (!e) throw error(error_code::not_found, "no such LFN: " + lfn);
    if (e->site_id != site_id_) throw error(error_code::not_local, lfn + " is held at site " + e->site_id);
    std::ifstream in(e->physical_path, std::ios::binary);
    if (!in) throw error(error_code::io_error, "stored file missing for " + lfn);
    std::vector<std::uint8_t> bytes(e->size_bytes);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != e->size_bytes) {
        throw error(error_code::io_error, "stored file truncated for " + lfn);
    }
    return bytes;
}

std::vector<catalogue_entry> file_catalogue::entries() {
    std::lock_guard lock(mutex_);
    stmt s(db_->db, (std::string(entry_columns) + "ORDER BY lfn").c_str());
    std::vector<catalogue_entry> out;
    while (s.step()) out.push_back(s.entry());
    return out;
}

std::size_t file_catalogue::size() {
    std::lock_guard lock(mutex_);
    stmt s(db_->db, "SELECT COUNT(*) FROM entry");
    s.step();
    return static_cast<std::size_t>(s.integer(0));
}

}  // namespace gridbox
