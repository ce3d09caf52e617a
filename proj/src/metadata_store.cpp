#include "gridbox/metadata_store.hpp"

#include "gridbox/error.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace gridbox {

// ---------------------------------------------------------------------------
// SQL shape check
// ---------------------------------------------------------------------------

namespace {

enum class token_kind { word, string, number, symbol, end };

struct token {
    token_kind kind;
    std::string text;
};

std::vector<token> tokenize(std::string_view sql) {
    std::vector<token> out;
    std::size_t i = 0;
    auto fail = [&](const std::string& why) {
        throw error(error_code::sql_shape_error, why + " at offset " + std::to_string(i));
    };
    while (i < sql.size()) {
        char c = sql[i];
        if (c == ' ') {
            ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '_' || sql[i] == '.')) ++i;
            out.push_back({token_kind::word, std::string(sql.substr(start, i - start))});
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && i + 1 < sql.size() && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            std::size_t start = i++;
            while (i < sql.size() && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
            out.push_back({token_kind::number, std::string(sql.substr(start, i - start))});
        } else if (c == '\'') {
            std::string text;
            ++i;
            for (;;) {
                if (i >= sql.size()) fail("unterminated string literal");
                if (sql[i] == '\'') {
                    if (i + 1 < sql.size() && sql[i + 1] == '\'') {
                        text.push_back('\'');
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                text.push_back(sql[i++]);
            }
            out.push_back({token_kind::string, std::move(text)});
        } else if (c == '<' || c == '>') {
            std::string op(1, c);
            if (i + 1 < sql.size() && (sql[i + 1] == '=' || (c == '<' && sql[i + 1] == '>'))) op.push_back(sql[++i]);
            ++i;
            out.push_back({token_kind::symbol, op});
        } else if (c == '=' || c == '(' || c == ')' || c == ',') {
            out.push_back({token_kind::symbol, std::string(1, c)});
            ++i;
        } else {
            fail(std::string("unexpected character '") + c + "'");
        }
    }
    out.push_back({token_kind::end, {}});
    return out;
}

class shape_checker {
public:
    explicit shape_checker(std::vector<token> tokens) : tokens_(std::move(tokens)) {}

    void statement() {
        keyword("SELECT");
        exact("image.lfn");
        while (accept_symbol(",")) column();
        keyword("FROM");
        for (const char* w : {"patient", "JOIN", "study", "ON", "study.patient_pseudo_id", "=",
                              "patient.patient_pseudo_id", "JOIN", "series", "ON", "series.study_uid", "=",
                              "study.study_uid", "JOIN", "image", "ON", "image.series_uid", "=", "series.series_uid"}) {
            exact(w);
        }
        keyword("WHERE");
        or_expression();
        if (accept_keyword("ORDER")) {
            keyword("BY");
            do {
                column();
                if (!accept_keyword("ASC") && !accept_keyword("DESC")) fail("expected ASC or DESC");
            } while (accept_symbol(","));
        }
        if (accept_keyword("LIMIT")) {
            unsigned_number();
            if (accept_keyword("OFFSET")) unsigned_number();
        }
        if (peek().kind != token_kind::end) fail("trailing tokens");
    }

private:
    const token& peek() const { return tokens_[pos_]; }
    const token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& why) const {
        throw error(error_code::sql_shape_error, why + " near token " + std::to_string(pos_) + " '" + peek().text + "'");
    }

    static bool same_keyword(std::string_view a, std::string_view b) {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
                   return std::toupper(static_cast<unsigned char>(x)) == y;
               });
    }

    bool accept_keyword(std::string_view kw) {
        if (peek().kind == token_kind::word && same_keyword(peek().text, kw)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void keyword(std::string_view kw) {
        if (!accept_keyword(kw)) fail("expected " + std::string(kw));
    }
    bool accept_symbol(std::string_view s) {
        if (peek().kind == token_kind::symbol && peek().text == s) {
            ++pos_;
            return true;
        }
        return false;
    }
    void exact(std::string_view w) {
        const auto& t = peek();
        bool ok = t.kind == token_kind::symbol ? t.text == w
                                               : (t.kind == token_kind::word && (t.text == w || same_keyword(t.text, w)));
        if (!ok) fail("expected '" + std::string(w) + "'");
        ++pos_;
    }
    void column() {
        const auto& t = peek();
        if (t.kind != token_kind::word || !known_column(t.text)) fail("unknown column");
        ++pos_;
    }
    static bool known_column(std::string_view qualified) {
        for (const auto& a : fq::schema_attributes()) {
            if (a.qualified_column() == qualified) return true;
        }
        return false;
    }
    void unsigned_number() {
        if (peek().kind != token_kind::number || peek().text.front() == '-') fail("expected a non-negative integer");
        ++pos_;
    }

    void or_expression() {
        // Either one AND-run, or several wrapped together in parentheses.
        if (!accept_symbol("(")) fail("expected '('");
        if (peek().kind == token_kind::symbol && peek().text == "(") {
            and_run();
            int runs = 1;
            while (accept_keyword("OR")) {
                and_run();
                ++runs;
            }
            if (runs < 2) fail("a parenthesised OR group needs two runs");
            if (!accept_symbol(")")) fail("expected ')'");
        } else {
            predicate_list();
        }
    }
    void and_run() {
        if (!accept_symbol("(")) fail("expected '('");
        predicate_list();
    }
    void predicate_list() {
        predicate();
        while (accept_keyword("AND")) predicate();
        if (!accept_symbol(")")) fail("expected ')'");
    }
    void predicate() {
        column();
        if (accept_keyword("IS")) {
            accept_keyword("NOT");
            keyword("NULL");
            return;
        }
        if (accept_keyword("LIKE")) {
            if (next().kind != token_kind::string) fail("LIKE needs a string pattern");
            return;
        }
        const auto& op = peek();
        if (op.kind != token_kind::symbol ||
            (op.text != "=" && op.text != "<>" && op.text != "<" && op.text != ">" && op.text != "<=" && op.text != ">=")) {
            fail("expected a comparison operator");
        }
        ++pos_;
        auto kind = peek().kind;
        if (kind != token_kind::string && kind != token_kind::number) fail("expected a literal");
        ++pos_;
    }

    std::vector<token> tokens_;
    std::size_t pos_ = 0;
};

}  // namespace

void check_sql_shape(std::string_view sql) {
    shape_checker(tokenize(sql)).statement();
}

// ---------------------------------------------------------------------------
// SQLite plumbing
// ---------------------------------------------------------------------------

struct metadata_store::connection {
    sqlite3* db = nullptr;
    ~connection() {
        if (db != nullptr) sqlite3_close_v2(db);
    }
};

namespace {

constexpr std::string_view schema_sql = R"(
CREATE TABLE IF NOT EXISTS patient (
    patient_pseudo_id TEXT PRIMARY KEY NOT NULL,
    sex TEXT CHECK (sex IS NULL OR sex IN ('F', 'M', 'O')),
    birth_year INTEGER
);
CREATE TABLE IF NOT EXISTS study (
    study_uid TEXT PRIMARY KEY NOT NULL,
    patient_pseudo_id TEXT NOT NULL REFERENCES patient(patient_pseudo_id),
    study_date TEXT,
    description TEXT
);
CREATE TABLE IF NOT EXISTS series (
    series_uid TEXT PRIMARY KEY NOT NULL,
    study_uid TEXT NOT NULL REFERENCES study(study_uid),
    modality TEXT,
    laterality TEXT CHECK (laterality IS NULL OR laterality IN ('L', 'R')),
    view_code TEXT
);
CREATE TABLE IF NOT EXISTS image (
    sop_uid TEXT PRIMARY KEY NOT NULL,
    series_uid TEXT NOT NULL REFERENCES series(series_uid),
    lfn TEXT NOT NULL UNIQUE,
    rows INTEGER NOT NULL CHECK (rows > 0),
    columns INTEGER NOT NULL CHECK (columns > 0),
    bits_allocated INTEGER NOT NULL CHECK (bits_allocated > 0),
    pixel_spacing TEXT
);
CREATE INDEX IF NOT EXISTS study_patient ON study(patient_pseudo_id);
CREATE INDEX IF NOT EXISTS series_study ON series(study_uid);
CREATE INDEX IF NOT EXISTS image_series ON image(series_uid);
)";

constexpr std::string_view record_select =
    "SELECT image.lfn, patient.patient_pseudo_id, patient.sex, patient.birth_year, study.study_uid, "
    "study.study_date, study.description, series.series_uid, series.modality, series.laterality, "
    "series.view_code, image.sop_uid, image.rows, image.columns, image.bits_allocated, image.pixel_spacing "
    "FROM patient JOIN study ON study.patient_pseudo_id = patient.patient_pseudo_id "
    "JOIN series ON series.study_uid = study.study_uid JOIN image ON image.series_uid = series.series_uid ";

constexpr std::array<std::string_view, 15> record_columns{
    "Patient.PatientID", "Patient.Sex",       "Patient.BirthYear",    "Study.StudyInstanceUID", "Study.StudyDate",
    "Study.StudyDescription", "Series.SeriesInstanceUID", "Series.Modality", "Series.Laterality", "Series.ViewCode",
    "Image.SOPInstanceUID", "Image.Rows",        "Image.Columns",        "Image.BitsAllocated",  fq::pixel_spacing_attribute,
};

[[noreturn]] void throw_sqlite(sqlite3* db, const std::string& what) {
    int code = sqlite3_extended_errcode(db);
    std::string message = what + ": " + sqlite3_errmsg(db);
    if ((code & 0xFF) == SQLITE_CONSTRAINT) throw error(error_code::constraint_violation, message);
    throw error(error_code::store_fault, message);
}

class statement {
public:
    statement(sqlite3* db, std::string_view sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &stmt_, nullptr) != SQLITE_OK) {
            throw_sqlite(db, "prepare");
        }
    }
    ~statement() { sqlite3_finalize(stmt_); }
    statement(const statement&) = delete;
    statement& operator=(const statement&) = delete;

    void bind(int index, const std::optional<std::string>& value) {
        int rc = value ? sqlite3_bind_text(stmt_, index, value->data(), static_cast<int>(value->size()), SQLITE_TRANSIENT)
                       : sqlite3_bind_null(stmt_, index);
        if (rc != SQLITE_OK) throw_sqlite(db_, "bind");
    }
    void bind_int(int index, const std::optional<std::string>& value) {
        if (!value) {
            bind(index, std::nullopt);
            return;
        }
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(*value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value->size() || value->empty()) {
            throw error(error_code::constraint_violation, "non-integer value '" + *value + "'");
        }
        if (sqlite3_bind_int64(stmt_, index, v) != SQLITE_OK) throw_sqlite(db_, "bind");
    }

    /// True while a row is available.
    bool step() {
        int rc = sqlite3_step(stmt_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw_sqlite(db_, "step");
    }
    void run() {
        while (step()) {
        }
    }

    [[nodiscard]] int column_count() const { return sqlite3_column_count(stmt_); }
    [[nodiscard]] std::string column_name(int i) const { return sqlite3_column_name(stmt_, i); }
    [[nodiscard]] std::optional<std::string> text(int i) const {
        if (sqlite3_column_type(stmt_, i) == SQLITE_NULL) return std::nullopt;
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
        return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i)));
    }

private:
    sqlite3* db_;
    sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, std::string_view sql) {
    char* message = nullptr;
    if (sqlite3_exec(db, std::string(sql).c_str(), nullptr, nullptr, &message) != SQLITE_OK) {
        std::string text = message != nullptr ? message : "unknown error";
        sqlite3_free(message);
        throw error(error_code::store_fault, "sqlite: " + text);
    }
}

std::optional<std::string> attr(const fq::metadata_record& r, std::string_view name) {
    auto it = r.attributes.find(name);
    return it == r.attributes.end() ? std::nullopt : it->second;
}

}  // namespace

class metadata_store::reader_lease {
public:
    reader_lease(metadata_store& owner, std::unique_ptr<connection> c) : owner_(owner), conn_(std::move(c)) {}
    ~reader_lease() {
        std::lock_guard lock(owner_.readers_mutex_);
        owner_.idle_readers_.push_back(std::move(conn_));
    }
    reader_lease(const reader_lease&) = delete;
    reader_lease& operator=(const reader_lease&) = delete;
    sqlite3* db() const { return conn_->db; }

private:
    metadata_store& owner_;
    std::unique_ptr<connection> conn_;
};

metadata_store::metadata_store(const std::filesystem::path& database_file) : path_(database_file) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    writer_ = open_connection(false);
    exec(writer_->db, "PRAGMA journal_mode=WAL;");
    exec(writer_->db, schema_sql);
}

metadata_store::~metadata_store() = default;

std::unique_ptr<metadata_store::connection> metadata_store::open_connection(bool read_only) const {
    auto c = std::make_unique<connection>();
    int flags = (read_only ? SQLITE_OPEN_READONLY : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE)) | SQLITE_OPEN_NOMUTEX;
    if (sqlite3_open_v2(path_.c_str(), &c->db, flags, nullptr) != SQLITE_OK) {
        std::string message = c->db != nullptr ? sqlite3_errmsg(c->db) : "out of memory";
        throw error(error_code::store_fault, "cannot open " + path_.string() + ": " + message);
    }
    sqlite3_busy_timeout(c->db, 10000);
    exec(c->db, "PRAGMA foreign_keys=ON; PRAGMA synchronous=FULL; PRAGMA case_sensitive_like=ON;");
    return c;
}

metadata_store::reader_lease metadata_store::lease_reader() {
    {
        std::lock_guard lock(readers_mutex_);
        if (!idle_readers_.empty()) {
            auto c = std::move(idle_readers_.back());
            idle_readers_.pop_back();
            return reader_lease(*this, std::move(c));
        }
    }
    return reader_lease(*this, open_connection(true));
}

void metadata_store::check_fault() const {
    if (fault_.load()) throw error(error_code::store_fault, "injected store fault");
}

void metadata_store::ingest(const fq::metadata_record& r) {
    check_fault();
    auto pseudo = attr(r, "Patient.PatientID");
    auto study = attr(r, "Study.StudyInstanceUID");
    auto series = attr(r, "Series.SeriesInstanceUID");
    auto sop = attr(r, "Image.SOPInstanceUID");
    if (!pseudo || !study || !series || !sop) {
        throw error(error_code::constraint_violation, "record lacks a patient, study, series or SOP identifier");
    }

    std::lock_guard lock(writer_mutex_);
    sqlite3* db = writer_->db;
    exec(db, "BEGIN IMMEDIATE");
    try {
        {
            statement existing(db, "SELECT lfn FROM image WHERE sop_uid = ?");
            existing.bind(1, sop);
            if (existing.step()) {
                if (existing.text(0) != r.lfn) {
                    throw error(error_code::duplicate_sop_uid, "SOP instance " + *sop + " is already stored as " +
                                                                   existing.text(0).value_or(""));
                }
                exec(db, "ROLLBACK");
                return;
            }
        }
        auto check_parent = [&](const char* sql, const std::optional<std::string>& key,
                                const std::optional<std::string>& expected, const char* what) {
            statement s(db, sql);
            s.bind(1, key);
            if (s.step() && s.text(0) != expected) {
                throw error(error_code::constraint_violation, std::string(what) + " " + *key + " belongs elsewhere");
            }
        };
        check_parent("SELECT patient_pseudo_id FROM study WHERE study_uid = ?", study, pseudo, "study");
        check_parent("SELECT study_uid FROM series WHERE series_uid = ?", series, study, "series");

        statement p(db,
                    "INSERT INTO patient (patient_pseudo_id, sex, birth_year) VALUES (?, ?, ?) "
                    "ON CONFLICT (patient_pseudo_id) DO UPDATE SET sex = excluded.sex, birth_year = excluded.birth_year");
        p.bind(1, pseudo);
        p.bind(2, attr(r, "Patient.Sex"));
        p.bind_int(3, attr(r, "Patient.BirthYear"));
        p.run();

        statement s(db,
                    "INSERT INTO study (study_uid, patient_pseudo_id, study_date, description) VALUES (?, ?, ?, ?) "
                    "ON CONFLICT (study_uid) DO UPDATE SET study_date = excluded.study_date, "
                    "description = excluded.description");
        s.bind(1, study);
        s.bind(2, pseudo);
        s.bind(3, attr(r, "Study.StudyDate"));
        s.bind(4, attr(r, "Study.StudyDescription"));
        s.run();

        statement se(db,
                     "INSERT INTO series (series_uid, study_uid, modality, laterality, view_code) VALUES (?, ?, ?, ?, ?) "
                     "ON CONFLICT (series_uid) DO UPDATE SET modality = excluded.modality, "
                     "laterality = excluded.laterality, view_code = excluded.view_code");
        se.bind(1, series);
        se.bind(2, study);
        se.bind(3, attr(r, "Series.Modality"));
        se.bind(4, attr(r, "Series.Laterality"));
        se.bind(5, attr(r, "Series.ViewCode"));
        se.run();

        statement im(db,
                     "INSERT INTO image (sop_uid, series_uid, lfn, rows, columns, bits_allocated, pixel_spacing) "
                     "VALUES (?, ?, ?, ?, ?, ?, ?)");
        im.bind(1, sop);
        im.bind(2, series);
        im.bind(3, r.lfn);
        im.bind_int(4, attr(r, "Image.Rows"));
        im.bind_int(5, attr(r, "Image.Columns"));
        im.bind_int(6, attr(r, "Image.BitsAllocated"));
        im.bind(7, attr(r, fq::pixel_spacing_attribute));
        im.run();

        exec(db, "COMMIT");
    } catch (...) {
        sqlite3_exec(db, "ROLLBACK", nullptr, nullptr, nullptr);
        throw;
    }
}

row_set metadata_store::execute_sql(std::string_view sql) {
    check_sql_shape(sql);
    check_fault();
    auto lease = lease_reader();
    statement s(lease.db(), sql);
    row_set out;
    for (int i = 0; i < s.column_count(); ++i) out.columns.push_back(s.column_name(i));
    while (s.step()) {
        std::vector<std::optional<std::string>> row;
        row.reserve(out.columns.size());
        for (int i = 0; i < s.column_count(); ++i) row.push_back(s.text(i));
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::vector<fq::metadata_record> metadata_store::select_records(const std::string& where,
                                                               std::span<const std::string> params) {
    auto lease = lease_reader();
    statement s(lease.db(), std::string(record_select) + where);
    for (std::size_t i = 0; i < params.size(); ++i) s.bind(static_cast<int>(i + 1), params[i]);
    std::vector<fq::metadata_record> out;
    while (s.step()) {
        fq::metadata_record r;
        r.lfn = *s.text(0);
        for (std::size_t i = 0; i < record_columns.size(); ++i) {
            r.attributes.emplace(std::string(record_columns[i]), s.text(static_cast<int>(i + 1)));
        }
        r.attributes.emplace("Image.LFN", r.lfn);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<fq::metadata_record> metadata_store::fetch_metadata(std::span<const std::string> lfns) {
    check_fault();
    constexpr std::size_t batch = 200;
    std::vector<std::string> unique;
    std::set<std::string_view> seen;
    for (const auto& l : lfns) {
        if (seen.insert(l).second) unique.push_back(l);
    }
    std::map<std::string, fq::metadata_record> found;
    for (std::size_t start = 0; start < unique.size(); start += batch) {
        auto chunk = std::span<const std::string>(unique).subspan(start, std::min(batch, unique.size() - start));
        std::string where = "WHERE image.lfn IN (";
        for (std::size_t i = 0; i < chunk.size(); ++i) where += i == 0 ? "?" : ", ?";
        where += ")";
        for (auto& r : select_records(where, chunk)) found.emplace(r.lfn, std::move(r));
    }
    std::vector<fq::metadata_record> out;
    for (const auto& l : unique) {
        auto it = found.find(l);
        if (it != found.end()) out.push_back(std::move(it->second));
    }
    return out;
}

std::vector<fq::metadata_record> metadata_store::all_records() {
    check_fault();
    return select_records("ORDER BY image.lfn", {});
}

std::size_t metadata_store::image_count() {
    check_fault();
    auto lease = lease_reader();
    statement s(lease.db(), "SELECT COUNT(*) FROM image");
    s.step();
    return static_cast<std::size_t>(std::stoull(s.text(0).value_or("0")));
}

std::optional<std::string> metadata_store::lfn_for_sop(const std::string& sop_uid) {
    check_fault();
    auto lease = lease_reader();
    statement s(lease.db(), "SELECT lfn FROM image WHERE sop_uid = ?");
    s.bind(1, sop_uid);
    if (!s.step()) return std::nullopt;
    return s.text(0);
}

}  // namespace gridbox
