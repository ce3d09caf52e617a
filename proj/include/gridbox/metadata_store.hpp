/**
 * @file metadata_store.hpp
 * @brief Durable relational store for the four-table image metadata schema
 *
 * Tables: patient(patient_pseudo_id, sex, birth_year),
 * study(study_uid, patient_pseudo_id, study_date, description),
 * series(series_uid, study_uid, modality, laterality, view_code),
 * image(sop_uid, series_uid, lfn, rows, columns, bits_allocated, pixel_spacing).
 *
 * Backed by an embedded SQLite database in WAL mode with full fsync on commit,
 * so an ingest that has returned survives a process kill. Only statements in
 * the grammar emitted by fq::translate are executed; anything else is refused
 * with SqlShapeError before it reaches the engine.
 */

#ifndef GRIDBOX_METADATA_STORE_HPP
#define GRIDBOX_METADATA_STORE_HPP

#include "gridbox/formal_query.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox {

struct row_set {
    std::vector<std::string> columns;
    std::vector<std::vector<std::optional<std::string>>> rows;
};

/// Throws SqlShapeError unless `sql` is in the translate grammar.
void check_sql_shape(std::string_view sql);

class metadata_store {
public:
    explicit metadata_store(const std::filesystem::path& database_file);
    ~metadata_store();

    metadata_store(const metadata_store&) = delete;
    metadata_store& operator=(const metadata_store&) = delete;

    /// Upserts patient/study/series and inserts the image row in one
    /// transaction. Re-ingesting an identical record is a no-op.
    /// Errors: DuplicateSopUid, ConstraintViolation, StoreFault.
    void ingest(const fq::metadata_record& record);

    /// Errors: SqlShapeError, StoreFault.
    [[nodiscard]] row_set execute_sql(std::string_view sql);

    /// Joined rows for the LFNs that exist, in the order given; unknown LFNs
    /// and repeats are skipped.
    [[nodiscard]] std::vector<fq::metadata_record> fetch_metadata(std::span<const std::string> lfns);

    /// Every image's joined row ordered by LFN.
    [[nodiscard]] std::vector<fq::metadata_record> all_records();

    [[nodiscard]] std::size_t image_count();

    /// LFN under which a SOP instance is stored, if any.
    [[nodiscard]] std::optional<std::string> lfn_for_sop(const std::string& sop_uid);

    /// While set, every operation fails with StoreFault. Test hook.
    void inject_fault(bool enabled) noexcept { fault_.store(enabled); }

private:
    struct connection;
    class reader_lease;

    std::unique_ptr<connection> open_connection(bool read_only) const;
    reader_lease lease_reader();
    void check_fault() const;
    std::vector<fq::metadata_record> select_records(const std::string& where, std::span<const std::string> params);

    std::filesystem::path path_;
    std::unique_ptr<connection> writer_;
    std::mutex writer_mutex_;
    std::vector<std::unique_ptr<connection>> idle_readers_;
    std::mutex readers_mutex_;
    std::atomic<bool> fault_{false};
};

}  // namespace gridbox

#endif  // GRIDBOX_METADATA_STORE_HPP
