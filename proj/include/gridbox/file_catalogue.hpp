/**
 * @file file_catalogue.hpp
 * @brief Virtual file catalogue: logical file names mapped to GUIDs and
 *        site-local physical files
 *
 * LFN layout: /mg/<site_id>/<patient_pseudo_id>/<study_uid>/<sop_uid>.dcm
 *
 * Each node's catalogue indexes the files stored at that node. Files live under
 * `<data_dir>/files/` mirroring the LFN path and are written with
 * write-to-temp, fsync and rename, so a returned add_file survives a crash.
 */

#ifndef GRIDBOX_FILE_CATALOGUE_HPP
#define GRIDBOX_FILE_CATALOGUE_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox {

struct catalogue_entry {
    std::string lfn;
    std::string guid;           ///< 32 lowercase hex digits
    std::string site_id;
    std::string physical_path;  ///< empty for entries held at another site
    std::uint64_t size_bytes = 0;
    std::int64_t created_at = 0;  ///< Unix time, milliseconds

    bool operator==(const catalogue_entry&) const = default;
};

/// Builds the LFN for an image. Throws BadLfn when a component cannot appear
/// in an LFN.
[[nodiscard]] std::string make_lfn(std::string_view site_id, std::string_view pseudonym, std::string_view study_uid,
                                   std::string_view sop_uid);

/// Throws BadLfn unless `lfn` follows the layout.
void check_lfn(std::string_view lfn);

/// Site component of a well-formed LFN.
[[nodiscard]] std::string lfn_site(std::string_view lfn);

/// Glob match: '*' within one segment, '**' across segments. Throws BadPattern
/// for a relative pattern, empty segments, or three stars in a row.
[[nodiscard]] bool glob_match(std::string_view pattern, std::string_view lfn);
void check_glob(std::string_view pattern);

/// Writes a file via a temporary sibling, fsyncs it and its directory, and
/// renames it into place.
void write_file_durably(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

class file_catalogue {
public:
    file_catalogue(const std::filesystem::path& data_dir, std::string local_site_id);
    ~file_catalogue();

    file_catalogue(const file_catalogue&) = delete;
    file_catalogue& operator=(const file_catalogue&) = delete;

    /// Errors: LfnExists, BadLfn. Bytes are stored only when `site_id` is this
    /// node's site; otherwise the entry records a file held elsewhere.
    catalogue_entry add_file(std::span<const std::uint8_t> bytes, const std::string& lfn, const std::string& site_id);

    /// Sorted LFNs matching the glob. Errors: BadPattern.
    [[nodiscard]] std::vector<std::string> find(std::string_view glob);

    /// Errors: NotFound, NotLocal.
    [[nodiscard]] std::vector<std::uint8_t> get_file(const std::string& lfn);

    [[nodiscard]] std::optional<catalogue_entry> lookup(const std::string& lfn);
    [[nodiscard]] std::vector<catalogue_entry> entries();
    [[nodiscard]] std::size_t size();

    /// Where a local LFN's bytes live (whether or not they exist yet).
    [[nodiscard]] std::filesystem::path physical_path(std::string_view lfn) const;

    [[nodiscard]] const std::string& site_id() const noexcept { return site_id_; }

private:
    struct database;

    std::filesystem::path files_root_;
    std::string site_id_;
    std::unique_ptr<database> db_;
    std::mutex mutex_;
};

}  // namespace gridbox

#endif  // GRIDBOX_FILE_CATALOGUE_HPP
