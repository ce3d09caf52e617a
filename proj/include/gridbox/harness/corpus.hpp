/**
 * @file corpus.hpp
 * @brief Seeded synthetic mammography corpus and its ground-truth manifest
 *
 * Images come in screening studies of four views (left/right x CC/MLO), one
 * series per view, one to three studies per patient. Values are drawn from a
 * raw mt19937_64 so a seed produces the same bytes everywhere. Pixel data is a
 * small random payload; Rows/Columns describe a full-size detector but the
 * payload does not fill it.
 *
 * manifest.xml holds one record per file with the values the generator chose,
 * written independently of the DICOM encoding so that parsing the files can
 * be checked against it:
 *
 *     <Manifest seed="42" count="300">
 *       <Record file="img_00001.dcm">
 *         <Attribute name="Patient.PatientID">MRN...</Attribute>
 *         <Attribute name="Study.StudyDescription" null="true"/>
 *         <Identity name="PatientName">...</Identity>
 *       </Record>
 *     </Manifest>
 *
 * Attributes carry every metadata attribute except Image.LFN, with the
 * original (not pseudonymized) PatientID. Identity entries are the direct
 * identifiers written into the file, for leak scanning.
 */

#ifndef GRIDBOX_HARNESS_CORPUS_HPP
#define GRIDBOX_HARNESS_CORPUS_HPP

#include "gridbox/anonymizer.hpp"
#include "gridbox/formal_query.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::harness {

struct manifest_record {
    std::string file;
    fq::attribute_map attributes;
    std::map<std::string, std::string> identity;

    bool operator==(const manifest_record&) const = default;
};

struct generated_file {
    std::string name;
    std::vector<std::uint8_t> bytes;
};

struct corpus {
    std::uint64_t seed = 0;
    std::vector<manifest_record> records;
    std::vector<generated_file> files;  ///< same order as records
};

/// Explicit VR Little Endian Part-10 files. Throws std::invalid_argument for
/// n == 0.
[[nodiscard]] corpus generate_corpus(std::size_t n, std::uint64_t seed);

[[nodiscard]] std::string manifest_to_xml(std::uint64_t seed, const std::vector<manifest_record>& records);
[[nodiscard]] std::vector<manifest_record> manifest_from_xml(std::string_view document);

inline constexpr std::string_view manifest_file_name = "manifest.xml";

/// Writes every file plus manifest.xml into `dir`, creating it if needed.
void write_corpus(const corpus& c, const std::filesystem::path& dir);

/// The metadata record an image gets once added at `site_id`.
[[nodiscard]] fq::metadata_record expected_record(const manifest_record& r, const pseudonym_key& key,
                                                  std::string_view site_id);

/// Strings that must never appear in a node's data directory.
[[nodiscard]] std::vector<std::string> identity_strings(const manifest_record& r);

/// Byte-scans every regular file under `dir` for each needle. Returns one
/// "<path>: <needle>" entry per hit.
[[nodiscard]] std::vector<std::string> scan_for_strings(const std::filesystem::path& dir,
                                                        const std::vector<std::string>& needles);

}  // namespace gridbox::harness

#endif  // GRIDBOX_HARNESS_CORPUS_HPP
