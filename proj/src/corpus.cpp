#include "gridbox/harness/corpus.hpp"

#include "gridbox/dicom/codec.hpp"
#include "gridbox/dicom/dataset.hpp"
#include "gridbox/dicom/tag.hpp"
#include "gridbox/error.hpp"
#include "gridbox/file_catalogue.hpp"
#include "gridbox/net/dicom_ul.hpp"
#include "gridbox/xml.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <stdexcept>

namespace gridbox::harness {

namespace {

namespace tags = dicom::tags;
using dicom::vr;

constexpr std::array surnames{"Abernethy", "Baptiste", "Castellano", "Dumont",   "Eriksen",  "Fairweather",
                              "Galloway",  "Hartmann", "Iglesias",   "Jablonski", "Kowalczyk", "Lindqvist",
                              "Marchetti", "Nakamura", "Oyelaran",   "Pellegrini", "Quennell", "Rasmussen",
                              "Szabo",     "Thorvald", "Underhill",  "Valentini", "Whitcombe", "Zielinski"};
constexpr std::array given_names{"Agnieszka", "Beatrice", "Chiara", "Dagmar",   "Elspeth", "Francesca",
                                 "Gudrun",    "Henrike",  "Ilaria", "Josefine", "Katalin", "Ludovica",
                                 "Marguerite", "Noemi",   "Ottilie", "Philippa", "Rosalind", "Sieglinde"};
constexpr std::array male_names{"Anselm", "Bartholomew", "Cosimo", "Dietrich", "Evander", "Florian"};
constexpr std::array descriptions{"Screening mammogram", "Diagnostic mammogram", "Follow-up mammogram",
                                  "Bilateral screening"};
constexpr std::array institutions{"Ospedale San Raffaele Milano", "Addenbrookes Hospital Cambridge",
                                  "Hopitaux Universitaires de Geneve", "Universitatsspital Basel"};
constexpr std::array physicians{"Okonkwo^Adaeze", "Vasquez^Rodrigo", "Lindgren^Solveig", "Moreau^Etienne"};
constexpr std::array<std::int64_t, 8> detector_sizes{512, 1024, 1536, 2048, 2560, 3072, 3328, 4096};
constexpr std::array spacings{"0.05\\0.05", "0.07\\0.07", "0.085\\0.085", "0.1\\0.1"};

// Raw engine output with modulo mapping keeps the sequence identical across
// standard libraries (distributions are implementation-defined).
class source {
public:
    explicit source(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t below(std::uint64_t n) { return rng_() % n; }
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }
    bool percent(int p) { return below(100) < static_cast<std::uint64_t>(p); }
    template <typename C>
    auto pick(const C& c) {
        return c[below(c.size())];
    }
    // "2.25." followed by a random 128-bit integer in decimal.
    std::string uid() {
        std::array<std::uint32_t, 4> limbs{};
        for (int i = 0; i < 4; i += 2) {
            auto w = rng_();
            limbs[i] = static_cast<std::uint32_t>(w >> 32);
            limbs[i + 1] = static_cast<std::uint32_t>(w);
        }
        std::string digits;
        bool nonzero = true;
        while (nonzero) {
            std::uint64_t rem = 0;
            nonzero = false;
            for (auto& limb : limbs) {
                std::uint64_t cur = (rem << 32) | limb;
                limb = static_cast<std::uint32_t>(cur / 10);
                rem = cur % 10;
                nonzero = nonzero || limb != 0;
            }
            digits.insert(digits.begin(), static_cast<char>('0' + rem));
        }
        return "2.25." + digits;
    }

private:
    std::mt19937_64 rng_;
};

std::string two(int v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", v);
    return buf;
}

std::string dicom_date(std::int64_t y, std::int64_t m, std::int64_t d) {
    return std::to_string(y) + two(static_cast<int>(m)) + two(static_cast<int>(d));
}

struct patient {
    std::string id, name, birth_date, address, other_id;
    std::optional<std::string> sex;
};

}  // namespace

corpus generate_corpus(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("corpus size must be at least 1");
    source rng(seed);
    corpus out;
    out.seed = seed;
    std::set<std::string> used_ids;

    std::size_t index = 0;
    while (index < n) {
        patient p;
        do {
            p.id = "MRN" + std::to_string(1'000'000 + rng.below(9'000'000));
        } while (!used_ids.insert(p.id).second);
        p.other_id = "NHS" + std::to_string(100'000'000 + rng.below(900'000'000));
        int sex_roll = static_cast<int>(rng.below(100));
        if (sex_roll < 92) {
            p.sex = "F";
            p.name = std::string(rng.pick(surnames)) + "^" + rng.pick(given_names);
        } else if (sex_roll < 97) {
            p.sex = "M";
            p.name = std::string(rng.pick(surnames)) + "^" + rng.pick(male_names);
        } else {
            p.name = std::string(rng.pick(surnames)) + "^" + rng.pick(given_names);
        }
        p.name += "^" + p.id.substr(5);  // keeps names distinct between patients
        p.birth_date = dicom_date(rng.between(1925, 1965), rng.between(1, 12), rng.between(1, 28));
        p.address = std::to_string(rng.between(1, 250)) + " " + rng.pick(surnames) + " Street";

        const auto studies = rng.between(1, 3);
        for (std::int64_t s = 0; s < studies && index < n; ++s) {
            const auto study_uid = rng.uid();
            const auto y = rng.between(1995, 2004), m = rng.between(1, 12), d = rng.between(1, 28);
            const auto study_date = dicom_date(y, m, d);
            const auto iso = std::to_string(y) + "-" + two(static_cast<int>(m)) + "-" + two(static_cast<int>(d));
            std::optional<std::string> description;
            if (!rng.percent(10)) description = rng.pick(descriptions);
            const auto accession = "ACC" + std::to_string(10'000'000 + rng.below(90'000'000));
            const std::string institution = rng.pick(institutions);
            const std::string physician = rng.pick(physicians);
            const auto rows = rng.pick(detector_sizes);
            const auto cols = rng.pick(detector_sizes);
            const std::int64_t bits = rng.percent(85) ? 16 : 8;
            const std::string spacing = rng.pick(spacings);

            int series_number = 1;
            for (const char* laterality : {"L", "R"}) {
                for (const char* view : {"CC", "MLO"}) {
                    if (index >= n) break;
                    ++index;
                    const auto series_uid = rng.uid();
                    const auto sop_uid = rng.uid();
                    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(rng.between(32, 256)) * 2);
                    for (auto& b : pixels) b = static_cast<std::uint8_t>(rng.below(256));

                    dicom::dataset ds;
                    ds.set_text(tags::specific_character_set, vr::CS, "ISO_IR 100");
                    ds.set_text(tags::image_type, vr::CS, "ORIGINAL\\PRIMARY");
                    ds.set_text(tags::sop_class_uid, vr::UI, std::string(dicom::ul::mammography_storage));
                    ds.set_text(tags::sop_instance_uid, vr::UI, sop_uid);
                    ds.set_text(tags::study_date, vr::DA, study_date);
                    ds.set_text(tags::study_time, vr::TM, two(static_cast<int>(rng.between(7, 18))) + "3000");
                    ds.set_text(tags::accession_number, vr::SH, accession);
                    ds.set_text(tags::modality, vr::CS, "MG");
                    ds.set_text(tags::manufacturer, vr::LO, "GRIDBOX-SIM");
                    ds.set_text(tags::institution_name, vr::LO, institution);
                    ds.set_text(tags::referring_physician_name, vr::PN, physician);
                    if (description) ds.set_text(tags::study_description, vr::LO, *description);
                    ds.set_text(tags::patient_name, vr::PN, p.name);
                    ds.set_text(tags::patient_id, vr::LO, p.id);
                    ds.set_text(tags::patient_birth_date, vr::DA, p.birth_date);
                    if (p.sex) ds.set_text(tags::patient_sex, vr::CS, *p.sex);
                    ds.set_text(tags::other_patient_ids, vr::LO, p.other_id);
                    ds.set_text(tags::patient_address, vr::LO, p.address);
                    ds.set_text(tags::body_part_examined, vr::CS, "BREAST");
                    ds.set_text(tags::view_position, vr::CS, view);
                    ds.set_text(tags::study_instance_uid, vr::UI, study_uid);
                    ds.set_text(tags::series_instance_uid, vr::UI, series_uid);
                    ds.set_text(tags::series_number, vr::IS, std::to_string(series_number++));
                    ds.set_text(tags::instance_number, vr::IS, "1");
                    ds.set_text(tags::image_laterality, vr::CS, laterality);
                    ds.set_integers(tags::samples_per_pixel, vr::US, {1});
                    ds.set_text(tags::photometric_interpretation, vr::CS, "MONOCHROME2");
                    ds.set_integers(tags::rows, vr::US, {rows});
                    ds.set_integers(tags::columns, vr::US, {cols});
                    ds.set_text(tags::pixel_spacing, vr::DS, spacing);
                    ds.set_integers(tags::bits_allocated, vr::US, {bits});
                    ds.set_integers(tags::bits_stored, vr::US, {bits == 16 ? 12 : 8});
                    ds.set_integers(tags::high_bit, vr::US, {bits == 16 ? 11 : 7});
                    ds.set_integers(tags::pixel_representation, vr::US, {0});
                    ds.set_bytes(tags::pixel_data, bits == 16 ? vr::OW : vr::OB, pixels);

                    char name[32];
                    std::snprintf(name, sizeof name, "img_%05zu.dcm", index);

                    manifest_record r;
                    r.file = name;
                    r.attributes = {
                        {"Patient.PatientID", p.id},
                        {"Patient.Sex", p.sex},
                        {"Patient.BirthYear", p.birth_date.substr(0, 4)},
                        {"Study.StudyInstanceUID", study_uid},
                        {"Study.StudyDate", iso},
                        {"Study.StudyDescription", description},
                        {"Series.SeriesInstanceUID", series_uid},
                        {"Series.Modality", "MG"},
                        {"Series.Laterality", laterality},
                        {"Series.ViewCode", view},
                        {"Image.SOPInstanceUID", sop_uid},
                        {"Image.Rows", std::to_string(rows)},
                        {"Image.Columns", std::to_string(cols)},
                        {"Image.BitsAllocated", std::to_string(bits)},
                        {std::string(fq::pixel_spacing_attribute), spacing},
                    };
                    r.identity = {
                        {"PatientID", p.id},
                        {"PatientName", p.name},
                        {"PatientBirthDate", p.birth_date},
                        {"OtherPatientIDs", p.other_id},
                        {"PatientAddress", p.address},
                        {"AccessionNumber", accession},
                        {"ReferringPhysicianName", physician},
                        {"InstitutionName", institution},
                    };
                    out.records.push_back(std::move(r));
                    out.files.push_back(
                        {name, dicom::serialize_file(ds, dicom::transfer_syntax::explicit_vr_little_endian)});
                }
            }
        }
    }
    return out;
}

std::string manifest_to_xml(std::uint64_t seed, const std::vector<manifest_record>& records) {
    xml::node root("Manifest");
    root.set("seed", std::to_string(seed)).set("count", std::to_string(records.size()));
    for (const auto& r : records) {
        xml::node rec("Record");
        rec.set("file", r.file);
        for (const auto& [name, value] : r.attributes) {
            xml::node a("Attribute");
            a.set("name", name);
            if (value) {
                a.text = *value;
            } else {
                a.set("null", "true");
            }
            rec.add(std::move(a));
        }
        for (const auto& [name, value] : r.identity) {
            xml::node a("Identity");
            a.set("name", name);
            a.text = value;
            rec.add(std::move(a));
        }
        root.add(std::move(rec));
    }
    return xml::render(root) + "\n";
}

std::vector<manifest_record> manifest_from_xml(std::string_view document) {
    auto root = xml::parse(document);
    if (root.name != "Manifest") throw error(error_code::xml_error, "expected <Manifest>, got <" + root.name + ">");
    std::vector<manifest_record> out;
    for (const auto& rec : root.children) {
        if (rec.name != "Record") continue;
        manifest_record r;
        if (const auto* f = rec.attribute("file")) r.file = *f;
        for (const auto& a : rec.children) {
            const auto* name = a.attribute("name");
            if (name == nullptr) throw error(error_code::xml_error, "manifest entry without a name");
            if (a.name == "Attribute") {
                const auto* null = a.attribute("null");
                if (null != nullptr && *null == "true") {
                    r.attributes[*name] = std::nullopt;
                } else {
                    r.attributes[*name] = a.text;
                }
            } else if (a.name == "Identity") {
                r.identity[*name] = a.text;
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_corpus(const corpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& f : c.files) write_file_durably(dir / f.name, f.bytes);
    auto manifest = manifest_to_xml(c.seed, c.records);
    write_file_durably(dir / manifest_file_name,
                       {reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()});
}

fq::metadata_record expected_record(const manifest_record& r, const pseudonym_key& key, std::string_view site_id) {
    fq::metadata_record out;
    out.attributes = r.attributes;
    const auto& id = out.attributes.at("Patient.PatientID");
    if (!id) throw error(error_code::missing_identity, r.file + " has no PatientID");
    auto pseudonym = compute_pseudonym(key, *id);
    out.attributes["Patient.PatientID"] = pseudonym;
    out.lfn = make_lfn(site_id, pseudonym, out.attributes.at("Study.StudyInstanceUID").value_or(""),
                       out.attributes.at("Image.SOPInstanceUID").value_or(""));
    out.attributes["Image.LFN"] = out.lfn;
    return out;
}

std::vector<std::string> identity_strings(const manifest_record& r) {
    std::vector<std::string> out;
    for (const auto& [name, value] : r.identity) {
        // The birth date is reduced, not removed: its year stays by design.
        if (name == "PatientBirthDate") {
            if (value.substr(4) != "0101") out.push_back(value);
            continue;
        }
        out.push_back(value);
    }
    return out;
}

std::vector<std::string> scan_for_strings(const std::filesystem::path& dir, const std::vector<std::string>& needles) {
    std::vector<std::string> hits;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        for (const auto& n : needles) {
            if (!n.empty() && content.find(n) != std::string::npos) hits.push_back(entry.path().string() + ": " + n);
        }
    }
    return hits;
}

}  // namespace gridbox::harness
