#include "gridbox/harness/query_generator.hpp"

namespace gridbox::harness {

namespace {

std::uint64_t pick(std::mt19937_64& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }
bool chance(std::mt19937_64& rng, int percent) { return static_cast<int>(rng() % 100) < percent; }

/// Attributes weighted so that low-cardinality columns (sex, view, dates)
/// dominate; unique identifiers still appear now and then.
const fq::attribute_info& pick_attribute(std::mt19937_64& rng) {
    static constexpr std::string_view weighted[] = {
        "Patient.Sex",       "Patient.Sex",          "Patient.BirthYear",  "Patient.BirthYear",
        "Study.StudyDate",   "Study.StudyDate",      "Study.StudyDate",    "Study.StudyDescription",
        "Series.Modality",   "Series.Laterality",    "Series.Laterality",  "Series.ViewCode",
        "Series.ViewCode",   "Image.Rows",           "Image.Rows",         "Image.Columns",
        "Image.BitsAllocated", "Patient.PatientID",  "Study.StudyInstanceUID", "Series.SeriesInstanceUID",
        "Image.SOPInstanceUID", "Image.LFN",
    };
    return *fq::find_attribute(weighted[pick(rng, std::size(weighted))]);
}

std::optional<std::string> sample_value(std::mt19937_64& rng, std::span<const fq::metadata_record> records,
                                        std::string_view attribute) {
    if (records.empty()) return std::nullopt;
    const auto& r = records[pick(rng, records.size())];
    auto it = r.attributes.find(attribute);
    return it == r.attributes.end() ? std::nullopt : it->second;
}

std::string like_pattern(std::mt19937_64& rng, const std::string& value) {
    if (value.empty()) return "%";
    switch (pick(rng, 5)) {
        case 0: return value.substr(0, 1 + pick(rng, value.size())) + "%";
        case 1: return "%" + value.substr(pick(rng, value.size()));
        case 2: {
            auto start = pick(rng, value.size());
            return "%" + value.substr(start, 1 + pick(rng, value.size() - start)) + "%";
        }
        case 3: {
            std::string out = value;
            for (auto& c : out) {
                if (static_cast<unsigned char>(c) < 0x80 && chance(rng, 30)) c = '_';
            }
            return out;
        }
        default: {
            // Case flip: LIKE is case-sensitive, so this usually matches nothing.
            std::string out = value;
            for (auto& c : out) {
                if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
                else if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
            }
            return out;
        }
    }
}

fq::constraint random_constraint(std::mt19937_64& rng, std::span<const fq::metadata_record> records) {
    fq::constraint c;
    const auto& attr = pick_attribute(rng);
    c.attribute = std::string(attr.name);
    c.op = static_cast<fq::comparison>(pick(rng, 7));
    auto sample = sample_value(rng, records, attr.name);

    if (c.op == fq::comparison::like) {
        c.value = like_pattern(rng, sample.value_or("1"));
        return c;
    }
    bool integer = attr.type == fq::attribute_type::integer;
    if ((c.op == fq::comparison::equal || c.op == fq::comparison::not_equal) && (!sample || chance(rng, 8))) {
        c.value = std::string(fq::null_literal);
        return c;
    }
    if (!sample) {
        c.value = integer ? std::to_string(static_cast<std::int64_t>(pick(rng, 5000))) : "M";
        return c;
    }
    c.value = *sample;
    if (integer && chance(rng, 25)) {
        // Nudge so range predicates fall between stored values.
        c.value = std::to_string(std::stoll(*sample) + static_cast<std::int64_t>(pick(rng, 7)) - 3);
    }
    return c;
}

}  // namespace

fq::formal_query random_query(std::mt19937_64& rng, std::span<const fq::metadata_record> records,
                              const query_shape& shape) {
    fq::formal_query q;
    auto n = 1 + pick(rng, shape.max_constraints);
    for (std::size_t i = 0; i < n; ++i) {
        auto c = random_constraint(rng, records);
        c.join = i == 0 ? fq::conjunction::and_ : (chance(rng, 60) ? fq::conjunction::and_ : fq::conjunction::or_);
        q.constraints.push_back(std::move(c));
    }
    if (chance(rng, shape.order_percent)) {
        auto keys = 1 + pick(rng, shape.max_order_keys);
        for (std::size_t i = 0; i < keys; ++i) {
            q.order.push_back({std::string(pick_attribute(rng).name), chance(rng, 50)});
        }
    }
    if (chance(rng, shape.limit_percent)) {
        q.limit = static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(shape.max_limit) + 1));
        if (chance(rng, shape.offset_percent)) {
            q.offset = static_cast<std::int64_t>(pick(rng, static_cast<std::uint64_t>(shape.max_offset) + 1));
        }
    }
    q.no_data = chance(rng, 30);
    return q;
}

}  // namespace gridbox::harness
