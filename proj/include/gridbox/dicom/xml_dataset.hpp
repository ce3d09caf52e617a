/**
 * @file xml_dataset.hpp
 * @brief Generic XML rendering of a DICOM dataset
 *
 * Layout:
 * @code
 * <dicom>
 *   <element tag="00100020" vr="LO" keyword="PatientID">P123</element>
 *   <element tag="00540220" vr="SQ" keyword="ViewCodeSequence">
 *     <item>
 *       <element tag="00080100" vr="SH" keyword="CodeValue">R-10242</element>
 *     </item>
 *   </element>
 *   <element tag="7FE00010" vr="OW" keyword="PixelData" length="512"/>
 * </dicom>
 * @endcode
 *
 * Text values are written as-is (backslash keeps separating multiple
 * values); binary integers as decimal joined by backslash; OB/OW/UN as
 * uppercase hex. Bytes outside printable ASCII are mapped to code points
 * (0x80-0xFF to U+0080-U+00FF, control bytes to U+E000+byte) so the document
 * stays valid UTF-8 and the mapping is reversible. Pixel data carries only
 * its length.
 */

#ifndef GRIDBOX_DICOM_XML_DATASET_HPP
#define GRIDBOX_DICOM_XML_DATASET_HPP

#include "gridbox/dicom/dataset.hpp"

#include <string>

namespace gridbox::dicom {

struct xml_dataset {
    std::string document;

    bool operator==(const xml_dataset&) const = default;
};

[[nodiscard]] xml_dataset dataset_to_xml(const dataset& ds);

/// Pixel data comes back zero-filled at the recorded length.
[[nodiscard]] dataset xml_to_dataset(const xml_dataset& xml);

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_XML_DATASET_HPP
