"""Produces golden DICOM byte streams with pydicom (an independent toolkit).

Run once; the outputs are checked in under tests/golden/ and the C++ tests
compare against them. Not part of the build.
"""
import pathlib

from pydicom.dataset import Dataset, FileMetaDataset
from pydicom.filebase import DicomBytesIO
from pydicom.filewriter import write_dataset, write_file_meta_info
from pydicom.sequence import Sequence
from pydicom.uid import UID

OUT = pathlib.Path(__file__).resolve().parent.parent / "golden"
IMPL_UID = "2.25.193837441728361937284615592011846203117"
IMPL_VERSION = "GRIDBOX_1_0"
EXPLICIT = "1.2.840.10008.1.2.1"
IMPLICIT = "1.2.840.10008.1.2"


def meta(sop_class: str, sop_instance: str, ts: str) -> FileMetaDataset:
    m = FileMetaDataset()
    m.FileMetaInformationVersion = b"\x00\x01"
    m.MediaStorageSOPClassUID = UID(sop_class)
    m.MediaStorageSOPInstanceUID = UID(sop_instance)
    m.TransferSyntaxUID = UID(ts)
    m.ImplementationClassUID = UID(IMPL_UID)
    m.ImplementationVersionName = IMPL_VERSION
    return m


def write_file(ds: Dataset, ts: str) -> bytes:
    m = meta(getattr(ds, "SOPClassUID", ""), getattr(ds, "SOPInstanceUID", ""), ts)
    probe = DicomBytesIO()
    probe.is_little_endian, probe.is_implicit_VR = True, False
    write_file_meta_info(probe, m, enforce_standard=False)
    m.FileMetaInformationGroupLength = len(probe.getvalue())
    fp = DicomBytesIO()
    fp.is_little_endian, fp.is_implicit_VR = True, False
    write_file_meta_info(fp, m, enforce_standard=False)
    return b"\x00" * 128 + b"DICM" + fp.getvalue() + raw_dataset(ds, implicit=(ts == IMPLICIT))


def raw_dataset(ds: Dataset, implicit: bool) -> bytes:
    fp = DicomBytesIO()
    fp.is_little_endian, fp.is_implicit_VR = True, implicit
    write_dataset(fp, ds)
    return fp.getvalue()


def emit(name: str, data: bytes) -> None:
    (OUT / name).write_text(data.hex().upper() + "\n")


def main() -> None:
    OUT.mkdir(exist_ok=True)

    # Single PatientID element, explicit VR LE.
    ds = Dataset()
    ds.PatientID = "P123"
    emit("patient_id_explicit.hex", write_file(ds, EXPLICIT))

    # A small mammography-like dataset, both encodings.
    def sample() -> Dataset:
        s = Dataset()
        s.SOPClassUID = "1.2.840.10008.5.1.4.1.1.1.2"
        s.SOPInstanceUID = "2.25.1001.1"
        s.StudyDate = "20030115"
        s.Modality = "MG"
        s.PatientName = "DOE^JANE"
        s.PatientID = "HOSP0042"
        s.PatientBirthDate = "19550612"
        s.PatientSex = "F"
        s.StudyInstanceUID = "2.25.1001"
        s.SeriesInstanceUID = "2.25.1001.7"
        s.ImageLaterality = "L"
        s.Rows = 1024
        s.Columns = 800
        s.PixelSpacing = ["0.1", "0.1"]
        s.BitsAllocated = 16
        s.PixelData = bytes(range(16))
        s["PixelData"].VR = "OW"
        return s

    emit("sample_explicit.hex", write_file(sample(), EXPLICIT))
    emit("sample_implicit.hex", write_file(sample(), IMPLICIT))

    # Undefined-length sequence with one undefined-length item (raw dataset).
    item = Dataset()
    item.CodeValue = "R-10242"
    item.CodingSchemeDesignator = "SRT"
    item.CodeMeaning = "cranio-caudal"
    seq_ds = Dataset()
    seq_ds.PatientID = "P1"
    seq_ds.ViewCodeSequence = Sequence([item])
    seq_ds["ViewCodeSequence"].is_undefined_length = True
    item.is_undefined_length_sequence_item = True
    emit("undefined_sq_explicit.hex", raw_dataset(seq_ds, implicit=False))

    # Same sequence with defined lengths.
    item2 = Dataset()
    item2.CodeValue = "R-10242"
    item2.CodingSchemeDesignator = "SRT"
    item2.CodeMeaning = "cranio-caudal"
    seq_ds2 = Dataset()
    seq_ds2.PatientID = "P1"
    seq_ds2.ViewCodeSequence = Sequence([item2])
    emit("defined_sq_explicit.hex", raw_dataset(seq_ds2, implicit=False))


if __name__ == "__main__":
    main()
