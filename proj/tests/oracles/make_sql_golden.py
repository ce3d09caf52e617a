#!/usr/bin/env python3
"""Writes the golden SQL strings for the documented translation examples.

Each string is assembled here from the documented statement grammar, then
checked by running it against an in-memory SQLite copy of the schema and
comparing the selected LFNs with a plain Python filter over the same rows.
The files are only written when every check agrees.
"""

import os
import sqlite3
import sys

FROM = (" FROM patient"
        " JOIN study ON study.patient_pseudo_id = patient.patient_pseudo_id"
        " JOIN series ON series.study_uid = study.study_uid"
        " JOIN image ON image.series_uid = series.series_uid")

GOLDEN = {
    "translate_sex.sql":
        "SELECT image.lfn" + FROM + " WHERE (patient.sex = 'F')",
    "translate_compound.sql":
        "SELECT image.lfn" + FROM +
        " WHERE ((image.rows > 1000 AND patient.sex = 'F') OR (study.study_date < '2003-01-01'))",
    "translate_quote.sql":
        "SELECT image.lfn" + FROM + " WHERE (study.description = 'O''Hara')",
}

# lfn, pseudo, sex, rows, study_date, description
ROWS = [
    ("/mg/a/p1/s1/i1.dcm", "p1", "F", 2048, "2004-03-01", "O'Hara"),
    ("/mg/a/p1/s1/i2.dcm", "p1", "F", 800, "2004-03-01", "O'Hara"),
    ("/mg/a/p2/s2/i3.dcm", "p2", "M", 4096, "2001-07-19", "screening"),
    ("/mg/a/p3/s3/i4.dcm", "p3", "F", 512, "2002-12-31", "OHara"),
    ("/mg/a/p4/s4/i5.dcm", "p4", None, 3000, None, None),
    ("/mg/a/p5/s5/i6.dcm", "p5", "F", 1000, "2003-01-01", "o'hara"),
]

ORACLES = {
    "translate_sex.sql": lambda r: r[2] == "F",
    "translate_compound.sql": lambda r: (r[3] > 1000 and r[2] == "F")
    or (r[4] is not None and r[4] < "2003-01-01"),
    "translate_quote.sql": lambda r: r[5] == "O'Hara",
}


def build_db():
    db = sqlite3.connect(":memory:")
    db.executescript("""
        CREATE TABLE patient (patient_pseudo_id TEXT PRIMARY KEY, sex TEXT, birth_year INTEGER);
        CREATE TABLE study (study_uid TEXT PRIMARY KEY, patient_pseudo_id TEXT, study_date TEXT, description TEXT);
        CREATE TABLE series (series_uid TEXT PRIMARY KEY, study_uid TEXT, modality TEXT, laterality TEXT, view_code TEXT);
        CREATE TABLE image (sop_uid TEXT PRIMARY KEY, series_uid TEXT, lfn TEXT, rows INTEGER, columns INTEGER,
                            bits_allocated INTEGER, pixel_spacing TEXT);
    """)
    for n, (lfn, pseudo, sex, rows, date, desc) in enumerate(ROWS):
        db.execute("INSERT OR IGNORE INTO patient VALUES (?, ?, NULL)", (pseudo, sex))
        db.execute("INSERT INTO study VALUES (?, ?, ?, ?)", (f"st{n}", pseudo, date, desc))
        db.execute("INSERT INTO series VALUES (?, ?, 'MG', 'L', 'CC')", (f"se{n}", f"st{n}"))
        db.execute("INSERT INTO image VALUES (?, ?, ?, ?, 1024, 16, NULL)", (f"i{n}", f"se{n}", lfn, rows))
    return db


def main(out_dir):
    db = build_db()
    for name, sql in GOLDEN.items():
        got = sorted(r[0] for r in db.execute(sql))
        want = sorted(r[0] for r in ROWS if ORACLES[name](r))
        if got != want:
            sys.exit(f"{name}: SQLite returned {got}, brute force {want}")
        if not want:
            sys.exit(f"{name}: example selects nothing, not a useful check")
    os.makedirs(out_dir, exist_ok=True)
    for name, sql in GOLDEN.items():
        with open(os.path.join(out_dir, name), "w") as f:
            f.write(sql)
    print(f"wrote {len(GOLDEN)} golden statements")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "golden"))
