#!/usr/bin/env python3
"""Fetch and convert the benchmark datasets.

Downloads (or takes via --archive) the community-maintained archive of
the standard UCI regression splits, converts each set to a headered CSV
under data/<name>/<name>.csv, and writes data/manifest.json with sha256
checksums.  Conversion is deterministic, so the checksums below pin the
exact bytes every environment should produce.

The Year Prediction MSD set is not part of the archive (515k rows); see
the README for how to place it manually as data/year/year.csv.
"""

import argparse
import hashlib
import io
import json
import sys
import tarfile
import tempfile
import urllib.request
from pathlib import Path

import numpy as np

ARCHIVE_URL = ("https://github.com/yaringal/DropoutUncertaintyExps/archive/"
               "refs/heads/master.tar.gz")

# archive directory -> short dataset key
SOURCES = {
    "bostonHousing": "boston",
    "concrete": "concrete",
    "energy": "energy",
    "kin8nm": "kin8nm",
    "naval-propulsion-plant": "naval",
    "power-plant": "power",
    "protein-tertiary-structure": "protein",
    "wine-quality-red": "wine",
    "yacht": "yacht",
}

EXPECTED_SHA256 = {
    "boston": "6f064795923a711bcb5bfb3b4eda51d96bb69f4051ef8a9cd722c9e944cde7cb",
    "concrete": "79105ee38cdfaf3522e908b0cd7f70e1e33b169a76017c8018b9cec2a08e459b",
    "energy": "2418188ed246e288ab69a1d1171a0bff19df9fdd2716d08f94495ce60dd33f06",
    "kin8nm": "eea24afcf81b7124365b84dd19d8b66e6ecc750de7ef9e63f668af73e328feb2",
    "naval": "eee119e3e6a611a1b2eedc2cda2f890a501bd51a609d0624efbc151ec4b49082",
    "power": "00dd6d9f3278cf14629715c5fda9c85a973df6ae4da847a546f821abbc35ad47",
    "protein": "57a485270e16aeaef96e3c01a0e26b0c7d82e24c4f2e152e7bb2369d731043fc",
    "wine": "70cb22b07bcc97cb456d983bc56fdcf412b5bc482c02e5c9f5dcf64a50077029",
    "yacht": "7e7ff6493c71e8fd9bdf3d8a67f32c7fd8b4037767435b60d5dc459e8418cc45",
}


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def convert(archive_root: Path, out_root: Path) -> dict:
    """data.txt + index files -> headered CSV; returns manifest entries."""
    manifest = {}
    for src_name, key in sorted(SOURCES.items()):
        src = archive_root / "UCI_Datasets" / src_name / "data"
        matrix = np.loadtxt(src / "data.txt")
        feat_idx = np.loadtxt(src / "index_features.txt", dtype=int, ndmin=1)
        targ_idx = np.loadtxt(src / "index_target.txt", dtype=int, ndmin=1)
        features = matrix[:, feat_idx]
        targets = matrix[:, targ_idx]

        out_dir = out_root / key
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / f"{key}.csv"
        header = ([f"x{i + 1}" for i in range(features.shape[1])]
                  + (["y"] if targets.shape[1] == 1
                     else [f"y{i + 1}" for i in range(targets.shape[1])]))
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        np.savetxt(buf, np.hstack([features, targets]),
                   delimiter=",", fmt="%.17g")
        out_path.write_text(buf.getvalue())

        digest = sha256_file(out_path)
        manifest[key] = {"file": f"{key}/{key}.csv",
                         "rows": int(matrix.shape[0]),
                         "features": int(features.shape[1]),
                         "targets": int(targets.shape[1]),
                         "sha256": digest}
        expected = EXPECTED_SHA256.get(key)
        status = "ok" if expected == digest else (
            "UNPINNED" if expected is None else "MISMATCH")
        print(f"{key:10s} {matrix.shape[0]:6d} rows  sha256 {digest[:16]}...  {status}")
        if status == "MISMATCH":
            raise SystemExit(f"checksum mismatch for {key}: expected "
                             f"{expected}, got {digest}")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--archive", default=None,
                        help="local .tar.gz of the dataset archive "
                             "(skips the download)")
    parser.add_argument("--url", default=ARCHIVE_URL,
                        help="archive URL when --archive is not given")
    parser.add_argument("--out", default=None,
                        help="output data directory (default: data/ next to "
                             "the repository root)")
    parser.add_argument("--print-checksums", action="store_true",
                        help="emit the EXPECTED_SHA256 dict for pinning")
    args = parser.parse_args(argv)

    out_root = Path(args.out) if args.out else (
        Path(__file__).resolve().parent.parent / "data")
    out_root.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        if args.archive:
            archive_path = Path(args.archive)
        else:
            archive_path = Path(tmp) / "archive.tar.gz"
            print(f"downloading {args.url} ...")
            urllib.request.urlretrieve(args.url, archive_path)
        with tarfile.open(archive_path, "r:gz") as tar:
            tar.extractall(tmp)
        roots = [p for p in Path(tmp).iterdir()
                 if (p / "UCI_Datasets").is_dir()]
        if not roots:
            raise SystemExit("archive does not contain a UCI_Datasets directory")
        manifest = convert(roots[0], out_root)

    (out_root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {out_root / 'manifest.json'}")
    if args.print_checksums:
        print("EXPECTED_SHA256 = {")
        for key, entry in sorted(manifest.items()):
            print(f'    "{key}": "{entry["sha256"]}",')
        print("}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
