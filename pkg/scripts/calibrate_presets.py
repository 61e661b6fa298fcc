#!/usr/bin/env python3
"""Regenerate the shipped device presets.

REF-CANTILEVER: beam thickness solved so the centre stiffness is 10 N/m.
Its fracture strength is set so a centre-placed sweep breaks only after the
flank contact has moved onto the beam.

REF-STIFF: same footprint, thickness solved for 60 N/m at the centre, and
fracture strength solved so a centre-placed sweep breaks at 4.5 mN.

Usage: python scripts/calibrate_presets.py [--check]
"""

import argparse
import json
import sys
from pathlib import Path

from vprobe.contact import PlacementSpec
from vprobe.mechanics import device_to_dict, linear_stiffness_at
from vprobe.presets import (
    DEFAULT_STYLUS,
    calibrate_fracture_strength,
    calibrate_thickness,
    reference_geometry,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "vprobe" / "presets"

REF_STIFFNESS = 10.0
STIFF_STIFFNESS = 60.0
STIFF_FRACTURE_FORCE = 4.5e-3
REF_FRACTURE_STRENGTH = 4.0e9


def build():
    template = reference_geometry(10e-6)
    h_ref = calibrate_thickness(template, REF_STIFFNESS)
    ref = reference_geometry(h_ref, REF_FRACTURE_STRENGTH, "REF-CANTILEVER")

    h_stiff = calibrate_thickness(template, STIFF_STIFFNESS)
    stiff = reference_geometry(h_stiff, name="REF-STIFF")
    sigma = calibrate_fracture_strength(stiff, DEFAULT_STYLUS, PlacementSpec.at_cosym(stiff), STIFF_FRACTURE_FORCE)
    stiff = reference_geometry(h_stiff, sigma, "REF-STIFF")

    docs = {}
    for dev, k in ((ref, REF_STIFFNESS), (stiff, STIFF_STIFFNESS)):
        doc = device_to_dict(dev)
        doc["nominal_center_stiffness"] = k
        docs[dev.name] = doc
        print(f"{dev.name}: h = {dev.beam.thickness:.9e} m, k(centre) = {linear_stiffness_at(dev, dev.cosym):.12f} N/m, "
              f"fracture_strength = {dev.material.fracture_strength:.6e} Pa")
    return docs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="compare against the shipped files instead of writing")
    args = ap.parse_args(argv)
    status = 0
    for name, doc in build().items():
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        path = OUT / f"{name}.json"
        if args.check:
            if not path.is_file() or path.read_text(encoding="utf-8") != text:
                print(f"{path} is out of date")
                status = 1
        else:
            path.write_text(text, encoding="utf-8")
            print(f"wrote {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
