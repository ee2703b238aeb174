#!/usr/bin/env python3
"""Stub downloader for the public evaluation datasets.

The experiments in this repo run on the committed synthetic fixtures.  To
reproduce results on the real flash/no-flash pairs and the Middlebury stereo
depth maps, fetch them from the sources below into datasets/ and point the
experiment scripts at them with --truth/--guide.

This script intentionally performs no network access in automated runs.
"""

import sys
from pathlib import Path

SOURCES = {
    "flash_noflash": "https://hhoppe.com/flash.pdf supplementary material "
    "(Petschnigg et al., digital photography with flash and no-flash image pairs)",
    "middlebury_art": "https://vision.middlebury.edu/stereo/data/scenes2005/ "
    "(Art scene: disparity map plus color view)",
}


def main() -> int:
    target = Path(__file__).resolve().parent.parent / "datasets"
    print("No automatic download is performed.  Place datasets under:")
    print(f"  {target}/")
    for name, source in SOURCES.items():
        print(f"- {name}: {source}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
