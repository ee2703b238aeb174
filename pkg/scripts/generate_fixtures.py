#!/usr/bin/env python3
"""Regenerate the committed fixture images from the synthetic scene module.

The scenes are fully deterministic, so running this script reproduces the
files in fixtures/ byte for byte.
"""

from pathlib import Path

from opguide.image_io import save_image
from opguide.synthetic import depth_pair, flash_pair


def main() -> None:
    root = Path(__file__).resolve().parent.parent / "fixtures"

    flash_dir = root / "flash_noflash"
    flash_dir.mkdir(parents=True, exist_ok=True)
    truth, guide = flash_pair()
    save_image(truth, flash_dir / "truth.ppm")
    save_image(guide, flash_dir / "guide.ppm")

    depth_dir = root / "depth_rgb"
    depth_dir.mkdir(parents=True, exist_ok=True)
    scene = depth_pair()
    save_image(scene.truth, depth_dir / "truth.pgm", bit_depth=16)
    save_image(scene.guide, depth_dir / "guide.ppm")

    print(f"fixtures written under {root}")


if __name__ == "__main__":
    main()
