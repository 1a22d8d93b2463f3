#!/usr/bin/env python3
# Copyright (c) the BRM Toolkit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates corpus/ from the sample images bundled with scikit-image."""

import pathlib
import sys

import numpy as np
import skimage.data

# Images decoded from JPEG sources (rocket, coins, hubble_deep_field) are left
# out: their DCT coefficients sit on the JPEG quantization lattice, which makes
# rate and distortion non-monotone under re-quantization.
IMAGES = [
    "astronaut", "coffee", "chelsea", "immunohistochemistry",
    "grass", "gravel", "clock",
]


def write_netpbm(path, img):
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape[:2]
    magic = b"P5" if img.ndim == 2 else b"P6"
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "corpus")
    out.mkdir(parents=True, exist_ok=True)
    for name in IMAGES:
        img = getattr(skimage.data, name)()
        ext = ".pgm" if img.ndim == 2 else ".ppm"
        write_netpbm(out / (name + ext), img)
        print(name, img.shape)


if __name__ == "__main__":
    main()
