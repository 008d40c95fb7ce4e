# Copyright 2026 The TDI-SPN Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the scikit-learn 8x8 digits as IDX files.

Usage: python3 tools/export_digits.py [out_dir]
"""

import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_idx(path, magic, array):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(array.astype(np.uint8).tobytes())


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    # Source intensities are 0..16.
    images = np.rint(digits.images * (255.0 / 16.0)).astype(np.uint8)
    write_idx(out / "digits-images.idx", 0x00000803, images)
    write_idx(out / "digits-labels.idx", 0x00000801, digits.target.astype(np.uint8))
    print(f"wrote {len(images)} images to {out}")


if __name__ == "__main__":
    main()
