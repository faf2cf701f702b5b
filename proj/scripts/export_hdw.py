#!/usr/bin/env python3
# Copyright 2026 The dhmc Authors
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

"""Write an .hdw weights container.

From trained parameters saved as .npz (keys "<layer>.weight", "<layer>.bias"),
for instance with pycaffe:

    np.savez("net.npz", **{f"{n}.weight": p[0].data for n, p in net.params.items()},
                        **{f"{n}.bias": p[1].data for n, p in net.params.items()})
    export_hdw.py net.npz -o net.hdw

Or synthetic Laplacian weights for the conv layers of a topology:

    export_hdw.py --synthetic models/lenet5.prototxt --seed 1 -o lenet5.hdw
"""

import argparse
import re
import struct
import sys

import numpy as np


def write_hdw(path, tensors):
    header = ["HDW1"]
    payload = bytearray()
    for layer, role, array in tensors:
        array = np.ascontiguousarray(array, dtype="<f4")
        if not np.all(np.isfinite(array)):
            sys.exit(f"non-finite value in {layer}.{role}")
        dims = ",".join(str(d) for d in array.shape)
        header.append(f"tensor {layer} {role} {dims} {len(payload)}")
        payload += array.tobytes()
    header.append("end")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode())
        f.write(payload)


def from_npz(path):
    data = np.load(path)
    layers = []
    for key in data.files:
        name, _, role = key.rpartition(".")
        if role not in ("weight", "bias") or not name:
            sys.exit(f"unexpected key '{key}', want <layer>.weight or <layer>.bias")
        if name not in layers:
            layers.append(name)
    out = []
    for name in layers:
        for role in ("weight", "bias"):
            if f"{name}.{role}" in data.files:
                out.append((name, role, data[f"{name}.{role}"]))
    return out


def conv_shapes(prototxt):
    # Just enough of the grammar to walk conv layers in order: channel
    # counts come from the input shape and the previous conv.
    text = open(prototxt).read()
    dims = [int(d) for d in re.findall(r"\bdim\s*:\s*(\d+)", text)[:4]]
    if not dims:
        dims = [int(d) for d in re.findall(r"\binput_dim\s*:\s*(\d+)", text)[:4]]
    channels = dims[-3]
    shapes = []
    for block in re.split(r"\blayer\s*\{", text)[1:]:
        name = re.search(r'\bname\s*:\s*"([^"]+)"', block).group(1)
        kind = re.search(r'\btype\s*:\s*"([^"]+)"', block).group(1)
        if kind == "InnerProduct":
            sys.exit("--synthetic handles conv layers only")
        if kind != "Convolution":
            continue
        n = int(re.search(r"\bnum_output\s*:\s*(\d+)", block).group(1))
        k = int(re.search(r"\bkernel_size\s*:\s*(\d+)", block).group(1))
        bias = not re.search(r"\bbias_term\s*:\s*false", block)
        shapes.append((name, (n, channels, k, k), bias))
        channels = n
    return shapes


def synthetic(prototxt, seed, scale):
    rng = np.random.default_rng(seed)
    out = []
    for name, shape, bias in conv_shapes(prototxt):
        fan_in = shape[1] * shape[2] * shape[3]
        b = scale / np.sqrt(fan_in)
        out.append((name, "weight", rng.laplace(0.0, b, size=shape)))
        if bias:
            out.append((name, "bias", rng.laplace(0.0, b, size=shape[0])))
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("npz", nargs="?", help="parameters saved with numpy.savez")
    p.add_argument("--synthetic", metavar="PROTOTXT", help="generate Laplacian weights for this topology")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--scale", type=float, default=0.5, help="Laplace scale times sqrt(fan-in)")
    p.add_argument("-o", "--output", required=True)
    args = p.parse_args()
    if bool(args.npz) == bool(args.synthetic):
        p.error("give either an .npz file or --synthetic")
    tensors = synthetic(args.synthetic, args.seed, args.scale) if args.synthetic else from_npz(args.npz)
    write_hdw(args.output, tensors)


if __name__ == "__main__":
    main()
