#!/usr/bin/env python3
# Copyright 2026 The leukmil Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Export torchvision backbone weights to leukmil tensor archives.

    export_torchvision_weights.py --backbone resnet50 --out-dir ~/.cache/leukmil

writes `resnet50.lmarc`, which FeatureExtractor loads when LEUKMIL_WEIGHTS_DIR
points at the directory. `--random` skips the download and exports randomly
initialised weights (with perturbed normalisation statistics); `--reference`
also writes `<name>.ref.rgb` / `<name>.ref.json`, a fixed input image and the
torchvision features for it, used by the backbone cross-check test.
"""

import argparse
import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch
import torchvision

SPECS = {
    "alexnet": (224, (0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
    "vgg16": (224, (0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
    "resnet50": (224, (0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
    "inception_v3": (299, (0.5, 0.5, 0.5), (0.5, 0.5, 0.5)),
    "vit_b16": (224, (0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
}


def build(name, random):
    tv = torchvision.models
    if name == "alexnet":
        m = tv.alexnet(weights=None if random else "DEFAULT")
        m.classifier = m.classifier[:-1]
    elif name == "vgg16":
        m = tv.vgg16(weights=None if random else "DEFAULT")
        m.classifier = m.classifier[:-1]
    elif name == "resnet50":
        m = tv.resnet50(weights=None if random else "DEFAULT")
        m.fc = torch.nn.Identity()
    elif name == "inception_v3":
        m = tv.inception_v3(weights=None if random else "DEFAULT", aux_logits=True, init_weights=random)
        # Normalisation is applied by the caller with mean = std = 0.5.
        m.transform_input = False
        m.fc = torch.nn.Identity()
    elif name == "vit_b16":
        m = tv.vit_b_16(weights=None if random else "DEFAULT")
        m.heads = torch.nn.Identity()
    else:
        raise SystemExit(f"unknown backbone {name}")
    if random:
        g = torch.Generator().manual_seed(0)
        for mod in m.modules():
            if isinstance(mod, (torch.nn.BatchNorm2d, torch.nn.LayerNorm)):
                with torch.no_grad():
                    mod.weight.copy_(0.5 + torch.rand(mod.weight.shape, generator=g))
                    mod.bias.copy_(0.1 * torch.randn(mod.bias.shape, generator=g))
                    if isinstance(mod, torch.nn.BatchNorm2d):
                        mod.running_mean.copy_(0.1 * torch.randn(mod.running_mean.shape, generator=g))
                        mod.running_var.copy_(0.5 + torch.rand(mod.running_var.shape, generator=g))
    return m.eval()


def write_archive(path, state, meta):
    tensors, blobs, offset = [], [], 0
    for name, value in state.items():
        if not value.is_floating_point():
            continue
        arr = value.detach().cpu().numpy().astype("<f4", copy=False)
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        blobs.append(arr.tobytes())
    payload = b"".join(blobs)
    header = json.dumps(
        {"meta": meta, "payload_sha256": hashlib.sha256(payload).hexdigest(), "tensors": tensors},
        separators=(",", ":"),
    ).encode()
    with open(path, "wb") as f:
        f.write(b"LMILARC1")
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(payload)


def reference_image(size):
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.stack(
        [
            127 + 100 * np.sin(x / 9.0) * np.cos(y / 13.0),
            127 + 90 * np.cos((x + y) / 17.0),
            127 + 80 * np.sin((x - 2 * y) / 11.0),
        ],
        axis=-1,
    )
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--backbone", required=True, choices=sorted(SPECS))
    ap.add_argument("--out-dir", required=True, type=Path)
    ap.add_argument("--random", action="store_true")
    ap.add_argument("--reference", action="store_true")
    args = ap.parse_args()

    torch.manual_seed(0)
    model = build(args.backbone, args.random)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_archive(
        args.out_dir / f"{args.backbone}.lmarc",
        model.state_dict(),
        {"backbone": args.backbone, "source": "torchvision " + torchvision.__version__, "random": args.random},
    )
    if args.reference:
        size, mean, std = SPECS[args.backbone]
        img = reference_image(size)
        (args.out_dir / f"{args.backbone}.ref.rgb").write_bytes(img.tobytes())
        x = torch.from_numpy(img.astype(np.float32) / 255.0).permute(2, 0, 1)
        x = (x - torch.tensor(mean)[:, None, None]) / torch.tensor(std)[:, None, None]
        with torch.no_grad():
            feats = model(x[None])
        (args.out_dir / f"{args.backbone}.ref.json").write_text(
            json.dumps({"size": size, "features": feats[0].double().tolist()})
        )


if __name__ == "__main__":
    main()
