"""Attach reference data to the compiled fixtures.

For every fixture JSON this adds an "oracle" object:

  selectors     first 4 bytes of Keccak-256 over each ABI function signature
                (pycryptodome), as 0x-prefixed hex, sorted
  has_fallback  the ABI declares a fallback function (receive does not count)
  blocks        basic-block start offsets found by evm-cfg-builder
  edges         [src, dst] block edges found by evm-cfg-builder

    pip install evm-cfg-builder pycryptodome
    python3 tools/cfg_oracle.py
"""

import json
import pathlib
import sys

from Crypto.Hash import keccak
from evm_cfg_builder.cfg import CFG

ROOT = pathlib.Path(__file__).resolve().parent.parent
COMPILED = ROOT / "crates" / "evmscope" / "tests" / "fixtures" / "compiled"


def canonical(param):
    ty = param["type"]
    if ty.startswith("tuple"):
        inner = ",".join(canonical(c) for c in param["components"])
        return "(" + inner + ")" + ty[len("tuple"):]
    return ty


def selector(item):
    sig = "%s(%s)" % (item["name"], ",".join(canonical(p) for p in item["inputs"]))
    digest = keccak.new(digest_bits=256, data=sig.encode()).digest()
    return "0x" + digest[:4].hex()


def oracle(fixture):
    abi = fixture["abi"]
    cfg = CFG(fixture["runtime"])
    blocks = sorted(bb.start.pc for bb in cfg.basic_blocks)
    edges = sorted(
        [bb.start.pc, out.start.pc]
        for bb in cfg.basic_blocks
        for out in bb.all_outgoing_basic_blocks
    )
    return {
        "selectors": sorted(selector(i) for i in abi if i.get("type", "function") == "function"),
        "has_fallback": any(i.get("type") == "fallback" for i in abi),
        "blocks": blocks,
        "edges": edges,
    }


def main():
    paths = sorted(COMPILED.glob("*.json")) if len(sys.argv) < 2 else map(pathlib.Path, sys.argv[1:])
    for path in paths:
        fixture = json.loads(path.read_text())
        fixture["oracle"] = oracle(fixture)
        path.write_text(json.dumps(fixture, indent=1) + "\n")
        print(path.name, len(fixture["oracle"]["edges"]), "edges")


if __name__ == "__main__":
    main()
