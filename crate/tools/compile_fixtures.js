// Compiles the Solidity fixture sources with several solc-js releases and
// writes one JSON file per (contract, compiler, optimizer) combination.
//
//   npm i --prefix /tmp/solcjs solc@0.8.26 solc4@npm:solc@0.4.26 \
//     solc5@npm:solc@0.5.17 solc6@npm:solc@0.6.12 solc7@npm:solc@0.7.6
//   NODE_PATH=/tmp/solcjs/node_modules node tools/compile_fixtures.js
//
// Run tools/cfg_oracle.py afterwards to attach the reference data.

const fs = require("fs");
const path = require("path");

const root = path.join(__dirname, "..", "crates", "evmscope", "tests", "fixtures");
const out = path.join(root, "compiled");

// PUSH0 is avoided (evmVersion paris) because the reference CFG tool
// predates it.
const matrix = [
  { pkg: "solc", dir: "modern", evm: "paris", optimize: [true, false] },
  { pkg: "solc7", dir: "modern", optimize: [false], only: ["Token", "Vault", "Registry", "Forwarder"] },
  { pkg: "solc6", dir: "modern", optimize: [true], only: ["Token", "Batch", "Owned", "Auction"] },
  { pkg: "solc5", dir: "legacy", optimize: [true, false] },
  { pkg: "solc4", dir: "legacy", optimize: [false] },
];

function compile(solc, sources, evm, optimize) {
  const input = {
    language: "Solidity",
    sources,
    settings: {
      optimizer: { enabled: optimize, runs: 200 },
      outputSelection: { "*": { "*": ["abi", "evm.deployedBytecode.object"] } },
    },
  };
  if (evm) input.settings.evmVersion = evm;
  const raw = solc.compileStandardWrapper
    ? solc.compileStandardWrapper(JSON.stringify(input))
    : solc.compile(JSON.stringify(input));
  const result = JSON.parse(raw);
  const errors = (result.errors || []).filter((e) => e.severity === "error");
  if (errors.length) throw new Error(errors.map((e) => e.formattedMessage).join("\n"));
  return result.contracts;
}

fs.mkdirSync(out, { recursive: true });
for (const entry of matrix) {
  const solc = require(entry.pkg);
  const version = solc.version().split("+")[0];
  const dir = path.join(root, "contracts", entry.dir);
  for (const file of fs.readdirSync(dir).sort()) {
    const name = path.basename(file, ".sol");
    if (entry.only && !entry.only.includes(name)) continue;
    const sources = { [file]: { content: fs.readFileSync(path.join(dir, file), "utf8") } };
    for (const optimize of entry.optimize) {
      const contract = compile(solc, sources, entry.evm, optimize)[file][name];
      const id = `${name}-${version}-${optimize ? "opt" : "noopt"}`;
      const fixture = {
        id,
        source: `${entry.dir}/${file}`,
        compiler: version,
        optimize,
        runtime: contract.evm.deployedBytecode.object,
        abi: contract.abi,
      };
      fs.writeFileSync(path.join(out, `${id}.json`), JSON.stringify(fixture, null, 1) + "\n");
      console.log(id, contract.evm.deployedBytecode.object.length / 2, "bytes");
    }
  }
}
