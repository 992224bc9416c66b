#!/usr/bin/env node
import * as fs from "fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { MissingColumn, TooFewRows } from "./csv.js";
import { renderFigure, Kind, XAxis } from "./plot.js";

export function main(argv: string[]): number {
  const args = yargs(argv)
    .usage("report <csv>... --kind {conv,eff} --x {h,p,ndofs} --out <file>")
    .option("kind", { choices: ["conv", "eff"] as const, demandOption: true })
    .option("x", { choices: ["h", "p", "ndofs"] as const, demandOption: true })
    .option("out", { type: "string", demandOption: true })
    .demandCommand(1, "at least one CSV file is required")
    .exitProcess(false)
    .parseSync();

  try {
    const svg = renderFigure({
      inputs: args._.map(String),
      kind: args.kind as Kind,
      x: args.x as XAxis,
      out: args.out,
    });
    fs.writeFileSync(args.out, svg);
    return 0;
  } catch (err) {
    if (err instanceof MissingColumn || err instanceof TooFewRows) {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const isMain = process.argv[1] && process.argv[1].endsWith("cli.js");
if (isMain) {
  process.exit(main(hideBin(process.argv)));
}
