#!/usr/bin/env node
/** Command line front end: render plots from simulation run manifests. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { runRender } from "./render.js";
import { PLOT_KINDS, PlotKind } from "./types.js";

export function main(argv: string[]): number {
  let parsed: { manifest: string; kind: string; out: string } | null = null;
  let usageError: string | null = null;
  yargs(argv)
    .scriptName("naimstab-plots")
    .usage("$0 render --manifest <file> --kind <kind> --out <image>")
    .command(
      "render",
      "render one plot kind from a run manifest",
      (y) =>
        y
          .option("manifest", { type: "string", demandOption: true, describe: "run manifest JSON" })
          .option("kind", {
            type: "string",
            choices: PLOT_KINDS as unknown as string[],
            demandOption: true,
            describe: "plot kind",
          })
          .option("out", { type: "string", demandOption: true, describe: "output SVG path" }),
      (args) => {
        parsed = { manifest: args.manifest, kind: args.kind, out: args.out };
      },
    )
    .demandCommand(1, "specify the render command")
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      usageError = msg ?? (err ? err.message : "invalid arguments");
    })
    .parseSync();

  if (usageError !== null) {
    console.error(`usage error: ${usageError}`);
    return 2;
  }
  if (parsed === null) {
    console.error("usage error: no command given");
    return 2;
  }
  const req = parsed as { manifest: string; kind: string; out: string };
  try {
    const summary = runRender({
      manifestPath: req.manifest,
      kind: req.kind as PlotKind,
      out: req.out,
    });
    console.log(summary);
    return 0;
  } catch (err) {
    console.error(`render error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

process.exit(main(hideBin(process.argv)));
