#!/usr/bin/env node
import { parseArgs } from 'node:util'
import { extract } from './extract.js'
import { verifyDataset } from './verify.js'

const USAGE = `usage:
  sceneret-extract extract --images DIR --encoder {cnn-penultimate,3d-latent,stub} --out DIR
                           [--dim N] [--seed N] [--model-dir DIR] [--latents DIR]
  sceneret-extract verify DIR

Exports image embeddings into the engine's dataset format (manifest.json +
embeddings.bin), or checks an existing dataset directory.`

async function runExtract(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      images: { type: 'string' },
      encoder: { type: 'string', default: 'stub' },
      out: { type: 'string' },
      dim: { type: 'string' },
      seed: { type: 'string' },
      'model-dir': { type: 'string' },
      latents: { type: 'string' },
    },
  })
  if (!values.images || !values.out) {
    console.error('extract requires --images and --out')
    console.error(USAGE)
    return 2
  }
  const manifest = await extract({
    imagesDir: values.images,
    encoder: values.encoder as 'cnn-penultimate' | '3d-latent' | 'stub',
    outDir: values.out,
    options: {
      dim: values.dim ? Number(values.dim) : undefined,
      seed: values.seed ? Number(values.seed) : undefined,
      modelDir: values['model-dir'],
      latentsDir: values.latents,
    },
  })
  console.log(
    JSON.stringify({
      out: values.out,
      records: manifest.record_count,
      dim: manifest.dim,
      scenes: manifest.scenes.length,
    }),
  )
  return 0
}

function runVerify(argv: string[]): number {
  const dir = argv[0]
  if (!dir) {
    console.error('verify requires a dataset directory')
    console.error(USAGE)
    return 2
  }
  const report = verifyDataset(dir)
  console.log(JSON.stringify(report))
  for (const issue of report.issues) console.error(`issue: ${issue}`)
  return report.ok ? 0 : 1
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2)
  try {
    if (command === 'extract') return await runExtract(rest)
    if (command === 'verify') return runVerify(rest)
    console.error(USAGE)
    return 2
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`)
    return 1
  }
}

main().then((code) => process.exit(code))
