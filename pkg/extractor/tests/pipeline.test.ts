import { execFileSync } from 'node:child_process'
import { readFileSync, statSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'
import { beforeAll, describe, expect, it } from 'vitest'
import { readManifest } from '../src/dataset'
import { extract } from '../src/extract'
import { verifyDataset } from '../src/verify'
import { makeImageTree, tempDir } from './helpers'

/**
 * Format-contract tests against the retrieval engine: stub extractor output
 * must ingest cleanly and drive a full evaluation run, and the binary layout
 * must survive a rewrite by the engine byte for byte.
 */

const PYTHON = process.env.SCENERET_PYTHON ?? 'python3'

function engine(args: string[]): { stdout: string } {
  const stdout = execFileSync(PYTHON, ['-m', 'sceneret', ...args], { encoding: 'utf-8' })
  return { stdout }
}

function engineAvailable(): boolean {
  try {
    execFileSync(PYTHON, ['-c', 'import sceneret'], { encoding: 'utf-8' })
    return true
  } catch {
    return false
  }
}

describe('pipeline contract with the retrieval engine', () => {
  let imagesDir: string
  let datasetDir: string

  beforeAll(async () => {
    imagesDir = tempDir('images')
    datasetDir = tempDir('dataset')
    makeImageTree(imagesDir, 4, 5)
    await extract({ imagesDir, encoder: 'stub', outDir: datasetDir, options: { dim: 16 } })
  })

  it('stub output satisfies its own verifier', () => {
    const report = verifyDataset(datasetDir)
    expect(report.ok).toBe(true)
    expect(report.records).toBe(20)
    expect(report.dim).toBe(16)
  })

  it('identical image files produce identical vectors', async () => {
    const dirA = tempDir('dup-a')
    const dirB = tempDir('dup-b')
    makeImageTree(dirA, 2, 2)
    makeImageTree(dirB, 2, 2)
    const outA = tempDir('dup-out-a')
    const outB = tempDir('dup-out-b')
    await extract({ imagesDir: dirA, encoder: 'stub', outDir: outA })
    await extract({ imagesDir: dirB, encoder: 'stub', outDir: outB })
    expect(readFileSync(join(outA, 'embeddings.bin')).equals(readFileSync(join(outB, 'embeddings.bin')))).toBe(
      true,
    )
  })

  it.skipIf(!engineAvailable())('engine ingests the stub dataset cleanly', () => {
    const { stdout } = engine(['ingest', '--data', datasetDir])
    const summary = JSON.parse(stdout)
    expect(summary.records).toBe(20)
    expect(summary.dim).toBe(16)
    expect(summary.scenes).toBe(4)
  })

  it.skipIf(!engineAvailable())('engine rewrite round-trips dim, count, and bytes', () => {
    const rewritten = tempDir('rewrite')
    engine(['ingest', '--data', datasetDir, '--out', rewritten])
    const ours = readManifest(datasetDir)
    const theirs = readManifest(rewritten)
    expect(theirs.dim).toBe(ours.dim)
    expect(theirs.record_count).toBe(ours.record_count)
    expect(statSync(join(rewritten, 'embeddings.bin')).size).toBe(
      ours.record_count * ours.dim * 4,
    )
    expect(
      readFileSync(join(rewritten, 'embeddings.bin')).equals(
        readFileSync(join(datasetDir, 'embeddings.bin')),
      ),
    ).toBe(true)
  })

  it.skipIf(!engineAvailable())('full retrieval run completes on stub data', () => {
    const outDir = tempDir('eval')
    const configPath = join(tempDir('cfg'), 'config.json')
    writeFileSync(
      configPath,
      JSON.stringify({
        data: { path: datasetDir },
        split: { k_db: 2, k_query: 1, k_train: 0, mode: 'seen' },
        stage: 'raw',
        aggregation: 'both',
        ks: [1, 5],
        seed: 0,
        out_dir: outDir,
      }),
    )
    const { stdout } = engine(['eval', '--config', configPath])
    const lines = stdout.trim().split('\n').map((l) => JSON.parse(l))
    expect(lines.length).toBe(2)
    for (const line of lines) {
      expect(line.mrr).toBeGreaterThan(0)
      expect(line.mrr).toBeLessThanOrEqual(1)
    }
    expect(statSync(join(outDir, 'report_none.json')).size).toBeGreaterThan(0)
    expect(statSync(join(outDir, 'report_mean.json')).size).toBeGreaterThan(0)
  })

  it('flags a hand-truncated binary', () => {
    const broken = tempDir('broken')
    const blob = readFileSync(join(datasetDir, 'embeddings.bin'))
    writeFileSync(join(broken, 'manifest.json'), readFileSync(join(datasetDir, 'manifest.json')))
    writeFileSync(join(broken, 'embeddings.bin'), blob.subarray(0, blob.length - 8))
    const report = verifyDataset(broken)
    expect(report.ok).toBe(false)
    expect(report.issues.join(' ')).toMatch(/bytes/)
  })
})
