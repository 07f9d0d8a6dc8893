import { readFileSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'
import { readManifest, readVectors, writeDataset } from '../src/dataset'
import { verifyDataset } from '../src/verify'
import { tempDir } from './helpers'

const rec = (sceneId: string, viewId: string, values: number[]) => ({
  sceneId,
  viewId,
  vector: Float32Array.from(values),
})

describe('writeDataset', () => {
  it('writes the manifest schema and little-endian float32 rows', () => {
    const dir = tempDir('ds')
    const manifest = writeDataset(
      [rec('a', 'v0', [1.5, -2]), rec('a', 'v1', [0, 3]), rec('b', 'v0', [4, 5])],
      dir,
    )
    expect(manifest).toEqual({
      dim: 2,
      dtype: 'f32le',
      record_count: 3,
      scenes: [
        { scene_id: 'a', views: [{ view_id: 'v0' }, { view_id: 'v1' }] },
        { scene_id: 'b', views: [{ view_id: 'v0' }] },
      ],
    })
    const blob = readFileSync(join(dir, 'embeddings.bin'))
    expect(blob.length).toBe(3 * 2 * 4)
    expect(blob.readFloatLE(0)).toBe(1.5)
    expect(blob.readFloatLE(4)).toBe(-2)
    expect(blob.readFloatLE(20)).toBe(5)
    expect(readManifest(dir)).toEqual(manifest)
  })

  it('round-trips vectors exactly', () => {
    const dir = tempDir('ds')
    const vals = [0.1, -0.25, 3.125, 1e-7]
    const manifest = writeDataset([rec('s', 'v', vals)], dir)
    const rows = readVectors(dir, manifest)
    expect(Array.from(rows[0])).toEqual(Array.from(Float32Array.from(vals)))
  })

  it('rejects duplicate keys, dim mismatch, and non-finite values', () => {
    const dir = tempDir('ds')
    expect(() => writeDataset([rec('a', 'v', [1]), rec('a', 'v', [2])], dir)).toThrow(/duplicate/)
    expect(() => writeDataset([rec('a', 'v0', [1]), rec('a', 'v1', [1, 2])], dir)).toThrow(
      /dimension mismatch/,
    )
    expect(() => writeDataset([rec('a', 'v', [Number.NaN])], dir)).toThrow(/non-finite/)
    expect(() => writeDataset([], dir)).toThrow(/empty/)
  })
})

describe('verifyDataset', () => {
  it('passes a freshly written dataset', () => {
    const dir = tempDir('ds')
    writeDataset([rec('a', 'v0', [1, 2]), rec('b', 'v0', [3, 4])], dir)
    const report = verifyDataset(dir)
    expect(report.ok).toBe(true)
    expect(report.records).toBe(2)
    expect(report.viewCounts).toEqual({ a: 1, b: 1 })
  })

  it('flags a truncated binary file', () => {
    const dir = tempDir('ds')
    writeDataset([rec('a', 'v0', [1, 2])], dir)
    const binPath = join(dir, 'embeddings.bin')
    const blob = readFileSync(binPath)
    writeFileSync(binPath, blob.subarray(0, blob.length - 4))
    const report = verifyDataset(dir)
    expect(report.ok).toBe(false)
    expect(report.issues.join(' ')).toMatch(/bytes/)
  })

  it('locates an injected NaN', () => {
    const dir = tempDir('ds')
    writeDataset([rec('a', 'v0', [1, 2]), rec('a', 'v1', [3, 4])], dir)
    const binPath = join(dir, 'embeddings.bin')
    const blob = readFileSync(binPath)
    blob.writeFloatLE(Number.NaN, 12) // record 1, coord 1
    writeFileSync(binPath, blob)
    const report = verifyDataset(dir)
    expect(report.ok).toBe(false)
    expect(report.issues.join(' ')).toMatch(/record 1 \(a, v1\) coord 1/)
  })

  it('reports a missing directory cleanly', () => {
    const report = verifyDataset('/nonexistent/nowhere')
    expect(report.ok).toBe(false)
    expect(report.issues[0]).toMatch(/missing/)
  })
})
