import { mkdirSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'
import { makeEncoder } from '../src/encoders'
import { extract } from '../src/extract'
import { readManifest, readVectors } from '../src/dataset'
import { makeImageTree, tempDir } from './helpers'

function latentBytes(values: number[]): Buffer {
  const buf = Buffer.alloc(values.length * 4)
  values.forEach((v, i) => buf.writeFloatLE(v, i * 4))
  return buf
}

describe('encoder selection', () => {
  it('rejects unknown encoder names', async () => {
    await expect(makeEncoder('resnet', {})).rejects.toThrow(/unknown encoder/)
  })

  it('cnn-penultimate requires a model directory', async () => {
    await expect(makeEncoder('cnn-penultimate', {})).rejects.toThrow(/--model-dir/)
    await expect(
      makeEncoder('cnn-penultimate', { modelDir: '/nonexistent' }),
    ).rejects.toThrow(/model-load failure/)
  })

  it('3d-latent requires a latents directory', async () => {
    await expect(makeEncoder('3d-latent', {})).rejects.toThrow(/--latents/)
  })
})

describe('3d-latent encoder', () => {
  it('ingests precomputed per-view latent files', async () => {
    const imagesDir = tempDir('lat-img')
    makeImageTree(imagesDir, 2, 2)
    const latentsDir = tempDir('lat')
    for (const scene of ['scene00', 'scene01']) {
      mkdirSync(join(latentsDir, scene), { recursive: true })
    }
    const expected: Record<string, number[]> = {
      'scene00/view0': [1, 2, 3],
      'scene00/view1': [4, 5, 6],
      'scene01/view0': [7, 8, 9],
      'scene01/view1': [10, 11, 12],
    }
    for (const [key, values] of Object.entries(expected)) {
      writeFileSync(join(latentsDir, `${key}.f32`), latentBytes(values))
    }
    const outDir = tempDir('lat-out')
    const manifest = await extract({
      imagesDir,
      encoder: '3d-latent',
      outDir,
      options: { latentsDir },
    })
    expect(manifest.dim).toBe(3)
    expect(manifest.record_count).toBe(4)
    const rows = readVectors(outDir, manifest)
    expect(Array.from(rows[0])).toEqual([1, 2, 3])
    expect(Array.from(rows[3])).toEqual([10, 11, 12])
  })

  it('fails cleanly when a latent file is missing', async () => {
    const imagesDir = tempDir('lat-img2')
    makeImageTree(imagesDir, 1, 2)
    const latentsDir = tempDir('lat2')
    mkdirSync(join(latentsDir, 'scene00'), { recursive: true })
    writeFileSync(join(latentsDir, 'scene00/view0.f32'), latentBytes([1]))
    await expect(
      extract({
        imagesDir,
        encoder: '3d-latent',
        outDir: tempDir('lat-out2'),
        options: { latentsDir },
      }),
    ).rejects.toThrow(/model-load failure: missing latent file/)
  })
})

describe('cnn-penultimate encoder', () => {
  it('extracts the penultimate layer width from a real layers model', async () => {
    // Build a tiny image model in-process and save it in the standard
    // layers-model format, then run the extractor against the files.
    const tf = await import('@tensorflow/tfjs')
    const model = tf.sequential({
      layers: [
        tf.layers.flatten({ inputShape: [2, 2, 3] }),
        tf.layers.dense({ units: 8, activation: 'relu' }),
        tf.layers.dense({ units: 4 }),
      ],
    })
    const modelDir = tempDir('model')
    const artifacts: any = await new Promise((resolve) => {
      void model.save(
        tf.io.withSaveHandler(async (a: any) => {
          resolve(a)
          return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } }
        }),
      )
    })
    writeFileSync(
      join(modelDir, 'model.json'),
      JSON.stringify({
        modelTopology: artifacts.modelTopology,
        format: 'layers-model',
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }),
    )
    writeFileSync(join(modelDir, 'weights.bin'), Buffer.from(artifacts.weightData))

    const imagesDir = tempDir('cnn-img')
    makeImageTree(imagesDir, 2, 3)
    const outDir = tempDir('cnn-out')
    const manifest = await extract({
      imagesDir,
      encoder: 'cnn-penultimate',
      outDir,
      options: { modelDir },
    })
    // uniform dimension equal to the model's penultimate width
    expect(manifest.dim).toBe(8)
    expect(manifest.record_count).toBe(6)
    expect(readManifest(outDir).dim).toBe(8)
  }, 30_000)
})
