import { readdirSync, statSync } from 'node:fs'
import { extname, join } from 'node:path'
import { EmbeddingRecord, Manifest, writeDataset } from './dataset.js'
import { makeEncoder, EncoderOptions } from './encoders.js'
import { decodeImage, IMAGE_EXTENSIONS } from './image.js'

export interface ExtractionJob {
  /** directory laid out as <scene>/<view>.<ext> */
  imagesDir: string
  encoder: 'cnn-penultimate' | '3d-latent' | 'stub'
  outDir: string
  options?: EncoderOptions
}

export interface SceneImages {
  sceneId: string
  /** (view id, file path) pairs, lexicographically ordered for determinism */
  views: [string, string][]
}

export function listScenes(imagesDir: string): SceneImages[] {
  const sceneDirs = readdirSync(imagesDir)
    .filter((name) => statSync(join(imagesDir, name)).isDirectory())
    .sort()
  if (sceneDirs.length === 0) throw new Error(`no scene directories under ${imagesDir}`)
  const scenes: SceneImages[] = []
  for (const sceneId of sceneDirs) {
    const dir = join(imagesDir, sceneId)
    const views = readdirSync(dir)
      .filter((f) => IMAGE_EXTENSIONS.has(extname(f).toLowerCase()))
      .sort()
      .map((f): [string, string] => [f.slice(0, f.length - extname(f).length), join(dir, f)])
    if (views.length === 0) throw new Error(`scene directory ${dir} holds no decodable images`)
    scenes.push({ sceneId, views })
  }
  return scenes
}

export async function extract(job: ExtractionJob): Promise<Manifest> {
  const scenes = listScenes(job.imagesDir)
  const encoder = await makeEncoder(job.encoder, job.options ?? {})

  const records: EmbeddingRecord[] = []
  let dim = -1
  for (const scene of scenes) {
    for (const [viewId, path] of scene.views) {
      const img = decodeImage(path)
      const vector = await encoder.encode(img, scene.sceneId, viewId)
      if (dim === -1) dim = vector.length
      else if (vector.length !== dim) {
        throw new Error(
          `dimension inconsistency: (${scene.sceneId}, ${viewId}) has dim ` +
            `${vector.length}, previous records have ${dim}`,
        )
      }
      records.push({ sceneId: scene.sceneId, viewId, vector })
    }
  }
  return writeDataset(records, job.outDir)
}
