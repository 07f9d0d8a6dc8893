import { readFileSync } from 'node:fs'
import { join } from 'node:path'
import { DecodedImage } from './image.js'
import { makeStubEncoder } from './stub.js'

export interface Encoder {
  name: string
  /** Output dimension; -1 until known (some encoders learn it from the model). */
  dim: number
  encode(img: DecodedImage, sceneId: string, viewId: string): Promise<Float32Array> | Float32Array
}

export interface EncoderOptions {
  /** stub projection output size */
  dim?: number
  /** stub projection seed */
  seed?: number
  /** cnn-penultimate: directory holding a tfjs Layers model.json + shards */
  modelDir?: string
  /** 3d-latent: directory of precomputed <scene>/<view>.f32 latent files */
  latentsDir?: string
}

/**
 * Penultimate-layer features from a tfjs Layers model on disk. The model is
 * loaded through a filesystem IOHandler, truncated one layer below its
 * output, and fed bilinearly-resized RGB in [0, 1]. @tensorflow/tfjs is
 * imported lazily so the stub path carries no model runtime.
 */
async function makeCnnPenultimateEncoder(modelDir: string): Promise<Encoder> {
  let tf: any
  try {
    // computed specifier: tfjs is an optional runtime dependency
    const specifier = '@tensorflow/tfjs'
    tf = await import(specifier)
  } catch {
    throw new Error(
      'model-load failure: @tensorflow/tfjs is not installed; ' +
        'add it to use the cnn-penultimate encoder',
    )
  }
  const modelPath = join(modelDir, 'model.json')
  let topology: any
  try {
    topology = JSON.parse(readFileSync(modelPath, 'utf-8'))
  } catch (err) {
    throw new Error(`model-load failure: cannot read ${modelPath}: ${err}`)
  }
  const ioHandler = {
    load: async () => {
      const manifest = topology.weightsManifest ?? []
      const specs = manifest.flatMap((group: any) => group.weights)
      const shards = manifest.flatMap((group: any) =>
        group.paths.map((p: string) => readFileSync(join(modelDir, p))),
      )
      const weightData = Buffer.concat(shards)
      return {
        modelTopology: topology.modelTopology,
        weightSpecs: specs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset,
          weightData.byteOffset + weightData.byteLength,
        ),
      }
    },
  }
  const full = await tf.loadLayersModel(ioHandler)
  if (full.layers.length < 2) {
    throw new Error('model-load failure: model has no penultimate layer')
  }
  const penultimate = full.layers[full.layers.length - 2]
  const model = tf.model({ inputs: full.inputs, outputs: penultimate.output })
  const [, h, w] = full.inputs[0].shape
  const dim = penultimate.output.shape.slice(1).reduce((a: number, b: number) => a * b, 1)

  return {
    name: 'cnn-penultimate',
    dim,
    async encode(img) {
      const out: Float32Array = tf.tidy(() => {
        let t = tf.tensor3d(rgbFloats(img), [img.height, img.width, 3])
        t = tf.image.resizeBilinear(t, [h, w])
        const features = model.predict(t.expandDims(0))
        return features.reshape([dim]).dataSync()
      })
      return Float32Array.from(out)
    },
  }
}

function rgbFloats(img: DecodedImage): Float32Array {
  const n = img.width * img.height
  const out = new Float32Array(n * 3)
  for (let p = 0; p < n; p++) {
    for (let c = 0; c < 3; c++) {
      out[3 * p + c] = img.pixels[p * img.channels + (img.channels === 3 ? c : 0)] / 255
    }
  }
  return out
}

/**
 * Precomputed latent codes from a generative 3D model, one little-endian
 * float32 file per view at <latentsDir>/<scene>/<view>.f32. The image is
 * only used to locate the matching latent.
 */
function makeLatentEncoder(latentsDir: string): Encoder {
  let dim = -1
  return {
    name: '3d-latent',
    dim,
    encode(_img, sceneId, viewId) {
      const path = join(latentsDir, sceneId, `${viewId}.f32`)
      let buf: Buffer
      try {
        buf = readFileSync(path)
      } catch {
        throw new Error(`model-load failure: missing latent file ${path}`)
      }
      if (buf.length % 4 !== 0) throw new Error(`${path}: length is not a float32 multiple`)
      const vector = new Float32Array(buf.length / 4)
      for (let i = 0; i < vector.length; i++) vector[i] = buf.readFloatLE(i * 4)
      if (dim === -1) dim = vector.length
      return vector
    },
  }
}

export async function makeEncoder(name: string, options: EncoderOptions): Promise<Encoder> {
  switch (name) {
    case 'stub': {
      const stub = makeStubEncoder(options.dim ?? 64, options.seed ?? 0x5eed)
      return { name: 'stub', dim: stub.dim, encode: (img) => stub.encode(img) }
    }
    case 'cnn-penultimate': {
      if (!options.modelDir) throw new Error('cnn-penultimate requires --model-dir')
      return makeCnnPenultimateEncoder(options.modelDir)
    }
    case '3d-latent': {
      if (!options.latentsDir) throw new Error('3d-latent requires --latents')
      return makeLatentEncoder(options.latentsDir)
    }
    default:
      throw new Error(`unknown encoder ${name}; use cnn-penultimate, 3d-latent, or stub`)
  }
}
