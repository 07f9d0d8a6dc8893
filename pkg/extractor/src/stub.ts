import { DecodedImage } from './image.js'

/**
 * Offline stand-in encoder: per-channel pixel statistics pushed through a
 * fixed, seeded random projection. Needs no model weights, so the dataset
 * format contract stays testable anywhere; identical image bytes always map
 * to identical vectors.
 */

const STUB_FEATURES = 6 // mean and std per RGB channel

function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) | 0
    let t = Math.imul(a ^ (a >>> 15), 1 | a)
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function gaussianMatrix(rows: number, cols: number, seed: number): Float64Array {
  const rand = mulberry32(seed)
  const out = new Float64Array(rows * cols)
  for (let i = 0; i < out.length; i += 2) {
    // Box-Muller; u clamped away from 0
    const u = Math.max(rand(), 1e-12)
    const v = rand()
    const r = Math.sqrt(-2 * Math.log(u))
    out[i] = r * Math.cos(2 * Math.PI * v)
    if (i + 1 < out.length) out[i + 1] = r * Math.sin(2 * Math.PI * v)
  }
  return out
}

export function stubFeatures(img: DecodedImage): Float64Array {
  const n = img.width * img.height
  const sums = [0, 0, 0]
  const sqs = [0, 0, 0]
  for (let p = 0; p < n; p++) {
    for (let c = 0; c < 3; c++) {
      // grayscale replicates its single channel across RGB
      const value = img.pixels[p * img.channels + (img.channels === 3 ? c : 0)] / 255
      sums[c] += value
      sqs[c] += value * value
    }
  }
  const out = new Float64Array(STUB_FEATURES)
  for (let c = 0; c < 3; c++) {
    const mean = sums[c] / n
    out[c] = mean
    out[3 + c] = Math.sqrt(Math.max(sqs[c] / n - mean * mean, 0))
  }
  return out
}

export interface StubEncoder {
  dim: number
  encode(img: DecodedImage): Float32Array
}

export function makeStubEncoder(dim = 64, seed = 0x5eed): StubEncoder {
  const projection = gaussianMatrix(dim, STUB_FEATURES, seed)
  return {
    dim,
    encode(img) {
      const f = stubFeatures(img)
      const out = new Float32Array(dim)
      for (let r = 0; r < dim; r++) {
        let acc = 0
        for (let c = 0; c < STUB_FEATURES; c++) acc += projection[r * STUB_FEATURES + c] * f[c]
        out[r] = Math.fround(acc)
      }
      return out
    },
  }
}
