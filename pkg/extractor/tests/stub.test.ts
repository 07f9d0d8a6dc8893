import { describe, expect, it } from 'vitest'
import { DecodedImage } from '../src/image'
import { makeStubEncoder, stubFeatures } from '../src/stub'

function rgbImage(pixels: number[][]): DecodedImage {
  return {
    width: pixels.length,
    height: 1,
    channels: 3,
    pixels: new Uint8Array(pixels.flat()),
  }
}

describe('stub encoder', () => {
  it('is deterministic for identical pixel data', () => {
    const enc = makeStubEncoder(32)
    const a = enc.encode(rgbImage([[10, 200, 30], [40, 50, 60]]))
    const b = enc.encode(rgbImage([[10, 200, 30], [40, 50, 60]]))
    expect(Array.from(a)).toEqual(Array.from(b))
  })

  it('produces the requested dimension', () => {
    expect(makeStubEncoder(7).encode(rgbImage([[1, 2, 3]])).length).toBe(7)
    expect(makeStubEncoder(64).dim).toBe(64)
  })

  it('separates images with different statistics', () => {
    const enc = makeStubEncoder(16)
    const a = enc.encode(rgbImage([[255, 0, 0], [255, 0, 0]]))
    const b = enc.encode(rgbImage([[0, 0, 255], [0, 0, 255]]))
    let diff = 0
    for (let i = 0; i < 16; i++) diff = Math.max(diff, Math.abs(a[i] - b[i]))
    expect(diff).toBeGreaterThan(1e-3)
  })

  it('replicates grayscale across channels', () => {
    const gray: DecodedImage = {
      width: 2,
      height: 1,
      channels: 1,
      pixels: new Uint8Array([100, 200]),
    }
    const f = stubFeatures(gray)
    expect(f[0]).toBeCloseTo(f[1], 12)
    expect(f[1]).toBeCloseTo(f[2], 12)
  })

  it('changes with the projection seed', () => {
    const img = rgbImage([[9, 9, 9]])
    const a = makeStubEncoder(8, 1).encode(img)
    const b = makeStubEncoder(8, 2).encode(img)
    expect(Array.from(a)).not.toEqual(Array.from(b))
  })
})
