import { writeFileSync } from 'node:fs'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'
import { decodeImage } from '../src/image'
import { pgmBytes, pngBytes, ppmBytes, tempDir } from './helpers'

describe('decodeImage', () => {
  it('decodes binary PPM', () => {
    const dir = tempDir('img')
    const path = join(dir, 'a.ppm')
    writeFileSync(path, ppmBytes(2, 1, [[255, 0, 0], [0, 255, 0]]))
    const img = decodeImage(path)
    expect(img.width).toBe(2)
    expect(img.height).toBe(1)
    expect(img.channels).toBe(3)
    expect(Array.from(img.pixels)).toEqual([255, 0, 0, 0, 255, 0])
  })

  it('decodes binary PGM as single channel', () => {
    const dir = tempDir('img')
    const path = join(dir, 'g.pgm')
    writeFileSync(path, pgmBytes(2, 2, [0, 64, 128, 255]))
    const img = decodeImage(path)
    expect(img.channels).toBe(1)
    expect(Array.from(img.pixels)).toEqual([0, 64, 128, 255])
  })

  it('decodes PPM with header comments', () => {
    const dir = tempDir('img')
    const path = join(dir, 'c.ppm')
    const body = Buffer.concat([
      Buffer.from('P6\n# a comment line\n1 1\n255\n', 'ascii'),
      Buffer.from([9, 8, 7]),
    ])
    writeFileSync(path, body)
    expect(Array.from(decodeImage(path).pixels)).toEqual([9, 8, 7])
  })

  it('decodes PNG and drops alpha', () => {
    const dir = tempDir('img')
    const path = join(dir, 'p.png')
    writeFileSync(path, pngBytes(1, 2, [[10, 20, 30], [40, 50, 60]]))
    const img = decodeImage(path)
    expect(img.channels).toBe(3)
    expect(Array.from(img.pixels)).toEqual([10, 20, 30, 40, 50, 60])
  })

  it('rejects truncated pixel data', () => {
    const dir = tempDir('img')
    const path = join(dir, 't.ppm')
    writeFileSync(path, ppmBytes(2, 2, [[1, 2, 3], [4, 5, 6], [7, 8, 9], [1, 1, 1]]).subarray(0, 20))
    expect(() => decodeImage(path)).toThrow(/pixel bytes/)
  })

  it('rejects unknown extensions', () => {
    const dir = tempDir('img')
    const path = join(dir, 'x.gif')
    writeFileSync(path, Buffer.from('GIF89a'))
    expect(() => decodeImage(path)).toThrow(/unsupported/)
  })
})
