import { mkdirSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { PNG } from 'pngjs'

let counter = 0

export function tempDir(prefix: string): string {
  const dir = join(tmpdir(), `${prefix}-${process.pid}-${counter++}`)
  mkdirSync(dir, { recursive: true })
  return dir
}

/** Binary P6 PPM from an array of [r, g, b] pixels (row-major). */
export function ppmBytes(width: number, height: number, rgb: number[][]): Buffer {
  const header = Buffer.from(`P6\n${width} ${height}\n255\n`, 'ascii')
  const pixels = Buffer.from(rgb.flat())
  return Buffer.concat([header, pixels])
}

/** Binary P5 PGM from gray values. */
export function pgmBytes(width: number, height: number, gray: number[]): Buffer {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(gray)])
}

export function pngBytes(width: number, height: number, rgb: number[][]): Buffer {
  const png = new PNG({ width, height })
  for (let p = 0; p < width * height; p++) {
    png.data[4 * p] = rgb[p][0]
    png.data[4 * p + 1] = rgb[p][1]
    png.data[4 * p + 2] = rgb[p][2]
    png.data[4 * p + 3] = 255
  }
  return PNG.sync.write(png)
}

/**
 * Lay out a scene/view image tree: each scene gets `views` 2x2 PPM files
 * whose base color encodes the scene and whose corner pixel varies per view.
 */
export function makeImageTree(root: string, scenes: number, views: number): void {
  for (let s = 0; s < scenes; s++) {
    const dir = join(root, `scene${String(s).padStart(2, '0')}`)
    mkdirSync(dir, { recursive: true })
    const base = [40 + 30 * s, 200 - 25 * s, 60 + 20 * s].map((v) => ((v % 255) + 255) % 255)
    for (let v = 0; v < views; v++) {
      const wiggle = (base[0] + 11 * v) % 255
      const pixels = [base, base, base, [wiggle, base[1], base[2]]]
      writeFileSync(join(dir, `view${v}.ppm`), ppmBytes(2, 2, pixels))
    }
  }
}
