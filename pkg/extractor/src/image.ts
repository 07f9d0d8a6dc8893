import { readFileSync } from 'node:fs'
import { extname } from 'node:path'
import { PNG } from 'pngjs'

export interface DecodedImage {
  width: number
  height: number
  /** 1 (grayscale) or 3 (RGB); pixels are interleaved row-major bytes. */
  channels: number
  pixels: Uint8Array
}

/** Parse the whitespace/comment-separated header tokens of a PNM file. */
function pnmHeader(buf: Buffer, count: number): { tokens: number[]; offset: number } {
  const tokens: number[] = []
  let i = 2 // past magic
  while (tokens.length < count) {
    if (i >= buf.length) throw new Error('truncated PNM header')
    const c = buf[i]
    if (c === 0x23) {
      // comment runs to end of line
      while (i < buf.length && buf[i] !== 0x0a) i++
      i++
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      i++
    } else {
      let j = i
      while (j < buf.length && buf[j] >= 0x30 && buf[j] <= 0x39) j++
      if (j === i) throw new Error(`bad PNM header byte at ${i}`)
      tokens.push(Number(buf.subarray(i, j).toString('ascii')))
      i = j
    }
  }
  // exactly one whitespace byte separates the header from pixel data
  return { tokens, offset: i + 1 }
}

function decodePnm(buf: Buffer, path: string): DecodedImage {
  const magic = buf.subarray(0, 2).toString('ascii')
  const channels = magic === 'P6' ? 3 : magic === 'P5' ? 1 : 0
  if (!channels) throw new Error(`${path}: unsupported PNM magic ${magic}`)
  const { tokens, offset } = pnmHeader(buf, 3)
  const [width, height, maxval] = tokens
  if (maxval !== 255) throw new Error(`${path}: only maxval 255 is supported`)
  const expected = width * height * channels
  const pixels = buf.subarray(offset, offset + expected)
  if (pixels.length !== expected) {
    throw new Error(`${path}: expected ${expected} pixel bytes, found ${pixels.length}`)
  }
  return { width, height, channels, pixels: new Uint8Array(pixels) }
}

function decodePng(buf: Buffer): DecodedImage {
  const png = PNG.sync.read(buf)
  const pixels = new Uint8Array(png.width * png.height * 3)
  for (let p = 0; p < png.width * png.height; p++) {
    pixels[3 * p] = png.data[4 * p]
    pixels[3 * p + 1] = png.data[4 * p + 1]
    pixels[3 * p + 2] = png.data[4 * p + 2]
  }
  return { width: png.width, height: png.height, channels: 3, pixels }
}

export const IMAGE_EXTENSIONS = new Set(['.png', '.ppm', '.pgm'])

export function decodeImage(path: string): DecodedImage {
  const buf = readFileSync(path)
  const ext = extname(path).toLowerCase()
  if (ext === '.png') return decodePng(buf)
  if (ext === '.ppm' || ext === '.pgm') return decodePnm(buf, path)
  throw new Error(`${path}: unsupported image extension ${ext}`)
}
