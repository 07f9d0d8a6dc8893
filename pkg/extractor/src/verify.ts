import { existsSync, readFileSync, statSync } from 'node:fs'
import { join } from 'node:path'
import { DTYPE_TAG, Manifest } from './dataset.js'

export interface VerifyReport {
  ok: boolean
  issues: string[]
  records: number
  dim: number
  scenes: number
  /** view count per scene id */
  viewCounts: Record<string, number>
}

/** Consistency checks over a dataset directory: schema, sizes, finiteness. */
export function verifyDataset(dir: string): VerifyReport {
  const issues: string[] = []
  const report: VerifyReport = { ok: false, issues, records: 0, dim: 0, scenes: 0, viewCounts: {} }

  const manifestPath = join(dir, 'manifest.json')
  const binPath = join(dir, 'embeddings.bin')
  if (!existsSync(manifestPath)) {
    issues.push(`missing ${manifestPath}`)
    return report
  }
  if (!existsSync(binPath)) {
    issues.push(`missing ${binPath}`)
    return report
  }

  let manifest: Manifest
  try {
    manifest = JSON.parse(readFileSync(manifestPath, 'utf-8')) as Manifest
  } catch (err) {
    issues.push(`manifest.json is not valid JSON: ${err}`)
    return report
  }

  if (manifest.dtype !== DTYPE_TAG) issues.push(`dtype tag is ${manifest.dtype}, expected ${DTYPE_TAG}`)
  if (!Number.isInteger(manifest.dim) || manifest.dim < 1) issues.push(`bad dim ${manifest.dim}`)

  let viewTotal = 0
  for (const scene of manifest.scenes ?? []) {
    const n = scene.views.length
    report.viewCounts[scene.scene_id] = n
    if (n === 0) issues.push(`scene ${scene.scene_id} has no views`)
    viewTotal += n
  }
  if (viewTotal !== manifest.record_count) {
    issues.push(`record_count ${manifest.record_count} != ${viewTotal} views listed`)
  }

  const expectedBytes = manifest.record_count * manifest.dim * 4
  const actualBytes = statSync(binPath).size
  if (actualBytes !== expectedBytes) {
    issues.push(`embeddings.bin is ${actualBytes} bytes, manifest implies ${expectedBytes}`)
  }

  if (issues.length === 0) {
    const blob = readFileSync(binPath)
    const keys: [string, string][] = []
    for (const scene of manifest.scenes) {
      for (const view of scene.views) keys.push([scene.scene_id, view.view_id])
    }
    for (let r = 0; r < manifest.record_count; r++) {
      for (let c = 0; c < manifest.dim; c++) {
        const x = blob.readFloatLE((r * manifest.dim + c) * 4)
        if (!Number.isFinite(x)) {
          const [sceneId, viewId] = keys[r]
          issues.push(`non-finite value at record ${r} (${sceneId}, ${viewId}) coord ${c}`)
          break
        }
      }
      if (issues.length) break
    }
  }

  report.records = manifest.record_count
  report.dim = manifest.dim
  report.scenes = (manifest.scenes ?? []).length
  report.ok = issues.length === 0
  return report
}
