/**
 * Full UI walkthrough against a live server process that replays the
 * recorded key-lock transcript and validates candidates with the real
 * conformance harness: new session, proposed design, feedback, revised
 * design, approval, codify, validation. The walk ends on the Executable
 * banner with the metrics card showing trials-to-execution 2, the value
 * reported by the API.
 */

import { execFileSync, spawn, type ChildProcess } from 'node:child_process'
import { cpSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from 'node:fs'
import { createServer } from 'node:net'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { afterAll, beforeAll, describe, expect, it, vi } from 'vitest'
import { StudioApi } from '../src/api'
import { StudioApp } from '../src/app'
import { testDom, type TestDom } from './helpers'

const PYTHON = process.env.STUDIO_PYTHON ?? 'python3'

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer()
    server.listen(0, '127.0.0.1', () => {
      const address = server.address()
      if (address === null || typeof address === 'string') {
        reject(new Error('no port assigned'))
        return
      }
      server.close(() => resolve(address.port))
    })
    server.on('error', reject)
  })
}

async function waitForReady(baseUrl: string, proc: ChildProcess): Promise<void> {
  const deadline = Date.now() + 30_000
  let lastError: unknown = null
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`server exited early with code ${proc.exitCode}`)
    }
    try {
      const response = await fetch(`${baseUrl}/api/v1/sessions`)
      if (response.status === 200) return
    } catch (error) {
      lastError = error
    }
    await new Promise((resolve) => setTimeout(resolve, 100))
  }
  throw new Error(`server never became ready: ${String(lastError)}`)
}

describe('key-lock walkthrough against a served studio', () => {
  let workdir: string
  let proc: ChildProcess
  let baseUrl: string
  let description: string
  let feedback: string
  let stderrTail = ''

  beforeAll(async () => {
    const scenarioSource = execFileSync(PYTHON, [
      '-c',
      "from delf_studio.service.replay import bundled_scenario_dir; print(bundled_scenario_dir('keylock'))",
    ])
      .toString()
      .trim()
    workdir = mkdtempSync(join(tmpdir(), 'studio-ui-'))
    const scenario = join(workdir, 'scenario')
    cpSync(scenarioSource, scenario, { recursive: true })
    description = readFileSync(join(scenario, 'description.txt'), 'utf-8')
    const steps = JSON.parse(readFileSync(join(scenario, 'scenario.json'), 'utf-8')) as {
      steps: { op: string; text?: string }[]
    }
    const feedbackStep = steps.steps.find((step) => step.op === 'feedback')
    if (!feedbackStep?.text) throw new Error('scenario has no feedback step')
    feedback = feedbackStep.text

    const configPath = join(workdir, 'studio.json')
    writeFileSync(
      configPath,
      JSON.stringify({
        workdir: 'sessions',
        backend: {
          kind: 'replay',
          model: 'studio-default',
          transcript: join(scenario, 'transcript.jsonl'),
        },
      }),
    )
    const port = await freePort()
    baseUrl = `http://127.0.0.1:${port}`
    proc = spawn(
      PYTHON,
      ['-m', 'delf_studio.service.cli', '--config', configPath, 'serve', '--bind', `127.0.0.1:${port}`],
      { stdio: ['ignore', 'ignore', 'pipe'] },
    )
    proc.stderr?.on('data', (chunk: Buffer) => {
      stderrTail = (stderrTail + chunk.toString()).slice(-4000)
    })
    await waitForReady(baseUrl, proc)
  }, 60_000)

  afterAll(async () => {
    proc?.kill()
    await new Promise((resolve) => setTimeout(resolve, 200))
    rmSync(workdir, { recursive: true, force: true })
  })

  it(
    'walks a session from description to the Executable banner with trials 2',
    async () => {
      const dom: TestDom = testDom()
      const api = new StudioApi(baseUrl)
      const app = new StudioApp(dom.root, api, { pollMs: 100 })

      // new session form with the live word count
      await app.showNew()
      dom.input('#new-description', description)
      expect(dom.text('#word-count')).toBe('48 words')
      dom.click('#create-session-btn')
      await vi.waitFor(() => expect(dom.q('#propose-btn')).not.toBeNull(), 10_000)
      expect(dom.text('#phase-label')).toBe('Drafting')

      // first proposal
      dom.click('#propose-btn')
      await vi.waitFor(() => expect(dom.q('#approve-btn')).not.toBeNull(), 10_000)
      expect(dom.text('#phase-label')).toBe('DesignProposed')

      // feedback, then the revised proposal it unlocks
      const send = dom.q('#send-feedback-btn') as HTMLButtonElement
      expect(send.disabled).toBe(true)
      dom.input('#feedback-text', feedback)
      expect(send.disabled).toBe(false)
      dom.click('#send-feedback-btn')
      await vi.waitFor(() => expect(dom.q('#propose-btn')).not.toBeNull(), 10_000)
      dom.click('#propose-btn')
      await vi.waitFor(
        () => expect(dom.root.textContent).toContain('Revision 2'),
        10_000,
      )

      // approve as proposed, then codify
      dom.click('#approve-btn')
      await vi.waitFor(() => expect(dom.q('#codify-btn')).not.toBeNull(), 10_000)
      expect(dom.text('#phase-label')).toBe('DesignApproved')
      dom.click('#codify-btn')
      await vi.waitFor(() => expect(dom.q('#validate-btn')).not.toBeNull(), 20_000)
      expect(dom.text('#phase-label')).toBe('CodeGenerated')
      expect(dom.q('#code-source')).not.toBeNull()

      // validation runs the real harness; the recorded debug reply repairs
      // the planted space mismatch, so one click ends on the pass banner
      dom.click('#validate-btn')
      await vi.waitFor(() => expect(dom.q('#pass-banner')).not.toBeNull(), 90_000)
      expect(dom.text('#phase-label')).toBe('Executable')

      // two code versions with a rendered diff, and the repair report history
      const select = dom.q('#code-version-select') as HTMLSelectElement
      expect(select.options.length).toBe(2)
      expect(dom.text('#code-diff')).toContain('@@')

      // the metrics card shows the trials value reported by the API, verbatim
      expect(dom.text('#metric-trials')).toBe('2')
      expect(dom.text('#metric-tokens')).toBe('48')
      expect(dom.text('#metric-space')).toBe('Discrete')
      expect(dom.text('#metric-outcome')).toBe('Executable')

      const sessions = await api.listSessions()
      expect(sessions).toHaveLength(1)
      const metrics = await api.getMetrics(sessions[0].session_id)
      expect(metrics.trials_to_execution).toBe(2)
    },
    180_000,
  )
})
