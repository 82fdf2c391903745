/**
 * Shared test scaffolding: an isolated happy-dom document and a recording
 * fake for the fetch function, so app behavior is tested without a server.
 */

import { Window } from 'happy-dom'
import type { FetchLike, SessionSnapshot, DesignDoc } from '../src/api'

export interface TestDom {
  window: Window;
  document: Document;
  root: HTMLElement;
  q(selector: string): HTMLElement | null;
  text(selector: string): string;
  click(selector: string): void;
  input(selector: string, value: string): void;
}

export function testDom(): TestDom {
  const window = new Window();
  const document = window.document as unknown as Document;
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById('app') as HTMLElement;
  const q = (selector: string) => root.querySelector(selector) as HTMLElement | null;
  return {
    window,
    document,
    root,
    q,
    text: (selector) => q(selector)?.textContent ?? '',
    click: (selector) => {
      const node = q(selector);
      if (!node) throw new Error(`no element matches ${selector}`);
      node.click();
    },
    input: (selector, value) => {
      const node = q(selector) as HTMLInputElement | null;
      if (!node) throw new Error(`no element matches ${selector}`);
      node.value = value;
      const EventCtor = (window as unknown as { Event: typeof Event }).Event;
      node.dispatchEvent(new EventCtor('input', { bubbles: true }));
    },
  };
}

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

export interface FakeReply {
  status: number;
  body: unknown;
}

/**
 * A fetch double that records every request and answers via the handler.
 * The handler may return a promise to model slow endpoints.
 */
export function fakeFetch(
  handler: (call: RecordedCall) => FakeReply | Promise<FakeReply>,
): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetch: FetchLike = async (input, init) => {
    const call: RecordedCall = {
      method: init?.method ?? 'GET',
      path: input,
      body: typeof init?.body === 'string' ? JSON.parse(init.body) : undefined,
    };
    calls.push(call);
    const reply = await handler(call);
    return new Response(JSON.stringify(reply.body), {
      status: reply.status,
      headers: { 'content-type': 'application/json' },
    });
  };
  return { fetch, calls };
}

export function discreteDoc(kind: 'observation' | 'action'): DesignDoc {
  return {
    schema_version: 1,
    component_kind: kind,
    attributes: [
      {
        name: kind === 'observation' ? 'agent_cell' : 'move',
        description: kind === 'observation' ? 'flattened grid index' : 'compass step',
        quantification: { kind: 'discrete', values: [0, 1, 2, 3] },
      },
    ],
  };
}

export function continuousDoc(kind: 'observation' | 'action'): DesignDoc {
  return {
    schema_version: 1,
    component_kind: kind,
    attributes: [
      {
        name: kind === 'observation' ? 'joint_angle' : 'torque',
        description: kind === 'observation' ? 'radians from rest' : 'applied torque',
        quantification: { kind: 'continuous', lower: -1.0, upper: 1.0, dims: 2 },
      },
    ],
  };
}

export function snapshotOf(partial: Partial<SessionSnapshot>): SessionSnapshot {
  return {
    schema_version: 1,
    session_id: 's1',
    description: 'a tiny key lock world on a grid',
    phase: 'Drafting',
    phase_label: 'Drafting',
    failure_count: 0,
    design_history: [],
    code_versions: [],
    reports: [],
    transcript: null,
    trial_counter: 0,
    design_query_count: 0,
    codify_query_count: 0,
    pending_feedback: null,
    revision_feedback: null,
    events: [],
    created_at: '2026-01-01T00:00:00Z',
    updated_at: '2026-01-01T00:00:00Z',
    ...partial,
  };
}
