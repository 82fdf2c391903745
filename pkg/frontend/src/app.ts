/**
 * Studio front end: a plain-DOM single-page controller over the session API.
 *
 * Screens follow the session lifecycle: session list, new session with a
 * live word count, design review (approve as proposed, edit and approve, or
 * send feedback), codify with progress read from the event log, validation
 * with a pass banner or failure class plus stderr excerpt, and a metrics
 * card once the session is finished. Every screen is rebuilt from a fresh
 * GET, so reloading the page reconstructs the same view; the only state the
 * client holds is the in-progress design edit buffer.
 *
 * One mutation may be in flight per session at a time; further clicks are
 * ignored until it settles. A 409 from the server is not an error here, it
 * means the action is not available in the current phase, so it renders as
 * an explanatory note over a refreshed view.
 */

import { ApiError, StudioApi } from './api'
import type {
  DesignDoc,
  EventDoc,
  ReportDoc,
  SessionSnapshot,
  SessionSummary,
} from './api'
import { countWords } from './words'
import { classifySpaces, validateDesign } from './schema'
import { unifiedDiff } from './diff'

export interface AppOptions {
  /** Event-cursor poll interval while validation is in flight. */
  pollMs?: number;
  /** Receives the canonical location hash after each navigation. */
  onNavigate?: (hash: string) => void;
}

interface EditBuffer {
  sessionId: string;
  designIndex: number;
  observation: DesignDoc;
  action: DesignDoc;
}

function deepCopy<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

export class StudioApp {
  private readonly root: HTMLElement;
  private readonly api: StudioApi;
  private readonly doc: Document;
  private readonly pollMs: number;
  private readonly onNavigate: (hash: string) => void;
  private inflight = false;
  private edit: EditBuffer | null = null;
  private viewToken: object = {};

  constructor(root: HTMLElement, api: StudioApi, options: AppOptions = {}) {
    this.root = root;
    this.api = api;
    this.doc = root.ownerDocument;
    this.pollMs = options.pollMs ?? 1000;
    this.onNavigate = options.onNavigate ?? (() => undefined);
  }

  /** Dispatch on a location hash: #/ list, #/new form, #/s/<id> session. */
  async route(hash: string): Promise<void> {
    const session = /^#\/s\/(.+)$/.exec(hash);
    if (session) {
      await this.showSession(decodeURIComponent(session[1]));
    } else if (hash === '#/new') {
      await this.showNew();
    } else {
      await this.showList();
    }
  }

  // -- screens ---------------------------------------------------------------

  async showList(): Promise<void> {
    const token = this.newView('#/');
    let summaries: SessionSummary[];
    try {
      summaries = await this.api.listSessions();
    } catch (error) {
      this.renderFailureScreen(token, error);
      return;
    }
    const snapshots = await Promise.all(
      summaries.map((summary) =>
        this.api.getSession(summary.session_id).catch(() => null),
      ),
    );
    if (this.viewToken !== token) return;

    const rows = summaries.map((summary, index) => {
      const snapshot = snapshots[index];
      const design = snapshot?.design_history.at(-1);
      const space = design ? classifySpaces(design.observation, design.action) : '-';
      const trials = snapshot ? String(snapshot.trial_counter) : '-';
      const link = this.el('a', {}, [summary.session_id]);
      link.addEventListener('click', () => void this.showSession(summary.session_id));
      return this.el('tr', { class: 'session-row' }, [
        this.el('td', {}, [link]),
        this.el('td', {}, [this.el('span', { class: 'phase-pill' }, [summary.phase])]),
        this.el('td', {}, [space]),
        this.el('td', {}, [trials]),
      ]);
    });

    const newButton = this.el('button', { class: 'primary', id: 'new-session-btn' }, [
      'New session',
    ]);
    newButton.addEventListener('click', () => void this.showNew());
    this.replaceRoot([
      this.el('h1', {}, ['Environment Studio']),
      this.el('div', { class: 'actions' }, [newButton]),
      this.el('table', { id: 'session-list' }, [
        this.el('thead', {}, [
          this.el('tr', {}, [
            this.el('th', {}, ['Session']),
            this.el('th', {}, ['Phase']),
            this.el('th', {}, ['Space kind']),
            this.el('th', {}, ['Trials so far']),
          ]),
        ]),
        this.el('tbody', {}, rows),
      ]),
      summaries.length === 0
        ? this.el('p', { class: 'muted' }, ['No sessions yet.'])
        : this.el('p', { class: 'muted' }, [`${summaries.length} session(s)`]),
    ]);
  }

  async showNew(): Promise<void> {
    this.newView('#/new');
    const description = this.el('textarea', { id: 'new-description' });
    const counter = this.el('span', { id: 'word-count', class: 'muted' }, ['0 words']);
    const create = this.el('button', { class: 'primary', id: 'create-session-btn' }, [
      'Create session',
    ]);
    const errors = this.el('div', { id: 'notice-area' });
    (create as HTMLButtonElement).disabled = true;

    description.addEventListener('input', () => {
      const words = countWords((description as HTMLTextAreaElement).value);
      counter.textContent = `${words} word${words === 1 ? '' : 's'}`;
      (create as HTMLButtonElement).disabled = words === 0;
    });
    create.addEventListener('click', () => {
      void this.runMutation(null, () =>
        this.api.createSession((description as HTMLTextAreaElement).value),
      );
    });

    this.replaceRoot([
      this.crumbs([['Sessions', () => void this.showList()]], 'New session'),
      this.el('h1', {}, ['New session']),
      this.el('p', { class: 'muted' }, [
        'Paste the plain-language environment description. The word count below uses the same whitespace rule as the description_tokens metric.',
      ]),
      description,
      this.el('div', { class: 'actions' }, [create, counter]),
      errors,
    ]);
  }

  async showSession(sessionId: string, notice?: Node): Promise<void> {
    const token = this.newView(`#/s/${encodeURIComponent(sessionId)}`);
    let snapshot: SessionSnapshot;
    try {
      snapshot = await this.api.getSession(sessionId);
    } catch (error) {
      this.renderFailureScreen(token, error);
      return;
    }
    if (this.viewToken !== token) return;
    if (this.edit && this.edit.sessionId !== sessionId) {
      this.edit = null;
    }

    const sections: (Node | string)[] = [
      this.crumbs([['Sessions', () => void this.showList()]], snapshot.session_id),
      this.el('h1', {}, [`Session ${snapshot.session_id}`]),
      this.el('div', {}, [
        this.el('span', { class: 'phase-pill', id: 'phase-label' }, [snapshot.phase_label]),
        this.el('span', { class: 'muted' }, [
          `  trials so far: ${snapshot.trial_counter}`,
        ]),
      ]),
      this.el('div', { id: 'notice-area' }, notice ? [notice] : []),
      this.el('h2', {}, ['Description']),
      this.el('pre', { id: 'session-description' }, [snapshot.description]),
    ];

    sections.push(...this.phasePanel(snapshot));
    if (snapshot.code_versions.length > 0) {
      sections.push(...this.codeView(snapshot));
    }
    if (snapshot.phase === 'Executable' || snapshot.phase === 'Abandoned') {
      sections.push(this.el('h2', {}, ['Metrics']));
      sections.push(await this.metricsCard(sessionId));
      if (this.viewToken !== token) return;
    }
    sections.push(this.el('h2', {}, ['Events']));
    sections.push(this.eventLog(snapshot.events));

    this.replaceRoot(sections);
    if (snapshot.phase === 'Validating') {
      void this.waitOutValidation(sessionId, snapshot.events.length, token);
    }
  }

  // -- per-phase panels ------------------------------------------------------

  private phasePanel(snapshot: SessionSnapshot): (Node | string)[] {
    switch (snapshot.phase) {
      case 'Drafting':
        return this.draftingPanel(snapshot);
      case 'DesignProposed':
        return this.designReviewPanel(snapshot);
      case 'DesignApproved':
        return this.codifyPanel(snapshot, 'Generate environment code');
      case 'CodeGenerated':
        return this.validatePanel(snapshot);
      case 'Validating':
        return [this.note('Validation in flight; watching the event log.')];
      case 'Failed':
        return this.failedPanel(snapshot);
      case 'Executable':
        return [
          this.el('div', { class: 'banner pass', id: 'pass-banner' }, [
            'Executable: validation passed',
          ]),
        ];
      case 'Abandoned':
        return [this.note('Session abandoned; no further actions.')];
      default:
        return [this.note(`Unknown phase ${snapshot.phase}`)];
    }
  }

  private draftingPanel(snapshot: SessionSnapshot): Node[] {
    const propose = this.el('button', { class: 'primary', id: 'propose-btn' }, [
      'Propose design',
    ]);
    propose.addEventListener('click', () => {
      void this.runMutation(snapshot.session_id, () =>
        this.api.proposeDesign(snapshot.session_id),
      );
    });
    return [
      this.el('h2', {}, ['Design']),
      this.el('div', { class: 'actions' }, [propose, this.abandonButton(snapshot)]),
    ];
  }

  private designReviewPanel(snapshot: SessionSnapshot): Node[] {
    const sessionId = snapshot.session_id;
    const proposedIndex = snapshot.design_history.length - 1;
    const proposed = snapshot.design_history[proposedIndex];
    if (
      !this.edit ||
      this.edit.sessionId !== sessionId ||
      this.edit.designIndex !== proposedIndex
    ) {
      this.edit = {
        sessionId,
        designIndex: proposedIndex,
        observation: deepCopy(proposed.observation),
        action: deepCopy(proposed.action),
      };
    }
    const edit = this.edit;

    const approve = this.el('button', { class: 'primary', id: 'approve-btn' }, [
      'Approve as proposed',
    ]);
    const approveEdited = this.el('button', { id: 'approve-edited-btn' }, [
      'Approve with edits',
    ]);
    const violationsBox = this.el('div', { id: 'design-violations' });

    const refreshEditState = () => {
      const violations = [
        ...validateDesign(edit.observation),
        ...validateDesign(edit.action),
      ];
      violationsBox.replaceChildren(
        ...violations.map((violation) =>
          this.el('div', { class: 'violation' }, [
            violation.attribute === null
              ? violation.message
              : `${violation.attribute}: ${violation.message}`,
          ]),
        ),
      );
      const dirty =
        JSON.stringify(edit.observation) !== JSON.stringify(proposed.observation) ||
        JSON.stringify(edit.action) !== JSON.stringify(proposed.action);
      // never submit an invalid document: the button stays disabled
      (approveEdited as HTMLButtonElement).disabled = !dirty || violations.length > 0;
      (approve as HTMLButtonElement).disabled = dirty && violations.length > 0;
    };

    approve.addEventListener('click', () => {
      void this.runMutation(sessionId, () => this.api.approveDesign(sessionId));
    });
    approveEdited.addEventListener('click', () => {
      const violations = [
        ...validateDesign(edit.observation),
        ...validateDesign(edit.action),
      ];
      if (violations.length > 0) return;
      void this.runMutation(sessionId, () =>
        this.api.approveDesign(sessionId, {
          observation: edit.observation,
          action: edit.action,
        }),
      );
    });

    const feedback = this.el('textarea', { id: 'feedback-text' });
    const send = this.el('button', { id: 'send-feedback-btn' }, ['Send feedback']);
    (send as HTMLButtonElement).disabled = true;
    feedback.addEventListener('input', () => {
      (send as HTMLButtonElement).disabled =
        (feedback as HTMLTextAreaElement).value.trim() === '';
    });
    send.addEventListener('click', () => {
      const text = (feedback as HTMLTextAreaElement).value.trim();
      if (text === '') return;
      void this.runMutation(sessionId, () => this.api.sendFeedback(sessionId, text));
    });

    // re-proposal is only legal once feedback is on file
    const feedbackActions: Node[] = [send];
    if (snapshot.revision_feedback) {
      const repropose = this.el('button', { class: 'primary', id: 'propose-btn' }, [
        'Request revised design',
      ]);
      repropose.addEventListener('click', () => {
        void this.runMutation(sessionId, () => this.api.proposeDesign(sessionId));
      });
      feedbackActions.push(repropose);
    }

    const panels = [
      this.el('h2', {}, ['Proposed design']),
      this.el('p', { class: 'muted' }, [
        `Revision ${proposedIndex + 1}, provenance: ${proposed.provenance}`,
      ]),
      this.designEditor('observation', edit.observation, refreshEditState),
      this.designEditor('action', edit.action, refreshEditState),
      violationsBox,
      this.el('div', { class: 'actions' }, [
        approve,
        approveEdited,
        this.abandonButton(snapshot),
      ]),
      this.el('h2', {}, ['Feedback']),
      feedback,
      this.el('div', { class: 'actions' }, feedbackActions),
    ];
    refreshEditState();
    return panels;
  }

  private designEditor(
    label: 'observation' | 'action',
    doc: DesignDoc,
    onChange: () => void,
  ): Node {
    const rows = doc.attributes.map((attr, index) => {
      const name = this.el('input', {
        value: attr.name,
        'data-edit': `${label}-${index}-name`,
      }) as HTMLInputElement;
      name.addEventListener('input', () => {
        attr.name = name.value;
        onChange();
      });
      const description = this.el('input', {
        value: attr.description,
        'data-edit': `${label}-${index}-description`,
      }) as HTMLInputElement;
      description.addEventListener('input', () => {
        attr.description = description.value;
        onChange();
      });
      return this.el('tr', {}, [
        this.el('td', {}, [name]),
        this.el('td', {}, [description]),
        this.el('td', {}, [this.quantEditor(label, index, attr.quantification, onChange)]),
      ]);
    });
    return this.el('div', {}, [
      this.el('h2', {}, [label === 'observation' ? 'Observation space' : 'Action space']),
      this.el('table', { id: `design-${label}` }, [
        this.el('thead', {}, [
          this.el('tr', {}, [
            this.el('th', {}, ['Attribute']),
            this.el('th', {}, ['Description']),
            this.el('th', {}, ['Quantification']),
          ]),
        ]),
        this.el('tbody', {}, rows),
      ]),
    ]);
  }

  private quantEditor(
    label: string,
    index: number,
    quant: DesignDoc['attributes'][number]['quantification'],
    onChange: () => void,
  ): Node {
    if (quant.kind === 'continuous') {
      const numeric = (field: 'lower' | 'upper' | 'dims') => {
        const input = this.el('input', {
          value: String(quant[field]),
          'data-edit': `${label}-${index}-${field}`,
        }) as HTMLInputElement;
        input.addEventListener('input', () => {
          const text = input.value.trim();
          quant[field] = text === '' ? Number.NaN : Number(text);
          onChange();
        });
        return input;
      };
      return this.el('div', { class: 'quant-fields' }, [
        'box [',
        numeric('lower'),
        ',',
        numeric('upper'),
        '] dims',
        numeric('dims'),
      ]);
    }
    const values = this.el('input', {
      value: quant.values.join(', '),
      'data-edit': `${label}-${index}-values`,
    }) as HTMLInputElement;
    values.addEventListener('input', () => {
      quant.values = values.value
        .split(',')
        .map((token) => token.trim())
        .filter((token) => token !== '')
        .map((token) => Number(token));
      onChange();
    });
    return this.el('div', { class: 'quant-fields' }, ['values', values]);
  }

  private codifyPanel(snapshot: SessionSnapshot, buttonLabel: string): Node[] {
    const codify = this.el('button', { class: 'primary', id: 'codify-btn' }, [buttonLabel]);
    codify.addEventListener('click', () => {
      void this.runMutation(snapshot.session_id, () =>
        this.api.codify(snapshot.session_id),
      );
    });
    return [
      this.el('h2', {}, ['Codify']),
      this.el('p', { class: 'muted' }, [
        'Design approved. Generating code asks the model to express it as an environment class; progress lands in the event log below.',
      ]),
      this.el('div', { class: 'actions' }, [codify, this.abandonButton(snapshot)]),
    ];
  }

  private validatePanel(snapshot: SessionSnapshot): Node[] {
    const validate = this.el('button', { class: 'primary', id: 'validate-btn' }, [
      'Run validation',
    ]);
    validate.addEventListener('click', () => {
      void this.runMutation(
        snapshot.session_id,
        () => this.api.validate(snapshot.session_id),
        { pollEventsFrom: snapshot.events.length },
      );
    });
    return [
      this.el('h2', {}, ['Validation']),
      this.el('p', { class: 'muted' }, [
        'Code is ready. Validation executes the candidate against the conformance harness in a sandbox; the event log updates while it runs.',
      ]),
      this.el('div', { class: 'actions' }, [validate, this.abandonButton(snapshot)]),
    ];
  }

  private failedPanel(snapshot: SessionSnapshot): Node[] {
    const report = snapshot.reports.at(-1);
    const nodes: Node[] = [];
    if (report) {
      nodes.push(
        this.el('div', { class: 'banner fail', id: 'fail-banner' }, [
          `Validation failed: ${report.failure_class ?? 'rejected'}`,
        ]),
        ...this.reportPanel(report),
      );
    } else {
      nodes.push(
        this.el('div', { class: 'banner fail', id: 'fail-banner' }, [
          'Codify produced no usable code block',
        ]),
      );
    }
    const retry = this.el('button', { class: 'primary', id: 'codify-btn' }, [
      snapshot.code_versions.length > 0 && snapshot.reports.length > 0
        ? 'Debug and regenerate'
        : 'Regenerate code',
    ]);
    retry.addEventListener('click', () => {
      void this.runMutation(snapshot.session_id, () =>
        this.api.codify(snapshot.session_id),
      );
    });

    const feedback = this.el('textarea', { id: 'feedback-text' });
    const send = this.el('button', { id: 'send-feedback-btn' }, ['Send feedback']);
    (send as HTMLButtonElement).disabled = true;
    feedback.addEventListener('input', () => {
      (send as HTMLButtonElement).disabled =
        (feedback as HTMLTextAreaElement).value.trim() === '';
    });
    send.addEventListener('click', () => {
      const text = (feedback as HTMLTextAreaElement).value.trim();
      if (text === '') return;
      void this.runMutation(snapshot.session_id, () =>
        this.api.sendFeedback(snapshot.session_id, text),
      );
    });

    nodes.push(
      this.el('div', { class: 'actions' }, [retry, this.abandonButton(snapshot)]),
      this.el('h2', {}, ['Feedback']),
      feedback,
      this.el('div', { class: 'actions' }, [send]),
    );
    return nodes;
  }

  // -- shared fragments ------------------------------------------------------

  private codeView(snapshot: SessionSnapshot): Node[] {
    const versions = snapshot.code_versions;
    const select = this.el('select', { id: 'code-version-select' }) as HTMLSelectElement;
    versions.forEach((record, index) => {
      const option = this.el('option', { value: String(index + 1) }, [
        `v${index + 1} (${record.origin})`,
      ]);
      select.appendChild(option);
    });
    select.value = String(versions.length);

    const body = this.el('div', { id: 'code-body' });
    const renderVersion = (version: number) => {
      const record = versions[version - 1];
      const children: Node[] = [
        this.el('pre', { id: 'code-source' }, [record.source]),
      ];
      if (version > 1) {
        const diffText = unifiedDiff(
          versions[version - 2].source,
          record.source,
          `v${version - 1}`,
          `v${version}`,
        );
        children.push(this.el('h2', {}, [`Diff against v${version - 1}`]));
        children.push(this.diffPre(diffText));
      }
      body.replaceChildren(...children);
    };
    select.addEventListener('change', () => renderVersion(Number(select.value)));
    renderVersion(versions.length);

    const nodes: Node[] = [
      this.el('h2', {}, ['Code']),
      this.el('div', { class: 'actions' }, [select]),
      body,
    ];
    const report = snapshot.reports.at(-1);
    if (report) {
      nodes.push(this.el('h2', {}, ['Latest validation report']));
      nodes.push(...this.reportPanel(report));
    }
    return nodes;
  }

  private diffPre(diffText: string): Node {
    const pre = this.el('pre', { id: 'code-diff' });
    if (diffText === '') {
      pre.textContent = '(no changes)';
      return pre;
    }
    for (const line of diffText.split('\n')) {
      const cls = line.startsWith('+') ? 'diff-add' : line.startsWith('-') ? 'diff-del' : '';
      const span = this.el('span', cls ? { class: cls } : {}, [line + '\n']);
      pre.appendChild(span);
    }
    return pre;
  }

  private reportPanel(report: ReportDoc): Node[] {
    const rows: Node[] = report.findings.map((finding) =>
      this.el('div', { class: finding.passed ? 'muted' : 'violation' }, [
        `${finding.passed ? 'ok' : 'FAIL'} ${finding.check}: ${finding.detail}`,
      ]),
    );
    const fields = this.el('div', { class: 'metrics-card', id: 'report-panel' }, [
      this.el('span', { class: 'label' }, ['Verdict']),
      this.el('span', {}, [report.verdict]),
      this.el('span', { class: 'label' }, ['Failure class']),
      this.el('span', {}, [report.failure_class ?? '-']),
      this.el('span', { class: 'label' }, ['Stage']),
      this.el('span', {}, [report.stage]),
    ]);
    const nodes: Node[] = [fields, ...rows];
    if (report.error_type) {
      nodes.push(
        this.el('div', { class: 'violation' }, [
          `${report.error_type}: ${report.error_message ?? ''}`,
        ]),
      );
    }
    if (report.stderr_tail.trim() !== '') {
      nodes.push(this.el('h2', {}, ['stderr excerpt']));
      nodes.push(this.el('pre', { id: 'stderr-excerpt' }, [report.stderr_tail]));
    }
    return nodes;
  }

  private async metricsCard(sessionId: string): Promise<Node> {
    try {
      const metrics = await this.api.getMetrics(sessionId);
      return this.el('div', { class: 'metrics-card', id: 'metrics-card' }, [
        this.el('span', { class: 'label' }, ['Description tokens']),
        this.el('span', { id: 'metric-tokens' }, [String(metrics.description_tokens)]),
        this.el('span', { class: 'label' }, ['Trials to execution']),
        this.el('span', { id: 'metric-trials' }, [
          metrics.trials_to_execution === null
            ? 'unresolved'
            : String(metrics.trials_to_execution),
        ]),
        this.el('span', { class: 'label' }, ['Space kind']),
        this.el('span', { id: 'metric-space' }, [metrics.space_kind ?? '-']),
        this.el('span', { class: 'label' }, ['Outcome']),
        this.el('span', { id: 'metric-outcome' }, [metrics.outcome]),
      ]);
    } catch (error) {
      return this.errorBox(error);
    }
  }

  private eventLog(events: EventDoc[]): Node {
    const log = this.el('div', { id: 'event-log' });
    for (const event of events) {
      log.appendChild(
        this.el('div', { class: 'event-row' }, [
          `#${event.cursor} ${event.kind}: ${event.detail}`,
        ]),
      );
    }
    return log;
  }

  private abandonButton(snapshot: SessionSnapshot): Node {
    const abandon = this.el('button', { id: 'abandon-btn' }, ['Abandon']);
    abandon.addEventListener('click', () => {
      void this.runMutation(snapshot.session_id, () =>
        this.api.abandon(snapshot.session_id),
      );
    });
    return abandon;
  }

  private crumbs(links: [string, () => void][], current: string): Node {
    const parts: (Node | string)[] = [];
    for (const [text, go] of links) {
      const link = this.el('a', {}, [text]);
      link.addEventListener('click', go);
      parts.push(link, ' / ');
    }
    parts.push(current);
    return this.el('div', { class: 'crumbs' }, parts);
  }

  private note(text: string): Node {
    return this.el('div', { class: 'note' }, [text]);
  }

  private errorBox(error: unknown): Node {
    const text =
      error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : `request failed: ${String(error)}`;
    return this.el('div', { class: 'error-box' }, [text]);
  }

  // -- mutation plumbing -----------------------------------------------------

  /**
   * Run one mutation for the session, ignoring clicks while one is pending.
   * On success the session screen is rebuilt from the returned snapshot's id;
   * a 409 turns into an explanatory note over a refreshed view, other API
   * errors render inline after a refresh.
   */
  private async runMutation(
    sessionId: string | null,
    work: () => Promise<SessionSnapshot>,
    options: { pollEventsFrom?: number } = {},
  ): Promise<void> {
    if (this.inflight) return;
    this.inflight = true;
    for (const button of Array.from(this.root.querySelectorAll('button'))) {
      button.disabled = true;
    }
    try {
      let snapshot: SessionSnapshot;
      if (sessionId !== null && options.pollEventsFrom !== undefined) {
        snapshot = await this.withEventPolling(
          sessionId,
          options.pollEventsFrom,
          work(),
        );
      } else {
        snapshot = await work();
      }
      this.edit = null;
      this.inflight = false;
      await this.showSession(snapshot.session_id);
    } catch (error) {
      this.inflight = false;
      if (error instanceof ApiError && error.status === 409 && sessionId !== null) {
        await this.showSession(
          sessionId,
          this.note(`Not available in the current phase: ${error.message}`),
        );
      } else if (error instanceof ApiError && sessionId !== null) {
        await this.showSession(sessionId, this.errorBox(error));
      } else {
        const area = this.doc.getElementById('notice-area');
        if (area) {
          area.replaceChildren(this.errorBox(error));
        }
        for (const button of Array.from(this.root.querySelectorAll('button'))) {
          button.disabled = false;
        }
      }
    }
  }

  /** Poll the event cursor while a slow call runs, appending rows live. */
  private async withEventPolling(
    sessionId: string,
    fromCursor: number,
    work: Promise<SessionSnapshot>,
  ): Promise<SessionSnapshot> {
    let cursor = fromCursor;
    let settled = false;
    const poller = (async () => {
      while (!settled) {
        await sleep(this.pollMs);
        if (settled) break;
        try {
          const page = await this.api.getEvents(sessionId, cursor);
          cursor = page.cursor;
          const log = this.doc.getElementById('event-log');
          if (log) {
            for (const event of page.events) {
              log.appendChild(
                this.el('div', { class: 'event-row' }, [
                  `#${event.cursor} ${event.kind}: ${event.detail}`,
                ]),
              );
            }
          }
        } catch {
          // polling is best effort; the mutation result is authoritative
        }
      }
    })();
    try {
      return await work;
    } finally {
      settled = true;
      await poller;
    }
  }

  /** After a reload that lands on a Validating session, follow the event
   * cursor until the phase moves, then rebuild the screen. */
  private async waitOutValidation(
    sessionId: string,
    fromCursor: number,
    token: object,
  ): Promise<void> {
    let cursor = fromCursor;
    while (this.viewToken === token) {
      await sleep(this.pollMs);
      if (this.viewToken !== token) return;
      try {
        const page = await this.api.getEvents(sessionId, cursor);
        cursor = page.cursor;
        const log = this.doc.getElementById('event-log');
        if (log) {
          for (const event of page.events) {
            log.appendChild(
              this.el('div', { class: 'event-row' }, [
                `#${event.cursor} ${event.kind}: ${event.detail}`,
              ]),
            );
          }
        }
        if (page.phase !== 'Validating') {
          if (this.viewToken === token) {
            await this.showSession(sessionId);
          }
          return;
        }
      } catch {
        return;
      }
    }
  }

  // -- rendering helpers -----------------------------------------------------

  private newView(hash: string): object {
    const token = {};
    this.viewToken = token;
    this.onNavigate(hash);
    return token;
  }

  private renderFailureScreen(token: object, error: unknown): void {
    if (this.viewToken !== token) return;
    this.replaceRoot([
      this.crumbs([['Sessions', () => void this.showList()]], 'error'),
      this.errorBox(error),
    ]);
  }

  private replaceRoot(children: (Node | string)[]): void {
    this.root.replaceChildren(...children);
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    children: (Node | string)[] = [],
  ): HTMLElementTagNameMap[K] {
    const node = this.doc.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
      if (key === 'value' && 'value' in node) {
        (node as unknown as { value: string }).value = value;
      } else {
        node.setAttribute(key, value);
      }
    }
    for (const child of children) {
      node.append(typeof child === 'string' ? this.doc.createTextNode(child) : child);
    }
    return node;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
