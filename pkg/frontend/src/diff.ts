/**
 * Unified line diff for the code view's version comparison.
 *
 * Classic longest-common-subsequence alignment with three lines of context
 * per hunk. Candidate sources are at most a few hundred lines, so the
 * quadratic table is never a concern.
 */

interface DiffOp {
  tag: ' ' | '-' | '+';
  line: string;
}

function splitLines(text: string): string[] {
  const lines = text.split('\n');
  if (lines.length > 0 && lines[lines.length - 1] === '') {
    lines.pop();
  }
  return lines;
}

function alignLines(a: string[], b: string[]): DiffOp[] {
  const n = a.length;
  const m = b.length;
  // lcs[i][j] = length of the longest common subsequence of a[i:] and b[j:]
  const lcs: Uint32Array[] = [];
  for (let i = 0; i <= n; i++) {
    lcs.push(new Uint32Array(m + 1));
  }
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i][j] =
        a[i] === b[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const ops: DiffOp[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      ops.push({ tag: ' ', line: a[i] });
      i += 1;
      j += 1;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ops.push({ tag: '-', line: a[i] });
      i += 1;
    } else {
      ops.push({ tag: '+', line: b[j] });
      j += 1;
    }
  }
  for (; i < n; i += 1) {
    ops.push({ tag: '-', line: a[i] });
  }
  for (; j < m; j += 1) {
    ops.push({ tag: '+', line: b[j] });
  }
  return ops;
}

/**
 * Render a unified diff, or an empty string when the texts are identical.
 */
export function unifiedDiff(
  oldText: string,
  newText: string,
  oldLabel: string,
  newLabel: string,
  context = 3,
): string {
  const ops = alignLines(splitLines(oldText), splitLines(newText));
  const changed = ops
    .map((op, index) => (op.tag === ' ' ? -1 : index))
    .filter((index) => index >= 0);
  if (changed.length === 0) {
    return '';
  }

  // Cluster changed positions whose context windows touch into one hunk each.
  const hunks: [number, number][] = [];
  let start = Math.max(0, changed[0] - context);
  let end = Math.min(ops.length, changed[0] + context + 1);
  for (const position of changed.slice(1)) {
    if (position - context <= end) {
      end = Math.min(ops.length, position + context + 1);
    } else {
      hunks.push([start, end]);
      start = Math.max(0, position - context);
      end = Math.min(ops.length, position + context + 1);
    }
  }
  hunks.push([start, end]);

  const out = [`--- ${oldLabel}`, `+++ ${newLabel}`];
  let oldLine = 1;
  let newLine = 1;
  let cursor = 0;
  for (const [from, to] of hunks) {
    for (; cursor < from; cursor += 1) {
      if (ops[cursor].tag !== '+') oldLine += 1;
      if (ops[cursor].tag !== '-') newLine += 1;
    }
    const slice = ops.slice(from, to);
    const oldCount = slice.filter((op) => op.tag !== '+').length;
    const newCount = slice.filter((op) => op.tag !== '-').length;
    // zero-length ranges anchor to the line before, per unified convention
    const oldStart = oldCount === 0 ? oldLine - 1 : oldLine;
    const newStart = newCount === 0 ? newLine - 1 : newLine;
    out.push(`@@ -${oldStart},${oldCount} +${newStart},${newCount} @@`);
    for (const op of slice) {
      out.push(op.tag + op.line);
    }
    for (; cursor < to; cursor += 1) {
      if (ops[cursor].tag !== '+') oldLine += 1;
      if (ops[cursor].tag !== '-') newLine += 1;
    }
  }
  return out.join('\n');
}
